#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "biasdef/attacksim.hpp"
#include "biasdef/baselines.hpp"
#include "biasdef/defense.hpp"

namespace biasdef {

enum class Method { kNoDef, kMmr, kBrra, kSmart, kBiasDef };

std::string_view to_string(Method m) noexcept;
Method parse_method(std::string_view s);
std::vector<Method> parse_method_list(std::string_view csv);
const std::vector<Method>& all_methods();

struct ExperimentConfig {
  std::size_t dimension = 128;
  std::size_t num_queries = 200;
  int repetitions = 1;
  std::size_t k = 5;
  std::uint64_t seed = 42;
  unsigned threads = 0;  // 0: hardware concurrency
  BenignSceneParams scene;
  AttackConfig attack;  // direction, intensity and seed are set per instance
  std::vector<Direction> directions{Direction::kPositive, Direction::kNegative};
  std::vector<int> intensities{1, 5, 10};
  BiasDefParams defense;
  MmrParams mmr;
  BrraParams brra;      // rng_seed is derived per instance
  SmartParams smart;    // conflict_matrix unused in simulation
  std::vector<Method> methods = all_methods();
  bool record_scans = false;
  std::string output_path = "reports/experiment";
  std::vector<std::string> formats{"json", "csv"};

  void validate() const;
  bool operator==(const ExperimentConfig&) const = default;
};

ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig config_from_json(std::string_view text);
std::string config_to_json(const ExperimentConfig& config);

struct ScanRecord {
  double t_star = 0.0;
  std::vector<double> thresholds;
  std::vector<double> kl_values;
  std::size_t removed = 0;
  std::size_t alpha = 0;
  std::size_t recovered = 0;
  bool no_boundary = false;

  bool operator==(const ScanRecord&) const = default;
};

struct QueryRow {
  std::string query_id;
  int repetition = 0;
  Method method = Method::kNoDef;
  Direction direction = Direction::kPositive;
  int intensity = 0;
  std::size_t adversarial_in_topk = 0;
  std::size_t adherent_in_topk = 0;  // satisfy both properties
  double a_recall_slots = 0.0;
  double a_recall_injected = 0.0;
  std::optional<double> recall;
  double context_ps = 0.0;
  double unattacked_context_ps = 0.0;  // clean top-k, same axis
  double ps_shift = 0.0;
  std::optional<ScanRecord> scan;

  bool operator==(const QueryRow&) const = default;
};

struct UnattackedRow {
  std::string query_id;
  int repetition = 0;
  Method method = Method::kNoDef;
  std::optional<double> recall;
  double mean_abs_ps = 0.0;

  bool operator==(const UnattackedRow&) const = default;
};

struct AggregateRow {
  Method method = Method::kNoDef;
  Direction direction = Direction::kPositive;
  int intensity = 0;
  std::size_t n = 0;
  double a_recall_slots = 0.0;
  double a_recall_slots_std = 0.0;
  double a_recall_injected = 0.0;
  double recall = 0.0;
  std::size_t recall_n = 0;
  double recall_std = 0.0;
  double ps_shift = 0.0;
  double ps_shift_std = 0.0;
  std::size_t adversarial_in_topk = 0;
  std::size_t adherent_in_topk = 0;
  double unattacked_abs_ps = 0.0;
  std::size_t unattacked_n = 0;
  double unattacked_recall = 0.0;
  std::size_t unattacked_recall_n = 0;
  double unattacked_recall_std = 0.0;
  double worst_ratio = 0.0;  // max over intensities of A-Recall / max(Recall, 1e-9)

  bool operator==(const AggregateRow&) const = default;
};

struct EvalReport {
  ExperimentConfig config;
  std::vector<AggregateRow> aggregates;
  std::vector<QueryRow> rows;
  std::vector<UnattackedRow> unattacked;
  std::size_t recall_unavailable = 0;
  double runtime_seconds = 0.0;

  const AggregateRow* find(Method m, Direction d, int intensity) const;
  bool operator==(const EvalReport&) const = default;
};

EvalReport run_experiment(const ExperimentConfig& config);

// Recomputes aggregates from per-query rows (deterministic fold in row order).
std::vector<AggregateRow> aggregate(const ExperimentConfig& config, std::span<const QueryRow> rows,
                                    std::span<const UnattackedRow> unattacked);

struct TheoremGeometry {
  int n_adversarial_max = 10;
  int n_benign = 30;
  double adv_ss_lo = 0.90;
  double adv_ss_hi = 0.95;
  double benign_ss_lo = 0.30;
  double benign_ss_hi = 0.80;
  double benign_ps_lo = -1.0;
  double benign_ps_hi = 1.0;
  double adv_ps_gap = 1.0;
  double adv_ps_spread = 0.1;
  bool violate_property2 = false;
};

struct TheoremPool {
  std::vector<ScoredPassage> pool;
  std::vector<std::string> adversarial_ids;  // sorted
};

struct TheoremResult {
  int trials = 0;
  int successes = 0;
  bool property2_violated = false;
  std::vector<int> failed_trials;

  double rate() const { return trials == 0 ? 0.0 : static_cast<double>(successes) / trials; }
};

TheoremPool theorem_pool(const TheoremGeometry& geometry, std::uint64_t seed, int trial);
TheoremResult verify_theorem1(int trials, const TheoremGeometry& geometry, std::uint64_t seed,
                              const BiasDefParams& params = {});

std::vector<std::string> sweepable_parameters();
std::vector<EvalReport> sweep_parameter(const ExperimentConfig& config, std::string_view name,
                                        std::span<const double> values);
ExperimentConfig with_parameter(ExperimentConfig config, std::string_view name, double value);

// Report serialization. Runtime is left out unless asked for, so reports of
// identical runs are byte-identical.
std::string report_to_json(const EvalReport& report, bool include_runtime = false);
EvalReport report_from_json(std::string_view text);
const std::vector<std::string>& aggregate_csv_columns();
const std::vector<std::string>& row_csv_columns();
std::string aggregates_to_csv(const EvalReport& report);
std::string rows_to_csv(const EvalReport& report);
std::string format_number(double x);

// Writes <stem>.json and/or <stem>.csv plus <stem>_rows.csv; returns paths.
std::vector<std::filesystem::path> emit_report(const EvalReport& report, const std::filesystem::path& stem,
                                               std::span<const std::string> formats,
                                               bool include_runtime = false);

}  // namespace biasdef
