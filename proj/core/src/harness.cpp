#include "biasdef/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <map>
#include <thread>

#include "biasdef/error.hpp"
#include "biasdef/metrics.hpp"
#include "biasdef/random.hpp"

namespace biasdef {

namespace {

constexpr double kRecallFloor = 1e-9;

struct UnitResult {
  std::vector<QueryRow> rows;
  std::vector<UnattackedRow> unattacked;
};

std::string query_name(std::size_t i) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "q%04zu", i);
  return buf;
}

std::vector<Embedding> embeddings_of(const RankedList& list, const Corpus& corpus) {
  std::vector<Embedding> out;
  out.reserve(list.items.size());
  for (const ScoredPassage& s : list.items) out.push_back(corpus.at(s.passage_id).embedding);
  return out;
}

struct MethodOutput {
  RankedList topk;
  std::optional<ScanRecord> scan;
};

MethodOutput run_method(Method m, const ExperimentConfig& cfg, const Query& query, const Corpus& corpus,
                        const RankedList& pool, std::uint64_t brra_seed) {
  switch (m) {
    case Method::kNoDef:
      return {no_defense(pool, cfg.k), std::nullopt};
    case Method::kMmr:
      return {mmr_select(pool, corpus, cfg.k, cfg.mmr).list, std::nullopt};
    case Method::kBrra: {
      BrraParams p = cfg.brra;
      p.rng_seed = brra_seed;
      return {brra_select(corpus, query, cfg.k, p), std::nullopt};
    }
    case Method::kSmart: {
      SmartParams p = cfg.smart;
      p.conflict_matrix.reset();
      return {smart_select(pool, corpus, cfg.k, p).list, std::nullopt};
    }
    case Method::kBiasDef: {
      BiasDefParams p = cfg.defense;
      p.k = cfg.k;
      DefenseOutcome o = biasdef_filter(pool, corpus, p);
      std::optional<ScanRecord> rec;
      if (cfg.record_scans) {
        rec = ScanRecord{o.scan.t_star,        o.scan.thresholds,      o.scan.kl_values, o.removed_ids.size(),
                         o.alpha_ids.size(),   o.recovered_ids.size(), o.no_boundary};
      }
      return {std::move(o.final_topk), std::move(rec)};
    }
  }
  fail(ErrorKind::kUsage, "unknown method");
}

std::optional<double> try_recall(const RankedList& topk, const Corpus& corpus, std::size_t k) {
  try {
    return recall_at_k(topk, corpus, k);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kMetricUnavailable) return std::nullopt;
    throw;
  }
}

UnitResult run_unit(const ExperimentConfig& cfg, std::size_t qi, int rep) {
  UnitResult out;
  const Query query = synth_query(query_name(qi), cfg.dimension, derive_seed(cfg.seed, {tag("query"), qi}));
  const std::uint64_t scene_seed =
      derive_seed(cfg.seed, {tag("scene"), qi, static_cast<std::uint64_t>(rep)});
  const Corpus benign = synth_benign_scene(query, cfg.scene, scene_seed);
  const PolarizationAxis hint{Embedding(cfg.dimension, 0.0), viewpoint_direction(query, scene_seed)};
  const std::vector<Embedding> candidates =
      synth_candidates(query, hint, cfg.attack.j_candidates, derive_seed(scene_seed, {tag("candidates")}));
  const PolarizationAxis attacker_axis = fit_attacker_axis(candidates);
  const std::uint64_t brra_seed = derive_seed(scene_seed, {tag("brra")});

  const RankedList pool0 = candidate_pool(benign, query, cfg.k);
  const auto pool0_embeddings = embeddings_of(pool0, benign);
  const PolarizationAxis axis0 = principal_axis(pool0_embeddings);
  const RankedList clean_ctx = no_defense(pool0, cfg.k);
  for (Method m : cfg.methods) {
    RankedList ctx = run_method(m, cfg, query, benign, pool0, brra_seed).topk;
    double abs_ps = 0.0;
    for (const ScoredPassage& s : ctx.items) abs_ps += std::abs(polarization_score(axis0, benign.at(s.passage_id).embedding));
    if (!ctx.items.empty()) abs_ps /= static_cast<double>(ctx.items.size());
    out.unattacked.push_back({query.id, rep, m, try_recall(ctx, benign, cfg.k), abs_ps});
  }

  for (Direction dir : cfg.directions) {
    const std::size_t seed_idx = select_seed_index(candidates, attacker_axis, dir);
    const double seed_ps = polarization_score(attacker_axis, candidates[seed_idx]);
    AttackConfig acfg = cfg.attack;
    acfg.direction = dir;
    acfg.injection_intensity = 0;
    acfg.rng_seed = derive_seed(scene_seed, {tag("adversarial"), static_cast<std::uint64_t>(dir)});
    const std::vector<Passage> adversarial =
        generate_adversarial(query, candidates[seed_idx], benign, attacker_axis, acfg);
    std::map<std::string, bool, std::less<>> adherent;
    for (const Passage& p : adversarial) {
      const PropertyCheck c = check_properties(query, p.embedding, benign, attacker_axis, dir);
      adherent[p.id] = c.property1 && c.property2;
    }

    for (int intensity : cfg.intensities) {
      const InjectionResult inj = inject(benign, adversarial, intensity, seed_ps, attacker_axis);
      const RankedList pool = candidate_pool(inj.corpus, query, cfg.k);
      const PolarizationAxis defender_axis = principal_axis(embeddings_of(pool, inj.corpus));
      for (const Method m : cfg.methods) {
        MethodOutput mo = run_method(m, cfg, query, inj.corpus, pool, brra_seed);
        QueryRow row;
        row.query_id = query.id;
        row.repetition = rep;
        row.method = m;
        row.direction = dir;
        row.intensity = intensity;
        const ARecall ar = a_recall_at_k(mo.topk, inj.corpus, cfg.k, static_cast<std::size_t>(intensity));
        row.adversarial_in_topk = ar.adversarial_count;
        for (const ScoredPassage& s : mo.topk.items) {
          if (auto it = adherent.find(s.passage_id); it != adherent.end() && it->second) ++row.adherent_in_topk;
        }
        row.a_recall_slots = ar.slots;
        row.a_recall_injected = ar.injected;
        row.recall = try_recall(mo.topk, inj.corpus, cfg.k);
        row.context_ps = context_mean_ps(mo.topk, inj.corpus, defender_axis);
        row.unattacked_context_ps = context_mean_ps(clean_ctx, benign, defender_axis);
        row.ps_shift = std::abs(row.context_ps - row.unattacked_context_ps);
        row.scan = std::move(mo.scan);
        out.rows.push_back(std::move(row));
      }
    }
  }
  return out;
}

double sample_std(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

std::string_view to_string(Method m) noexcept {
  switch (m) {
    case Method::kNoDef: return "nodef";
    case Method::kMmr: return "mmr";
    case Method::kBrra: return "brra";
    case Method::kSmart: return "smart";
    case Method::kBiasDef: return "biasdef";
  }
  return "unknown";
}

Method parse_method(std::string_view s) {
  for (Method m : all_methods()) {
    if (s == to_string(m)) return m;
  }
  fail(ErrorKind::kUsage, "unknown method \"" + std::string(s) + "\" (expected nodef, mmr, brra, smart, biasdef)");
}

std::vector<Method> parse_method_list(std::string_view csv) {
  std::vector<Method> out;
  std::size_t pos = 0;
  while (pos <= csv.size()) {
    std::size_t end = csv.find(',', pos);
    if (end == std::string_view::npos) end = csv.size();
    std::string_view item = csv.substr(pos, end - pos);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    if (!item.empty()) {
      const Method m = parse_method(item);
      if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
    }
    pos = end + 1;
  }
  if (out.empty()) fail(ErrorKind::kUsage, "empty method list");
  return out;
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> methods{Method::kNoDef, Method::kMmr, Method::kBrra, Method::kSmart,
                                           Method::kBiasDef};
  return methods;
}

const AggregateRow* EvalReport::find(Method m, Direction d, int intensity) const {
  for (const AggregateRow& a : aggregates) {
    if (a.method == m && a.direction == d && a.intensity == intensity) return &a;
  }
  return nullptr;
}

std::vector<AggregateRow> aggregate(const ExperimentConfig& config, std::span<const QueryRow> rows,
                                    std::span<const UnattackedRow> unattacked) {
  std::vector<AggregateRow> out;
  for (Method m : config.methods) {
    std::vector<double> u_abs;
    std::vector<double> u_recall;
    for (const UnattackedRow& u : unattacked) {
      if (u.method != m) continue;
      u_abs.push_back(u.mean_abs_ps);
      if (u.recall) u_recall.push_back(*u.recall);
    }
    for (Direction d : config.directions) {
      const std::size_t first = out.size();
      for (int intensity : config.intensities) {
        std::vector<double> slots;
        std::vector<double> injected;
        std::vector<double> recall;
        std::vector<double> shift;
        AggregateRow a;
        a.method = m;
        a.direction = d;
        a.intensity = intensity;
        for (const QueryRow& r : rows) {
          if (r.method != m || r.direction != d || r.intensity != intensity) continue;
          slots.push_back(r.a_recall_slots);
          injected.push_back(r.a_recall_injected);
          if (r.recall) recall.push_back(*r.recall);
          shift.push_back(r.ps_shift);
          a.adversarial_in_topk += r.adversarial_in_topk;
          a.adherent_in_topk += r.adherent_in_topk;
        }
        a.n = slots.size();
        a.a_recall_slots = mean_of(slots);
        a.a_recall_slots_std = sample_std(slots, a.a_recall_slots);
        a.a_recall_injected = mean_of(injected);
        a.recall = mean_of(recall);
        a.recall_n = recall.size();
        a.recall_std = sample_std(recall, a.recall);
        a.ps_shift = mean_of(shift);
        a.ps_shift_std = sample_std(shift, a.ps_shift);
        a.unattacked_abs_ps = mean_of(u_abs);
        a.unattacked_n = u_abs.size();
        a.unattacked_recall = mean_of(u_recall);
        a.unattacked_recall_n = u_recall.size();
        a.unattacked_recall_std = sample_std(u_recall, a.unattacked_recall);
        out.push_back(a);
      }
      double worst = 0.0;
      for (std::size_t i = first; i < out.size(); ++i) {
        worst = std::max(worst, out[i].a_recall_slots / std::max(out[i].recall, kRecallFloor));
      }
      for (std::size_t i = first; i < out.size(); ++i) out[i].worst_ratio = worst;
    }
  }
  return out;
}

EvalReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const std::size_t units = config.num_queries * static_cast<std::size_t>(config.repetitions);
  std::vector<UnitResult> results(units);
  std::vector<std::exception_ptr> errors(units);

  unsigned threads = config.threads != 0 ? config.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, units));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t u = next++; u < units; u = next++) {
      const std::size_t qi = u / static_cast<std::size_t>(config.repetitions);
      const int rep = static_cast<int>(u % static_cast<std::size_t>(config.repetitions));
      try {
        results[u] = run_unit(config, qi, rep);
      } catch (const Error& e) {
        errors[u] = std::make_exception_ptr(
            Error(e.kind(), "query " + query_name(qi) + " repetition " + std::to_string(rep) + ": " + e.what()));
      } catch (...) {
        errors[u] = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  EvalReport report;
  report.config = config;
  for (UnitResult& r : results) {
    for (QueryRow& row : r.rows) report.rows.push_back(std::move(row));
    for (UnattackedRow& row : r.unattacked) report.unattacked.push_back(std::move(row));
  }
  for (const QueryRow& r : report.rows) {
    if (!r.recall) ++report.recall_unavailable;
  }
  for (const UnattackedRow& r : report.unattacked) {
    if (!r.recall) ++report.recall_unavailable;
  }
  report.aggregates = aggregate(config, report.rows, report.unattacked);
  report.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

std::vector<std::string> sweepable_parameters() {
  return {"k",
          "defense.bins",
          "defense.epsilon",
          "defense.delta",
          "defense.mahalanobis_threshold",
          "defense.ridge",
          "mmr.lambda",
          "brra.noise_intensity",
          "brra.num_variants",
          "smart.relevance_weight",
          "smart.similarity_weight",
          "smart.conflict_weight",
          "attack.adherence",
          "attack.adherence_ss",
          "attack.adherence_ps",
          "attack.ss_margin",
          "attack.ps_margin",
          "attack.jitter",
          "scene.ps_spread",
          "scene.benign_per_query"};
}

ExperimentConfig with_parameter(ExperimentConfig c, std::string_view name, double v) {
  auto as_count = [&](const char* what) {
    if (v < 0.0 || v != std::floor(v)) fail(ErrorKind::kUsage, std::string(what) + " needs a non-negative integer");
    return static_cast<std::size_t>(v);
  };
  if (name == "k") {
    c.k = as_count("k");
    c.defense.k = c.k;
  } else if (name == "defense.bins" || name == "m") {
    c.defense.bins = as_count("defense.bins");
    c.record_scans = true;
  } else if (name == "defense.epsilon") {
    c.defense.epsilon = v;
  } else if (name == "defense.delta") {
    c.defense.delta = v;
  } else if (name == "defense.mahalanobis_threshold" || name == "T") {
    c.defense.mahalanobis_threshold = v;
  } else if (name == "defense.ridge") {
    c.defense.ridge = v;
  } else if (name == "mmr.lambda") {
    c.mmr.lambda = v;
  } else if (name == "brra.noise_intensity") {
    c.brra.noise_intensity = v;
  } else if (name == "brra.num_variants") {
    c.brra.num_variants = static_cast<int>(as_count("brra.num_variants"));
  } else if (name == "smart.relevance_weight") {
    c.smart.relevance_weight = v;
  } else if (name == "smart.similarity_weight") {
    c.smart.similarity_weight = v;
  } else if (name == "smart.conflict_weight") {
    c.smart.conflict_weight = v;
  } else if (name == "attack.adherence") {
    c.attack.adherence_ss = v;
    c.attack.adherence_ps = v;
  } else if (name == "attack.adherence_ss") {
    c.attack.adherence_ss = v;
  } else if (name == "attack.adherence_ps") {
    c.attack.adherence_ps = v;
  } else if (name == "attack.ss_margin") {
    c.attack.ss_margin = v;
  } else if (name == "attack.ps_margin") {
    c.attack.ps_margin = v;
  } else if (name == "attack.jitter") {
    c.attack.jitter = v;
  } else if (name == "scene.ps_spread") {
    c.scene.ps_spread = v;
  } else if (name == "scene.benign_per_query") {
    c.scene.n_benign = static_cast<int>(as_count("scene.benign_per_query"));
  } else {
    fail(ErrorKind::kUsage, "unknown sweep parameter \"" + std::string(name) + "\"");
  }
  return c;
}

std::vector<EvalReport> sweep_parameter(const ExperimentConfig& config, std::string_view name,
                                        std::span<const double> values) {
  if (values.empty()) fail(ErrorKind::kUsage, "sweep needs at least one value");
  std::vector<ExperimentConfig> configs;
  for (double v : values) {
    ExperimentConfig c = with_parameter(config, name, v);
    try {
      c.validate();
    } catch (const Error& e) {
      fail(ErrorKind::kUsage, "sweep value " + format_number(v) + " for " + std::string(name) + ": " + e.what());
    }
    configs.push_back(std::move(c));
  }
  std::vector<EvalReport> out;
  for (const ExperimentConfig& c : configs) out.push_back(run_experiment(c));
  return out;
}

}  // namespace biasdef
