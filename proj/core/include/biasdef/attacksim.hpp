#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "biasdef/corpus.hpp"
#include "biasdef/vecmath.hpp"

namespace biasdef {

enum class Direction { kPositive, kNegative };

std::string_view to_string(Direction d) noexcept;
Direction parse_direction(std::string_view s);

struct AttackConfig {
  Direction direction = Direction::kPositive;
  int j_candidates = 8;
  int n_adversarial = 10;
  int injection_intensity = 10;
  double adherence_ss = 1.0;
  double adherence_ps = 1.0;
  double ss_margin = 0.02;
  double ps_margin = 0.1;  // fraction of the benign PS range
  double jitter = 0.1;
  std::uint64_t rng_seed = 0;

  void validate() const;
  bool operator==(const AttackConfig&) const = default;
};

struct AttackOutcome {
  double seed_ps = 0.0;
  std::vector<std::string> injected_ids;
  PolarizationAxis axis_used;
};

struct BenignSceneParams {
  int n_benign = 30;
  double ps_spread = 0.35;
  double ss_lo = 0.3;
  double ss_hi = 0.7;
  double relevant_fraction = 0.5;

  void validate() const;
  bool operator==(const BenignSceneParams&) const = default;
};

struct InjectionResult {
  Corpus corpus;
  AttackOutcome outcome;
};

// Random unit query embedding.
Query synth_query(std::string id, std::size_t dimension, std::uint64_t rng_seed);

// Unit vector orthogonal to the query: the scene's latent viewpoint axis.
Embedding viewpoint_direction(const Query& query, std::uint64_t rng_seed);

// Benign passages e = s*q + p*u + r*w with s in the ss band, p in
// [-ps_spread, ps_spread] along the viewpoint u, and w a random residual.
Corpus synth_benign_scene(const Query& query, const BenignSceneParams& params, std::uint64_t rng_seed);

// j embeddings alternating sides of the hint axis: even index positive PS,
// odd index negative.
std::vector<Embedding> synth_candidates(const Query& query, const PolarizationAxis& axis_hint, int j,
                                        std::uint64_t rng_seed);

PolarizationAxis fit_attacker_axis(std::span<const Embedding> candidates);

// Extreme-PS candidate; ties go to the first occurrence.
std::size_t select_seed_index(std::span<const Embedding> candidates, const PolarizationAxis& axis,
                              Direction direction);
Embedding select_seed(std::span<const Embedding> candidates, const PolarizationAxis& axis, Direction direction);

// Solves each passage in closed form inside span{q, axis} plus a unit
// residual. Passages adhering to Property 2 inherit the seed's residual
// direction (plus jitter); the rest get an independent residual.
std::vector<Passage> generate_adversarial(const Query& query, EmbeddingView seed, const Corpus& benign,
                                          const PolarizationAxis& axis, const AttackConfig& cfg);

// Appends the first `intensity` adversarial passages.
InjectionResult inject(const Corpus& corpus, std::span<const Passage> adversarial, int intensity,
                       double seed_ps, const PolarizationAxis& axis);

// Post-hoc property checks against a benign reference set.
struct PropertyCheck {
  bool property1 = false;  // ss above every benign passage
  bool property2 = false;  // PS strictly beyond the benign extreme on the attack side
};
PropertyCheck check_properties(const Query& query, EmbeddingView e, const Corpus& benign,
                               const PolarizationAxis& axis, Direction direction);

}  // namespace biasdef
