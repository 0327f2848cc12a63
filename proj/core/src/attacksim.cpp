#include "biasdef/attacksim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "biasdef/error.hpp"
#include "biasdef/metrics.hpp"
#include "biasdef/random.hpp"

namespace biasdef {

namespace {

constexpr int kMaxAttempts = 10000;
constexpr double kCandidateSsLo = 0.4;
constexpr double kCandidateSsHi = 0.6;
constexpr double kCandidatePsLo = 0.45;
constexpr double kCandidatePsHi = 0.75;
constexpr double kMinResidualSq = 0.01;
// Keeps adherent targets strictly past the margin despite rounding.
constexpr double kStrictPad = 1e-3;

std::string numbered(std::string_view prefix, std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%03zu", i);
  return std::string(prefix) + buf;
}

// Orthonormal frame {q, axis component orthogonal to q}.
struct Frame {
  Embedding e1;
  Embedding e2;
  double dq = 0.0;     // direction . e1
  double dperp = 0.0;  // |direction - dq e1|
};

Frame make_frame(const Query& query, const Embedding& direction) {
  if (direction.size() != query.embedding.size()) {
    fail(ErrorKind::kUsage, "axis and query dimensions differ");
  }
  Frame f;
  f.e1 = normalized(query.embedding);
  f.dq = dot(direction, f.e1);
  f.e2 = direction;
  for (std::size_t j = 0; j < f.e2.size(); ++j) f.e2[j] -= f.dq * f.e1[j];
  f.dperp = norm(f.e2);
  if (f.dperp < 1e-9) {
    fail(ErrorKind::kGeneration, "polarization axis is parallel to the query; PS and SS cannot be set independently");
  }
  for (double& x : f.e2) x /= f.dperp;
  return f;
}

// Removes the frame components from v; returns its norm afterwards.
double project_out(Embedding& v, const Frame& f) {
  const double a = dot(v, f.e1);
  const double b = dot(v, f.e2);
  for (std::size_t j = 0; j < v.size(); ++j) v[j] -= a * f.e1[j] + b * f.e2[j];
  return norm(v);
}

Embedding random_residual(Rng& rng, const Frame& f) {
  for (;;) {
    Embedding g = rng.gaussian_vector(f.e1.size());
    const double n = project_out(g, f);
    if (n > 1e-9) {
      for (double& x : g) x /= n;
      return g;
    }
  }
}

Embedding compose(const Frame& f, double x, double y, double r, const Embedding& w) {
  Embedding e(f.e1.size());
  for (std::size_t j = 0; j < e.size(); ++j) e[j] = x * f.e1[j] + y * f.e2[j] + r * w[j];
  return e;
}

std::size_t adherent_count(double fraction, int n) {
  const double c = std::ceil(fraction * static_cast<double>(n) - 1e-9);
  return static_cast<std::size_t>(std::clamp(c, 0.0, static_cast<double>(n)));
}

}  // namespace

std::string_view to_string(Direction d) noexcept {
  return d == Direction::kPositive ? "positive" : "negative";
}

Direction parse_direction(std::string_view s) {
  if (s == "positive" || s == "pos" || s == "+") return Direction::kPositive;
  if (s == "negative" || s == "neg" || s == "-") return Direction::kNegative;
  fail(ErrorKind::kUsage, "unknown direction \"" + std::string(s) + "\"");
}

void AttackConfig::validate() const {
  if (j_candidates < 2) fail(ErrorKind::kUsage, "attack.j_candidates must be >= 2");
  if (n_adversarial < 1) fail(ErrorKind::kUsage, "attack.n_adversarial must be >= 1");
  if (injection_intensity < 0 || injection_intensity > n_adversarial) {
    fail(ErrorKind::kUsage, "attack.injection_intensity must lie in [0, n_adversarial]");
  }
  if (adherence_ss < 0.0 || adherence_ss > 1.0 || adherence_ps < 0.0 || adherence_ps > 1.0) {
    fail(ErrorKind::kUsage, "attack adherence fractions must lie in [0, 1]");
  }
  if (!(ss_margin > 0.0) || !(ps_margin > 0.0)) fail(ErrorKind::kUsage, "attack margins must be positive");
  if (!(jitter >= 0.0)) fail(ErrorKind::kUsage, "attack.jitter must be >= 0");
}

void BenignSceneParams::validate() const {
  if (n_benign < 2) fail(ErrorKind::kUsage, "scene.benign_per_query must be >= 2");
  if (!(0.0 < ss_lo && ss_lo < ss_hi && ss_hi < 1.0)) {
    fail(ErrorKind::kUsage, "scene.ss_band must satisfy 0 < lo < hi < 1");
  }
  if (!(ps_spread >= 0.0)) fail(ErrorKind::kUsage, "scene.ps_spread must be >= 0");
  if (relevant_fraction < 0.0 || relevant_fraction > 1.0) {
    fail(ErrorKind::kUsage, "scene.relevant_fraction must lie in [0, 1]");
  }
}

Query synth_query(std::string id, std::size_t dimension, std::uint64_t rng_seed) {
  if (dimension < 2) fail(ErrorKind::kUsage, "dimension must be >= 2");
  Rng rng(rng_seed);
  return {std::move(id), rng.unit_vector(dimension), std::nullopt};
}

Embedding viewpoint_direction(const Query& query, std::uint64_t rng_seed) {
  const Embedding q = normalized(query.embedding);
  Rng rng(rng_seed);
  for (;;) {
    Embedding g = rng.gaussian_vector(q.size());
    const double a = dot(g, q);
    for (std::size_t j = 0; j < g.size(); ++j) g[j] -= a * q[j];
    const double n = norm(g);
    if (n > 1e-9) {
      for (double& x : g) x /= n;
      return g;
    }
  }
}

Corpus synth_benign_scene(const Query& query, const BenignSceneParams& params, std::uint64_t rng_seed) {
  params.validate();
  const Embedding u = viewpoint_direction(query, rng_seed);
  const Frame frame = make_frame(query, u);
  Rng rng(derive_seed(rng_seed, {tag("benign")}));

  const std::size_t n = static_cast<std::size_t>(params.n_benign);
  std::vector<Passage> passages;
  passages.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    int attempt = 0;
    double s = 0.0;
    double p = 0.0;
    double r2 = -1.0;
    for (; attempt < kMaxAttempts; ++attempt) {
      s = rng.uniform(params.ss_lo, params.ss_hi);
      p = rng.uniform(-params.ps_spread, params.ps_spread);
      r2 = 1.0 - s * s - p * p;
      if (r2 >= kMinResidualSq) break;
    }
    if (attempt == kMaxAttempts) {
      fail(ErrorKind::kGeneration, "benign scene infeasible: ss band and ps_spread leave no unit-norm room");
    }
    Passage pass;
    pass.id = numbered(query.id + ":b", i);
    pass.embedding = compose(frame, s, p, std::sqrt(r2), random_residual(rng, frame));
    pass.provenance = Provenance::kBenign;
    passages.push_back(std::move(pass));
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);
  const auto n_relevant = static_cast<std::size_t>(std::llround(params.relevant_fraction * static_cast<double>(n)));
  for (std::size_t r = 0; r < n; ++r) passages[order[r]].relevant = r < n_relevant;
  return Corpus(std::move(passages));
}

std::vector<Embedding> synth_candidates(const Query& query, const PolarizationAxis& axis_hint, int j,
                                        std::uint64_t rng_seed) {
  if (j < 2) fail(ErrorKind::kUsage, "synth_candidates needs j >= 2");
  const Frame frame = make_frame(query, axis_hint.direction);
  Rng rng(rng_seed);
  std::vector<Embedding> out;
  out.reserve(static_cast<std::size_t>(j));
  for (int i = 0; i < j; ++i) {
    const double sign = (i % 2 == 0) ? 1.0 : -1.0;
    int attempt = 0;
    double x = 0.0;
    double y = 0.0;
    double r2 = -1.0;
    for (; attempt < kMaxAttempts; ++attempt) {
      x = rng.uniform(kCandidateSsLo, kCandidateSsHi);
      const double p = sign * rng.uniform(kCandidatePsLo, kCandidatePsHi);
      y = (p - x * frame.dq) / frame.dperp;
      r2 = 1.0 - x * x - y * y;
      if (r2 >= kMinResidualSq) break;
    }
    if (attempt == kMaxAttempts) fail(ErrorKind::kGeneration, "cannot place candidate viewpoints on the hint axis");
    out.push_back(compose(frame, x, y, std::sqrt(r2), random_residual(rng, frame)));
  }
  return out;
}

PolarizationAxis fit_attacker_axis(std::span<const Embedding> candidates) { return principal_axis(candidates); }

std::size_t select_seed_index(std::span<const Embedding> candidates, const PolarizationAxis& axis,
                              Direction direction) {
  if (candidates.empty()) fail(ErrorKind::kUsage, "select_seed: no candidates");
  std::size_t best = 0;
  double best_ps = polarization_score(axis, candidates[0]);
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const double ps = polarization_score(axis, candidates[i]);
    if (direction == Direction::kPositive ? ps > best_ps : ps < best_ps) {
      best = i;
      best_ps = ps;
    }
  }
  return best;
}

Embedding select_seed(std::span<const Embedding> candidates, const PolarizationAxis& axis, Direction direction) {
  return candidates[select_seed_index(candidates, axis, direction)];
}

std::vector<Passage> generate_adversarial(const Query& query, EmbeddingView seed, const Corpus& benign,
                                          const PolarizationAxis& axis, const AttackConfig& cfg) {
  cfg.validate();
  if (benign.empty()) fail(ErrorKind::kUsage, "generate_adversarial: empty benign corpus");
  const Frame frame = make_frame(query, axis.direction);

  double max_ss = -2.0;
  double min_ss = 2.0;
  double ps_lo = std::numeric_limits<double>::infinity();
  double ps_hi = -ps_lo;
  for (const Passage& b : benign.passages()) {
    const double ss = cosine_similarity(query.embedding, b.embedding);
    const double ps = polarization_score(axis, b.embedding);
    max_ss = std::max(max_ss, ss);
    min_ss = std::min(min_ss, ss);
    ps_lo = std::min(ps_lo, ps);
    ps_hi = std::max(ps_hi, ps);
  }
  if (max_ss + cfg.ss_margin * (1.0 + kStrictPad) >= 1.0) {
    fail(ErrorKind::kGeneration, "Property 1 unsatisfiable: benign max ss " + std::to_string(max_ss) +
                                     " + ss_margin reaches 1");
  }
  const double range = ps_hi - ps_lo;
  const double ps_margin = range > 0.0 ? cfg.ps_margin * range : cfg.ps_margin;
  const double sign = cfg.direction == Direction::kPositive ? 1.0 : -1.0;
  const double extreme = cfg.direction == Direction::kPositive ? ps_hi : ps_lo;

  Embedding seed_residual(seed.begin(), seed.end());
  if (seed_residual.size() != frame.e1.size()) fail(ErrorKind::kUsage, "seed dimension mismatch");
  Rng rng(cfg.rng_seed);
  if (const double n = project_out(seed_residual, frame); n > 1e-9) {
    for (double& x : seed_residual) x /= n;
  } else {
    seed_residual = random_residual(rng, frame);
  }

  const auto n = static_cast<std::size_t>(cfg.n_adversarial);
  const std::size_t n_ss = adherent_count(cfg.adherence_ss, cfg.n_adversarial);
  const std::size_t n_ps = adherent_count(cfg.adherence_ps, cfg.n_adversarial);
  std::vector<std::size_t> rank(n);
  std::iota(rank.begin(), rank.end(), std::size_t{0});
  rng.shuffle(rank);

  const std::string prefix = query.id + ":adv-" + std::string(to_string(cfg.direction)) + "-";
  std::vector<Passage> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool p1 = rank[i] < n_ss;
    const bool p2 = rank[i] < n_ps;
    int attempt = 0;
    double x = 0.0;
    double y = 0.0;
    double r2 = -1.0;
    for (; attempt < kMaxAttempts; ++attempt) {
      x = p1 ? max_ss + cfg.ss_margin * (1.0 + kStrictPad + cfg.jitter * rng.uniform())
             : rng.uniform(min_ss, max_ss);
      const double p = p2 ? extreme + sign * ps_margin * (1.0 + kStrictPad + cfg.jitter * rng.uniform())
                          : rng.uniform(ps_lo, ps_hi);
      y = (p - x * frame.dq) / frame.dperp;
      r2 = 1.0 - x * x - y * y;
      if (r2 >= 0.0) break;
    }
    if (attempt == kMaxAttempts) {
      fail(ErrorKind::kGeneration, std::string("cannot realize ") + (p1 ? "Property 1 " : "") +
                                       (p2 ? "Property 2 " : "") +
                                       "targets on the unit sphere (ss margin or PS margin too large)");
    }
    Embedding w;
    if (p2) {
      Embedding g = rng.gaussian_vector(frame.e1.size());
      const double gn = norm(g);
      w = seed_residual;
      for (std::size_t j = 0; j < w.size(); ++j) w[j] += cfg.jitter * g[j] / gn;
      const double wn = project_out(w, frame);
      if (wn > 1e-12) {
        for (double& v : w) v /= wn;
      } else {
        w = random_residual(rng, frame);
      }
    } else {
      w = random_residual(rng, frame);
    }
    Passage pass;
    pass.id = numbered(prefix, i);
    pass.embedding = compose(frame, x, y, std::sqrt(r2), w);
    pass.provenance = Provenance::kAdversarial;
    pass.relevant = false;
    out.push_back(std::move(pass));
  }
  return out;
}

InjectionResult inject(const Corpus& corpus, std::span<const Passage> adversarial, int intensity,
                       double seed_ps, const PolarizationAxis& axis) {
  if (intensity < 0 || static_cast<std::size_t>(intensity) > adversarial.size()) {
    fail(ErrorKind::kUsage, "inject: intensity " + std::to_string(intensity) + " exceeds " +
                                std::to_string(adversarial.size()) + " adversarial passages");
  }
  InjectionResult r{corpus, {seed_ps, {}, axis}};
  for (int i = 0; i < intensity; ++i) {
    r.corpus.add(adversarial[static_cast<std::size_t>(i)]);
    r.outcome.injected_ids.push_back(adversarial[static_cast<std::size_t>(i)].id);
  }
  return r;
}

PropertyCheck check_properties(const Query& query, EmbeddingView e, const Corpus& benign,
                               const PolarizationAxis& axis, Direction direction) {
  const double ss = cosine_similarity(query.embedding, e);
  const double ps = polarization_score(axis, e);
  PropertyCheck c{true, true};
  for (const Passage& b : benign.passages()) {
    if (b.provenance == Provenance::kAdversarial) continue;
    if (!(ss > cosine_similarity(query.embedding, b.embedding))) c.property1 = false;
    const double bps = polarization_score(axis, b.embedding);
    if (direction == Direction::kPositive ? !(ps > bps) : !(ps < bps)) c.property2 = false;
  }
  return c;
}

}  // namespace biasdef
