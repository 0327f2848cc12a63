#include <algorithm>
#include <cstdio>

#include "biasdef/error.hpp"
#include "biasdef/harness.hpp"
#include "biasdef/random.hpp"

namespace biasdef {

namespace {

std::string pool_id(const char* prefix, int i) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%s-%02d", prefix, i);
  return buf;
}

}  // namespace

TheoremPool theorem_pool(const TheoremGeometry& g, std::uint64_t seed, int trial) {
  if (g.n_adversarial_max < 1 || g.n_benign < 1) fail(ErrorKind::kUsage, "theorem geometry needs passages on both sides");
  if (!(g.adv_ss_lo > g.benign_ss_hi) || !(g.adv_ss_hi >= g.adv_ss_lo) || !(g.benign_ss_hi >= g.benign_ss_lo)) {
    fail(ErrorKind::kUsage, "theorem geometry must place every adversarial ss above every benign ss");
  }
  if (!(g.adv_ps_gap > 0.0) || !(g.adv_ps_spread >= 0.0) || !(g.benign_ps_hi >= g.benign_ps_lo)) {
    fail(ErrorKind::kUsage, "theorem geometry must separate adversarial PS from benign PS");
  }
  Rng rng(derive_seed(seed, {tag("theorem"), static_cast<std::uint64_t>(trial)}));
  const int n_adv = 1 + static_cast<int>(rng.index(static_cast<std::size_t>(g.n_adversarial_max)));
  const bool positive = rng.uniform() < 0.5;

  TheoremPool out;
  for (int i = 0; i < n_adv; ++i) {
    ScoredPassage s;
    s.passage_id = pool_id("adv", i);
    s.ss = rng.uniform(g.adv_ss_lo, g.adv_ss_hi);
    const double offset = g.adv_ps_gap + rng.uniform(0.0, g.adv_ps_spread);
    s.ps = positive ? g.benign_ps_hi + offset : g.benign_ps_lo - offset;
    if (g.violate_property2 && i == 0) s.ps = rng.uniform(g.benign_ps_lo, g.benign_ps_hi);
    out.adversarial_ids.push_back(s.passage_id);
    out.pool.push_back(std::move(s));
  }
  for (int i = 0; i < g.n_benign; ++i) {
    ScoredPassage s;
    s.passage_id = pool_id("ben", i);
    s.ss = rng.uniform(g.benign_ss_lo, g.benign_ss_hi);
    s.ps = rng.uniform(g.benign_ps_lo, g.benign_ps_hi);
    out.pool.push_back(std::move(s));
  }
  std::sort(out.pool.begin(), out.pool.end(), ranks_before);
  std::sort(out.adversarial_ids.begin(), out.adversarial_ids.end());
  return out;
}

TheoremResult verify_theorem1(int trials, const TheoremGeometry& geometry, std::uint64_t seed,
                              const BiasDefParams& params) {
  if (trials < 1) fail(ErrorKind::kUsage, "theorem check needs at least 1 trial");
  TheoremResult r;
  r.trials = trials;
  r.property2_violated = geometry.violate_property2;
  for (int t = 0; t < trials; ++t) {
    const TheoremPool p = theorem_pool(geometry, seed, t);
    bool ok = false;
    try {
      ok = scan_max_kl(p.pool, params).suspect_set == p.adversarial_ids;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kNoBoundary) throw;
    }
    if (ok) {
      ++r.successes;
    } else {
      r.failed_trials.push_back(t);
    }
  }
  return r;
}

}  // namespace biasdef
