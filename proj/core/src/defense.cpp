#include "biasdef/defense.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "biasdef/error.hpp"
#include "biasdef/metrics.hpp"

namespace biasdef {

namespace {

constexpr double kSentinelOffset = 1e-9;

struct PoolRange {
  double lo = 0.0;
  double hi = 0.0;
};

PoolRange pool_range(std::span<const ScoredPassage> pool) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const ScoredPassage& s : pool) {
    if (!s.ps) fail(ErrorKind::kUsage, "pool item " + s.passage_id + " has no PS");
    if (!std::isfinite(*s.ps)) fail(ErrorKind::kUsage, "pool item " + s.passage_id + " has non-finite PS");
    lo = std::min(lo, *s.ps);
    hi = std::max(hi, *s.ps);
  }
  return {lo - 1e-9, hi + 1e-9};
}

double split_kl(const std::vector<double>& inside, const std::vector<double>& outside, const PoolRange& r,
                const BiasDefParams& params) {
  return kl_divergence(build_histogram(inside, r.lo, r.hi, params.bins, params.epsilon),
                       build_histogram(outside, r.lo, r.hi, params.bins, params.epsilon));
}

std::vector<std::string> sorted_ids(std::vector<std::string> ids) {
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace

void BiasDefParams::validate() const {
  if (bins < 2) fail(ErrorKind::kUsage, "defense.bins must be >= 2");
  if (!(epsilon > 0.0)) fail(ErrorKind::kUsage, "defense.epsilon must be positive");
  if (!(delta > 0.0)) fail(ErrorKind::kUsage, "defense.delta must be positive");
  if (!(mahalanobis_threshold >= 0.0)) fail(ErrorKind::kUsage, "defense.mahalanobis_threshold must be >= 0");
  if (!(ridge > 0.0)) fail(ErrorKind::kUsage, "defense.ridge must be positive");
  if (k == 0) fail(ErrorKind::kUsage, "k must be positive");
}

KLScanResult scan_max_kl(std::span<const ScoredPassage> pool, const BiasDefParams& params) {
  params.validate();
  if (pool.size() < 3) fail(ErrorKind::kUsage, "scan_max_kl needs at least 3 pool passages");
  const PoolRange range = pool_range(pool);

  std::vector<std::size_t> order(pool.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ranks_before(pool[a], pool[b]); });

  // Groups of equal ss in descending order; S after step i holds groups [0, i).
  std::vector<std::size_t> group_end;
  std::vector<double> group_ss;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const double ss = pool[order[i]].ss;
    if (group_ss.empty() || ss != group_ss.back()) {
      if (!group_ss.empty()) group_end.push_back(i);
      group_ss.push_back(ss);
    }
  }
  group_end.push_back(order.size());
  const std::size_t u = group_ss.size();
  if (u < 2) fail(ErrorKind::kNoBoundary, "fewer than 2 distinct similarity scores in the pool");

  KLScanResult r;
  r.thresholds.push_back(group_ss.front() + kSentinelOffset);
  for (std::size_t g = 0; g + 1 < u; ++g) r.thresholds.push_back(0.5 * (group_ss[g] + group_ss[g + 1]));
  r.thresholds.push_back(group_ss.back() - kSentinelOffset);

  std::vector<double> inside;
  std::vector<double> outside;
  for (std::size_t step = 0; step <= u; ++step) {
    const std::size_t cut = step == 0 ? 0 : group_end[step - 1];
    inside.clear();
    outside.clear();
    for (std::size_t i = 0; i < order.size(); ++i) (i < cut ? inside : outside).push_back(*pool[order[i]].ps);
    r.kl_values.push_back(split_kl(inside, outside, range, params));
  }

  // Interior steps 1..u-1 leave both sides nonempty.
  double best = -std::numeric_limits<double>::infinity();
  std::size_t best_step = 0;
  for (std::size_t i = 1; i < u; ++i) {
    bool local = true;
    for (std::size_t j = 1; j < u && local; ++j) {
      if (j == i) continue;
      if (std::abs(r.thresholds[j] - r.thresholds[i]) <= params.delta && r.kl_values[j] > r.kl_values[i]) {
        local = false;
      }
    }
    if (local && r.kl_values[i] > best) {
      best = r.kl_values[i];
      best_step = i;
    }
  }
  if (best_step == 0) fail(ErrorKind::kNoBoundary, "no interior local maximum of the KL curve");

  r.t_star_index = best_step;
  r.t_star = r.thresholds[best_step];
  for (std::size_t i = 0; i < group_end[best_step - 1]; ++i) r.suspect_set.push_back(pool[order[i]].passage_id);
  r.suspect_set = sorted_ids(std::move(r.suspect_set));
  return r;
}

std::vector<std::string> mitigate_false_positives(const KLScanResult& scan, std::span<const ScoredPassage> pool,
                                                  const BiasDefParams& params) {
  params.validate();
  std::vector<std::string> alpha;
  if (scan.suspect_set.size() <= 1) return alpha;
  const PoolRange range = pool_range(pool);
  const std::set<std::string, std::less<>> suspect(scan.suspect_set.begin(), scan.suspect_set.end());

  std::vector<const ScoredPassage*> in;
  std::vector<double> outside;
  double sum_in = 0.0;
  double sum_out = 0.0;
  for (const ScoredPassage& s : pool) {
    if (suspect.contains(s.passage_id)) {
      in.push_back(&s);
      sum_in += *s.ps;
    } else {
      outside.push_back(*s.ps);
      sum_out += *s.ps;
    }
  }
  if (in.size() != suspect.size()) fail(ErrorKind::kUsage, "suspect set is not contained in the pool");
  const double mean_in = sum_in / static_cast<double>(in.size());
  const double mean_out = outside.empty() ? mean_in : sum_out / static_cast<double>(outside.size());
  const bool lowest_first = mean_in > mean_out;
  std::sort(in.begin(), in.end(), [&](const ScoredPassage* a, const ScoredPassage* b) {
    if (*a->ps != *b->ps) return lowest_first ? *a->ps < *b->ps : *a->ps > *b->ps;
    return a->passage_id < b->passage_id;
  });

  auto kl_without = [&](std::size_t removed) {
    std::vector<double> inside;
    for (std::size_t i = removed; i < in.size(); ++i) inside.push_back(*in[i]->ps);
    std::vector<double> rest = outside;
    for (std::size_t i = 0; i < removed; ++i) rest.push_back(*in[i]->ps);
    return split_kl(inside, rest, range, params);
  };

  double running = kl_without(0);
  for (std::size_t moved = 0; in.size() - moved > 1; ++moved) {
    const double kl = kl_without(moved + 1);
    if (kl < running) break;
    running = kl;
    alpha.push_back(in[moved]->passage_id);
  }
  return sorted_ids(std::move(alpha));
}

std::vector<std::string> recover_false_negatives(std::span<const std::string> suspects,
                                                 std::span<const ScoredPassage> pool, const Corpus& corpus,
                                                 const BiasDefParams& params) {
  params.validate();
  std::vector<std::string> recovered;
  if (suspects.size() < 2) return recovered;
  std::vector<Embedding> points;
  points.reserve(suspects.size());
  for (const std::string& id : suspects) points.push_back(corpus.at(id).embedding);
  const MeanCovariance mc = mean_and_covariance(points);
  Matrix inverse;
  try {
    inverse = regularized_inverse(mc.cov, default_ridge(mc.cov, params.ridge));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kDomain) fail(ErrorKind::kNumeric, std::string("Mahalanobis fit: ") + e.what());
    throw;
  }
  const std::set<std::string, std::less<>> suspect(suspects.begin(), suspects.end());
  for (const ScoredPassage& s : pool) {
    if (suspect.contains(s.passage_id)) continue;
    const double d = mahalanobis_distance(corpus.at(s.passage_id).embedding, mc.mean, inverse);
    if (d < params.mahalanobis_threshold) recovered.push_back(s.passage_id);
  }
  return sorted_ids(std::move(recovered));
}

DefenseOutcome biasdef_filter(const RankedList& pool, const Corpus& corpus, const BiasDefParams& params) {
  params.validate();
  DefenseOutcome out;
  out.final_topk.query_id = pool.query_id;

  auto fallback = [&](std::string note) {
    out.no_boundary = true;
    out.note = std::move(note);
    out.final_topk = prefix(pool, params.k);
    for (ScoredPassage& s : out.final_topk.items) {
      if (!out.axis.direction.empty()) s.ps = polarization_score(out.axis, corpus.at(s.passage_id).embedding);
    }
    return out;
  };

  if (pool.items.size() < 3) return fallback("pool has fewer than 3 passages");
  std::vector<Embedding> embeddings;
  embeddings.reserve(pool.items.size());
  for (const ScoredPassage& s : pool.items) embeddings.push_back(corpus.at(s.passage_id).embedding);
  try {
    out.axis = principal_axis(embeddings);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kDegenerate) throw;
    return fallback("pool embeddings are identical");
  }

  std::vector<ScoredPassage> annotated = pool.items;
  for (std::size_t i = 0; i < annotated.size(); ++i) annotated[i].ps = polarization_score(out.axis, embeddings[i]);

  try {
    out.scan = scan_max_kl(annotated, params);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kNoBoundary) throw;
    return fallback(e.what());
  }
  out.alpha_ids = mitigate_false_positives(out.scan, annotated, params);

  std::vector<std::string> suspects;
  std::set_difference(out.scan.suspect_set.begin(), out.scan.suspect_set.end(), out.alpha_ids.begin(),
                      out.alpha_ids.end(), std::back_inserter(suspects));
  out.recovered_ids = recover_false_negatives(suspects, annotated, corpus, params);
  std::set_union(suspects.begin(), suspects.end(), out.recovered_ids.begin(), out.recovered_ids.end(),
                 std::back_inserter(out.removed_ids));

  const std::set<std::string, std::less<>> removed(out.removed_ids.begin(), out.removed_ids.end());
  for (const ScoredPassage& s : annotated) {
    if (out.final_topk.items.size() == params.k) break;
    if (!removed.contains(s.passage_id)) out.final_topk.items.push_back(s);
  }
  return out;
}

}  // namespace biasdef
