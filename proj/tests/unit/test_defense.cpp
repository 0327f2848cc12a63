#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "biasdef/defense.hpp"
#include "biasdef/error.hpp"
#include "biasdef/harness.hpp"
#include "biasdef/metrics.hpp"
#include "helpers.hpp"

namespace biasdef {
namespace {

using testing::pid;
using testing::scored;

// Independent re-derivation of the threshold rule: thresholds are
// midpoints between consecutive distinct ss values, histograms share the
// pool's PS range, and a threshold competes with every other interior
// threshold within delta.
struct OracleScan {
  double t_star;
  std::vector<std::string> suspects;
};

double direct_kl(const std::vector<double>& a, const std::vector<double>& b, double lo, double hi, std::size_t m,
                 double eps) {
  std::vector<double> ca(m, 0.0);
  std::vector<double> cb(m, 0.0);
  const double w = (hi - lo) / static_cast<double>(m);
  auto bin = [&](double x) { return std::min<std::size_t>(m - 1, static_cast<std::size_t>((x - lo) / w)); };
  for (double x : a) ca[bin(x)] += 1;
  for (double x : b) cb[bin(x)] += 1;
  const double za = static_cast<double>(a.size()) + static_cast<double>(m) * eps;
  const double zb = static_cast<double>(b.size()) + static_cast<double>(m) * eps;
  double kl = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double p = (ca[i] + eps) / za;
    const double q = (cb[i] + eps) / zb;
    kl += p * std::log(p / q);
  }
  return kl;
}

OracleScan oracle_scan(const std::vector<ScoredPassage>& pool, const BiasDefParams& params) {
  std::vector<double> ss;
  double lo = 1e300;
  double hi = -1e300;
  for (const auto& p : pool) {
    ss.push_back(p.ss);
    lo = std::min(lo, *p.ps);
    hi = std::max(hi, *p.ps);
  }
  lo -= 1e-9;
  hi += 1e-9;
  std::sort(ss.begin(), ss.end(), std::greater<>());
  ss.erase(std::unique(ss.begin(), ss.end()), ss.end());
  std::vector<double> ts;
  std::vector<double> kls;
  for (std::size_t g = 0; g + 1 < ss.size(); ++g) {
    const double t = 0.5 * (ss[g] + ss[g + 1]);
    std::vector<double> in;
    std::vector<double> out;
    for (const auto& p : pool) (p.ss > t ? in : out).push_back(*p.ps);
    ts.push_back(t);
    kls.push_back(direct_kl(in, out, lo, hi, params.bins, params.epsilon));
  }
  std::size_t best = ts.size();
  for (std::size_t i = 0; i < ts.size(); ++i) {
    bool local = true;
    for (std::size_t j = 0; j < ts.size(); ++j) {
      if (j != i && std::abs(ts[j] - ts[i]) <= params.delta && kls[j] > kls[i]) local = false;
    }
    if (local && (best == ts.size() || kls[i] > kls[best])) best = i;
  }
  OracleScan r{ts[best], {}};
  for (const auto& p : pool) {
    if (p.ss > r.t_star) r.suspects.push_back(p.passage_id);
  }
  std::sort(r.suspects.begin(), r.suspects.end());
  return r;
}

TEST(ScanMaxKl, AgreesWithDirectOracleOnRandomPools) {
  Rng rng(44);
  BiasDefParams params;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::pair<double, double>> v;
    const int n = 3 + static_cast<int>(rng.index(30));
    for (int i = 0; i < n; ++i) {
      // coarse ss grid forces tied groups
      v.emplace_back(std::round(rng.uniform(0.2, 0.9) * 40.0) / 40.0, rng.uniform(-1.0, 1.0));
    }
    const auto pool = scored(v);
    std::set<double> distinct;
    for (auto& p : v) distinct.insert(p.first);
    if (distinct.size() < 2) continue;
    const KLScanResult got = scan_max_kl(pool, params);
    const OracleScan want = oracle_scan(pool, params);
    EXPECT_DOUBLE_EQ(got.t_star, want.t_star) << "trial " << trial;
    EXPECT_EQ(got.suspect_set, want.suspects) << "trial " << trial;
  }
}

TEST(ScanMaxKl, ThresholdsDescendWithSentinels) {
  const auto pool = scored({{0.9, 1.0}, {0.8, 0.0}, {0.8, 0.1}, {0.5, -1.0}});
  const KLScanResult r = scan_max_kl(pool, {});
  ASSERT_EQ(r.thresholds.size(), 4u);
  EXPECT_DOUBLE_EQ(r.thresholds[0], 0.9 + 1e-9);
  EXPECT_DOUBLE_EQ(r.thresholds[1], 0.85);
  EXPECT_DOUBLE_EQ(r.thresholds[2], 0.65);
  EXPECT_DOUBLE_EQ(r.thresholds[3], 0.5 - 1e-9);
  EXPECT_EQ(r.kl_values.size(), r.thresholds.size());
  EXPECT_TRUE(std::is_sorted(r.thresholds.rbegin(), r.thresholds.rend()));
  EXPECT_NE(r.t_star_index, 0u);
  EXPECT_NE(r.t_star_index, r.thresholds.size() - 1);
}

TEST(ScanMaxKl, SeparatedClusterIsExactlyTheSuspectSet) {
  std::vector<std::pair<double, double>> v;
  for (int i = 0; i < 4; ++i) v.emplace_back(0.95 - 0.01 * i, 3.0 + 0.01 * i);
  for (int i = 0; i < 16; ++i) v.emplace_back(0.8 - 0.03 * i, -1.0 + 0.125 * i);
  const KLScanResult r = scan_max_kl(scored(v), {});
  EXPECT_EQ(r.suspect_set, (std::vector<std::string>{"p000", "p001", "p002", "p003"}));
  EXPECT_DOUBLE_EQ(r.t_star, 0.5 * (0.92 + 0.8));
}

TEST(ScanMaxKl, SingleDistinctSsIsNoBoundary) {
  try {
    scan_max_kl(scored({{0.5, 0.0}, {0.5, 1.0}, {0.5, 2.0}}), {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNoBoundary);
  }
}

TEST(ScanMaxKl, MissingPsIsUsageError) {
  auto pool = scored({{0.9, 0.0}, {0.8, 1.0}, {0.7, 2.0}});
  pool[1].ps.reset();
  EXPECT_THROW(scan_max_kl(pool, {}), Error);
}

TEST(ScanMaxKl, TheoremPoolsPeakAtTheAdversarialBoundary) {
  TheoremGeometry g;
  BiasDefParams params;
  for (int trial = 0; trial < 50; ++trial) {
    const TheoremPool tp = theorem_pool(g, 9, trial);
    const OracleScan want = oracle_scan(tp.pool, params);
    EXPECT_EQ(want.suspects, tp.adversarial_ids) << "trial " << trial;
    EXPECT_EQ(scan_max_kl(tp.pool, params).suspect_set, tp.adversarial_ids) << "trial " << trial;
  }
}

// Adversarial cluster at PS ~3 with one benign passage interleaved in ss.
std::vector<ScoredPassage> interleaved_pool() {
  std::vector<std::pair<double, double>> v{{0.95, 3.0}, {0.945, 0.05}, {0.94, 3.02}, {0.93, 3.04}};
  for (int i = 0; i < 16; ++i) v.emplace_back(0.8 - 0.03 * i, -1.0 + 0.125 * i);
  return scored(v);
}

TEST(MitigateFalsePositives, PrunesTheInterleavedBenignPassage) {
  const auto pool = interleaved_pool();
  KLScanResult scan;
  scan.suspect_set = {"p000", "p001", "p002", "p003"};
  EXPECT_EQ(mitigate_false_positives(scan, pool, {}), std::vector<std::string>{"p001"});
}

TEST(MitigateFalsePositives, SingletonSuspectSetUnchanged) {
  KLScanResult scan;
  scan.suspect_set = {"p000"};
  EXPECT_TRUE(mitigate_false_positives(scan, scored({{0.9, 1.0}, {0.5, 0.0}, {0.4, 0.1}}), {}).empty());
}

TEST(MitigateFalsePositives, NeverEmptiesTheSuspectSet) {
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::pair<double, double>> v;
    for (int i = 0; i < 20; ++i) v.emplace_back(rng.uniform(0.2, 0.9), rng.uniform(-1, 1));
    const auto pool = scored(v);
    const KLScanResult scan = scan_max_kl(pool, {});
    const auto alpha = mitigate_false_positives(scan, pool, {});
    EXPECT_LT(alpha.size(), std::max<std::size_t>(scan.suspect_set.size(), 1));
    EXPECT_TRUE(std::includes(scan.suspect_set.begin(), scan.suspect_set.end(), alpha.begin(), alpha.end()));
  }
}

TEST(RecoverFalseNegatives, NearbyPassageRecoveredFarOneNot) {
  Rng rng(3);
  Corpus c;
  std::vector<std::string> suspects;
  std::vector<ScoredPassage> pool;
  for (int i = 0; i < 8; ++i) {
    Embedding e{5.0 + 0.1 * rng.normal(), 5.0 + 0.1 * rng.normal(), 5.0 + 0.1 * rng.normal()};
    c.add({pid(i), e, Provenance::kAdversarial, std::nullopt, std::nullopt});
    suspects.push_back(pid(i));
    pool.push_back({pid(i), 0.9, 0.0});
  }
  c.add({"near", {5.02, 4.98, 5.01}, Provenance::kAdversarial, std::nullopt, std::nullopt});
  c.add({"far", {0.0, 0.1, -0.2}, Provenance::kBenign, std::nullopt, std::nullopt});
  pool.push_back({"near", 0.5, 0.0});
  pool.push_back({"far", 0.4, 0.0});
  std::sort(suspects.begin(), suspects.end());
  EXPECT_EQ(recover_false_negatives(suspects, pool, c, {}), std::vector<std::string>{"near"});
}

TEST(RecoverFalseNegatives, FewerThanTwoSuspectsRecoversNothing) {
  Corpus c = testing::corpus_of({{1, 0}, {0, 1}});
  const std::vector<std::string> one{"p000"};
  EXPECT_TRUE(recover_false_negatives(one, scored({{0.9, 0}, {0.8, 0}}), c, {}).empty());
}

TEST(RecoverFalseNegatives, MatchesDirectMahalanobisThreshold) {
  Rng rng(12);
  std::vector<Embedding> pts;
  for (int i = 0; i < 30; ++i) pts.push_back(rng.gaussian_vector(4));
  const Corpus c = testing::corpus_of(pts);
  std::vector<std::string> suspects;
  std::vector<Embedding> sp;
  for (int i = 0; i < 10; ++i) {
    suspects.push_back(pid(i));
    sp.push_back(pts[i]);
  }
  std::vector<ScoredPassage> pool;
  for (int i = 0; i < 30; ++i) pool.push_back({pid(i), 0.5, 0.0});
  BiasDefParams params;
  params.mahalanobis_threshold = 2.0;
  const MeanCovariance mc = mean_and_covariance(sp);
  const Matrix inv = regularized_inverse(mc.cov, default_ridge(mc.cov, params.ridge));
  std::vector<std::string> want;
  for (int i = 10; i < 30; ++i) {
    if (mahalanobis_distance(pts[i], mc.mean, inv) < 2.0) want.push_back(pid(i));
  }
  EXPECT_EQ(recover_false_negatives(suspects, pool, c, params), want);
}

RankedList pool_from(const Corpus& c, const Query& q, std::size_t k) { return candidate_pool(c, q, k); }

TEST(BiasDefFilter, RemovesSeparatedCluster) {
  Corpus c;
  Rng rng(5);
  for (int i = 0; i < 16; ++i) {
    c.add({"b" + std::to_string(i + 10), {1.0, rng.uniform(-0.5, 0.5), 0.8 + 0.1 * rng.normal()},
           Provenance::kBenign, std::nullopt, std::nullopt});
  }
  for (int i = 0; i < 4; ++i) {
    c.add({"a" + std::to_string(i), {1.0, 0.3 + 0.01 * i, 0.0}, Provenance::kAdversarial, std::nullopt, std::nullopt});
  }
  const Query q{"q", {1, 0, 0}, std::nullopt};
  const DefenseOutcome o = biasdef_filter(pool_from(c, q, 5), c, {});
  EXPECT_FALSE(o.no_boundary);
  for (const auto& s : o.final_topk.items) EXPECT_EQ(c.at(s.passage_id).provenance, Provenance::kBenign);
  EXPECT_EQ(o.final_topk.items.size(), 5u);
  for (const auto& id : {"a0", "a1", "a2", "a3"}) {
    EXPECT_TRUE(std::binary_search(o.removed_ids.begin(), o.removed_ids.end(), std::string(id)));
  }
}

TEST(BiasDefFilter, TinyPoolFallsBack) {
  const Corpus c = testing::corpus_of({{1, 0}, {0.9, 0.1}});
  const DefenseOutcome o = biasdef_filter(pool_from(c, {"q", {1, 0}, std::nullopt}, 5), c, {});
  EXPECT_TRUE(o.no_boundary);
  EXPECT_FALSE(o.note.empty());
  EXPECT_EQ(o.final_topk.items.size(), 2u);
}

TEST(BiasDefFilter, IdenticalEmbeddingsFallBack) {
  const Corpus c = testing::corpus_of({{1, 1}, {1, 1}, {1, 1}, {1, 1}});
  BiasDefParams p;
  p.k = 2;
  const DefenseOutcome o = biasdef_filter(pool_from(c, {"q", {1, 0}, std::nullopt}, 2), c, p);
  EXPECT_TRUE(o.no_boundary);
  EXPECT_EQ(o.final_topk.ids(), (std::vector<std::string>{"p000", "p001"}));
}

TEST(BiasDefFilter, EqualSsFallsBack) {
  // all passages equally similar to the query, different PS
  const Corpus c = testing::corpus_of({{1, 1, 0}, {1, -1, 0}, {1, 0, 1}, {1, 0, -1}});
  BiasDefParams p;
  p.k = 2;
  const DefenseOutcome o = biasdef_filter(pool_from(c, {"q", {1, 0, 0}, std::nullopt}, 2), c, p);
  EXPECT_TRUE(o.no_boundary);
  EXPECT_EQ(o.final_topk.items.size(), 2u);
}

TEST(BiasDefFilter, RemovedIsSuspectsMinusAlphaPlusRecovered) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto pts = testing::random_points(40, 6, s);
    const Corpus c = testing::corpus_of(pts);
    const Query q{"q", testing::random_points(1, 6, 100 + s)[0], std::nullopt};
    const DefenseOutcome o = biasdef_filter(pool_from(c, q, 5), c, {});
    if (o.no_boundary) continue;
    std::set<std::string> want;
    for (const auto& id : o.scan.suspect_set) {
      if (!std::binary_search(o.alpha_ids.begin(), o.alpha_ids.end(), id)) want.insert(id);
    }
    want.insert(o.recovered_ids.begin(), o.recovered_ids.end());
    EXPECT_EQ(std::vector<std::string>(want.begin(), want.end()), o.removed_ids);
    for (const auto& item : o.final_topk.items) EXPECT_FALSE(want.contains(item.passage_id));
    EXPECT_LE(o.final_topk.items.size(), 5u);
  }
}

TEST(BiasDefParams, Validation) {
  BiasDefParams p;
  p.bins = 1;
  EXPECT_THROW(p.validate(), Error);
  p = {};
  p.epsilon = 0.0;
  EXPECT_THROW(p.validate(), Error);
  p = {};
  p.k = 0;
  EXPECT_THROW(p.validate(), Error);
}

}  // namespace
}  // namespace biasdef
