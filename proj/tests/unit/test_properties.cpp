#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "biasdef/attacksim.hpp"
#include "biasdef/baselines.hpp"
#include "biasdef/defense.hpp"
#include "biasdef/harness.hpp"
#include "biasdef/metrics.hpp"
#include "helpers.hpp"

namespace biasdef {
namespace {

using testing::corpus_of;
using testing::random_points;

constexpr int kCases = 60;

TEST(Property, CosineSymmetricBoundedScaleInvariant) {
  Rng rng(1);
  for (int i = 0; i < kCases; ++i) {
    const auto a = rng.gaussian_vector(9);
    const auto b = rng.gaussian_vector(9);
    const double c = cosine_similarity(a, b);
    EXPECT_DOUBLE_EQ(c, cosine_similarity(b, a));
    EXPECT_LE(std::abs(c), 1.0 + 1e-15);
    auto scaled = a;
    for (double& x : scaled) x *= 3.7;
    EXPECT_NEAR(cosine_similarity(scaled, b), c, 1e-14);
  }
}

TEST(Property, PrincipalAxisTranslationInvariant) {
  Rng rng(2);
  for (int i = 0; i < 20; ++i) {
    auto pts = random_points(15, 5, 50 + i);
    const PolarizationAxis a = principal_axis(pts);
    const auto shift = rng.gaussian_vector(5);
    for (auto& p : pts) {
      for (std::size_t j = 0; j < 5; ++j) p[j] += 10.0 * shift[j];
    }
    const PolarizationAxis b = principal_axis(pts);
    EXPECT_GT(std::abs(dot(a.direction, b.direction)), 1.0 - 1e-8);
  }
}

TEST(Property, HistogramsNormalizedAndKlNonNegative) {
  Rng rng(3);
  for (int i = 0; i < kCases; ++i) {
    std::vector<double> a;
    std::vector<double> b;
    const std::size_t na = rng.index(15);
    const std::size_t nb = 1 + rng.index(15);
    for (std::size_t j = 0; j < na; ++j) a.push_back(rng.normal());
    for (std::size_t j = 0; j < nb; ++j) b.push_back(rng.normal());
    const std::size_t m = 2 + rng.index(30);
    const auto [p, q] = ps_histograms(a, b, m, 1e-6);
    double sp = 0.0;
    double sq = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      EXPECT_GT(p.probabilities[j], 0.0);
      sp += p.probabilities[j];
      sq += q.probabilities[j];
    }
    EXPECT_NEAR(sp, 1.0, 1e-12);
    EXPECT_NEAR(sq, 1.0, 1e-12);
    EXPECT_GE(kl_divergence(p, q), -1e-15);
  }
}

TEST(Property, RetrievalSortedAndPrefixStable) {
  for (int i = 0; i < 20; ++i) {
    const Corpus c = corpus_of(random_points(50, 6, 70 + i));
    const Query q{"q", random_points(1, 6, 900 + i)[0], std::nullopt};
    const RankedList big = retrieve_top(c, q, 30);
    for (std::size_t j = 1; j < big.items.size(); ++j) EXPECT_TRUE(ranks_before(big.items[j - 1], big.items[j]));
    EXPECT_EQ(retrieve_top(c, q, 7), prefix(big, 7));
  }
}

void expect_subset_of_pool(const RankedList& out, const RankedList& pool, std::size_t k) {
  std::set<std::string> in_pool;
  for (const auto& s : pool.items) in_pool.insert(s.passage_id);
  std::set<std::string> seen;
  for (const auto& s : out.items) {
    EXPECT_TRUE(in_pool.contains(s.passage_id));
    EXPECT_TRUE(seen.insert(s.passage_id).second);
  }
  EXPECT_EQ(out.items.size(), std::min(k, pool.items.size()));
}

TEST(Property, SanitizersReturnDistinctPoolMembers) {
  for (int i = 0; i < 30; ++i) {
    const Corpus c = corpus_of(random_points(45, 10, 300 + i));
    const Query q{"q", random_points(1, 10, 800 + i)[0], std::nullopt};
    const std::size_t k = 1 + static_cast<std::size_t>(i % 7);
    const RankedList pool = candidate_pool(c, q, k);
    expect_subset_of_pool(no_defense(pool, k), pool, k);
    expect_subset_of_pool(mmr_select(pool, c, k, {0.5}).list, pool, k);
    expect_subset_of_pool(smart_select(pool, c, k, {}).list, pool, k);
    const RankedList b = brra_select(c, q, k, {1.0, 8, static_cast<std::uint64_t>(i)});
    EXPECT_EQ(b.items.size(), k);
    BiasDefParams params;
    params.k = k;
    const DefenseOutcome o = biasdef_filter(pool, c, params);
    std::set<std::string> removed(o.removed_ids.begin(), o.removed_ids.end());
    EXPECT_LE(o.final_topk.items.size(), k);
    for (const auto& s : o.final_topk.items) EXPECT_FALSE(removed.contains(s.passage_id));
    EXPECT_EQ(o, biasdef_filter(pool, c, params));
  }
}

TEST(Property, BiasDefSurvivorsKeepPoolOrder) {
  for (int i = 0; i < 20; ++i) {
    const Corpus c = corpus_of(random_points(40, 8, 600 + i));
    const Query q{"q", random_points(1, 8, 700 + i)[0], std::nullopt};
    const RankedList pool = candidate_pool(c, q, 5);
    const DefenseOutcome o = biasdef_filter(pool, c, {});
    std::set<std::string> removed(o.removed_ids.begin(), o.removed_ids.end());
    std::vector<std::string> want;
    for (const auto& s : pool.items) {
      if (!removed.contains(s.passage_id) && want.size() < 5) want.push_back(s.passage_id);
    }
    EXPECT_EQ(o.final_topk.ids(), want);
  }
}

TEST(Property, OppositeDirectionsShiftContextOppositeWays) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Query q = synth_query("q", 48, s);
    const Corpus benign = synth_benign_scene(q, {}, 1000 + s);
    const PolarizationAxis hint{Embedding(48, 0.0), viewpoint_direction(q, 1000 + s)};
    const auto cands = synth_candidates(q, hint, 8, 2000 + s);
    const PolarizationAxis axis = fit_attacker_axis(cands);
    const double base = context_mean_ps(retrieve_top(benign, q, 5), benign, axis);
    double shifts[2];
    for (Direction d : {Direction::kPositive, Direction::kNegative}) {
      AttackConfig a;
      a.direction = d;
      a.rng_seed = s;
      const auto adv = generate_adversarial(q, select_seed(cands, axis, d), benign, axis, a);
      const InjectionResult inj = inject(benign, adv, 5, 0.0, axis);
      shifts[static_cast<int>(d)] = context_mean_ps(retrieve_top(inj.corpus, q, 5), inj.corpus, axis) - base;
    }
    EXPECT_GT(shifts[0], 0.0);
    EXPECT_LT(shifts[1], 0.0);
  }
}

TEST(Property, NonAdherentPassagesInsideBenignSsBand) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Query q = synth_query("q", 48, s);
    const Corpus benign = synth_benign_scene(q, {}, 50 + s);
    const PolarizationAxis hint{Embedding(48, 0.0), viewpoint_direction(q, 50 + s)};
    const auto cands = synth_candidates(q, hint, 8, 70 + s);
    const PolarizationAxis axis = fit_attacker_axis(cands);
    double lo = 2.0;
    double hi = -2.0;
    for (const Passage& b : benign.passages()) {
      lo = std::min(lo, cosine_similarity(q.embedding, b.embedding));
      hi = std::max(hi, cosine_similarity(q.embedding, b.embedding));
    }
    AttackConfig a;
    a.adherence_ss = 0.0;
    a.rng_seed = s;
    for (const Passage& p : generate_adversarial(q, cands[0], benign, axis, a)) {
      const double ss = cosine_similarity(q.embedding, p.embedding);
      EXPECT_GE(ss, lo - 1e-9);
      EXPECT_LE(ss, hi + 1e-9);
    }
  }
}

TEST(Property, ReportMetricsInRange) {
  ExperimentConfig c;
  c.dimension = 24;
  c.num_queries = 5;
  c.attack.adherence_ss = 0.6;
  c.attack.adherence_ps = 0.6;
  const EvalReport r = run_experiment(c);
  for (const QueryRow& row : r.rows) {
    EXPECT_GE(row.a_recall_slots, 0.0);
    EXPECT_LE(row.a_recall_slots, 1.0);
    EXPECT_LE(row.a_recall_injected, 1.0);
    EXPECT_GE(row.ps_shift, 0.0);
    EXPECT_LE(row.adherent_in_topk, row.adversarial_in_topk);
    if (row.recall) {
      EXPECT_GE(*row.recall, 0.0);
      EXPECT_LE(*row.recall, 1.0);
    }
  }
}

}  // namespace
}  // namespace biasdef
