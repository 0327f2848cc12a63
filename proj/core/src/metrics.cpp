#include "biasdef/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "biasdef/error.hpp"

namespace biasdef {

namespace {
constexpr double kEdgePad = 1e-9;
}

double polarization_score(const PolarizationAxis& axis, EmbeddingView e) {
  if (axis.direction.size() != e.size()) {
    fail(ErrorKind::kUsage, "polarization_score: dimension mismatch");
  }
  return dot(axis.direction, e);
}

PsShiftReport ps_shift(EmbeddingView attacked, EmbeddingView unattacked, const PolarizationAxis& axis) {
  PsShiftReport r;
  r.attacked_ps = polarization_score(axis, attacked);
  r.unattacked_ps = polarization_score(axis, unattacked);
  r.shift = std::abs(r.attacked_ps - r.unattacked_ps);
  return r;
}

std::size_t bin_index(double x, double lo, double hi, std::size_t m) {
  const double width = (hi - lo) / static_cast<double>(m);
  const double f = std::floor((x - lo) / width);
  if (f < 0.0) return 0;
  if (f >= static_cast<double>(m)) return m - 1;
  return static_cast<std::size_t>(f);
}

Histogram build_histogram(std::span<const double> values, double lo, double hi, std::size_t m,
                          double epsilon) {
  if (m < 2) fail(ErrorKind::kUsage, "histogram needs at least 2 bins");
  if (!(lo < hi)) fail(ErrorKind::kUsage, "histogram range must satisfy lo < hi");
  if (!(epsilon > 0.0)) fail(ErrorKind::kUsage, "histogram smoothing epsilon must be positive");
  std::vector<double> counts(m, 0.0);
  for (double x : values) counts[bin_index(x, lo, hi, m)] += 1.0;
  const double total = static_cast<double>(values.size()) + epsilon * static_cast<double>(m);
  Histogram h{m, lo, hi, std::vector<double>(m)};
  for (std::size_t i = 0; i < m; ++i) h.probabilities[i] = (counts[i] + epsilon) / total;
  return h;
}

std::pair<Histogram, Histogram> ps_histograms(std::span<const double> set_a, std::span<const double> set_b,
                                              std::size_t m, double epsilon) {
  if (set_a.empty() && set_b.empty()) fail(ErrorKind::kUsage, "ps_histograms: both sets empty");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (auto set : {set_a, set_b}) {
    for (double x : set) {
      if (!std::isfinite(x)) fail(ErrorKind::kUsage, "ps_histograms: non-finite PS value");
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  }
  lo -= kEdgePad;
  hi += kEdgePad;
  return {build_histogram(set_a, lo, hi, m, epsilon), build_histogram(set_b, lo, hi, m, epsilon)};
}

double kl_divergence(const Histogram& p, const Histogram& q) {
  if (p.bins != q.bins || p.lo != q.lo || p.hi != q.hi || p.probabilities.size() != q.probabilities.size()) {
    fail(ErrorKind::kUsage, "kl_divergence: histograms have different bins");
  }
  double kl = 0.0;
  for (std::size_t i = 0; i < p.probabilities.size(); ++i) {
    const double pi = p.probabilities[i];
    const double qi = q.probabilities[i];
    if (!(pi > 0.0) || !(qi > 0.0)) fail(ErrorKind::kUsage, "kl_divergence: histogram not smoothed");
    kl += pi * std::log(pi / qi);
  }
  return std::max(kl, 0.0);
}

ARecall a_recall_at_k(const RankedList& topk, const Corpus& corpus, std::size_t k, std::size_t n_injected) {
  if (k == 0) fail(ErrorKind::kUsage, "a_recall_at_k: k must be positive");
  if (corpus.has_unknown_provenance()) {
    fail(ErrorKind::kMetricUnavailable, "A-Recall needs ground-truth provenance; corpus has unknown passages");
  }
  ARecall r;
  const std::size_t take = std::min(k, topk.items.size());
  for (std::size_t i = 0; i < take; ++i) {
    if (corpus.at(topk.items[i].passage_id).provenance == Provenance::kAdversarial) ++r.adversarial_count;
  }
  r.slots = static_cast<double>(r.adversarial_count) / static_cast<double>(k);
  const std::size_t denom = std::min(k, n_injected);
  r.injected = denom == 0 ? 0.0 : static_cast<double>(r.adversarial_count) / static_cast<double>(denom);
  return r;
}

double recall_at_k(const RankedList& topk, const Corpus& corpus, std::size_t k) {
  if (k == 0) fail(ErrorKind::kUsage, "recall_at_k: k must be positive");
  std::size_t relevant = 0;
  bool labeled = false;
  for (const Passage& p : corpus.passages()) {
    if (p.relevant) labeled = true;
    if (p.relevant.value_or(false) && p.provenance != Provenance::kAdversarial) ++relevant;
  }
  if (!labeled) fail(ErrorKind::kMetricUnavailable, "Recall needs relevance labels (qrels)");
  if (relevant == 0) fail(ErrorKind::kMetricUnavailable, "Recall undefined: no relevant passage for query");
  std::size_t hits = 0;
  const std::size_t take = std::min(k, topk.items.size());
  for (std::size_t i = 0; i < take; ++i) {
    const Passage& p = corpus.at(topk.items[i].passage_id);
    if (p.relevant.value_or(false) && p.provenance != Provenance::kAdversarial) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(std::min(k, relevant));
}

double context_mean_ps(const RankedList& list, const Corpus& corpus, const PolarizationAxis& axis) {
  if (list.items.empty()) return 0.0;
  double s = 0.0;
  for (const ScoredPassage& sp : list.items) s += polarization_score(axis, corpus.at(sp.passage_id).embedding);
  return s / static_cast<double>(list.items.size());
}

}  // namespace biasdef
