#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "biasdef/corpus.hpp"
#include "biasdef/retriever.hpp"
#include "biasdef/vecmath.hpp"

namespace biasdef {

struct Histogram {
  std::size_t bins = 0;
  double lo = 0.0;
  double hi = 0.0;
  std::vector<double> probabilities;

  bool operator==(const Histogram&) const = default;
};

struct PsShiftReport {
  double attacked_ps = 0.0;
  double unattacked_ps = 0.0;
  double shift = 0.0;
};

struct ARecall {
  std::size_t adversarial_count = 0;
  double slots = 0.0;     // count / k
  double injected = 0.0;  // count / min(k, n_injected)
};

// direction . e on the raw embedding.
double polarization_score(const PolarizationAxis& axis, EmbeddingView e);

PsShiftReport ps_shift(EmbeddingView attacked, EmbeddingView unattacked, const PolarizationAxis& axis);

// Bin index floor((x - lo) / width), clamped into [0, m).
std::size_t bin_index(double x, double lo, double hi, std::size_t m);

// Counts over a fixed range, smoothed to (count + eps) / sum(count + eps).
Histogram build_histogram(std::span<const double> values, double lo, double hi, std::size_t m,
                          double epsilon);

// Both sets binned over their joint [min, max], widened by 1e-9 at each edge.
std::pair<Histogram, Histogram> ps_histograms(std::span<const double> set_a, std::span<const double> set_b,
                                              std::size_t m, double epsilon);

// Natural-log KL(p || q).
double kl_divergence(const Histogram& p, const Histogram& q);

// Throws metric-unavailable if the corpus has unknown provenance.
ARecall a_recall_at_k(const RankedList& topk, const Corpus& corpus, std::size_t k, std::size_t n_injected);

// Relevant benign hits / min(k, relevant benign in corpus). Throws
// metric-unavailable when relevance is unlabeled or nothing is relevant.
double recall_at_k(const RankedList& topk, const Corpus& corpus, std::size_t k);

// Mean PS of the listed passages (0 for an empty list).
double context_mean_ps(const RankedList& list, const Corpus& corpus, const PolarizationAxis& axis);

}  // namespace biasdef
