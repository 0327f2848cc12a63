#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "biasdef/corpus.hpp"
#include "biasdef/retriever.hpp"
#include "biasdef/vecmath.hpp"

namespace biasdef {

struct BiasDefParams {
  std::size_t bins = 20;
  double epsilon = 1e-6;
  double delta = 0.02;
  double mahalanobis_threshold = 3.0;
  double ridge = 1e-3;  // relative to trace(V) / dim
  std::size_t k = 5;

  void validate() const;
  bool operator==(const BiasDefParams&) const = default;
};

struct KLScanResult {
  std::vector<double> thresholds;  // strictly descending, sentinels included
  std::vector<double> kl_values;
  double t_star = 0.0;
  std::size_t t_star_index = 0;
  std::vector<std::string> suspect_set;  // sorted ids with ss > t_star

  bool operator==(const KLScanResult&) const = default;
};

struct DefenseOutcome {
  RankedList final_topk;
  std::vector<std::string> removed_ids;    // (suspects \ alpha) U recovered
  std::vector<std::string> alpha_ids;      // pruned false positives
  std::vector<std::string> recovered_ids;  // Mahalanobis additions
  KLScanResult scan;
  PolarizationAxis axis;
  bool no_boundary = false;
  std::string note;

  bool operator==(const DefenseOutcome&) const = default;
};

// Scans SS thresholds (midpoints between distinct ss values, plus one
// sentinel on each side) and returns the largest threshold among the
// interior delta-local maxima that attain the highest KL. Every pool item
// needs ps set. Throws no-boundary below 2 distinct ss values.
KLScanResult scan_max_kl(std::span<const ScoredPassage> pool, const BiasDefParams& params);

// Greedy false-positive pruning. When the suspects' mean PS exceeds the
// rest's, the lowest-PS suspect is tried first, otherwise the highest; ties
// by id. Stops at the first KL decrease or when one suspect is left.
std::vector<std::string> mitigate_false_positives(const KLScanResult& scan, std::span<const ScoredPassage> pool,
                                                  const BiasDefParams& params);

// Non-suspect pool passages within Mahalanobis distance T of the suspects.
std::vector<std::string> recover_false_negatives(std::span<const std::string> suspects,
                                                 std::span<const ScoredPassage> pool, const Corpus& corpus,
                                                 const BiasDefParams& params);

// Full pipeline on a candidate pool. The defender's axis is fitted on the
// pool embeddings. Falls back to the plain top-k (no_boundary set) when no
// boundary exists.
DefenseOutcome biasdef_filter(const RankedList& pool, const Corpus& corpus, const BiasDefParams& params);

}  // namespace biasdef
