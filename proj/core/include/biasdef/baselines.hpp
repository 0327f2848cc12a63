#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "biasdef/corpus.hpp"
#include "biasdef/retriever.hpp"
#include "biasdef/vecmath.hpp"

namespace biasdef {

struct MmrParams {
  double lambda = 0.5;

  void validate() const;
  bool operator==(const MmrParams&) const = default;
};

struct BrraParams {
  double noise_intensity = 1.0;
  int num_variants = 8;
  std::uint64_t rng_seed = 0;

  void validate() const;
  bool operator==(const BrraParams&) const = default;
};

struct SmartParams {
  std::optional<Matrix> conflict_matrix;  // pool order, symmetric, zero diagonal
  double relevance_weight = 1.0;
  double similarity_weight = 1.0;
  double conflict_weight = 1.0;

  void validate() const;
  bool operator==(const SmartParams&) const = default;
};

// Output sorted by (ss, id); selection_order keeps the greedy pick order.
struct Reranked {
  RankedList list;
  std::vector<std::string> selection_order;
};

RankedList no_defense(const RankedList& pool, std::size_t k);

Reranked mmr_select(const RankedList& pool, const Corpus& corpus, std::size_t k, const MmrParams& params);

// Perturbed queries q_i = normalize(q + noise * |q| * g_i / |g_i|) with g_i
// Gaussian, so the perturbation norm is noise * |q|. Passages from the top-4k
// lists are ranked by (count desc, mean rank asc, id asc).
RankedList brra_select(const Corpus& corpus, const Query& query, std::size_t k, const BrraParams& params);

// L = w_r diag(r) K diag(r), r_i = max(ss_i, 0), K = I + w_s offdiag(Sim) - w_c C,
// floored to PSD. Sim is pairwise cosine over pool embeddings.
Matrix smart_kernel(const RankedList& pool, const Corpus& corpus, const SmartParams& params);

// Greedy MAP on the kernel determinant; ties by id; once no candidate adds
// positive volume the rest is filled by ss.
Reranked smart_select(const RankedList& pool, const Corpus& corpus, std::size_t k, const SmartParams& params);

double determinant(const Matrix& m);

// JSON square array of numbers.
Matrix load_conflict_matrix(const std::filesystem::path& path);

}  // namespace biasdef
