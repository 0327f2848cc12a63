#include "biasdef/baselines.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>

#include "biasdef/error.hpp"
#include "biasdef/random.hpp"
#include "json.hpp"

namespace biasdef {

namespace {

std::vector<const Embedding*> pool_embeddings(const RankedList& pool, const Corpus& corpus) {
  std::vector<const Embedding*> out;
  out.reserve(pool.items.size());
  for (const ScoredPassage& s : pool.items) out.push_back(&corpus.at(s.passage_id).embedding);
  return out;
}

RankedList sorted_subset(const RankedList& pool, const std::vector<std::size_t>& picked) {
  RankedList out{pool.query_id, {}};
  for (std::size_t i : picked) out.items.push_back(pool.items[i]);
  sort_ranked(out.items);
  return out;
}

Matrix principal_submatrix(const Matrix& m, const std::vector<std::size_t>& idx) {
  Matrix sub(idx.size(), idx.size());
  for (std::size_t a = 0; a < idx.size(); ++a) {
    for (std::size_t b = 0; b < idx.size(); ++b) sub(a, b) = m(idx[a], idx[b]);
  }
  return sub;
}

}  // namespace

void MmrParams::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) fail(ErrorKind::kUsage, "mmr.lambda must lie in [0, 1]");
}

void BrraParams::validate() const {
  if (!(noise_intensity >= 0.0)) fail(ErrorKind::kUsage, "brra.noise_intensity must be >= 0");
  if (num_variants < 0) fail(ErrorKind::kUsage, "brra.num_variants must be >= 0");
}

void SmartParams::validate() const {
  if (!(relevance_weight >= 0.0) || !(similarity_weight >= 0.0) || !(conflict_weight >= 0.0)) {
    fail(ErrorKind::kUsage, "smart weights must be >= 0");
  }
  if (conflict_matrix) {
    const Matrix& c = *conflict_matrix;
    if (!c.square()) fail(ErrorKind::kUsage, "conflict matrix is not square");
    if (!c.is_symmetric(1e-12)) fail(ErrorKind::kUsage, "conflict matrix is not symmetric");
    for (std::size_t i = 0; i < c.rows(); ++i) {
      if (c(i, i) != 0.0) fail(ErrorKind::kUsage, "conflict matrix must have a zero diagonal");
    }
    for (double x : c.entries()) {
      if (!(x >= 0.0 && x <= 1.0)) fail(ErrorKind::kUsage, "conflict matrix entries must lie in [0, 1]");
    }
  }
}

RankedList no_defense(const RankedList& pool, std::size_t k) { return prefix(pool, k); }

Reranked mmr_select(const RankedList& pool, const Corpus& corpus, std::size_t k, const MmrParams& params) {
  params.validate();
  const std::size_t n = pool.items.size();
  const std::size_t take = std::min(k, n);
  const auto emb = pool_embeddings(pool, corpus);

  std::vector<std::size_t> picked;
  std::vector<bool> used(n, false);
  std::vector<double> max_sim(n, -std::numeric_limits<double>::infinity());
  while (picked.size() < take) {
    std::size_t best = n;
    double best_score = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (used[i]) continue;
      const double penalty = picked.empty() ? 0.0 : max_sim[i];
      const double score = params.lambda * pool.items[i].ss - (1.0 - params.lambda) * penalty;
      if (best == n || score > best_score ||
          (score == best_score && pool.items[i].passage_id < pool.items[best].passage_id)) {
        best = i;
        best_score = score;
      }
    }
    used[best] = true;
    picked.push_back(best);
    for (std::size_t i = 0; i < n; ++i) {
      if (!used[i]) max_sim[i] = std::max(max_sim[i], cosine_similarity(*emb[i], *emb[best]));
    }
  }

  Reranked out{sorted_subset(pool, picked), {}};
  for (std::size_t i : picked) out.selection_order.push_back(pool.items[i].passage_id);
  return out;
}

RankedList brra_select(const Corpus& corpus, const Query& query, std::size_t k, const BrraParams& params) {
  params.validate();
  if (k == 0) fail(ErrorKind::kUsage, "brra_select: k must be positive");
  const double qn = norm(query.embedding);
  if (qn == 0.0) fail(ErrorKind::kDomain, "brra_select: zero query embedding");

  std::vector<Query> variants{query};
  Rng rng(params.rng_seed);
  for (int v = 0; v < params.num_variants; ++v) {
    Embedding g = rng.gaussian_vector(query.embedding.size());
    const double gn = norm(g);
    Query qv{query.id, query.embedding, std::nullopt};
    for (std::size_t j = 0; j < g.size(); ++j) qv.embedding[j] += params.noise_intensity * qn * g[j] / gn;
    if (norm(qv.embedding) == 0.0) qv.embedding = query.embedding;
    qv.embedding = normalized(qv.embedding);
    variants.push_back(std::move(qv));
  }

  struct Tally {
    int count = 0;
    double rank_sum = 0.0;
  };
  std::map<std::string, Tally, std::less<>> table;
  for (const Query& qv : variants) {
    const RankedList top = candidate_pool(corpus, qv, k);
    for (std::size_t r = 0; r < top.items.size(); ++r) {
      Tally& t = table[top.items[r].passage_id];
      t.count += 1;
      t.rank_sum += static_cast<double>(r + 1);
    }
  }
  struct Row {
    const std::string* id;
    int count;
    double mean_rank;
  };
  std::vector<Row> rows;
  for (const auto& [id, t] : table) rows.push_back({&id, t.count, t.rank_sum / t.count});
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    if (a.count != b.count) return a.count > b.count;
    if (a.mean_rank != b.mean_rank) return a.mean_rank < b.mean_rank;
    return *a.id < *b.id;
  });

  RankedList out{query.id, {}};
  for (std::size_t i = 0; i < std::min(k, rows.size()); ++i) {
    const Passage& p = corpus.at(*rows[i].id);
    out.items.push_back({p.id, cosine_similarity(query.embedding, p.embedding), std::nullopt});
  }
  sort_ranked(out.items);
  return out;
}

Matrix smart_kernel(const RankedList& pool, const Corpus& corpus, const SmartParams& params) {
  params.validate();
  const std::size_t n = pool.items.size();
  if (params.conflict_matrix && params.conflict_matrix->rows() != n) {
    fail(ErrorKind::kUsage, "conflict matrix size " + std::to_string(params.conflict_matrix->rows()) +
                                " does not match pool size " + std::to_string(n));
  }
  const auto emb = pool_embeddings(pool, corpus);
  Eigen::MatrixXd l(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const double ri = std::max(pool.items[i].ss, 0.0);
    for (std::size_t j = i; j < n; ++j) {
      const double rj = std::max(pool.items[j].ss, 0.0);
      double inner = 1.0;
      if (i != j) {
        inner = params.similarity_weight * cosine_similarity(*emb[i], *emb[j]);
        if (params.conflict_matrix) inner -= params.conflict_weight * (*params.conflict_matrix)(i, j);
      }
      const double v = params.relevance_weight * ri * rj * inner;
      l(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      l(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
    }
  }
  if (n > 0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(l);
    if (eig.info() != Eigen::Success) fail(ErrorKind::kNumeric, "SMART kernel eigendecomposition failed");
    if (eig.eigenvalues().minCoeff() < 0.0) {
      const Eigen::VectorXd floored = eig.eigenvalues().cwiseMax(0.0);
      l = eig.eigenvectors() * floored.asDiagonal() * eig.eigenvectors().transpose();
      l = 0.5 * (l + l.transpose()).eval();
    }
  }
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) out(i, j) = l(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  return out;
}

double determinant(const Matrix& m) {
  if (!m.square()) fail(ErrorKind::kUsage, "determinant of a non-square matrix");
  Matrix a = m;
  const std::size_t n = a.rows();
  double det = 1.0;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    for (std::size_t r = c + 1; r < n; ++r) {
      if (std::abs(a(r, c)) > std::abs(a(p, c))) p = r;
    }
    if (a(p, c) == 0.0) return 0.0;
    if (p != c) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a(p, j), a(c, j));
      det = -det;
    }
    det *= a(c, c);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a(r, c) / a(c, c);
      for (std::size_t j = c; j < n; ++j) a(r, j) -= f * a(c, j);
    }
  }
  return det;
}

Reranked smart_select(const RankedList& pool, const Corpus& corpus, std::size_t k, const SmartParams& params) {
  const Matrix l = smart_kernel(pool, corpus, params);
  const std::size_t n = pool.items.size();
  const std::size_t take = std::min(k, n);

  std::vector<std::size_t> picked;
  std::vector<bool> used(n, false);
  while (picked.size() < take) {
    std::size_t best = n;
    double best_det = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (used[i]) continue;
      std::vector<std::size_t> trial = picked;
      trial.push_back(i);
      double diag = 1.0;
      for (std::size_t t : trial) diag *= l(t, t);
      const double det = determinant(principal_submatrix(l, trial));
      if (!(det > 1e-12 * diag) || det <= 0.0) continue;
      if (best == n || det > best_det ||
          (det == best_det && pool.items[i].passage_id < pool.items[best].passage_id)) {
        best = i;
        best_det = det;
      }
    }
    if (best == n) break;
    used[best] = true;
    picked.push_back(best);
  }
  for (std::size_t i = 0; i < n && picked.size() < take; ++i) {
    if (!used[i]) {
      used[i] = true;
      picked.push_back(i);
    }
  }

  Reranked out{sorted_subset(pool, picked), {}};
  for (std::size_t i : picked) out.selection_order.push_back(pool.items[i].passage_id);
  return out;
}

Matrix load_conflict_matrix(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open conflict matrix " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::kParse, path.string() + ": " + e.what());
  }
  if (!j.is_array()) fail(ErrorKind::kParse, path.string() + ": expected a square array of arrays");
  const std::size_t n = j.size();
  std::vector<double> entries;
  entries.reserve(n * n);
  for (const auto& row : j) {
    if (!row.is_array() || row.size() != n) fail(ErrorKind::kSchema, path.string() + ": matrix is not square");
    for (const auto& x : row) {
      if (!x.is_number()) fail(ErrorKind::kParse, path.string() + ": non-numeric entry");
      entries.push_back(x.get<double>());
    }
  }
  return Matrix(n, n, std::move(entries));
}

}  // namespace biasdef
