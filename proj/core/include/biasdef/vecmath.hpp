#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace biasdef {

using Embedding = std::vector<double>;
using EmbeddingView = std::span<const double>;

// Dense row-major matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries);

  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool square() const noexcept { return rows_ == cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> entries() const noexcept { return data_; }

  bool is_symmetric(double tol = 0.0) const;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct PolarizationAxis {
  Embedding mean;
  Embedding direction;

  bool operator==(const PolarizationAxis&) const = default;
};

struct MeanCovariance {
  Embedding mean;
  Matrix cov;
};

double dot(EmbeddingView a, EmbeddingView b);
double norm(EmbeddingView a);
Embedding normalized(EmbeddingView a);

double cosine_similarity(EmbeddingView a, EmbeddingView b);

// Population covariance (divisor N).
MeanCovariance mean_and_covariance(std::span<const Embedding> points);

// Top principal component by power iteration on centered data. The direction
// is signed so that its largest-magnitude entry is positive.
PolarizationAxis principal_axis(std::span<const Embedding> points);

Matrix regularized_inverse(const Matrix& cov, double ridge);

double mahalanobis_distance(EmbeddingView x, EmbeddingView mean, const Matrix& cov_inverse);

// relative * trace(cov) / dim; falls back to `relative` when the trace is zero.
double default_ridge(const Matrix& cov, double relative = 1e-3);

}  // namespace biasdef
