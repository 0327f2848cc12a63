#include "biasdef/vecmath.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "biasdef/error.hpp"
#include "biasdef/random.hpp"

namespace biasdef {

namespace {

constexpr double kPowerTolerance = 1e-10;
constexpr int kPowerMaxIterations = 10000;
constexpr std::uint64_t kSecondStartSeed = 0x70c0a115eedULL;

void require_same_dim(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    fail(ErrorKind::kUsage, std::string(what) + ": dimension mismatch (" + std::to_string(a) +
                                " vs " + std::to_string(b) + ")");
  }
}

std::size_t uniform_dimension(std::span<const Embedding> points, const char* what) {
  if (points.empty()) fail(ErrorKind::kUsage, std::string(what) + ": empty point set");
  const std::size_t dim = points.front().size();
  for (const Embedding& p : points) require_same_dim(p.size(), dim, what);
  return dim;
}

// Iterates v <- X^T X v / |X| on the centered rows until the step is below tolerance.
Embedding power_iterate(const std::vector<Embedding>& centered, Embedding v) {
  const std::size_t dim = v.size();
  Embedding w(dim);
  for (int it = 0; it < kPowerMaxIterations; ++it) {
    std::fill(w.begin(), w.end(), 0.0);
    for (const Embedding& x : centered) {
      const double c = dot(x, v);
      for (std::size_t j = 0; j < dim; ++j) w[j] += c * x[j];
    }
    const double nw = norm(w);
    if (nw == 0.0) return v;
    double diff = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      w[j] /= nw;
      diff += (w[j] - v[j]) * (w[j] - v[j]);
    }
    std::swap(v, w);
    if (std::sqrt(diff) < kPowerTolerance) break;
  }
  return v;
}

double rayleigh(const std::vector<Embedding>& centered, const Embedding& v) {
  double s = 0.0;
  for (const Embedding& x : centered) {
    const double c = dot(x, v);
    s += c * c;
  }
  return s / static_cast<double>(centered.size());
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries)
    : rows_(rows), cols_(cols), data_(std::move(entries)) {
  if (data_.size() != rows_ * cols_) {
    fail(ErrorKind::kUsage, "matrix entries do not match " + std::to_string(rows) + "x" +
                                std::to_string(cols));
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

bool Matrix::is_symmetric(double tol) const {
  if (!square()) return false;
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t j = i + 1; j < cols_; ++j) {
      if (std::abs((*this)(i, j) - (*this)(j, i)) > tol) return false;
    }
  }
  return true;
}

double dot(EmbeddingView a, EmbeddingView b) {
  require_same_dim(a.size(), b.size(), "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(EmbeddingView a) {
  double s = 0.0;
  for (double x : a) s += x * x;
  return std::sqrt(s);
}

Embedding normalized(EmbeddingView a) {
  const double n = norm(a);
  if (n == 0.0) fail(ErrorKind::kDomain, "cannot normalize a zero vector");
  Embedding out(a.begin(), a.end());
  for (double& x : out) x /= n;
  return out;
}

double cosine_similarity(EmbeddingView a, EmbeddingView b) {
  require_same_dim(a.size(), b.size(), "cosine_similarity");
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) fail(ErrorKind::kDomain, "cosine_similarity of a zero-norm vector");
  return dot(a, b) / (na * nb);
}

MeanCovariance mean_and_covariance(std::span<const Embedding> points) {
  const std::size_t dim = uniform_dimension(points, "mean_and_covariance");
  const double n = static_cast<double>(points.size());
  Embedding mean(dim, 0.0);
  for (const Embedding& p : points) {
    for (std::size_t j = 0; j < dim; ++j) mean[j] += p[j];
  }
  for (double& m : mean) m /= n;

  Matrix cov(dim, dim);
  Embedding d(dim);
  for (const Embedding& p : points) {
    for (std::size_t j = 0; j < dim; ++j) d[j] = p[j] - mean[j];
    for (std::size_t r = 0; r < dim; ++r) {
      if (d[r] == 0.0) continue;
      for (std::size_t c = r; c < dim; ++c) cov(r, c) += d[r] * d[c];
    }
  }
  for (std::size_t r = 0; r < dim; ++r) {
    for (std::size_t c = r; c < dim; ++c) {
      cov(r, c) /= n;
      cov(c, r) = cov(r, c);
    }
  }
  return {std::move(mean), std::move(cov)};
}

PolarizationAxis principal_axis(std::span<const Embedding> points) {
  const std::size_t dim = uniform_dimension(points, "principal_axis");
  if (points.size() < 2) fail(ErrorKind::kUsage, "principal_axis needs at least 2 points");

  Embedding mean(dim, 0.0);
  for (const Embedding& p : points) {
    for (std::size_t j = 0; j < dim; ++j) mean[j] += p[j];
  }
  for (double& m : mean) m /= static_cast<double>(points.size());

  std::vector<Embedding> centered;
  centered.reserve(points.size());
  double total = 0.0;
  for (const Embedding& p : points) {
    Embedding x(dim);
    for (std::size_t j = 0; j < dim; ++j) {
      x[j] = p[j] - mean[j];
      total += x[j] * x[j];
    }
    centered.push_back(std::move(x));
  }
  if (total == 0.0) fail(ErrorKind::kDegenerate, "principal_axis: all points identical");

  // The all-ones start can be orthogonal to the top eigenvector; a second
  // fixed pseudo-random start guards against converging to a lower one.
  Embedding v = power_iterate(centered, Embedding(dim, 1.0 / std::sqrt(static_cast<double>(dim))));
  Rng rng(kSecondStartSeed);
  Embedding alt = power_iterate(centered, rng.unit_vector(dim));
  if (rayleigh(centered, alt) > rayleigh(centered, v) * (1.0 + 1e-12)) v = std::move(alt);

  const double nv = norm(v);
  for (double& x : v) x /= nv;
  std::size_t big = 0;
  for (std::size_t j = 1; j < dim; ++j) {
    if (std::abs(v[j]) > std::abs(v[big])) big = j;
  }
  if (v[big] < 0.0) {
    for (double& x : v) x = -x;
  }
  return {std::move(mean), std::move(v)};
}

Matrix regularized_inverse(const Matrix& cov, double ridge) {
  if (!cov.square()) fail(ErrorKind::kUsage, "regularized_inverse: matrix is not square");
  if (ridge < 0.0) fail(ErrorKind::kUsage, "regularized_inverse: negative ridge");
  const std::size_t n = cov.rows();
  double scale = 0.0;
  for (double x : cov.entries()) scale = std::max(scale, std::abs(x));
  if (!cov.is_symmetric(1e-9 * std::max(scale, 1.0))) {
    fail(ErrorKind::kUsage, "regularized_inverse: matrix is not symmetric");
  }

  Matrix a = cov;
  for (std::size_t i = 0; i < n; ++i) a(i, i) += ridge;
  scale = 0.0;
  for (double x : a.entries()) scale = std::max(scale, std::abs(x));
  const double tiny = 1e-13 * std::max(scale, 1e-300);

  Matrix inv = Matrix::identity(n);
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(a(r, col)) > std::abs(a(pivot, col))) pivot = r;
    }
    if (std::abs(a(pivot, col)) <= tiny) {
      fail(ErrorKind::kDomain, "regularized_inverse: matrix is numerically singular");
    }
    if (pivot != col) {
      for (std::size_t c = 0; c < n; ++c) {
        std::swap(a(pivot, c), a(col, c));
        std::swap(inv(pivot, c), inv(col, c));
      }
    }
    const double p = a(col, col);
    for (std::size_t c = 0; c < n; ++c) {
      a(col, c) /= p;
      inv(col, c) /= p;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a(r, col);
      if (f == 0.0) continue;
      for (std::size_t c = 0; c < n; ++c) {
        a(r, c) -= f * a(col, c);
        inv(r, c) -= f * inv(col, c);
      }
    }
  }
  return inv;
}

double mahalanobis_distance(EmbeddingView x, EmbeddingView mean, const Matrix& cov_inverse) {
  require_same_dim(x.size(), mean.size(), "mahalanobis_distance");
  if (cov_inverse.rows() != x.size() || cov_inverse.cols() != x.size()) {
    fail(ErrorKind::kUsage, "mahalanobis_distance: inverse covariance has wrong shape");
  }
  const std::size_t n = x.size();
  Embedding d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = x[i] - mean[i];
  double q = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    if (d[r] == 0.0) continue;
    q += d[r] * dot(cov_inverse.row(r), d);
  }
  if (q < -1e-9) fail(ErrorKind::kDomain, "mahalanobis_distance: negative quadratic form");
  return std::sqrt(std::max(q, 0.0));
}

double default_ridge(const Matrix& cov, double relative) {
  if (!cov.square() || cov.rows() == 0) fail(ErrorKind::kUsage, "default_ridge: bad matrix");
  double trace = 0.0;
  for (std::size_t i = 0; i < cov.rows(); ++i) trace += cov(i, i);
  if (trace <= 0.0) return relative;
  return relative * trace / static_cast<double>(cov.rows());
}

}  // namespace biasdef
