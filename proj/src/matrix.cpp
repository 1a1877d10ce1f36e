#include "psa/matrix.hpp"

#include <cmath>
#include <string>

#include "psa/errors.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace psa {

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw DimensionError("buffer holds " + std::to_string(data_.size()) + " values, expected " +
                         std::to_string(rows_ * cols_));
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(rows.size()), cols_(rows.size() == 0 ? 0 : rows.begin()->size()) {
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw DimensionError("ragged initializer list");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

bool Matrix::all_finite() const noexcept {
  for (double x : data_) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

double dot(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double squared_norm(std::span<const double> a) noexcept { return dot(a, a); }

double squared_distance(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    s += diff * diff;
  }
  return s;
}

Matrix gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols, double mean, double std) {
  if (rows == 0 || cols == 0) {
    throw EmptyDimensionError("gaussian_matrix: requested " + std::to_string(rows) + "x" +
                              std::to_string(cols));
  }
  if (!(std >= 0.0) || !std::isfinite(std) || !std::isfinite(mean)) {
    throw InvalidArgument("gaussian_matrix: std must be finite and >= 0");
  }
  Matrix m(rows, cols, mean);
  if (std == 0.0) return m;
  for (double& x : m.data()) x = mean + std * rng.normal();
  return m;
}

Matrix normalize_rows(const Matrix& m) {
  Matrix out = m;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double norm = std::sqrt(squared_norm(m.row(i)));
    if (norm == 0.0) throw DegenerateRowError(i);
    for (double& x : out.row(i)) x /= norm;
  }
  return out;
}

Matrix pairwise_sq_dist(const Matrix& a, const Matrix& b, Exec exec) {
  if (a.cols() != b.cols()) {
    throw DimensionError("pairwise_sq_dist: " + std::to_string(a.cols()) + " vs " +
                         std::to_string(b.cols()) + " columns");
  }
  Matrix out(a.rows(), b.rows());
  for_each_index(a.rows(), exec, [&](std::size_t i) {
    const auto ai = a.row(i);
    auto dst = out.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) dst[j] = squared_distance(ai, b.row(j));
  });
  return out;
}

Matrix transpose(const Matrix& m) {
  Matrix t(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
  }
  return t;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw DimensionError("matmul: inner dimensions differ");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto dst = out.row(i);
    for (std::size_t p = 0; p < a.cols(); ++p) {
      const double aip = a(i, p);
      const auto bp = b.row(p);
      for (std::size_t j = 0; j < b.cols(); ++j) dst[j] += aip * bp[j];
    }
  }
  return out;
}

Matrix matmul_transposed(const Matrix& a, const Matrix& b, Exec exec) {
  if (a.cols() != b.cols()) throw DimensionError("matmul_transposed: column counts differ");
  Matrix out(a.rows(), b.rows());
  for_each_index(a.rows(), exec, [&](std::size_t i) {
    const auto ai = a.row(i);
    auto dst = out.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) dst[j] = dot(ai, b.row(j));
  });
  return out;
}

Matrix select_rows(const Matrix& m, std::span<const std::size_t> indices) {
  Matrix out(indices.size(), m.cols());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= m.rows()) {
      throw DimensionError("select_rows: index " + std::to_string(indices[r]) +
                           " out of range for " + std::to_string(m.rows()) + " rows");
    }
    const auto src = m.row(indices[r]);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

Matrix scaled(const Matrix& m, double factor) {
  Matrix out = m;
  for (double& x : out.data()) x *= factor;
  return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "add");
  Matrix out = a;
  auto dst = out.data();
  const auto src = b.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  return out;
}

Matrix subtract(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "subtract");
  Matrix out = a;
  auto dst = out.data();
  const auto src = b.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] -= src[i];
  return out;
}

double frobenius_norm(const Matrix& m) noexcept { return std::sqrt(squared_norm(m.data())); }

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(what) + ": shapes " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " and " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()) + " differ");
  }
}

void require_finite(const Matrix& m, const char* what) {
  if (!m.all_finite()) throw NumericError(std::string(what) + ": non-finite entry");
}

}  // namespace psa
