#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "psa/parallel.hpp"
#include "psa/rng.hpp"

namespace psa {

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const noexcept {
    return {data_.data() + i * cols_, cols_};
  }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  bool all_finite() const noexcept;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

double dot(std::span<const double> a, std::span<const double> b) noexcept;
double squared_norm(std::span<const double> a) noexcept;
double squared_distance(std::span<const double> a, std::span<const double> b) noexcept;

// Entries i.i.d. Normal(mean, std^2). std == 0 gives the constant matrix.
Matrix gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols, double mean, double std);

// Scales every row to unit l2 norm. Throws DegenerateRowError on a zero row.
Matrix normalize_rows(const Matrix& m);

// out(i, j) = ||a_i - b_j||^2, evaluated as a sum of squared differences so
// the diagonal of pairwise_sq_dist(a, a) is exactly zero.
Matrix pairwise_sq_dist(const Matrix& a, const Matrix& b, Exec exec = Exec::kParallel);

Matrix transpose(const Matrix& m);
Matrix matmul(const Matrix& a, const Matrix& b);
// a * b^T without forming the transpose.
Matrix matmul_transposed(const Matrix& a, const Matrix& b, Exec exec = Exec::kParallel);
Matrix select_rows(const Matrix& m, std::span<const std::size_t> indices);
Matrix scaled(const Matrix& m, double factor);
Matrix add(const Matrix& a, const Matrix& b);
Matrix subtract(const Matrix& a, const Matrix& b);
double frobenius_norm(const Matrix& m) noexcept;

void require_same_shape(const Matrix& a, const Matrix& b, const char* what);
void require_finite(const Matrix& m, const char* what);

}  // namespace psa
