#include "psa/sketch.hpp"

#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "eigen_bridge.hpp"
#include "psa/errors.hpp"

namespace psa {

void fwht(std::span<double> values) {
  const std::size_t n = values.size();
  if (!std::has_single_bit(n)) throw InvalidArgument("fwht: length must be a power of two");
  for (std::size_t len = 1; len < n; len <<= 1) {
    for (std::size_t i = 0; i < n; i += len << 1) {
      for (std::size_t j = i; j < i + len; ++j) {
        const double a = values[j];
        const double b = values[j + len];
        values[j] = a + b;
        values[j + len] = a - b;
      }
    }
  }
  const double norm = 1.0 / std::sqrt(static_cast<double>(n));
  for (double& v : values) v *= norm;
}

Matrix srht_sketch(const Matrix& m, std::size_t sketch_rows, Rng& rng) {
  if (m.rows() == 0 || m.cols() == 0) throw EmptyDimensionError("srht_sketch: empty input");
  if (sketch_rows == 0) throw InvalidArgument("srht_sketch: sketch_rows must be >= 1");
  const std::size_t padded = std::bit_ceil(m.rows());
  const std::size_t r = std::min(sketch_rows, padded);

  // Column-major scratch so each column transform is contiguous.
  std::vector<double> work(padded * m.cols(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double sign = (rng.next_u64() >> 63) != 0 ? -1.0 : 1.0;
    for (std::size_t j = 0; j < m.cols(); ++j) work[j * padded + i] = sign * m(i, j);
  }
  for (std::size_t j = 0; j < m.cols(); ++j) fwht({work.data() + j * padded, padded});

  // Partial Fisher-Yates picks r distinct rows.
  std::vector<std::size_t> rows(padded);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  for (std::size_t i = 0; i < r; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.uniform_index(padded - i));
    std::swap(rows[i], rows[j]);
  }
  const double scale = std::sqrt(static_cast<double>(padded) / static_cast<double>(r));
  Matrix sketch(r, m.cols());
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) sketch(i, j) = scale * work[j * padded + rows[i]];
  }
  return sketch;
}

std::vector<double> approx_leverage_scores(const Matrix& k, std::size_t sketch_rows, Rng& rng) {
  if (sketch_rows < k.cols()) {
    throw InvalidArgument("approx_leverage_scores: sketch_rows " + std::to_string(sketch_rows) +
                          " < cols " + std::to_string(k.cols()));
  }
  const Matrix sketch = srht_sketch(k, sketch_rows, rng);
  if (sketch.rows() < k.cols()) {
    throw InvalidArgument("approx_leverage_scores: fewer padded rows than columns");
  }

  Eigen::HouseholderQR<detail::RowMajorMatrix> qr(detail::as_eigen(sketch));
  const auto d = static_cast<Eigen::Index>(k.cols());
  const Eigen::MatrixXd r = qr.matrixQR().topRows(d).triangularView<Eigen::Upper>();
  const double largest = r.diagonal().cwiseAbs().maxCoeff();
  const double smallest = r.diagonal().cwiseAbs().minCoeff();
  const double tol = static_cast<double>(sketch.rows()) * std::numeric_limits<double>::epsilon();
  if (!(largest > 0.0) || smallest <= tol * largest) {
    throw SingularGramError("approx_leverage_scores: sketched matrix is rank deficient");
  }

  // Rows of K R^{-1}: solve R^T z = k_i^T for every row at once.
  const Eigen::MatrixXd kt = detail::as_eigen(k).transpose();
  const Eigen::MatrixXd z = r.transpose().triangularView<Eigen::Lower>().solve(kt);
  std::vector<double> h(k.rows());
  for (std::size_t i = 0; i < k.rows(); ++i) h[i] = z.col(static_cast<Eigen::Index>(i)).squaredNorm();
  return h;
}

}  // namespace psa
