#include "psa/exact_attention.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "eigen_bridge.hpp"
#include "psa/errors.hpp"

namespace psa {

namespace {

void check_qk(const Matrix& q, const Matrix& k, const char* what) {
  if (q.cols() != k.cols()) {
    throw DimensionError(std::string(what) + ": query dim " + std::to_string(q.cols()) +
                         " != key dim " + std::to_string(k.cols()));
  }
  if (k.rows() == 0) throw EmptyDimensionError(std::string(what) + ": no keys");
}

// Fills `scores` with q_i . k_j and returns the row maximum.
double row_logits(std::span<const double> qi, const Matrix& k, std::span<double> scores) {
  double max_logit = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < k.rows(); ++j) {
    scores[j] = dot(qi, k.row(j));
    max_logit = std::max(max_logit, scores[j]);
  }
  return max_logit;
}

}  // namespace

AttentionOutput exact_attention(const Matrix& q, const Matrix& k, const Matrix& v, Exec exec) {
  check_qk(q, k, "exact_attention");
  if (k.rows() != v.rows()) {
    throw DimensionError("exact_attention: " + std::to_string(k.rows()) + " keys but " +
                         std::to_string(v.rows()) + " values");
  }
  const std::size_t n_keys = k.rows();
  AttentionOutput result{Matrix(q.rows(), v.cols()), std::vector<double>(q.rows())};
  bool overflow = false;

  for_each_index(q.rows(), exec, [&](std::size_t i) {
    std::vector<double> scores(n_keys);
    const double max_logit = row_logits(q.row(i), k, scores);
    double denom = 0.0;
    auto out = result.out.row(i);
    for (std::size_t j = 0; j < n_keys; ++j) {
      const double w = std::exp(scores[j] - max_logit);
      denom += w;
      const auto vj = v.row(j);
      for (std::size_t c = 0; c < out.size(); ++c) out[c] += w * vj[c];
    }
    for (double& x : out) x /= denom;
    const double row_sum = denom * std::exp(max_logit);
    result.row_sums[i] = row_sum;
    if (!std::isfinite(row_sum) || !std::isfinite(max_logit)) {
#pragma omp atomic write
      overflow = true;
    }
  });

  if (overflow) throw NumericError("exact_attention: row sum overflows despite max-subtraction");
  return result;
}

Matrix attention_matrix(const Matrix& q, const Matrix& k, bool normalized, Exec exec) {
  check_qk(q, k, "attention_matrix");
  Matrix a(q.rows(), k.rows());
  bool overflow = false;

  for_each_index(q.rows(), exec, [&](std::size_t i) {
    auto row = a.row(i);
    const double max_logit = row_logits(q.row(i), k, row);
    if (!normalized) {
      for (double& x : row) x = std::exp(x);
      if (!std::isfinite(std::exp(max_logit))) {
#pragma omp atomic write
        overflow = true;
      }
      return;
    }
    double denom = 0.0;
    for (double& x : row) {
      x = std::exp(x - max_logit);
      denom += x;
    }
    for (double& x : row) x /= denom;
  });

  if (overflow) throw NumericError("attention_matrix: exp(QK^T) overflows; use normalized=true");
  return a;
}

std::vector<double> exact_leverage_scores(const Matrix& a) {
  if (a.rows() == 0 || a.cols() == 0) throw EmptyDimensionError("exact_leverage_scores: empty");
  if (a.rows() < a.cols()) {
    throw DimensionError("exact_leverage_scores: needs rows >= cols, got " +
                         std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
  }
  const auto n = static_cast<Eigen::Index>(a.rows());
  const auto d = static_cast<Eigen::Index>(a.cols());

  Eigen::ColPivHouseholderQR<detail::RowMajorMatrix> qr(detail::as_eigen(a));
  const auto& r = qr.matrixQR();
  const double largest = std::abs(r(0, 0));
  if (largest == 0.0) throw SingularGramError("exact_leverage_scores: zero matrix");

  const double rank_tol = static_cast<double>(std::max(n, d)) *
                          std::numeric_limits<double>::epsilon() * largest;
  Eigen::Index rank = 0;
  while (rank < d && std::abs(r(rank, rank)) > rank_tol) ++rank;

  const double smallest = std::abs(r(rank - 1, rank - 1));
  const double gram_condition = (largest / smallest) * (largest / smallest);
  if (gram_condition > kGramConditionCap) {
    throw SingularGramError("exact_leverage_scores: Gram condition number " +
                            std::to_string(gram_condition) + " exceeds cap");
  }

  const Eigen::MatrixXd basis = qr.householderQ() * Eigen::MatrixXd::Identity(n, rank);
  std::vector<double> h(a.rows());
  for (Eigen::Index i = 0; i < n; ++i) h[static_cast<std::size_t>(i)] = basis.row(i).squaredNorm();
  return h;
}

}  // namespace psa
