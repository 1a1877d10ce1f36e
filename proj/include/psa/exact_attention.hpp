#pragma once

#include <vector>

#include "psa/matrix.hpp"

namespace psa {

// out = D^{-1} exp(Q K^T) V together with the diagonal of D.
struct AttentionOutput {
  Matrix out;
  std::vector<double> row_sums;
};

// Brute-force softmax attention. Each row is shifted by its maximum logit
// before exponentiation; the shift cancels in the normalization. Throws
// NumericError if a row sum overflows even so.
AttentionOutput exact_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                                Exec exec = Exec::kParallel);

// exp(Q K^T), or its row-normalized form when `normalized` is set.
Matrix attention_matrix(const Matrix& q, const Matrix& k, bool normalized,
                        Exec exec = Exec::kParallel);

// Largest admissible condition number of A^T A restricted to the numerical
// column space of A.
inline constexpr double kGramConditionCap = 1e12;

// h_i = a_i (A^T A)^+ a_i^T from a column-pivoted Householder QR of A.
// Columns whose pivot falls below max(rows, cols) * machine-epsilon relative to
// the largest pivot are treated as exactly dependent, so the scores sum to the
// numerical rank. Throws SingularGramError when the retained block is worse
// conditioned than kGramConditionCap, or when A is zero.
std::vector<double> exact_leverage_scores(const Matrix& a);

}  // namespace psa
