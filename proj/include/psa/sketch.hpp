#pragma once

#include <cstddef>
#include <vector>

#include "psa/matrix.hpp"

namespace psa {

// Subsampled randomized Hadamard transform applied to the rows of `m`:
// pad to N = 2^ceil(log2 rows) rows, flip row signs at random, apply the
// orthonormal Walsh-Hadamard transform down each column, then keep
// `sketch_rows` distinct rows chosen uniformly, scaled by sqrt(N / sketch_rows).
// sketch_rows is capped at N; with sketch_rows == N the sketch is an
// orthogonal transform of the padded matrix.
Matrix srht_sketch(const Matrix& m, std::size_t sketch_rows, Rng& rng);

// In-place orthonormal fast Walsh-Hadamard transform; size must be a power of two.
void fwht(std::span<double> values);

// h~_i = ||k_i R^{-1}||^2 where R is the triangular factor of a Householder QR
// of srht_sketch(k). Cost O(n d log n + sketch_rows d^2).
// Throws InvalidArgument when sketch_rows < cols and SingularGramError when
// the sketch is rank deficient.
std::vector<double> approx_leverage_scores(const Matrix& k, std::size_t sketch_rows, Rng& rng);

}  // namespace psa
