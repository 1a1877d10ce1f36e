#pragma once

#include <cstdint>
#include <vector>

#include "psa/prescore_types.hpp"

namespace psa {

struct PlantedConfig {
  std::size_t n = 1000;
  std::size_t d = 8;
  double epsilon = 0.1;
  double c_S = 0.1;  // signal rows get N(0, c_S / d) noise
  double c_N = 0.1;  // noise rows are N(0, c_N / (n * epsilon))
  bool normalize = false;
  std::uint64_t seed = 0;
};

struct PlantedInstance {
  Matrix matrix;                    // n x d
  std::vector<std::size_t> labels;  // 0 for noise rows, j in 1..d for copies of v_j
  Matrix basis;                     // d x d, row j-1 is v_j
  PlantedConfig config;
};

// Copies per direction, ceil(1 / epsilon).
std::size_t copies_per_direction(double epsilon);

double signal_sigma(const PlantedConfig& cfg);
double noise_sigma(const PlantedConfig& cfg);

// Throws InvalidArgument unless epsilon lies in (0, 1], n >= 4 d m, and the
// noise constants are finite and non-negative. c == 0 is the noiseless limit.
void validate(const PlantedConfig& cfg);

// d orthonormal directions v_j (QR of a Gaussian), m noisy copies of each and
// n - d m noise rows, shuffled into random positions. With cfg.normalize the
// rows are scaled to unit norm after the noise is added; a zero row then
// throws DegenerateRowError.
PlantedInstance generate_planted(const PlantedConfig& cfg, Rng& rng);

// Uses Rng(cfg.seed).
PlantedInstance generate_planted(const PlantedConfig& cfg);

// Rows 0..d/2-1 are e_1..e_{d/2} (labels 1..d/2); the other n - d/2 rows all
// equal big_norm * e_{d/2+1} (label 0). Deterministic; `rng` is unused but
// kept so every generator has the same shape.
PlantedInstance generate_counterexample(std::size_t n, std::size_t d, double big_norm, Rng& rng);

// Squared-l2 cost of `assignment` with per-cluster mean centroids.
double partition_cost(const Matrix& points, const std::vector<std::size_t>& assignment);

// partition_cost(clustering) - partition_cost(ground truth labels).
double planted_cost_gap(const PlantedInstance& inst, const Clustering& clustering);
double planted_cost_gap(const PlantedInstance& inst, const std::vector<std::size_t>& assignment);

}  // namespace psa
