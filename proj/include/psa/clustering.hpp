#pragma once

#include <span>
#include <vector>

#include "psa/prescore_types.hpp"

namespace psa {

// Lloyd-style clustering for KMEANS (squared l2, mean centroids), KMEDIAN
// (l1, coordinate-wise median) and LP_KMEANS (sum |x - c|^p, coordinate-wise
// minimizer of the p-th power cost). LP_KMEANS with p == 2 or p == 1 runs the
// KMEANS or KMEDIAN path exactly.
//
// Each restart seeds with greedy squared-distance-weighted sampling from
// Rng(cfg.seed).split(restart); the restart with the lowest objective wins,
// ties going to the lower restart index. Empty clusters are reseeded at the
// point with the largest cost; more than 10 consecutive iterations needing a
// reseed throws ClusteringError.
Clustering lloyd_cluster(const Matrix& points, const PreScoreConfig& cfg,
                         Exec exec = Exec::kParallel);

// Kernel k-means with the Gaussian kernel exp(-||x - y||^2 / (2 h^2)), h =
// cfg.kernel_bandwidth. Centroids are implicit feature-space means; the
// returned `centroids` holds input-space cluster means. Seeding and restarts
// match lloyd_cluster.
Clustering kernel_kmeans_cluster(const Matrix& points, const PreScoreConfig& cfg,
                                 Exec exec = Exec::kParallel);

// Dispatches on cfg.method to one of the two functions above.
Clustering cluster(const Matrix& points, const PreScoreConfig& cfg, Exec exec = Exec::kParallel);

// Greedy D^2 seeding: each new center is the best (lowest resulting
// potential) of `trials` candidates drawn with probability proportional to
// the squared distance to the nearest chosen center. Returns row indices.
std::vector<std::size_t> distance_weighted_seeds(const Matrix& points, std::size_t k,
                                                 std::size_t trials, Rng& rng);

// Minimizer over c of sum_i |values_i - c|^p; mean for p == 2, median for
// p == 1. For p > 1 a bracketed Newton iteration on the derivative; for p < 1
// the best data point (the cost is concave between data points). `hint` is a
// starting point inside the bracket for p > 1.
double lp_center(std::span<const double> values, double p, double hint);

}  // namespace psa
