#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "psa/matrix.hpp"

namespace psa {

enum class Method { kKMeans, kKMedian, kKernelKMeans, kLpKMeans, kLeverage, kLeverageExact };

std::string_view to_string(Method m) noexcept;
// Accepts the upper-case names KMEANS, KMEDIAN, KERNEL_KMEANS, LP_KMEANS,
// LEVERAGE and LEVERAGE_EXACT. Throws ConfigError otherwise.
Method parse_method(std::string_view name);

bool is_clustering(Method m) noexcept;

// How clustering methods turn a partition into a key ranking.
enum class ClusterSelection {
  // Keys in smaller clusters first, then by distance to their centroid.
  kSmallestClusterFirst,
  // One global ascending sort of distance to the assigned centroid.
  kGlobalDistance,
};

std::string_view to_string(ClusterSelection s) noexcept;
ClusterSelection parse_cluster_selection(std::string_view name);

struct PreScoreConfig {
  Method method = Method::kKMeans;
  std::size_t k = 0;  // 0 selects cols + 1
  std::size_t s = 1;
  double sigma = 0.0;
  double p = 2.0;
  double kernel_bandwidth = 1.0;
  std::size_t restarts = 5;
  std::size_t max_iters = 100;
  double tol = 1e-9;
  std::uint64_t seed = 0;
  std::size_t sketch_rows = 0;     // 0 selects 8 * cols
  std::size_t seeding_trials = 0;  // 0 selects 2 + floor(ln k)
  ClusterSelection selection = ClusterSelection::kSmallestClusterFirst;
};

// k after resolving the `0 means cols + 1` default.
std::size_t resolved_k(const PreScoreConfig& cfg, std::size_t cols) noexcept;

struct Clustering {
  std::vector<std::size_t> assignment;
  Matrix centroids;  // k x d, input-space location of each cluster
  // Cost of each point against its own centroid, in the method's metric.
  std::vector<double> point_costs;
  double objective = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  // Assignment-step objective per iteration of the winning restart, followed
  // by the objective after the final centroid update. Non-increasing.
  std::vector<double> objective_trace;
  std::size_t restart = 0;
};

struct ScoredKeySet {
  std::vector<std::size_t> indices;
  // Clustering methods: distance to the assigned centroid. Leverage methods:
  // the (approximate) leverage score, in descending order.
  std::vector<double> scores;
  // Clustering methods only: size of the cluster each selected key sits in.
  std::vector<std::size_t> cluster_sizes;
  Method method = Method::kKMeans;

  std::size_t size() const noexcept { return indices.size(); }
};

}  // namespace psa
