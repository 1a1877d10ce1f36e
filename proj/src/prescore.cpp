#include "psa/prescore.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <string>

#include "psa/errors.hpp"
#include "psa/exact_attention.hpp"

namespace psa {

namespace {

constexpr std::array<std::pair<Method, std::string_view>, 6> kMethodNames{{
    {Method::kKMeans, "KMEANS"},
    {Method::kKMedian, "KMEDIAN"},
    {Method::kKernelKMeans, "KERNEL_KMEANS"},
    {Method::kLpKMeans, "LP_KMEANS"},
    {Method::kLeverage, "LEVERAGE"},
    {Method::kLeverageExact, "LEVERAGE_EXACT"},
}};

}  // namespace

std::string_view to_string(Method m) noexcept {
  for (const auto& [method, name] : kMethodNames) {
    if (method == m) return name;
  }
  return "UNKNOWN";
}

Method parse_method(std::string_view name) {
  for (const auto& [method, known] : kMethodNames) {
    if (known == name) return method;
  }
  throw ConfigError("unknown method '" + std::string(name) + "'");
}

bool is_clustering(Method m) noexcept {
  return m != Method::kLeverage && m != Method::kLeverageExact;
}

std::string_view to_string(ClusterSelection s) noexcept {
  return s == ClusterSelection::kGlobalDistance ? "GLOBAL_DISTANCE" : "SMALLEST_CLUSTER_FIRST";
}

ClusterSelection parse_cluster_selection(std::string_view name) {
  if (name == "GLOBAL_DISTANCE") return ClusterSelection::kGlobalDistance;
  if (name == "SMALLEST_CLUSTER_FIRST") return ClusterSelection::kSmallestClusterFirst;
  throw ConfigError("unknown cluster selection '" + std::string(name) + "'");
}

std::size_t resolved_k(const PreScoreConfig& cfg, std::size_t cols) noexcept {
  return cfg.k == 0 ? cols + 1 : cfg.k;
}

void validate(const PreScoreConfig& cfg, std::size_t n, std::size_t d) {
  if (n == 0 || d == 0) throw EmptyDimensionError("prescore: empty key matrix");
  if (cfg.s == 0 || cfg.s > n) {
    throw InvalidArgument("prescore: retain count s = " + std::to_string(cfg.s) +
                          " must lie in [1, " + std::to_string(n) + "]");
  }
  if (!(cfg.sigma >= 0.0) || !std::isfinite(cfg.sigma)) {
    throw InvalidArgument("prescore: sigma must be finite and >= 0");
  }
  if (is_clustering(cfg.method)) {
    const std::size_t k = resolved_k(cfg, d);
    if (k > n) {
      throw InvalidArgument("prescore: k = " + std::to_string(k) + " exceeds n = " +
                            std::to_string(n));
    }
    if (cfg.restarts == 0) throw InvalidArgument("prescore: restarts must be >= 1");
  }
}

ScoredKeySet prescore(const Matrix& keys, const PreScoreConfig& cfg, Rng& rng, Exec exec) {
  const std::size_t n = keys.rows();
  const std::size_t d = keys.cols();
  validate(cfg, n, d);

  Matrix perturbed;
  if (cfg.sigma > 0.0) perturbed = add(keys, gaussian_matrix(rng, n, d, 0.0, cfg.sigma));
  const Matrix& work = cfg.sigma > 0.0 ? perturbed : keys;

  ScoredKeySet result;
  result.method = cfg.method;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  if (is_clustering(cfg.method)) {
    const Clustering c = cluster(work, cfg, exec);
    std::vector<std::size_t> sizes(resolved_k(cfg, d), 0);
    for (std::size_t a : c.assignment) ++sizes[a];
    const auto& dist = c.point_costs;
    const bool by_size = cfg.selection == ClusterSelection::kSmallestClusterFirst;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (by_size) {
        const std::size_t sa = sizes[c.assignment[a]];
        const std::size_t sb = sizes[c.assignment[b]];
        if (sa != sb) return sa < sb;
      }
      return dist[a] < dist[b];
    });
    order.resize(cfg.s);
    for (std::size_t i : order) {
      result.scores.push_back(dist[i]);
      result.cluster_sizes.push_back(sizes[c.assignment[i]]);
    }
  } else {
    std::vector<double> h;
    if (cfg.method == Method::kLeverageExact) {
      h = exact_leverage_scores(work);
    } else {
      const std::size_t sketch_rows = cfg.sketch_rows == 0 ? 8 * d : cfg.sketch_rows;
      h = approx_leverage_scores(work, sketch_rows, rng);
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return h[a] > h[b]; });
    order.resize(cfg.s);
    for (std::size_t i : order) result.scores.push_back(h[i]);
  }
  result.indices = std::move(order);
  return result;
}

}  // namespace psa
