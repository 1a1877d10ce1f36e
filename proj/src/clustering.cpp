#include "psa/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>

#include "psa/errors.hpp"

namespace psa {

namespace {

constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
constexpr std::size_t kMaxConsecutiveReseeds = 10;
constexpr double kCenterTol = 1e-10;

enum class Norm { kSquaredL2, kL1, kPower };

// a^p for a >= 0, by repeated multiplication (and one sqrt) when 2p is a
// small integer; pow otherwise.
class PowerFn {
 public:
  explicit PowerFn(double p) : p_(p) {
    const double twice = 2.0 * p;
    if (twice == std::floor(twice) && twice <= 16.0) {
      whole_ = static_cast<int>(std::floor(p));
      half_ = twice != 2.0 * whole_;
      fast_ = true;
    }
  }
  double operator()(double a) const noexcept {
    if (!fast_) return std::pow(a, p_);
    double r = half_ ? std::sqrt(a) : 1.0;
    for (int i = 0; i < whole_; ++i) r *= a;
    return r;
  }

 private:
  double p_;
  int whole_ = 0;
  bool half_ = false;
  bool fast_ = false;
};

struct Metric {
  Norm norm = Norm::kSquaredL2;
  double p = 2.0;
  PowerFn power{2.0};

  Metric(Norm n, double exponent) : norm(n), p(exponent), power(exponent) {}

  double distance(std::span<const double> a, std::span<const double> b) const noexcept {
    return bounded_distance(a, b, std::numeric_limits<double>::infinity());
  }

  // Exact distance when it is below `bound`; otherwise any value >= bound.
  double bounded_distance(std::span<const double> a, std::span<const double> b,
                          double bound) const noexcept {
    double s = 0.0;
    switch (norm) {
      case Norm::kSquaredL2:
        return squared_distance(a, b);
      case Norm::kL1:
        for (std::size_t i = 0; i < a.size() && s < bound; ++i) s += std::abs(a[i] - b[i]);
        return s;
      case Norm::kPower:
        for (std::size_t i = 0; i < a.size() && s < bound; ++i) s += power(std::abs(a[i] - b[i]));
        return s;
    }
    return s;
  }

  double coordinate_cost(std::span<const double> values, double c) const noexcept {
    double s = 0.0;
    for (double x : values) {
      const double diff = std::abs(x - c);
      s += norm == Norm::kSquaredL2 ? diff * diff : norm == Norm::kL1 ? diff : power(diff);
    }
    return s;
  }
};

Metric metric_for(const PreScoreConfig& cfg) {
  switch (cfg.method) {
    case Method::kKMeans:
      return {Norm::kSquaredL2, 2.0};
    case Method::kKMedian:
      return {Norm::kL1, 1.0};
    case Method::kLpKMeans:
      if (!(cfg.p > 0.0) || !std::isfinite(cfg.p)) {
        throw InvalidArgument("LP_KMEANS needs a finite exponent p > 0");
      }
      if (cfg.p == 2.0) return {Norm::kSquaredL2, 2.0};
      if (cfg.p == 1.0) return {Norm::kL1, 1.0};
      return {Norm::kPower, cfg.p};
    default:
      throw InvalidArgument("lloyd_cluster: method " + std::string(to_string(cfg.method)) +
                            " is not a Lloyd clustering method");
  }
}

std::size_t seeding_trials(const PreScoreConfig& cfg, std::size_t k) {
  if (cfg.seeding_trials > 0) return cfg.seeding_trials;
  return 2 + static_cast<std::size_t>(std::floor(std::log(static_cast<double>(k))));
}

std::size_t validate(const Matrix& points, const PreScoreConfig& cfg) {
  if (points.rows() == 0 || points.cols() == 0) throw EmptyDimensionError("clustering: empty input");
  const std::size_t k = resolved_k(cfg, points.cols());
  if (k == 0) throw InvalidArgument("clustering: k must be >= 1");
  if (k > points.rows()) {
    throw InvalidArgument("clustering: k = " + std::to_string(k) + " exceeds n = " +
                          std::to_string(points.rows()));
  }
  if (cfg.restarts == 0) throw InvalidArgument("clustering: restarts must be >= 1");
  if (cfg.max_iters == 0) throw InvalidArgument("clustering: max_iters must be >= 1");
  if (!(cfg.tol >= 0.0)) throw InvalidArgument("clustering: tol must be >= 0");
  return k;
}

double serial_sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

std::vector<std::vector<std::size_t>> members_of(const std::vector<std::size_t>& assignment,
                                                 std::size_t k) {
  std::vector<std::vector<std::size_t>> members(k);
  for (std::size_t i = 0; i < assignment.size(); ++i) members[assignment[i]].push_back(i);
  return members;
}

// Picks the highest-cost point not yet used for a reseed (ties: lowest index).
std::size_t farthest_point(const std::vector<double>& cost, std::vector<bool>& used) {
  std::size_t best = kNone;
  for (std::size_t i = 0; i < cost.size(); ++i) {
    if (used[i]) continue;
    if (best == kNone || cost[i] > cost[best]) best = i;
  }
  if (best != kNone) used[best] = true;
  return best;
}

// Recomputes every non-empty centroid as the metric's coordinate-wise center.
// Empty clusters are reseeded when `allow_reseed` is set. Returns whether a
// reseed happened.
bool update_centroids(const Matrix& x, const std::vector<std::size_t>& assignment,
                      const std::vector<double>& cost, const Metric& metric, Matrix& centroids,
                      bool allow_reseed) {
  const auto members = members_of(assignment, centroids.rows());
  std::vector<bool> used(x.rows(), false);
  std::vector<double> values;
  bool reseeded = false;
  for (std::size_t c = 0; c < centroids.rows(); ++c) {
    auto centroid = centroids.row(c);
    if (members[c].empty()) {
      if (!allow_reseed) continue;
      const std::size_t far = farthest_point(cost, used);
      if (far == kNone) continue;
      const auto src = x.row(far);
      std::copy(src.begin(), src.end(), centroid.begin());
      reseeded = true;
      continue;
    }
    for (std::size_t j = 0; j < x.cols(); ++j) {
      values.clear();
      for (std::size_t i : members[c]) values.push_back(x(i, j));
      const double old = centroid[j];
      const double next = lp_center(values, metric.p, old);
      if (metric.norm == Norm::kPower &&
          metric.coordinate_cost(values, next) > metric.coordinate_cost(values, old)) {
        continue;
      }
      centroid[j] = next;
    }
  }
  return reseeded;
}

void assign_points(const Matrix& x, const Matrix& centroids, const Metric& metric,
                   std::vector<std::size_t>& assignment, std::vector<double>& cost, Exec exec) {
  for_each_index(x.rows(), exec, [&](std::size_t i) {
    const auto xi = x.row(i);
    std::size_t best = 0;
    double best_d = metric.distance(xi, centroids.row(0));
    for (std::size_t c = 1; c < centroids.rows(); ++c) {
      const double dist = metric.bounded_distance(xi, centroids.row(c), best_d);
      if (dist < best_d) {
        best_d = dist;
        best = c;
      }
    }
    assignment[i] = best;
    cost[i] = best_d;
  });
}

// Shared convergence rule: unchanged assignment, relative improvement below
// tol, or the iteration cap.
bool converged_now(const std::vector<std::size_t>& assignment,
                   const std::vector<std::size_t>& previous, double objective, double previous_obj,
                   double tol) {
  if (assignment == previous) return true;
  return std::isfinite(previous_obj) && previous_obj - objective <= tol * previous_obj;
}

Clustering lloyd_run(const Matrix& x, std::size_t k, const Metric& metric, Rng rng,
                     const PreScoreConfig& cfg, Exec exec) {
  const std::size_t n = x.rows();
  const auto seeds = distance_weighted_seeds(x, k, seeding_trials(cfg, k), rng);
  Clustering result;
  result.centroids = select_rows(x, seeds);
  result.assignment.assign(n, kNone);
  result.point_costs.assign(n, 0.0);
  std::vector<std::size_t> previous(n, kNone);
  double previous_obj = std::numeric_limits<double>::infinity();
  std::size_t consecutive_reseeds = 0;

  while (result.iterations < cfg.max_iters) {
    ++result.iterations;
    assign_points(x, result.centroids, metric, result.assignment, result.point_costs, exec);
    const double obj = serial_sum(result.point_costs);
    result.objective_trace.push_back(obj);
    if (converged_now(result.assignment, previous, obj, previous_obj, cfg.tol)) {
      result.converged = true;
      break;
    }
    previous_obj = obj;
    previous = result.assignment;
    const bool reseeded = update_centroids(x, result.assignment, result.point_costs, metric,
                                           result.centroids, /*allow_reseed=*/true);
    consecutive_reseeds = reseeded ? consecutive_reseeds + 1 : 0;
    if (consecutive_reseeds > kMaxConsecutiveReseeds) {
      throw ClusteringError("empty-cluster recovery exhausted after " +
                            std::to_string(kMaxConsecutiveReseeds) + " consecutive reseeds");
    }
  }

  update_centroids(x, result.assignment, result.point_costs, metric, result.centroids,
                   /*allow_reseed=*/false);
  for (std::size_t i = 0; i < n; ++i) {
    result.point_costs[i] = metric.distance(x.row(i), result.centroids.row(result.assignment[i]));
  }
  result.objective = serial_sum(result.point_costs);
  if (result.objective < result.objective_trace.back()) {
    result.objective_trace.push_back(result.objective);
  }
  return result;
}

template <class Run>
Clustering best_of_restarts(const PreScoreConfig& cfg, Run&& run) {
  std::optional<Clustering> best;
  const Rng root(cfg.seed);
  for (std::size_t r = 0; r < cfg.restarts; ++r) {
    Clustering c = run(root.split(r));
    c.restart = r;
    if (!best || c.objective < best->objective) best = std::move(c);
  }
  return std::move(*best);
}

// Kernel k-means state: each cluster is the uniform average of its members in
// feature space. `gram` stores kernel - 1 (via expm1), which leaves every
// feature-space distance unchanged and keeps precision for wide bandwidths.
struct KernelPartition {
  std::vector<std::vector<std::size_t>> members;
};

void kernel_distances(const Matrix& gram, const KernelPartition& part,
                      std::vector<std::size_t>& assignment, std::vector<double>& cost, Exec exec) {
  const std::size_t n = gram.rows();
  const std::size_t k = part.members.size();
  std::vector<double> within(k, 0.0);
  std::vector<std::size_t> owner(n, kNone);
  for (std::size_t c = 0; c < k; ++c) {
    const auto& m = part.members[c];
    if (m.empty()) continue;
    double s = 0.0;
    for (std::size_t y : m) {
      owner[y] = c;
      for (std::size_t z : m) s += gram(y, z);
    }
    const auto size = static_cast<double>(m.size());
    within[c] = s / (size * size);
  }
  for_each_index(n, exec, [&](std::size_t i) {
    std::vector<double> cross(k, 0.0);
    const auto gi = gram.row(i);
    for (std::size_t y = 0; y < n; ++y) {
      if (owner[y] != kNone) cross[owner[y]] += gi[y];
    }
    std::size_t best = kNone;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      if (part.members[c].empty()) continue;
      const auto size = static_cast<double>(part.members[c].size());
      const double dist = std::max(0.0, gi[i] - 2.0 * cross[c] / size + within[c]);
      if (dist < best_d) {
        best_d = dist;
        best = c;
      }
    }
    assignment[i] = best;
    cost[i] = best_d;
  });
}

Clustering kernel_run(const Matrix& x, const Matrix& gram, std::size_t k, Rng rng,
                      const PreScoreConfig& cfg, Exec exec) {
  const std::size_t n = x.rows();
  const auto seeds = distance_weighted_seeds(x, k, seeding_trials(cfg, k), rng);
  KernelPartition part;
  part.members.resize(k);
  for (std::size_t c = 0; c < k; ++c) part.members[c] = {seeds[c]};

  Clustering result;
  result.assignment.assign(n, kNone);
  result.point_costs.assign(n, 0.0);
  std::vector<std::size_t> previous(n, kNone);
  double previous_obj = std::numeric_limits<double>::infinity();
  std::size_t consecutive_reseeds = 0;

  while (result.iterations < cfg.max_iters) {
    ++result.iterations;
    kernel_distances(gram, part, result.assignment, result.point_costs, exec);
    const double obj = serial_sum(result.point_costs);
    result.objective_trace.push_back(obj);
    if (converged_now(result.assignment, previous, obj, previous_obj, cfg.tol)) {
      result.converged = true;
      break;
    }
    previous_obj = obj;
    previous = result.assignment;

    part.members = members_of(result.assignment, k);
    std::vector<bool> used(n, false);
    bool reseeded = false;
    for (std::size_t c = 0; c < k; ++c) {
      if (!part.members[c].empty()) continue;
      const std::size_t far = farthest_point(result.point_costs, used);
      if (far == kNone) continue;
      auto& old = part.members[result.assignment[far]];
      old.erase(std::find(old.begin(), old.end(), far));
      part.members[c] = {far};
      reseeded = true;
    }
    consecutive_reseeds = reseeded ? consecutive_reseeds + 1 : 0;
    if (consecutive_reseeds > kMaxConsecutiveReseeds) {
      throw ClusteringError("empty-cluster recovery exhausted after " +
                            std::to_string(kMaxConsecutiveReseeds) + " consecutive reseeds");
    }
  }

  // Final partition measured against its own feature-space means.
  part.members = members_of(result.assignment, k);
  std::vector<std::size_t> own(n);
  kernel_distances(gram, part, own, result.point_costs, exec);
  for (std::size_t i = 0; i < n; ++i) {
    if (own[i] != result.assignment[i]) {
      // Rare: a closer mean exists after the last update. Report the cost
      // against the point's own cluster, which is what the partition costs.
      const auto& m = part.members[result.assignment[i]];
      const auto size = static_cast<double>(m.size());
      double cross = 0.0;
      double within = 0.0;
      for (std::size_t y : m) {
        cross += gram(i, y);
        for (std::size_t z : m) within += gram(y, z);
      }
      result.point_costs[i] = std::max(0.0, gram(i, i) - 2.0 * cross / size + within / (size * size));
    }
  }
  result.objective = serial_sum(result.point_costs);
  if (result.objective < result.objective_trace.back()) {
    result.objective_trace.push_back(result.objective);
  }

  result.centroids = Matrix(k, x.cols());
  for (std::size_t c = 0; c < k; ++c) {
    if (part.members[c].empty()) continue;
    auto dst = result.centroids.row(c);
    for (std::size_t i : part.members[c]) {
      const auto xi = x.row(i);
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += xi[j];
    }
    for (double& v : dst) v /= static_cast<double>(part.members[c].size());
  }
  return result;
}

}  // namespace

std::vector<std::size_t> distance_weighted_seeds(const Matrix& points, std::size_t k,
                                                 std::size_t trials, Rng& rng) {
  const std::size_t n = points.rows();
  if (k == 0 || k > n) throw InvalidArgument("seeding: need 1 <= k <= n");
  if (trials == 0) trials = 1;

  std::vector<std::size_t> seeds;
  seeds.reserve(k);
  std::vector<bool> chosen(n, false);
  std::vector<double> d2(n);
  std::vector<double> candidate_d2(n);

  const auto add_seed = [&](std::size_t idx) {
    seeds.push_back(idx);
    chosen[idx] = true;
  };
  add_seed(rng.uniform_index(n));
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(points.row(i), points.row(seeds[0]));

  while (seeds.size() < k) {
    const double total = serial_sum(d2);
    std::size_t pick = kNone;
    if (!(total > 0.0)) {
      // Every point coincides with a center already.
      for (std::size_t i = 0; i < n && pick == kNone; ++i) {
        if (!chosen[i]) pick = i;
      }
      add_seed(pick);
      continue;
    }
    double best_potential = std::numeric_limits<double>::infinity();
    std::vector<double> best_d2;
    for (std::size_t t = 0; t < trials; ++t) {
      const double u = rng.uniform() * total;
      double cumulative = 0.0;
      std::size_t idx = kNone;
      for (std::size_t i = 0; i < n; ++i) {
        cumulative += d2[i];
        if (d2[i] > 0.0 && u < cumulative) {
          idx = i;
          break;
        }
      }
      if (idx == kNone) {
        // u landed on the rounding tail; take the last point with mass.
        for (std::size_t i = n; i-- > 0;) {
          if (d2[i] > 0.0) {
            idx = i;
            break;
          }
        }
      }
      const auto candidate = points.row(idx);
      for (std::size_t i = 0; i < n; ++i) {
        candidate_d2[i] = std::min(d2[i], squared_distance(points.row(i), candidate));
      }
      const double potential = serial_sum(candidate_d2);
      if (potential < best_potential) {
        best_potential = potential;
        pick = idx;
        best_d2 = candidate_d2;
      }
    }
    add_seed(pick);
    d2 = std::move(best_d2);
  }
  return seeds;
}

double lp_center(std::span<const double> values, double p, double hint) {
  if (values.empty()) throw InvalidArgument("lp_center: no values");
  const std::size_t m = values.size();
  if (p == 2.0) {
    double s = 0.0;
    for (double x : values) s += x;
    return s / static_cast<double>(m);
  }
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  if (p == 1.0) {
    return m % 2 == 1 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
  }
  const PowerFn power(p);
  const PowerFn power_minus_one(p - 1.0);
  const auto cost = [&](double c) {
    double s = 0.0;
    for (double x : sorted) s += power(std::abs(x - c));
    return s;
  };
  if (p < 1.0) {
    // Concave between consecutive data points, so a data point is optimal.
    double best = sorted.front();
    double best_cost = cost(best);
    for (std::size_t i = 1; i < m; ++i) {
      if (sorted[i] == sorted[i - 1]) continue;
      const double c = cost(sorted[i]);
      if (c < best_cost) {
        best_cost = c;
        best = sorted[i];
      }
    }
    return best;
  }

  // p > 1: the derivative g is increasing. Keep a sign bracket [lo, hi] and
  // take Newton steps when they land inside it, Illinois false-position steps
  // otherwise (Newton stalls at data points when p < 2, where g' is infinite).
  const auto derivative = [&](double c, double* curvature) {
    double grad = 0.0;
    double curv = 0.0;
    for (double x : sorted) {
      const double diff = c - x;
      const double a = std::abs(diff);
      if (a == 0.0) {
        if (p < 2.0) curv = std::numeric_limits<double>::infinity();
        continue;
      }
      const double t = power_minus_one(a);
      grad += diff > 0.0 ? t : -t;
      curv += t / a;
    }
    *curvature = curv * (p - 1.0);
    return grad;
  };
  double lo = sorted.front();
  double hi = sorted.back();
  if (lo == hi) return lo;
  double unused = 0.0;
  double g_lo = derivative(lo, &unused);
  double g_hi = derivative(hi, &unused);
  double c = std::clamp(hint, lo, hi);
  int stale_side = 0;  // -1 or +1 when the same end moved twice in a row
  for (int iter = 0; iter < 200; ++iter) {
    double curv = 0.0;
    const double grad = derivative(c, &curv);
    if (grad == 0.0) return c;
    if (grad > 0.0) {
      hi = c;
      g_hi = grad;
      if (stale_side == 1) g_lo *= 0.5;
      stale_side = 1;
    } else {
      lo = c;
      g_lo = grad;
      if (stale_side == -1) g_hi *= 0.5;
      stale_side = -1;
    }
    const double scale = std::max(1.0, std::abs(c));
    if (hi - lo <= kCenterTol * scale) return 0.5 * (lo + hi);
    double next = lo - g_lo * (hi - lo) / (g_hi - g_lo);
    if (std::isfinite(curv) && curv > 0.0) {
      const double newton = c - grad / curv;
      if (newton > lo && newton < hi) next = newton;
    }
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    const bool done = std::abs(next - c) <= kCenterTol * scale;
    c = next;
    if (done) break;
  }
  return c;
}

Clustering lloyd_cluster(const Matrix& points, const PreScoreConfig& cfg, Exec exec) {
  const std::size_t k = validate(points, cfg);
  const Metric metric = metric_for(cfg);
  return best_of_restarts(cfg, [&](Rng rng) { return lloyd_run(points, k, metric, rng, cfg, exec); });
}

Clustering kernel_kmeans_cluster(const Matrix& points, const PreScoreConfig& cfg, Exec exec) {
  const std::size_t k = validate(points, cfg);
  if (!(cfg.kernel_bandwidth > 0.0) || !std::isfinite(cfg.kernel_bandwidth)) {
    throw InvalidArgument("kernel_kmeans_cluster: bandwidth must be finite and > 0");
  }
  const double scale = -1.0 / (2.0 * cfg.kernel_bandwidth * cfg.kernel_bandwidth);
  Matrix gram = pairwise_sq_dist(points, points, exec);
  for (double& g : gram.data()) g = std::expm1(g * scale);
  return best_of_restarts(cfg, [&](Rng rng) { return kernel_run(points, gram, k, rng, cfg, exec); });
}

Clustering cluster(const Matrix& points, const PreScoreConfig& cfg, Exec exec) {
  if (cfg.method == Method::kKernelKMeans) return kernel_kmeans_cluster(points, cfg, exec);
  return lloyd_cluster(points, cfg, exec);
}

}  // namespace psa
