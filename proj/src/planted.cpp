#include "psa/planted.hpp"

#include <cmath>
#include <numeric>
#include <string>
#include <unordered_map>

#include "eigen_bridge.hpp"
#include "psa/errors.hpp"

namespace psa {

namespace {

Matrix random_orthonormal_basis(std::size_t d, Rng& rng) {
  const Matrix g = gaussian_matrix(rng, d, d, 0.0, 1.0);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(detail::as_eigen(g));
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  // Fixing sign(diag R) > 0 makes Q Haar distributed.
  for (Eigen::Index j = 0; j < q.cols(); ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  Matrix basis(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      basis(i, j) = q(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
    }
  }
  return basis;
}

}  // namespace

std::size_t copies_per_direction(double epsilon) {
  if (!(epsilon > 0.0 && epsilon <= 1.0)) {
    throw InvalidArgument("planted: epsilon must lie in (0, 1]");
  }
  // The slack keeps 1 / 0.1 from rounding up to 11.
  return static_cast<std::size_t>(std::ceil(1.0 / epsilon - 1e-9));
}

double signal_sigma(const PlantedConfig& cfg) {
  return std::sqrt(cfg.c_S / static_cast<double>(cfg.d));
}

double noise_sigma(const PlantedConfig& cfg) {
  return std::sqrt(cfg.c_N / (static_cast<double>(cfg.n) * cfg.epsilon));
}

void validate(const PlantedConfig& cfg) {
  if (cfg.d == 0) throw InvalidArgument("planted: d must be >= 1");
  const std::size_t m = copies_per_direction(cfg.epsilon);
  if (cfg.n < 4 * cfg.d * m) {
    throw InvalidArgument("planted: n = " + std::to_string(cfg.n) + " must be >= 4 d m = " +
                          std::to_string(4 * cfg.d * m));
  }
  if (!(cfg.c_S >= 0.0) || !std::isfinite(cfg.c_S) || !(cfg.c_N >= 0.0) ||
      !std::isfinite(cfg.c_N)) {
    throw InvalidArgument("planted: c_S and c_N must be finite and >= 0");
  }
}

PlantedInstance generate_planted(const PlantedConfig& cfg, Rng& rng) {
  validate(cfg);
  const std::size_t n = cfg.n;
  const std::size_t d = cfg.d;
  const std::size_t m = copies_per_direction(cfg.epsilon);

  PlantedInstance inst;
  inst.config = cfg;
  inst.basis = random_orthonormal_basis(d, rng);

  std::vector<std::size_t> position(n);
  std::iota(position.begin(), position.end(), std::size_t{0});
  for (std::size_t i = n - 1; i > 0; --i) {
    std::swap(position[i], position[static_cast<std::size_t>(rng.uniform_index(i + 1))]);
  }

  const double sigma_s = signal_sigma(cfg);
  const double sigma_n = noise_sigma(cfg);
  inst.matrix = Matrix(n, d);
  inst.labels.assign(n, 0);
  // Logical row t: the first d m rows are the signal copies, grouped by
  // direction; the rest are noise.
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t i = position[t];
    auto row = inst.matrix.row(i);
    if (t < d * m) {
      const std::size_t j = t / m;
      inst.labels[i] = j + 1;
      const auto v = inst.basis.row(j);
      for (std::size_t c = 0; c < d; ++c) row[c] = v[c] + sigma_s * rng.normal();
    } else {
      for (std::size_t c = 0; c < d; ++c) row[c] = sigma_n * rng.normal();
    }
  }
  if (cfg.normalize) inst.matrix = normalize_rows(inst.matrix);
  return inst;
}

PlantedInstance generate_planted(const PlantedConfig& cfg) {
  Rng rng(cfg.seed);
  return generate_planted(cfg, rng);
}

PlantedInstance generate_counterexample(std::size_t n, std::size_t d, double big_norm, Rng&) {
  if (d < 2 || d % 2 != 0) throw InvalidArgument("counterexample: d must be even and >= 2");
  const std::size_t half = d / 2;
  if (n <= half) throw InvalidArgument("counterexample: n must exceed d / 2");
  if (!(big_norm > 1.0) || !std::isfinite(big_norm)) {
    throw InvalidArgument("counterexample: big_norm must be finite and > 1");
  }
  PlantedInstance inst;
  inst.config.n = n;
  inst.config.d = d;
  inst.config.epsilon = 1.0;
  inst.config.c_S = 0.0;
  inst.config.c_N = 0.0;
  inst.basis = Matrix::identity(d);
  inst.matrix = Matrix(n, d);
  inst.labels.assign(n, 0);
  for (std::size_t i = 0; i < half; ++i) {
    inst.matrix(i, i) = 1.0;
    inst.labels[i] = i + 1;
  }
  for (std::size_t i = half; i < n; ++i) inst.matrix(i, half) = big_norm;
  return inst;
}

double partition_cost(const Matrix& points, const std::vector<std::size_t>& assignment) {
  if (assignment.size() != points.rows()) {
    throw DimensionError("partition_cost: " + std::to_string(assignment.size()) +
                         " labels for " + std::to_string(points.rows()) + " rows");
  }
  const std::size_t d = points.cols();
  std::unordered_map<std::size_t, std::size_t> slot;
  for (std::size_t a : assignment) slot.emplace(a, slot.size());
  Matrix means(slot.size(), d);
  std::vector<std::size_t> counts(slot.size(), 0);
  for (std::size_t i = 0; i < points.rows(); ++i) {
    const std::size_t c = slot.at(assignment[i]);
    ++counts[c];
    for (std::size_t j = 0; j < d; ++j) means(c, j) += points(i, j);
  }
  for (std::size_t c = 0; c < counts.size(); ++c) {
    for (std::size_t j = 0; j < d; ++j) means(c, j) /= static_cast<double>(counts[c]);
  }
  double cost = 0.0;
  for (std::size_t i = 0; i < points.rows(); ++i) {
    cost += squared_distance(points.row(i), means.row(slot.at(assignment[i])));
  }
  return cost;
}

double planted_cost_gap(const PlantedInstance& inst, const std::vector<std::size_t>& assignment) {
  if (assignment.size() != inst.labels.size()) {
    throw DimensionError("planted_cost_gap: assignment length " +
                         std::to_string(assignment.size()) + " != label length " +
                         std::to_string(inst.labels.size()));
  }
  return partition_cost(inst.matrix, assignment) - partition_cost(inst.matrix, inst.labels);
}

double planted_cost_gap(const PlantedInstance& inst, const Clustering& clustering) {
  return planted_cost_gap(inst, clustering.assignment);
}

}  // namespace psa
