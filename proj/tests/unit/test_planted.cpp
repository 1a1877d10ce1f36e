#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "oracles.hpp"
#include "psa/clustering.hpp"
#include "psa/errors.hpp"
#include "psa/exact_attention.hpp"
#include "psa/planted.hpp"
#include "psa/rng.hpp"

using psa::Matrix;

namespace {

psa::PlantedConfig base(std::size_t n, std::size_t d, double eps, std::uint64_t seed) {
  psa::PlantedConfig pc;
  pc.n = n;
  pc.d = d;
  pc.epsilon = eps;
  pc.seed = seed;
  return pc;
}

}  // namespace

TEST(Planted, ShapeLabelsAndOrthonormalBasis) {
  const auto inst = psa::generate_planted(base(400, 5, 0.2, 1));
  EXPECT_EQ(inst.matrix.rows(), 400u);
  EXPECT_EQ(inst.matrix.cols(), 5u);
  std::map<std::size_t, std::size_t> counts;
  for (std::size_t l : inst.labels) ++counts[l];
  EXPECT_EQ(counts[0], 400u - 25u);
  for (std::size_t j = 1; j <= 5; ++j) EXPECT_EQ(counts[j], 5u);
  const Matrix g = psa::matmul_transposed(inst.basis, inst.basis);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(g(i, j), i == j ? 1.0 : 0.0, 1e-12);
  }
}

TEST(Planted, SameSeedSameInstance) {
  const auto a = psa::generate_planted(base(300, 4, 0.25, 9));
  const auto b = psa::generate_planted(base(300, 4, 0.25, 9));
  EXPECT_EQ(a.matrix, b.matrix);
  EXPECT_EQ(a.labels, b.labels);
}

TEST(Planted, NoiselessLimit) {
  auto cfg = base(200, 4, 0.25, 3);
  cfg.c_S = 0.0;
  cfg.c_N = 0.0;
  const auto inst = psa::generate_planted(cfg);
  for (std::size_t i = 0; i < inst.matrix.rows(); ++i) {
    const auto row = inst.matrix.row(i);
    if (inst.labels[i] == 0) {
      for (double x : row) EXPECT_EQ(x, 0.0);
    } else {
      const auto v = inst.basis.row(inst.labels[i] - 1);
      for (std::size_t c = 0; c < row.size(); ++c) EXPECT_EQ(row[c], v[c]);
    }
  }
  cfg.normalize = true;
  EXPECT_THROW(psa::generate_planted(cfg), psa::DegenerateRowError);
}

TEST(Planted, LeverageSeparation) {
  const auto inst = psa::generate_planted(base(1000, 8, 0.1, 11));
  const auto h = psa::exact_leverage_scores(inst.matrix);
  double min_signal = 1e300, max_noise = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (inst.labels[i] == 0) {
      max_noise = std::max(max_noise, h[i]);
    } else {
      min_signal = std::min(min_signal, h[i]);
    }
  }
  EXPECT_GT(min_signal, 10.0 * max_noise);
}

TEST(Planted, SingletonRegime) {
  const auto inst = psa::generate_planted(base(1000, 8, 1.0, 5));
  psa::PreScoreConfig cfg;
  cfg.k = 9;
  cfg.seed = 5;
  cfg.restarts = 20;
  const auto c = psa::lloyd_cluster(inst.matrix, cfg);
  std::map<std::size_t, std::size_t> sizes;
  for (std::size_t a : c.assignment) ++sizes[a];
  for (std::size_t i = 0; i < inst.labels.size(); ++i) {
    if (inst.labels[i] != 0) EXPECT_EQ(sizes[c.assignment[i]], 1u);
  }
}

TEST(Planted, ValidationErrors) {
  EXPECT_THROW(psa::generate_planted(base(100, 8, 0.1, 0)), psa::InvalidArgument);  // n < 4dm
  EXPECT_THROW(psa::generate_planted(base(1000, 8, 0.0, 0)), psa::InvalidArgument);
  EXPECT_THROW(psa::generate_planted(base(1000, 8, 1.5, 0)), psa::InvalidArgument);
  auto cfg = base(1000, 8, 0.1, 0);
  cfg.c_N = -0.1;
  EXPECT_THROW(psa::generate_planted(cfg), psa::InvalidArgument);
  EXPECT_EQ(psa::copies_per_direction(0.1), 10u);
  EXPECT_EQ(psa::copies_per_direction(0.3), 4u);
}

TEST(Counterexample, PairwiseDistances) {
  psa::Rng rng(0);
  const double big = 100.0;
  const auto inst = psa::generate_counterexample(20, 4, big, rng);
  const Matrix d = psa::pairwise_sq_dist(inst.matrix, inst.matrix);
  for (std::size_t i = 0; i < 20; ++i) {
    for (std::size_t j = 0; j < 20; ++j) {
      const bool si = inst.labels[i] != 0, sj = inst.labels[j] != 0;
      if (i == j) continue;
      if (si && sj) EXPECT_EQ(d(i, j), 2.0);
      if (si != sj) EXPECT_EQ(d(i, j), 1.0 + big * big);
      if (!si && !sj) EXPECT_EQ(d(i, j), 0.0);
    }
  }
}

TEST(Counterexample, CrossCorrelationsVanish) {
  psa::Rng rng(0);
  const auto inst = psa::generate_counterexample(30, 6, 100.0, rng);
  for (std::size_t i = 0; i < 30; ++i) {
    for (std::size_t j = 0; j < 30; ++j) {
      if ((inst.labels[i] != 0) != (inst.labels[j] != 0)) {
        EXPECT_EQ(psa::dot(inst.matrix.row(i), inst.matrix.row(j)), 0.0);
      }
    }
  }
}

TEST(Counterexample, NormalizedLeverage) {
  psa::Rng rng(0);
  const std::size_t n = 50, d = 8;
  const auto inst = psa::generate_counterexample(n, d, 100.0, rng);
  // Columns past d/2 + 1 are zero; restrict to the live columns.
  const Matrix normalized = psa::normalize_rows(inst.matrix);
  Matrix live(n, d / 2 + 1);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < live.cols(); ++c) live(i, c) = normalized(i, c);
  }
  const auto h = oracle::leverage(live);
  for (std::size_t i = 0; i < n; ++i) {
    EXPECT_NEAR(h[i], inst.labels[i] != 0 ? 1.0 : 1.0 / static_cast<double>(n - d / 2), 1e-12);
  }
  EXPECT_THROW(psa::generate_counterexample(10, 5, 100.0, rng), psa::InvalidArgument);
  EXPECT_THROW(psa::generate_counterexample(10, 4, 0.5, rng), psa::InvalidArgument);
}

TEST(CostGap, GroundTruthIsZero) {
  const auto inst = psa::generate_planted(base(500, 4, 0.1, 2));
  EXPECT_NEAR(psa::planted_cost_gap(inst, inst.labels), 0.0, 1e-12);
}

TEST(CostGap, MovingASignalRowCostsAboutOne) {
  auto cfg = base(400, 4, 0.25, 6);
  cfg.c_S = 0.0;
  cfg.c_N = 0.01;
  cfg.normalize = true;
  const auto inst = psa::generate_planted(cfg);
  auto moved = inst.labels;
  const auto it = std::find_if(moved.begin(), moved.end(), [](std::size_t l) { return l != 0; });
  *it = 0;
  EXPECT_GT(psa::planted_cost_gap(inst, moved), 0.5);
}

TEST(CostGap, IsolatingSIsCostlierOnCounterexample) {
  psa::Rng rng(0);
  const std::size_t n = 1000, d = 8, half = d / 2;
  const auto inst = psa::generate_counterexample(n, d, 100.0, rng);
  // k = d/2 clusters. Isolating: each S point alone, S^c merged into one of them.
  std::vector<std::size_t> isolating(n), merged(n);
  for (std::size_t i = 0; i < n; ++i) {
    isolating[i] = i < half ? i : 0;
    // S^c alone; S_0 and S_1 share a cluster; the rest of S alone.
    merged[i] = i < half ? (i == 0 ? 1 : i) : 0;
  }
  EXPECT_GT(psa::partition_cost(inst.matrix, isolating), psa::partition_cost(inst.matrix, merged));
  EXPECT_GT(psa::planted_cost_gap(inst, isolating), psa::planted_cost_gap(inst, merged));
}

TEST(CostGap, LengthMismatch) {
  const auto inst = psa::generate_planted(base(500, 4, 0.1, 2));
  EXPECT_THROW(psa::planted_cost_gap(inst, std::vector<std::size_t>(3, 0)), psa::DimensionError);
}
