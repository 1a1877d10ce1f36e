#include <gtest/gtest.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <set>

#include "oracles.hpp"
#include "psa/errors.hpp"
#include "psa/exact_attention.hpp"
#include "psa/hyper_attention.hpp"
#include "psa/metrics.hpp"
#include "psa/planted.hpp"
#include "psa/rng.hpp"

using psa::Matrix;

namespace {

struct Qkv {
  Matrix q, k, v;
};

Qkv random_qkv(std::uint64_t seed, std::size_t n, std::size_t d, double scale = 0.5) {
  psa::Rng rng(seed);
  Qkv r;
  r.q = psa::gaussian_matrix(rng, n, d, 0.0, scale);
  r.k = psa::gaussian_matrix(rng, n, d, 0.0, scale);
  r.v = psa::gaussian_matrix(rng, n, d, 0.0, 1.0);
  return r;
}

psa::PlantedInstance planted(std::size_t n, std::size_t d, double eps, std::uint64_t seed) {
  psa::PlantedConfig pc;
  pc.n = n;
  pc.d = d;
  pc.epsilon = eps;
  pc.seed = seed;
  return psa::generate_planted(pc);
}

}  // namespace

TEST(Lsh, IdenticalRowsShareCodes) {
  psa::Rng rng(3);
  const Matrix m{{0.3, -1.2, 2.0}, {0.3, -1.2, 2.0}};
  const auto c = psa::angular_lsh_codes(m, 16, rng);
  EXPECT_EQ(c[0], c[1]);
}

TEST(Lsh, NegationComplementsCode) {
  psa::Rng rng(4);
  const Matrix m{{0.7, 0.1, -0.4, 1.1}, {-0.7, -0.1, 0.4, -1.1}};
  const auto c = psa::angular_lsh_codes(m, 8, rng);
  EXPECT_EQ(c[0] ^ c[1], 0xFFu);
}

TEST(Lsh, OrthogonalRowsCollideHalfTheTime) {
  const Matrix m{{1, 0}, {0, 1}};
  int disagree = 0;
  for (std::uint64_t seed = 0; seed < 10000; ++seed) {
    psa::Rng rng(seed);
    const auto c = psa::angular_lsh_codes(m, 1, rng);
    disagree += c[0] != c[1];
  }
  EXPECT_NEAR(disagree / 10000.0, 0.5, 0.02);
}

TEST(Lsh, BitCountChecked) {
  psa::Rng rng(0);
  EXPECT_THROW(psa::angular_lsh_codes(Matrix{{1.0}}, 0, rng), psa::InvalidArgument);
  EXPECT_THROW(psa::angular_lsh_codes(Matrix{{1.0}}, 64, rng), psa::InvalidArgument);
}

TEST(GrayRank, InvertsGrayCode) {
  for (std::uint64_t i = 0; i < 4096; ++i) EXPECT_EQ(psa::gray_rank(i ^ (i >> 1)), i);
  // Neighbours in rank order differ in exactly one bit.
  for (std::uint64_t i = 0; i + 1 < 256; ++i) {
    const std::uint64_t a = i ^ (i >> 1), b = (i + 1) ^ ((i + 1) >> 1);
    EXPECT_EQ(std::popcount(a ^ b), 1);
  }
}

TEST(HyperAttention, SingleBlockIsExact) {
  const auto x = random_qkv(1, 96, 8);
  psa::HyperConfig cfg;
  cfg.block_size = 96;
  const auto r = psa::hyper_attention(x.q, x.k, x.v, cfg);
  const auto exact = psa::exact_attention(x.q, x.k, x.v);
  EXPECT_LE(psa::attention_error(r, exact), 1e-10);
  EXPECT_EQ(r.blocks_evaluated, 1u);
}

TEST(HyperAttention, ShortSequenceFallsBackBitForBit) {
  const auto x = random_qkv(2, 20, 4);
  psa::HyperConfig cfg;
  cfg.min_seq_len = 21;
  cfg.block_size = 4;
  const auto r = psa::hyper_attention(x.q, x.k, x.v, cfg);
  EXPECT_TRUE(r.exact_fallback);
  EXPECT_EQ(r.out, psa::exact_attention(x.q, x.k, x.v).out);
}

TEST(HyperAttention, BeatsUniformSamplingOnPlantedInstance) {
  const auto inst = planted(512, 8, 0.1, 13);
  const Matrix q = psa::scaled(inst.matrix, 4.0);
  psa::Rng vr(13);
  const Matrix v = psa::gaussian_matrix(vr, 512, 8, 0.0, 1.0);
  const auto exact = psa::exact_attention(q, inst.matrix, v);

  psa::HyperConfig cfg;
  cfg.block_size = 64;
  cfg.residual_samples = 64;
  cfg.seed = 13;
  const auto hyper = psa::hyper_attention(q, inst.matrix, v, cfg);
  psa::Rng ur(13);
  const auto uniform = psa::uniform_sampled_attention(q, inst.matrix, v, 128, ur);
  EXPECT_LE(psa::attention_error(hyper, exact), psa::attention_error(uniform, exact));
}

TEST(HyperAttention, OutputsLieInConvexHullOfValues) {
  const auto x = random_qkv(6, 200, 6, 1.0);
  psa::HyperConfig cfg;
  cfg.block_size = 32;
  cfg.residual_samples = 16;
  const auto r = psa::hyper_attention(x.q, x.k, x.v, cfg);
  // The hull of the touched rows sits inside the bounding box of all rows.
  for (std::size_t c = 0; c < x.v.cols(); ++c) {
    double lo = 1e300, hi = -1e300;
    for (std::size_t j = 0; j < x.v.rows(); ++j) {
      lo = std::min(lo, x.v(j, c));
      hi = std::max(hi, x.v(j, c));
    }
    for (std::size_t i = 0; i < r.out.rows(); ++i) {
      EXPECT_GE(r.out(i, c), lo - 1e-10);
      EXPECT_LE(r.out(i, c), hi + 1e-10);
    }
  }
}

TEST(HyperAttention, OneHotValuesGiveStochasticRows) {
  // With V = I each output row is the weight vector itself, so it must be a
  // probability vector supported on at most block + residual keys.
  const std::size_t n = 128;
  const auto x = random_qkv(7, n, 4, 1.0);
  psa::HyperConfig cfg;
  cfg.block_size = 16;
  cfg.residual_samples = 8;
  const auto r = psa::hyper_attention(x.q, x.k, Matrix::identity(n), cfg);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    std::size_t support = 0;
    for (std::size_t j = 0; j < n; ++j) {
      EXPECT_GE(r.out(i, j), 0.0);
      sum += r.out(i, j);
      support += r.out(i, j) > 0.0;
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
    EXPECT_LE(support, 16u + 8u);
  }
}

TEST(HyperAttention, DeterministicForSeed) {
  const auto x = random_qkv(8, 150, 5);
  psa::HyperConfig cfg;
  cfg.block_size = 20;
  cfg.residual_samples = 10;
  cfg.seed = 99;
  const auto a = psa::hyper_attention(x.q, x.k, x.v, cfg);
  const auto b = psa::hyper_attention(x.q, x.k, x.v, cfg);
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(a.row_sums, b.row_sums);
}

TEST(HyperAttention, ConfigErrors) {
  const auto x = random_qkv(9, 10, 3);
  psa::HyperConfig cfg;
  cfg.block_size = 0;
  EXPECT_THROW(psa::hyper_attention(x.q, x.k, x.v, cfg), psa::InvalidArgument);
  cfg.block_size = 4;
  cfg.residual_samples = 11;
  EXPECT_THROW(psa::hyper_attention(x.q, x.k, x.v, cfg), psa::InvalidArgument);
  cfg.residual_samples = 0;
  cfg.lsh_bits = 0;
  EXPECT_THROW(psa::hyper_attention(x.q, x.k, x.v, cfg), psa::InvalidArgument);
  cfg.lsh_bits = 8;
  EXPECT_THROW(psa::hyper_attention(x.q, x.k, Matrix(9, 3), cfg), psa::DimensionError);
}

TEST(PrescoredHyper, DegeneratesToExact) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto x = random_qkv(seed, 64 + 16 * seed, 4 + seed);
    const std::size_t n = x.k.rows();
    psa::PreScoredConfig cfg;
    cfg.prescore.s = n;
    cfg.prescore.k = 3;
    cfg.hyper.block_size = n;
    psa::Rng rng(seed);
    const auto r = psa::prescored_hyper_attention(x.q, x.k, x.v, cfg, rng);
    EXPECT_LE(oracle::relative_frobenius(r.out, oracle::attention(x.q, x.k, x.v)), 1e-10);
    EXPECT_EQ(r.keys_retained, n);
  }
}

TEST(PrescoredHyper, FullRetentionMatchesHyper) {
  const auto x = random_qkv(12, 160, 6);
  psa::PreScoredConfig cfg;
  cfg.prescore.s = 160;
  cfg.prescore.k = 4;
  cfg.hyper.block_size = 32;
  cfg.hyper.seed = 5;
  psa::Rng rng(1);
  const auto pre = psa::prescored_hyper_attention(x.q, x.k, x.v, cfg, rng);
  psa::HyperConfig plain = cfg.hyper;
  const auto hyper = psa::hyper_attention(x.q, x.k, x.v, plain);
  EXPECT_LE(oracle::max_abs_diff(pre.out, hyper.out), 1e-10);
}

TEST(PrescoredHyper, DeltaOneForcesFallback) {
  const auto x = random_qkv(13, 100, 4);
  psa::PreScoredConfig cfg;
  cfg.prescore.s = 50;
  cfg.delta = 1.0;
  cfg.hyper.block_size = 25;
  cfg.hyper.residual_samples = 5;
  psa::Rng rng(0);
  const auto pre = psa::prescored_hyper_attention(x.q, x.k, x.v, cfg, rng);
  EXPECT_TRUE(pre.prescore_fallback);
  EXPECT_EQ(pre.out, psa::hyper_attention(x.q, x.k, x.v, cfg.hyper).out);
  cfg.delta = 1.5;
  EXPECT_THROW(psa::prescored_hyper_attention(x.q, x.k, x.v, cfg, rng), psa::InvalidArgument);
}

TEST(PrescoredHyper, SignalQueriesMatchRestrictedAttention) {
  const auto inst = planted(1000, 8, 0.1, 21);
  const std::size_t signal = 8 * 10;
  psa::Rng vr(21);
  const Matrix v = psa::gaussian_matrix(vr, 1000, 3, 0.0, 1.0);
  const Matrix& q = inst.basis;  // q_j = v_j

  psa::PreScoredConfig cfg;
  cfg.prescore.s = signal;
  cfg.prescore.k = 9;
  cfg.prescore.seed = 21;
  cfg.prescore.restarts = 10;
  cfg.hyper.block_size = signal;
  psa::Rng rng(21);
  const auto r = psa::prescored_hyper_attention(q, inst.matrix, v, cfg, rng);
  const auto keys = oracle::signal_rows(inst.labels);
  ASSERT_EQ(r.retained, keys);
  const Matrix ref = oracle::attention_on(q, inst.matrix, v, keys);
  EXPECT_LE(oracle::relative_frobenius(r.out, ref), 1e-3);
}

TEST(PrescoredHyper, RetainedKeysAreSortedAndCounted) {
  const auto x = random_qkv(14, 120, 4);
  psa::PreScoredConfig cfg;
  cfg.prescore.s = 40;
  cfg.prescore.method = psa::Method::kLeverageExact;
  cfg.hyper.block_size = 8;
  psa::Rng rng(0);
  const auto r = psa::prescored_hyper_attention(x.q, x.k, x.v, cfg, rng);
  EXPECT_EQ(r.keys_retained, 40u);
  EXPECT_TRUE(std::is_sorted(r.retained.begin(), r.retained.end()));
  EXPECT_EQ(std::set<std::size_t>(r.retained.begin(), r.retained.end()).size(), 40u);
}

TEST(PrescoredHyper, CoverageMonotoneInRetainedKeys) {
  // Prefixes of one ranking are nested, so coverage cannot drop as s grows.
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto inst = planted(1024, 8, 0.1, seed);
    const Matrix q = psa::scaled(inst.matrix, 4.0);
    const Matrix a = psa::attention_matrix(q, inst.matrix, true);
    psa::PreScoreConfig cfg;
    cfg.s = 256;
    cfg.seed = seed;
    cfg.restarts = 2;
    psa::Rng rng(seed);
    const auto ranked = psa::prescore(inst.matrix, cfg, rng);
    double last = -1.0;
    for (std::size_t s : {32u, 64u, 128u, 256u}) {
      const std::span<const std::size_t> chosen(ranked.indices.data(), s);
      const double pct = psa::heavy_coverage(a, chosen, 0.01).percentage;
      EXPECT_GE(pct, last);
      last = pct;
    }
  }
}

TEST(UniformSampling, ConvergesWithManySamples) {
  const auto x = random_qkv(15, 64, 4, 0.3);
  psa::Rng rng(2);
  const auto r = psa::uniform_sampled_attention(x.q, x.k, x.v, 20000, rng);
  const auto exact = psa::exact_attention(x.q, x.k, x.v);
  EXPECT_LE(psa::attention_error(r, exact), 0.05);
  EXPECT_THROW(psa::uniform_sampled_attention(x.q, x.k, x.v, 0, rng), psa::InvalidArgument);
}
