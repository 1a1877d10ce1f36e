#pragma once

#include <cstdint>
#include <vector>

#include "psa/exact_attention.hpp"
#include "psa/prescore.hpp"

namespace psa {

struct HyperConfig {
  std::size_t lsh_bits = 8;
  std::size_t block_size = 64;
  std::size_t residual_samples = 0;  // uniformly sampled off-block keys per query
  std::size_t min_seq_len = 0;       // fewer keys than this: exact attention
  std::uint64_t seed = 0;
};

struct PreScoredConfig {
  PreScoreConfig prescore;
  HyperConfig hyper;
  double delta = 0.0;  // fall back to plain HyperAttention when s < delta * n
  // Keep hyper.residual_samples active on the retained keys. Off by default:
  // the retained set replaces residual sampling.
  bool residual_after_prescore = false;
};

struct AttentionResult {
  Matrix out;
  std::vector<double> row_sums;  // estimated diagonal of D
  std::size_t blocks_evaluated = 0;
  std::size_t keys_retained = 0;
  std::vector<std::size_t> retained;  // ascending key indices; empty unless pre-scored
  bool exact_fallback = false;        // n < min_seq_len
  bool prescore_fallback = false;     // s < delta * n
  double wall_seconds = 0.0;
};

// Bit b of code i is set when m_i . g_b > 0 for lsh_bits Gaussian hyperplanes
// g_b drawn from `rng`. lsh_bits must lie in [1, 63].
std::vector<std::uint64_t> angular_lsh_codes(const Matrix& m, std::size_t lsh_bits, Rng& rng);

// Same as above with explicit hyperplanes (one per row of `planes`).
std::vector<std::uint64_t> angular_lsh_codes(const Matrix& m, const Matrix& planes);

// Position of `code` in the reflected Gray sequence, so that sorting by it
// places codes differing in one bit next to each other.
std::uint64_t gray_rank(std::uint64_t code) noexcept;

// LSH-sorted block attention:
//  1. queries and keys are hashed with shared hyperplanes and each side is
//     sorted by gray_rank (ties by index);
//  2. sorted keys are cut into ceil(n_keys / block_size) blocks and sorted
//     queries into as many near-equal blocks; block b of queries attends
//     exactly to block b of keys;
//  3. each query adds residual_samples keys drawn uniformly with replacement
//     from outside its block, weighted by (n_keys - block) / residual_samples;
//  4. rows are normalized by the estimated row sums.
// Hyperplanes come from `rng`; residual draws use a child Rng per query row.
AttentionResult hyper_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                                const HyperConfig& cfg, Rng& rng, Exec exec = Exec::kParallel);

// Uses Rng(cfg.seed).
AttentionResult hyper_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                                const HyperConfig& cfg, Exec exec = Exec::kParallel);

// PreScore the keys, then run HyperAttention on the retained keys and their
// values (ascending index order). Falls back to HyperAttention on all keys
// when s < delta * n. `rng` feeds the pre-scoring noise and sketch; the
// attention stage always uses Rng(cfg.hyper.seed).
AttentionResult prescored_hyper_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                                          const PreScoredConfig& cfg, Rng& rng,
                                          Exec exec = Exec::kParallel);

// Baseline: every query averages `samples` keys drawn uniformly with
// replacement from all keys.
AttentionResult uniform_sampled_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                                          std::size_t samples, Rng& rng,
                                          Exec exec = Exec::kParallel);

void validate(const HyperConfig& cfg, std::size_t n_keys);

}  // namespace psa
