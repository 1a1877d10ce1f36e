#include "psa/hyper_attention.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "psa/errors.hpp"

namespace psa {

namespace {

void check_shapes(const Matrix& q, const Matrix& k, const Matrix& v, const char* what) {
  if (q.cols() != k.cols()) {
    throw DimensionError(std::string(what) + ": query dim " + std::to_string(q.cols()) +
                         " != key dim " + std::to_string(k.cols()));
  }
  if (k.rows() != v.rows()) {
    throw DimensionError(std::string(what) + ": " + std::to_string(k.rows()) + " keys but " +
                         std::to_string(v.rows()) + " values");
  }
  if (k.rows() == 0) throw EmptyDimensionError(std::string(what) + ": no keys");
}

std::vector<std::size_t> gray_order(const std::vector<std::uint64_t>& codes) {
  std::vector<std::size_t> order(codes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return gray_rank(codes[a]) < gray_rank(codes[b]);
  });
  return order;
}

// Softmax-weighted average over a list of keys, each with a multiplicity
// weight. Writes the output row and returns the estimated row sum.
struct WeightedRow {
  std::vector<std::size_t> keys;
  std::vector<double> weights;
  std::vector<double> logits;

  void add(std::size_t key, double weight) {
    keys.push_back(key);
    weights.push_back(weight);
  }

  double evaluate(std::span<const double> qi, const Matrix& k, const Matrix& v,
                  std::span<double> out) {
    logits.resize(keys.size());
    double max_logit = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < keys.size(); ++t) {
      logits[t] = dot(qi, k.row(keys[t]));
      max_logit = std::max(max_logit, logits[t]);
    }
    std::fill(out.begin(), out.end(), 0.0);
    double denom = 0.0;
    for (std::size_t t = 0; t < keys.size(); ++t) {
      const double w = weights[t] * std::exp(logits[t] - max_logit);
      denom += w;
      const auto vj = v.row(keys[t]);
      for (std::size_t c = 0; c < out.size(); ++c) out[c] += w * vj[c];
    }
    if (!(denom > 0.0)) return 0.0;
    for (double& x : out) x /= denom;
    return denom * std::exp(max_logit);
  }
};

void check_row_sums(const std::vector<double>& row_sums, const char* what) {
  for (double s : row_sums) {
    if (!(s > 0.0)) {
      throw NumericError(std::string(what) +
                         ": estimated row sum is zero; increase residual_samples or block_size");
    }
    if (!std::isfinite(s)) throw NumericError(std::string(what) + ": row sum overflow");
  }
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

std::uint64_t gray_rank(std::uint64_t code) noexcept {
  for (int shift = 1; shift < 64; shift <<= 1) code ^= code >> shift;
  return code;
}

std::vector<std::uint64_t> angular_lsh_codes(const Matrix& m, const Matrix& planes) {
  if (planes.rows() == 0 || planes.rows() > 63) {
    throw InvalidArgument("angular_lsh_codes: lsh_bits must lie in [1, 63]");
  }
  if (planes.cols() != m.cols()) throw DimensionError("angular_lsh_codes: plane dimension mismatch");
  std::vector<std::uint64_t> codes(m.rows(), 0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    std::uint64_t code = 0;
    for (std::size_t b = 0; b < planes.rows(); ++b) {
      if (dot(m.row(i), planes.row(b)) > 0.0) code |= std::uint64_t{1} << b;
    }
    codes[i] = code;
  }
  return codes;
}

std::vector<std::uint64_t> angular_lsh_codes(const Matrix& m, std::size_t lsh_bits, Rng& rng) {
  if (lsh_bits == 0 || lsh_bits > 63) {
    throw InvalidArgument("angular_lsh_codes: lsh_bits must lie in [1, 63]");
  }
  if (m.cols() == 0) throw EmptyDimensionError("angular_lsh_codes: zero-dimensional rows");
  return angular_lsh_codes(m, gaussian_matrix(rng, lsh_bits, m.cols(), 0.0, 1.0));
}

void validate(const HyperConfig& cfg, std::size_t n_keys) {
  if (cfg.lsh_bits == 0 || cfg.lsh_bits > 63) {
    throw InvalidArgument("hyper_attention: lsh_bits must lie in [1, 63]");
  }
  if (cfg.block_size == 0) throw InvalidArgument("hyper_attention: block_size must be >= 1");
  if (cfg.residual_samples > n_keys) {
    throw InvalidArgument("hyper_attention: residual_samples " +
                          std::to_string(cfg.residual_samples) + " exceeds " +
                          std::to_string(n_keys) + " keys");
  }
}

AttentionResult hyper_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                                const HyperConfig& cfg, Rng& rng, Exec exec) {
  const auto start = std::chrono::steady_clock::now();
  check_shapes(q, k, v, "hyper_attention");
  const std::size_t n_keys = k.rows();
  const std::size_t n_queries = q.rows();
  validate(cfg, n_keys);

  AttentionResult result;
  result.keys_retained = n_keys;
  if (n_keys < cfg.min_seq_len) {
    AttentionOutput exact = exact_attention(q, k, v, exec);
    result.out = std::move(exact.out);
    result.row_sums = std::move(exact.row_sums);
    result.exact_fallback = true;
    result.blocks_evaluated = 1;
    result.wall_seconds = seconds_since(start);
    return result;
  }

  const Matrix planes = gaussian_matrix(rng, cfg.lsh_bits, k.cols(), 0.0, 1.0);
  const Rng residual_root(rng.next_u64());
  const auto key_order = gray_order(angular_lsh_codes(k, planes));
  const auto query_order = gray_order(angular_lsh_codes(q, planes));

  const std::size_t n_blocks = (n_keys + cfg.block_size - 1) / cfg.block_size;
  // Query block b covers sorted positions [b * nq / B, (b + 1) * nq / B).
  std::vector<std::size_t> query_block(n_queries);
  for (std::size_t b = 0; b < n_blocks; ++b) {
    const std::size_t lo = b * n_queries / n_blocks;
    const std::size_t hi = (b + 1) * n_queries / n_blocks;
    for (std::size_t t = lo; t < hi; ++t) query_block[t] = b;
    if (hi > lo) ++result.blocks_evaluated;
  }

  result.out = Matrix(n_queries, v.cols());
  result.row_sums.assign(n_queries, 0.0);
  for_each_index(n_queries, exec, [&](std::size_t t) {
    const std::size_t qi = query_order[t];
    const std::size_t b = query_block[t];
    const std::size_t key_lo = b * cfg.block_size;
    const std::size_t key_hi = std::min(n_keys, key_lo + cfg.block_size);
    const std::size_t in_block = key_hi - key_lo;
    const std::size_t outside = n_keys - in_block;

    WeightedRow row;
    for (std::size_t pos = key_lo; pos < key_hi; ++pos) row.add(key_order[pos], 1.0);
    if (cfg.residual_samples > 0 && outside > 0) {
      Rng local = residual_root.split(qi);
      const double weight =
          static_cast<double>(outside) / static_cast<double>(cfg.residual_samples);
      for (std::size_t r = 0; r < cfg.residual_samples; ++r) {
        auto pos = static_cast<std::size_t>(local.uniform_index(outside));
        if (pos >= key_lo) pos += in_block;
        row.add(key_order[pos], weight);
      }
    }
    result.row_sums[qi] = row.evaluate(q.row(qi), k, v, result.out.row(qi));
  });

  check_row_sums(result.row_sums, "hyper_attention");
  result.wall_seconds = seconds_since(start);
  return result;
}

AttentionResult hyper_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                                const HyperConfig& cfg, Exec exec) {
  Rng rng(cfg.seed);
  return hyper_attention(q, k, v, cfg, rng, exec);
}

AttentionResult prescored_hyper_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                                          const PreScoredConfig& cfg, Rng& rng, Exec exec) {
  const auto start = std::chrono::steady_clock::now();
  check_shapes(q, k, v, "prescored_hyper_attention");
  if (!(cfg.delta >= 0.0 && cfg.delta <= 1.0)) {
    throw InvalidArgument("prescored_hyper_attention: delta must lie in [0, 1]");
  }
  const std::size_t n = k.rows();
  const ScoredKeySet selected = prescore(k, cfg.prescore, rng, exec);

  AttentionResult result;
  if (static_cast<double>(selected.size()) < cfg.delta * static_cast<double>(n)) {
    result = hyper_attention(q, k, v, cfg.hyper, exec);
    result.prescore_fallback = true;
  } else {
    std::vector<std::size_t> retained = selected.indices;
    std::sort(retained.begin(), retained.end());
    HyperConfig inner = cfg.hyper;
    inner.residual_samples =
        cfg.residual_after_prescore ? std::min(inner.residual_samples, retained.size()) : 0;
    result = hyper_attention(q, select_rows(k, retained), select_rows(v, retained), inner, exec);
    result.keys_retained = retained.size();
    result.retained = std::move(retained);
  }
  result.wall_seconds = seconds_since(start);
  return result;
}

AttentionResult uniform_sampled_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                                          std::size_t samples, Rng& rng, Exec exec) {
  check_shapes(q, k, v, "uniform_sampled_attention");
  if (samples == 0) throw InvalidArgument("uniform_sampled_attention: samples must be >= 1");
  const auto start = std::chrono::steady_clock::now();
  const Rng root(rng.next_u64());
  const double weight = static_cast<double>(k.rows()) / static_cast<double>(samples);

  AttentionResult result;
  result.out = Matrix(q.rows(), v.cols());
  result.row_sums.assign(q.rows(), 0.0);
  result.keys_retained = k.rows();
  for_each_index(q.rows(), exec, [&](std::size_t i) {
    Rng local = root.split(i);
    WeightedRow row;
    for (std::size_t r = 0; r < samples; ++r) {
      row.add(static_cast<std::size_t>(local.uniform_index(k.rows())), weight);
    }
    result.row_sums[i] = row.evaluate(q.row(i), k, v, result.out.row(i));
  });
  check_row_sums(result.row_sums, "uniform_sampled_attention");
  result.wall_seconds = seconds_since(start);
  return result;
}

}  // namespace psa
