#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "psa/exact_attention.hpp"
#include "psa/hyper_attention.hpp"
#include "psa/prescore_types.hpp"

namespace psa {

struct CoverageReport {
  double epsilon = 0.0;
  std::size_t keys_sampled = 0;
  std::size_t heavy_total = 0;
  std::size_t heavy_captured = 0;
  double percentage = 100.0;
  std::size_t topk_columns = 0;  // number of top heavy columns compared
  std::size_t topk_columns_captured = 0;
  double topk_percentage = 100.0;
};

// Heavy entries are those of the row-normalized attention matrix above
// epsilon; an entry is captured when its key is selected. The top-k part
// ranks columns by heavy-entry count (ties to the lower index), keeps the
// first min(|selected|, #columns with a heavy entry) of them, and reports the
// share that is selected. Empty heavy sets count as 100%.
CoverageReport heavy_coverage(const Matrix& q, const Matrix& k,
                              std::span<const std::size_t> selected, double epsilon,
                              Exec exec = Exec::kParallel);
CoverageReport heavy_coverage(const Matrix& q, const Matrix& k, const ScoredKeySet& selected,
                              double epsilon, Exec exec = Exec::kParallel);

// Same, for a precomputed row-normalized attention matrix.
CoverageReport heavy_coverage(const Matrix& normalized_attention,
                              std::span<const std::size_t> selected, double epsilon);

// Adjusted Rand index. Returns 1 when both partitions are trivial in the
// same way (the index is 0/0 there).
double recovery_score(const std::vector<std::size_t>& labels,
                      const std::vector<std::size_t>& assignment);

// ||approx - exact||_F / ||exact||_F.
double attention_error(const Matrix& approx, const Matrix& exact);
double attention_error(const AttentionResult& approx, const AttentionOutput& exact);

// epsilon,keys_sampled,method,heavy_total,heavy_captured,percentage,topk_percentage,seed
inline constexpr std::string_view kCoverageCsvHeader =
    "epsilon,keys_sampled,method,heavy_total,heavy_captured,percentage,topk_percentage,seed";
std::string to_csv_row(const CoverageReport& r, std::string_view method, std::uint64_t seed);

// Shortest decimal text that parses back to the same double.
std::string format_double(double x);

double median(std::vector<double> values);

}  // namespace psa
