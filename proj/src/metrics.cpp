#include "psa/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

#include "psa/errors.hpp"

namespace psa {

CoverageReport heavy_coverage(const Matrix& normalized_attention,
                              std::span<const std::size_t> selected, double epsilon) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw InvalidArgument("heavy_coverage: epsilon must be positive");
  }
  const std::size_t cols = normalized_attention.cols();
  std::vector<char> in_selection(cols, 0);
  for (std::size_t j : selected) {
    if (j >= cols) {
      throw DimensionError("heavy_coverage: selected index " + std::to_string(j) +
                           " out of range for " + std::to_string(cols) + " keys");
    }
    in_selection[j] = 1;
  }

  CoverageReport r;
  r.epsilon = epsilon;
  r.keys_sampled = selected.size();
  std::vector<std::size_t> column_heavy(cols, 0);
  for (std::size_t i = 0; i < normalized_attention.rows(); ++i) {
    const auto row = normalized_attention.row(i);
    for (std::size_t j = 0; j < cols; ++j) {
      if (row[j] > epsilon) {
        ++column_heavy[j];
        ++r.heavy_total;
        if (in_selection[j]) ++r.heavy_captured;
      }
    }
  }
  if (r.heavy_total > 0) {
    r.percentage = 100.0 * static_cast<double>(r.heavy_captured) /
                   static_cast<double>(r.heavy_total);
  }

  std::vector<std::size_t> order(cols);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return column_heavy[a] > column_heavy[b];
  });
  const auto nonzero = static_cast<std::size_t>(
      std::count_if(column_heavy.begin(), column_heavy.end(), [](std::size_t c) { return c > 0; }));
  std::size_t distinct = 0;
  for (std::size_t j = 0; j < cols; ++j) distinct += in_selection[j];
  r.topk_columns = std::min(distinct, nonzero);
  for (std::size_t t = 0; t < r.topk_columns; ++t) r.topk_columns_captured += in_selection[order[t]];
  if (r.topk_columns > 0) {
    r.topk_percentage = 100.0 * static_cast<double>(r.topk_columns_captured) /
                        static_cast<double>(r.topk_columns);
  }
  return r;
}

CoverageReport heavy_coverage(const Matrix& q, const Matrix& k,
                              std::span<const std::size_t> selected, double epsilon, Exec exec) {
  if (q.cols() != k.cols()) throw DimensionError("heavy_coverage: query/key dimension mismatch");
  return heavy_coverage(attention_matrix(q, k, true, exec), selected, epsilon);
}

CoverageReport heavy_coverage(const Matrix& q, const Matrix& k, const ScoredKeySet& selected,
                              double epsilon, Exec exec) {
  return heavy_coverage(q, k, std::span<const std::size_t>(selected.indices), epsilon, exec);
}

double recovery_score(const std::vector<std::size_t>& labels,
                      const std::vector<std::size_t>& assignment) {
  if (labels.size() != assignment.size()) {
    throw DimensionError("recovery_score: length " + std::to_string(labels.size()) + " vs " +
                         std::to_string(assignment.size()));
  }
  const auto pairs = [](double x) { return x * (x - 1.0) / 2.0; };
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> table;
  std::map<std::size_t, std::size_t> rows;
  std::map<std::size_t, std::size_t> cols;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    ++table[{labels[i], assignment[i]}];
    ++rows[labels[i]];
    ++cols[assignment[i]];
  }
  double index = 0.0;
  for (const auto& [key, count] : table) index += pairs(static_cast<double>(count));
  double sum_rows = 0.0;
  for (const auto& [key, count] : rows) sum_rows += pairs(static_cast<double>(count));
  double sum_cols = 0.0;
  for (const auto& [key, count] : cols) sum_cols += pairs(static_cast<double>(count));
  const double total = pairs(static_cast<double>(labels.size()));
  if (total == 0.0) return 1.0;
  const double expected = sum_rows * sum_cols / total;
  const double max_index = 0.5 * (sum_rows + sum_cols);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

double attention_error(const Matrix& approx, const Matrix& exact) {
  require_same_shape(approx, exact, "attention_error");
  const double norm = frobenius_norm(exact);
  if (!(norm > 0.0)) throw NumericError("attention_error: exact output has zero norm");
  return frobenius_norm(subtract(approx, exact)) / norm;
}

double attention_error(const AttentionResult& approx, const AttentionOutput& exact) {
  return attention_error(approx.out, exact.out);
}

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::string to_csv_row(const CoverageReport& r, std::string_view method, std::uint64_t seed) {
  std::string line = format_double(r.epsilon);
  line += ',' + std::to_string(r.keys_sampled);
  line += ',';
  line += method;
  line += ',' + std::to_string(r.heavy_total);
  line += ',' + std::to_string(r.heavy_captured);
  line += ',' + format_double(r.percentage);
  line += ',' + format_double(r.topk_percentage);
  line += ',' + std::to_string(seed);
  return line;
}

double median(std::vector<double> values) {
  if (values.empty()) throw InvalidArgument("median: empty input");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace psa
