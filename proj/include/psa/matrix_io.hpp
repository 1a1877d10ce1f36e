#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "psa/matrix.hpp"

namespace psa {

// Binary layout:
//   bytes 0..3   "PAMX"
//   byte  4      format version (1)
//   bytes 5..12  rows, little-endian uint64
//   bytes 13..20 cols, little-endian uint64
//   then rows*cols little-endian IEEE-754 binary64 values, row-major.
inline constexpr std::uint8_t kMatrixFormatVersion = 1;

void write_matrix(std::ostream& out, const Matrix& m);
Matrix read_matrix(std::istream& in);

void save_matrix(const std::filesystem::path& path, const Matrix& m);
Matrix load_matrix(const std::filesystem::path& path);

// Sidecar label file: one unsigned integer per line.
void save_labels(const std::filesystem::path& path, const std::vector<std::size_t>& labels);
std::vector<std::size_t> load_labels(const std::filesystem::path& path);

}  // namespace psa
