#include "psa/matrix_io.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

#include "psa/errors.hpp"

namespace psa {

namespace {

constexpr std::array<char, 4> kMagic = {'P', 'A', 'M', 'X'};

void put_u64(std::ostream& out, std::uint64_t v) {
  std::array<char, 8> bytes{};
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(bytes.data(), bytes.size());
}

std::uint64_t get_u64(std::istream& in) {
  std::array<unsigned char, 8> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!in) throw IoError("matrix file truncated in header");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

}  // namespace

void write_matrix(std::ostream& out, const Matrix& m) {
  out.write(kMagic.data(), kMagic.size());
  out.put(static_cast<char>(kMatrixFormatVersion));
  put_u64(out, m.rows());
  put_u64(out, m.cols());
  for (double x : m.data()) put_u64(out, std::bit_cast<std::uint64_t>(x));
  if (!out) throw IoError("failed writing matrix");
}

Matrix read_matrix(std::istream& in) {
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw IoError("not a PAMX matrix file");
  const int version = in.get();
  if (version != kMatrixFormatVersion) {
    throw IoError("unsupported PAMX version " + std::to_string(version));
  }
  const std::uint64_t rows = get_u64(in);
  const std::uint64_t cols = get_u64(in);
  if (cols != 0 && rows > std::numeric_limits<std::uint64_t>::max() / 8 / cols) {
    throw IoError("PAMX dimensions overflow");
  }
  std::vector<double> data(rows * cols);
  for (double& x : data) {
    x = std::bit_cast<double>(get_u64(in));
    if (!std::isfinite(x)) throw IoError("PAMX file contains a non-finite value");
  }
  return Matrix(rows, cols, std::move(data));
}

void save_matrix(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_matrix(out, m);
}

Matrix load_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_matrix(in);
}

void save_labels(const std::filesystem::path& path, const std::vector<std::size_t>& labels) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  for (std::size_t l : labels) out << l << '\n';
}

std::vector<std::size_t> load_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::size_t> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(line, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != line.size() || line[0] == '-') {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": not an unsigned integer");
    }
    labels.push_back(static_cast<std::size_t>(v));
  }
  return labels;
}

}  // namespace psa
