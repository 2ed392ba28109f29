#pragma once

#include "jkiv/common.hpp"

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

namespace testutil {

using jkiv::Index;
using jkiv::Matrix;
using jkiv::Vector;

inline Matrix randn(Index rows, Index cols, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> normal;
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = normal(eng);
  return m;
}

inline Vector randn(Index n, std::uint64_t seed) { return randn(n, 1, seed).col(0); }

// Fresh directory under the system temp path, removed by the caller if wanted.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("jkiv_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace testutil
