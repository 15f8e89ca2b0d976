#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include "kcca/data.hpp"

namespace kcca::test {

inline Matrix gaussian(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
  return m;
}

inline DataMatrix gaussian_data(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  return DataMatrix::from(gaussian(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols), seed));
}

inline Matrix random_psd(Eigen::Index n, double min_eig, std::uint64_t seed) {
  const Matrix a = gaussian(n, n, seed);
  return a * a.transpose() + min_eig * Matrix::Identity(n, n);
}

inline Matrix centered(const Matrix& m) { return m.rowwise() - m.colwise().mean(); }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("kcca_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace kcca::test
