#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace kcca {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// N x d block of samples, one row per observation.
///
/// Construction validates the shape (N >= 1, d >= 1) and rejects NaN/Inf, so
/// every DataMatrix that exists is safe to feed to the solvers.
class DataMatrix {
 public:
  explicit DataMatrix(RowMatrix values);
  DataMatrix(std::size_t rows, std::size_t cols, std::span<const double> row_major);

  /// Accepts any dense Eigen expression (column-major results included).
  static DataMatrix from(const Eigen::Ref<const Matrix>& values);

  std::size_t rows() const { return static_cast<std::size_t>(values_.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(values_.cols()); }
  const RowMatrix& values() const { return values_; }
  double operator()(std::size_t i, std::size_t j) const {
    return values_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * cols(), cols()};
  }

  bool operator==(const DataMatrix& other) const;

 private:
  RowMatrix values_;
};

/// Two views of the same N samples, paired by row index.
class ViewPair {
 public:
  ViewPair(DataMatrix x, DataMatrix y);

  const DataMatrix& x() const { return x_; }
  const DataMatrix& y() const { return y_; }
  std::size_t rows() const { return x_.rows(); }

 private:
  DataMatrix x_;
  DataMatrix y_;
};

enum class MatrixFormat { csv, binary };

/// Selects one side of a two-view model.
enum class View { x, y };

MatrixFormat parse_format(const std::string& name);

DataMatrix read_matrix(const std::filesystem::path& path, MatrixFormat format);
void write_matrix(const DataMatrix& m, const std::filesystem::path& path, MatrixFormat format);

/// Plain Eigen overloads for solver outputs that are not sample matrices
/// (projection matrices, spectra). Same on-disk format.
void write_matrix(const Eigen::Ref<const Matrix>& m, const std::filesystem::path& path,
                  MatrixFormat format = MatrixFormat::binary);
Matrix read_dense(const std::filesystem::path& path, MatrixFormat format = MatrixFormat::binary);

/// Left half of each row-major image becomes view x, right half view y.
ViewPair split_image_views(const DataMatrix& images, std::size_t width, std::size_t height);

struct SyntheticPair {
  ViewPair pair;
  /// Population canonical correlations, one per shared latent dimension.
  Vector correlations;
};

/// Shared-latent two-view generator with an analytic canonical spectrum.
///
/// z ~ N(0, I_L), x = Q_x C z + noise * e, y = Q_y C z + noise * e', where Q_x, Q_y
/// have random orthonormal columns and C = diag(1, 1/sqrt(2), ..., 1/sqrt(L)).
/// Then Sxx = Q_x C^2 Q_x^T + noise^2 I and the l-th population canonical
/// correlation is c_l^2 / (c_l^2 + noise^2) = 1 / (1 + noise^2 * l).
SyntheticPair make_synthetic_pair(std::size_t n, std::size_t dx, std::size_t dy,
                                  std::size_t latent, double noise, std::uint64_t seed);

/// Renders n grayscale width x height "glyph" images: one of ten fixed stroke
/// templates, randomly rotated, scaled, shifted and thickened, plus pixel noise.
/// The two image halves share the class and pose non-linearly, which makes a
/// desk-scale stand-in for the split-digit task. Pixel values lie in [0, 1].
DataMatrix make_synthetic_images(std::size_t n, std::size_t width, std::size_t height,
                                 std::uint64_t seed);

/// Uniform sample of `count` distinct indices out of [0, n), in draw order.
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t count, std::uint64_t seed);

DataMatrix select_rows(const DataMatrix& m, std::span<const std::size_t> rows);
ViewPair select_rows(const ViewPair& pair, std::span<const std::size_t> rows);

/// FNV-1a over shape and raw value bytes.
std::uint64_t fingerprint(const DataMatrix& m);
std::uint64_t fingerprint_bytes(std::span<const unsigned char> bytes,
                                std::uint64_t seed = 14695981039346656037ULL);

}  // namespace kcca
