#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "kcca/kernel.hpp"

namespace kcca {

/// Random Fourier features for the Gaussian RBF kernel:
/// phi(x) = sqrt(2/M) [cos(w_1^T x + b_1), ..., cos(w_M^T x + b_M)],
/// w_j ~ N(0, I / s^2), b_j ~ U[0, 2 pi).
///
/// Features are drawn in fixed blocks of kBlock, each block from its own
/// generator keyed by (seed, block index), so any block can be regenerated
/// from the seed alone. A materialized map caches the blocks; an on-the-fly
/// map regenerates them on every transform. Both produce identical bits.
class RffMap {
 public:
  static constexpr std::size_t kBlock = 256;

  RffMap(std::size_t input_dim, std::size_t features, double width, std::uint64_t seed,
         bool materialize = true);

  std::size_t input_dim() const { return input_dim_; }
  std::size_t features() const { return features_; }
  double width() const { return width_; }
  std::uint64_t seed() const { return seed_; }
  bool materialized() const { return !blocks_.empty(); }

  /// M x d frequency matrix (row j is w_j).
  Matrix frequencies() const;
  /// Phase offsets b_j.
  Vector phases() const;

  Matrix transform(const Eigen::Ref<const RowMatrix>& x) const;

  /// Hash of the generated frequencies and phases.
  std::uint64_t fingerprint() const;

 private:
  struct Block {
    RowMatrix w;
    Vector b;
  };
  Block generate_block(std::size_t index) const;
  template <typename Fn>
  void for_each_block(Fn&& fn) const;

  std::size_t input_dim_;
  std::size_t features_;
  double width_;
  std::uint64_t seed_;
  std::vector<Block> blocks_;
};

RffMap rff_fit(std::size_t input_dim, std::size_t features, double width, std::uint64_t seed);
Matrix rff_transform(const RffMap& map, const DataMatrix& x);

/// Nystrom features C R Lambda^{-1/2} built from the landmark Gram eigensystem.
struct NystromMap {
  DataMatrix landmarks;
  RbfKernel kernel;
  Matrix r_tilde;          ///< M x kept eigenvectors, descending eigenvalue order
  Vector lambda_inv_sqrt;  ///< kept entries of Lambda^{-1/2}
  double floor = 0.0;      ///< absolute eigenvalue floor that was applied
  std::size_t kept = 0;

  Matrix transform(const Eigen::Ref<const RowMatrix>& x) const;
  std::uint64_t fingerprint() const;
};

inline constexpr double kDefaultNystromFloor = 1e-10;

/// Eigenvalues below relative_floor * max eigenvalue are dropped.
NystromMap nystrom_fit(const DataMatrix& landmarks, const RbfKernel& k,
                       double relative_floor = kDefaultNystromFloor);
Matrix nystrom_transform(const NystromMap& map, const DataMatrix& x);

/// Uniform landmark choice without replacement.
DataMatrix choose_landmarks(const DataMatrix& x, std::size_t count, std::uint64_t seed);

using FeatureMap = std::variant<RffMap, NystromMap>;

Matrix transform_features(const FeatureMap& map, const Eigen::Ref<const RowMatrix>& x);
std::size_t feature_dim(const FeatureMap& map);
std::size_t input_dim(const FeatureMap& map);
std::uint64_t map_fingerprint(const FeatureMap& map);

}  // namespace kcca
