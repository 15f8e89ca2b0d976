#pragma once

#include <cstdint>
#include <span>
#include <variant>

#include "kcca/data.hpp"

namespace kcca {

/// Gaussian RBF kernel exp(-|x - x'|^2 / (2 s^2)).
class RbfKernel {
 public:
  explicit RbfKernel(double width);
  double width() const { return width_; }

 private:
  double width_;
};

/// k(x, x') = x^T x'. Only used as an oracle for the dual solver.
struct LinearKernel {};

using Kernel = std::variant<RbfKernel, LinearKernel>;

double rbf_eval(const RbfKernel& k, std::span<const double> x, std::span<const double> x2);

/// Pairwise squared Euclidean distances via |a|^2 + |b|^2 - 2 a^T b, clamped at 0.
Matrix squared_distances(const Eigen::Ref<const RowMatrix>& a, const Eigen::Ref<const RowMatrix>& b);

/// (i, j) = k(a_i, b_j).
Matrix gram_matrix(const Kernel& k, const Eigen::Ref<const RowMatrix>& a,
                   const Eigen::Ref<const RowMatrix>& b);
Matrix gram_matrix(const Kernel& k, const DataMatrix& a, const DataMatrix& b);

/// Symmetric Gram matrix of a with itself; RBF diagonals are exactly 1.
Matrix gram_matrix(const Kernel& k, const Eigen::Ref<const RowMatrix>& a);
Matrix gram_matrix(const Kernel& k, const DataMatrix& a);

inline constexpr std::size_t kDefaultMedianSamples = 4000;

/// Median pairwise distance among min(n_samples, N) rows drawn without replacement.
/// An even number of pairs averages the two middle distances.
double median_heuristic(const DataMatrix& a, std::size_t n_samples = kDefaultMedianSamples,
                        std::uint64_t seed = 0);

}  // namespace kcca
