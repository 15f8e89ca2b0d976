#pragma once

#include <cstdint>

#include "kcca/cca.hpp"
#include "kcca/kernel.hpp"

namespace kcca {

struct DualKccaOptions {
  /// Memory is O(N^2); larger problems belong to the approximate solvers.
  std::size_t max_samples = 5000;
  /// Double-center both Gram matrices in feature space.
  bool center_kernels = false;
  /// Gram eigenvalues below rank_tolerance * max eigenvalue are treated as zero.
  double rank_tolerance = 1e-10;
};

/// Representer-theorem solution f(x) = sum_i alpha_i k_x(x, x_i), g likewise.
struct DualKccaSolution {
  Matrix a;  ///< N x L, row i is alpha_i
  Matrix b;  ///< N x L, row i is beta_i
  DataMatrix train_x;
  DataMatrix train_y;
  Kernel kernel_x;
  Kernel kernel_y;
  double rx = 0.0;
  double ry = 0.0;
  /// Top-L eigenvalues of (Kx + N rx I)^{-1} Ky (Ky + N ry I)^{-1} Kx.
  Vector eigenvalues;
  /// Square roots of `eigenvalues`.
  Vector correlations;
  bool centered = false;
  /// Column means and grand mean of the uncentered training Grams (centering only).
  Vector gram_mean_x, gram_mean_y;
  double gram_grand_x = 0.0, gram_grand_y = 0.0;
  std::uint64_t fingerprint_x = 0;
  std::uint64_t fingerprint_y = 0;

  Eigen::Index dim() const { return a.cols(); }
};

/// Exact dual KCCA for small N.
///
/// The nonsymmetric operator above is similar to (Gx Gy)(Gx Gy)^T with
/// G = K^{1/2} (K + N r I)^{-1/2}, so the solver takes the SVD of Gx Gy in the
/// Gram eigenbases. Left singular vectors p map back to alpha = (K + N r I)^{-1/2} K^{+1/2} p
/// (and symmetrically for beta); a final L-dimensional linear CCA on (Kx A, Ky B)
/// rescales the columns so the training projections have identity covariance.
DualKccaSolution solve_kcca_dual(const ViewPair& pair, const Kernel& kx, const Kernel& ky,
                                 double rx, double ry, Eigen::Index L,
                                 const DualKccaOptions& options = {});

/// Kernel expansion of `queries` against the stored training view.
Matrix project_dual(const DualKccaSolution& sol, View view, const DataMatrix& queries);

}  // namespace kcca
