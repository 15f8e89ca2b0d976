#pragma once

#include "kcca/data.hpp"

namespace kcca {

/// Regularized second moments of a view pair (1/N normalization).
struct CovarianceTriple {
  Matrix sxx;  ///< dx x dx, includes + rx I
  Matrix syy;  ///< dy x dy, includes + ry I
  Matrix sxy;  ///< dx x dy
  double rx = 0.0;
  double ry = 0.0;
  Vector mean_x;  ///< zero when estimated without centering
  Vector mean_y;
};

/// Linear CCA projections: U^T Sxx U = I, V^T Syy V = I, U^T Sxy V = diag(sigma).
struct CcaSolution {
  Matrix u;      ///< dx x L
  Matrix v;      ///< dy x L
  Vector sigma;  ///< canonical correlations, nonincreasing
  CovarianceTriple cov;

  Eigen::Index dim() const { return sigma.size(); }
  double total() const { return sigma.sum(); }

  /// (x - mean_x) U, using the training means stored in `cov`.
  Matrix project_x(const Eigen::Ref<const RowMatrix>& x) const;
  Matrix project_y(const Eigen::Ref<const RowMatrix>& y) const;
};

CovarianceTriple estimate_covariances(const ViewPair& pair, double rx, double ry, bool center);
CovarianceTriple estimate_covariances(const Eigen::Ref<const Matrix>& x,
                                      const Eigen::Ref<const Matrix>& y, double rx, double ry,
                                      bool center);

/// Symmetric R with R m R = I; eigenvalues below `floor` are raised to it first.
Matrix psd_inverse_sqrt(const Eigen::Ref<const Matrix>& m, double floor);

struct CcaOptions {
  /// Absolute eigenvalue floor applied when whitening Sxx and Syy.
  double eigen_floor = 1e-12;
};

/// Closed-form CCA: rank-L SVD of T = Sxx^{-1/2} Sxy Syy^{-1/2}.
///
/// Singular-vector signs are fixed so that the largest-magnitude entry of each
/// left singular vector is positive.
CcaSolution solve_cca(const CovarianceTriple& cov, Eigen::Index L, const CcaOptions& options = {});

/// Per-component canonical correlations between two N x L projections.
///
/// Each block is centered by its own mean; whitening uses zero regularization
/// and a floor of 1e-12 times the largest eigenvalue.
Vector canonical_correlations(const Eigen::Ref<const Matrix>& px, const Eigen::Ref<const Matrix>& py);

/// Sum of canonical_correlations(); lies in [0, L].
double total_canonical_correlation(const Eigen::Ref<const Matrix>& px,
                                   const Eigen::Ref<const Matrix>& py);

}  // namespace kcca
