#include "kcca/cca.hpp"

#include <cmath>
#include <string>

#include "kcca/errors.hpp"

namespace kcca {

namespace {

Matrix symmetrize(const Eigen::Ref<const Matrix>& m) { return 0.5 * (m + m.transpose()); }

void require_nonnegative(double r, const char* name) {
  if (!(r >= 0.0) || !std::isfinite(r)) {
    throw ParameterError(std::string(name) + " must be a finite nonnegative scalar");
  }
}

// Flips singular-vector pairs so the largest-magnitude entry of each left vector is positive.
void fix_signs(Matrix& left, Matrix& right) {
  for (Eigen::Index l = 0; l < left.cols(); ++l) {
    Eigen::Index arg = 0;
    left.col(l).cwiseAbs().maxCoeff(&arg);
    if (left(arg, l) < 0.0) {
      left.col(l) *= -1.0;
      right.col(l) *= -1.0;
    }
  }
}

}  // namespace

Matrix CcaSolution::project_x(const Eigen::Ref<const RowMatrix>& x) const {
  if (x.cols() != u.rows()) throw ShapeError("view x query has wrong dimensionality");
  return (x.rowwise() - cov.mean_x.transpose()) * u;
}

Matrix CcaSolution::project_y(const Eigen::Ref<const RowMatrix>& y) const {
  if (y.cols() != v.rows()) throw ShapeError("view y query has wrong dimensionality");
  return (y.rowwise() - cov.mean_y.transpose()) * v;
}

CovarianceTriple estimate_covariances(const ViewPair& pair, double rx, double ry, bool center) {
  return estimate_covariances(pair.x().values(), pair.y().values(), rx, ry, center);
}

CovarianceTriple estimate_covariances(const Eigen::Ref<const Matrix>& x,
                                      const Eigen::Ref<const Matrix>& y, double rx, double ry,
                                      bool center) {
  require_nonnegative(rx, "rx");
  require_nonnegative(ry, "ry");
  if (x.rows() != y.rows()) throw ShapeError("views must have the same number of rows");
  if (x.rows() < 1) throw ShapeError("covariance estimation needs at least one sample");
  if (center && x.rows() < 2) throw ParameterError("centering needs at least two samples");

  const double inv_n = 1.0 / static_cast<double>(x.rows());
  CovarianceTriple cov;
  cov.rx = rx;
  cov.ry = ry;
  if (center) {
    cov.mean_x = x.colwise().mean().transpose();
    cov.mean_y = y.colwise().mean().transpose();
  } else {
    cov.mean_x = Vector::Zero(x.cols());
    cov.mean_y = Vector::Zero(y.cols());
  }
  const Matrix xc = x.rowwise() - cov.mean_x.transpose();
  const Matrix yc = y.rowwise() - cov.mean_y.transpose();
  cov.sxx = symmetrize(xc.transpose() * xc) * inv_n;
  cov.syy = symmetrize(yc.transpose() * yc) * inv_n;
  cov.sxy = xc.transpose() * yc * inv_n;
  cov.sxx.diagonal().array() += rx;
  cov.syy.diagonal().array() += ry;
  return cov;
}

Matrix psd_inverse_sqrt(const Eigen::Ref<const Matrix>& m, double floor) {
  if (m.rows() != m.cols()) throw ShapeError("inverse square root needs a square matrix");
  if (!(floor > 0.0)) throw ParameterError("eigenvalue floor must be positive");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if (!m.allFinite()) throw NumericError("inverse square root of a non-finite matrix");
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw NumericError("inverse square root needs a symmetric matrix");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(m));
  if (eig.info() != Eigen::Success) throw NumericError("eigendecomposition failed");
  const Vector inv_root = eig.eigenvalues().cwiseMax(floor).cwiseSqrt().cwiseInverse();
  return eig.eigenvectors() * inv_root.asDiagonal() * eig.eigenvectors().transpose();
}

CcaSolution solve_cca(const CovarianceTriple& cov, Eigen::Index L, const CcaOptions& options) {
  const Eigen::Index dx = cov.sxx.rows();
  const Eigen::Index dy = cov.syy.rows();
  if (L < 1 || L > std::min(dx, dy)) {
    throw ParameterError("projection dimension L=" + std::to_string(L) + " must lie in [1, " +
                         std::to_string(std::min(dx, dy)) + "]");
  }
  if (cov.sxy.rows() != dx || cov.sxy.cols() != dy) throw ShapeError("inconsistent covariance triple");

  const Matrix wx = psd_inverse_sqrt(cov.sxx, options.eigen_floor);
  const Matrix wy = psd_inverse_sqrt(cov.syy, options.eigen_floor);
  const Matrix t = wx * cov.sxy * wy;
  Eigen::BDCSVD<Matrix> svd(t, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success || !svd.singularValues().allFinite()) {
    throw NumericError("SVD of the whitened cross-covariance failed");
  }
  Matrix left = svd.matrixU().leftCols(L);
  Matrix right = svd.matrixV().leftCols(L);
  fix_signs(left, right);

  CcaSolution sol;
  sol.u = wx * left;
  sol.v = wy * right;
  sol.sigma = svd.singularValues().head(L);
  sol.cov = cov;
  return sol;
}

Vector canonical_correlations(const Eigen::Ref<const Matrix>& px, const Eigen::Ref<const Matrix>& py) {
  if (px.rows() != py.rows() || px.cols() != py.cols()) {
    throw ShapeError("projections must have matching shapes");
  }
  if (px.rows() <= px.cols()) {
    throw ShapeError("need more samples than projection dimensions (N > L)");
  }
  const CovarianceTriple cov = estimate_covariances(px, py, 0.0, 0.0, true);
  auto whitener = [](const Matrix& s, const char* view) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(s);
    const double top = eig.eigenvalues().maxCoeff();
    if (eig.info() != Eigen::Success || !std::isfinite(top) || top <= 0.0) {
      throw NumericError(std::string("projection covariance of view ") + view +
                         " is zero or non-finite");
    }
    const Vector inv_root =
        eig.eigenvalues().cwiseMax(1e-12 * top).cwiseSqrt().cwiseInverse();
    return Matrix(eig.eigenvectors() * inv_root.asDiagonal() * eig.eigenvectors().transpose());
  };
  const Matrix t = whitener(cov.sxx, "x") * cov.sxy * whitener(cov.syy, "y");
  Eigen::BDCSVD<Matrix> svd(t);
  return svd.singularValues();
}

double total_canonical_correlation(const Eigen::Ref<const Matrix>& px,
                                   const Eigen::Ref<const Matrix>& py) {
  return canonical_correlations(px, py).sum();
}

}  // namespace kcca
