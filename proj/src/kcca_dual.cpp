#include "kcca/kcca_dual.hpp"

#include <cmath>
#include <string>

#include "kcca/errors.hpp"

namespace kcca {

namespace {

struct GramFactor {
  Matrix basis;    // eigenvectors of K
  Vector shrink;   // sqrt(lambda / (lambda + N r)), zero on the numerical null space
  Vector inverse;  // 1 / sqrt(lambda (lambda + N r)), zero on the numerical null space
};

GramFactor factor_gram(const Matrix& k, double r, double tol, const char* view) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(k);
  if (eig.info() != Eigen::Success) {
    throw NumericError(std::string("eigendecomposition of the view ") + view + " Gram matrix failed");
  }
  const Vector& lambda = eig.eigenvalues();
  const double top = lambda.maxCoeff();
  if (!(top > 0.0)) throw NumericError(std::string("view ") + view + " Gram matrix is zero");
  const double nr = static_cast<double>(k.rows()) * r;
  GramFactor f{eig.eigenvectors(), Vector::Zero(lambda.size()), Vector::Zero(lambda.size())};
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda(i) > tol * top) {
      f.shrink(i) = std::sqrt(lambda(i) / (lambda(i) + nr));
      f.inverse(i) = 1.0 / std::sqrt(lambda(i) * (lambda(i) + nr));
    }
  }
  return f;
}

void center_gram(Matrix& k, Vector& col_mean, double& grand) {
  col_mean = k.colwise().mean().transpose();
  grand = col_mean.mean();
  k.rowwise() -= col_mean.transpose();
  k.colwise() -= col_mean;
  k.array() += grand;
}

}  // namespace

DualKccaSolution solve_kcca_dual(const ViewPair& pair, const Kernel& kx, const Kernel& ky,
                                 double rx, double ry, Eigen::Index L,
                                 const DualKccaOptions& options) {
  const std::size_t n = pair.rows();
  if (n > options.max_samples) {
    throw ParameterError("exact dual KCCA refuses N=" + std::to_string(n) + " (cap " +
                         std::to_string(options.max_samples) +
                         "); use the fkcca, nkcca or knoi solvers for large problems");
  }
  if (!(rx >= 0.0) || !(ry >= 0.0)) throw ParameterError("rx and ry must be nonnegative");
  if (L < 1 || static_cast<std::size_t>(L) >= n) {
    throw ParameterError("projection dimension L=" + std::to_string(L) + " must lie in [1, N)");
  }

  DualKccaSolution sol{Matrix(), Matrix(), pair.x(), pair.y(), kx,       ky,
                       rx,       ry,       Vector(), Vector(), false,    Vector(),
                       Vector()};
  sol.centered = options.center_kernels;
  sol.fingerprint_x = fingerprint(pair.x());
  sol.fingerprint_y = fingerprint(pair.y());

  Matrix gx = gram_matrix(kx, pair.x());
  Matrix gy = gram_matrix(ky, pair.y());
  if (options.center_kernels) {
    center_gram(gx, sol.gram_mean_x, sol.gram_grand_x);
    center_gram(gy, sol.gram_mean_y, sol.gram_grand_y);
  }

  const GramFactor fx = factor_gram(gx, rx, options.rank_tolerance, "x");
  const GramFactor fy = factor_gram(gy, ry, options.rank_tolerance, "y");

  // Gx Gy = Qx diag(sx) (Qx^T Qy) diag(sy) Qy^T; decompose the middle factor.
  const Matrix middle = fx.shrink.asDiagonal() * (fx.basis.transpose() * fy.basis) * fy.shrink.asDiagonal();
  Eigen::BDCSVD<Matrix> svd(middle, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw NumericError("SVD of the dual operator failed");

  Matrix left = svd.matrixU().leftCols(L);
  Matrix right = svd.matrixV().leftCols(L);
  for (Eigen::Index l = 0; l < L; ++l) {
    Eigen::Index arg = 0;
    (fx.basis * left.col(l)).cwiseAbs().maxCoeff(&arg);
    if ((fx.basis.row(arg) * left.col(l))(0) < 0.0) {
      left.col(l) *= -1.0;
      right.col(l) *= -1.0;
    }
  }
  sol.correlations = svd.singularValues().head(L);
  sol.eigenvalues = sol.correlations.cwiseAbs2();
  if (sol.correlations(L - 1) <= 0.0) {
    throw NumericError("dual operator has fewer than L=" + std::to_string(L) + " nonzero directions");
  }

  Matrix a = fx.basis * fx.inverse.asDiagonal() * left;
  Matrix b = fy.basis * fy.inverse.asDiagonal() * right;

  // Restore unit-covariance constraints on the training projections.
  const Matrix proj_x = fx.basis * fx.shrink.asDiagonal() * left;
  const Matrix proj_y = fy.basis * fy.shrink.asDiagonal() * right;
  const CcaSolution fin = solve_cca(estimate_covariances(proj_x, proj_y, 0.0, 0.0, true), L);
  sol.a = a * fin.u;
  sol.b = b * fin.v;
  return sol;
}

Matrix project_dual(const DualKccaSolution& sol, View view, const DataMatrix& queries) {
  const bool is_x = view == View::x;
  const DataMatrix& train = is_x ? sol.train_x : sol.train_y;
  if (queries.cols() != train.cols()) {
    throw ShapeError("query dimensionality " + std::to_string(queries.cols()) +
                     " does not match training view (" + std::to_string(train.cols()) + ")");
  }
  Matrix k = gram_matrix(is_x ? sol.kernel_x : sol.kernel_y, queries, train);
  if (sol.centered) {
    const Vector& col_mean = is_x ? sol.gram_mean_x : sol.gram_mean_y;
    const double grand = is_x ? sol.gram_grand_x : sol.gram_grand_y;
    const Vector row_mean = k.rowwise().mean();
    k.rowwise() -= col_mean.transpose();
    k.colwise() -= row_mean;
    k.array() += grand;
  }
  return k * (is_x ? sol.a : sol.b);
}

}  // namespace kcca
