#include <doctest.h>

#include <algorithm>
#include <Eigen/Eigenvalues>

#include "kcca/errors.hpp"
#include "kcca/kcca_dual.hpp"
#include "support.hpp"

using namespace kcca;

namespace {

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

ViewPair nonlinear_pair(std::size_t n, std::uint64_t seed) {
  const Matrix z = test::gaussian(static_cast<Eigen::Index>(n), 2, seed);
  Matrix x(z.rows(), 3), y(z.rows(), 3);
  x << z.col(0), z.col(1), z.col(0).array().square().matrix();
  y << z.col(0).array().sin().matrix(), z.col(1).array().cube().matrix(), z.rowwise().norm();
  x += 0.1 * test::gaussian(z.rows(), 3, seed + 1);
  y += 0.1 * test::gaussian(z.rows(), 3, seed + 2);
  return ViewPair(DataMatrix::from(x), DataMatrix::from(y));
}

Matrix projection_covariance(const Matrix& p) {
  const Matrix c = test::centered(p);
  return c.transpose() * c / static_cast<double>(p.rows());
}

}  // namespace

TEST_SUITE("kcca_dual") {
  TEST_CASE("identical views give matching coefficients") {
    const DataMatrix x = test::gaussian_data(80, 3, 1);
    const RbfKernel k(1.5);
    const DualKccaSolution s = solve_kcca_dual(ViewPair(x, x), k, k, 0.05, 0.05, 3);
    for (Eigen::Index l = 0; l < 3; ++l) {
      const double same = (s.a.col(l) - s.b.col(l)).cwiseAbs().maxCoeff();
      const double flipped = (s.a.col(l) + s.b.col(l)).cwiseAbs().maxCoeff();
      CHECK(std::min(same, flipped) <= 1e-8 * s.a.col(l).cwiseAbs().maxCoeff());
    }
  }

  TEST_CASE("linear kernel reproduces primal CCA") {
    const SyntheticPair p = make_synthetic_pair(200, 8, 8, 4, 0.7, 3);
    const ViewPair pair(DataMatrix::from(test::centered(p.pair.x().values())),
                        DataMatrix::from(test::centered(p.pair.y().values())));
    const Vector primal = solve_cca(estimate_covariances(pair, 0.0, 0.0, true), 8).sigma;
    const DualKccaSolution dual = solve_kcca_dual(pair, LinearKernel{}, LinearKernel{}, 0.0, 0.0, 8);
    CHECK(max_abs(dual.correlations - primal) <= 1e-6);
  }

  TEST_CASE("RBF solution is at least as correlated as linear CCA") {
    const ViewPair pair = nonlinear_pair(200, 5);
    const double r = 1e-3;
    const double linear = solve_cca(estimate_covariances(pair, r, r, true), 3).total();
    const DualKccaSolution s = solve_kcca_dual(pair, RbfKernel(median_heuristic(pair.x())),
                                               RbfKernel(median_heuristic(pair.y())), r, r, 3);
    CHECK(s.correlations.sum() >= linear);
  }

  TEST_CASE("training projections satisfy the unit-covariance constraints") {
    const ViewPair pair = nonlinear_pair(150, 7);
    for (bool center : {false, true}) {
      DualKccaOptions opts;
      opts.center_kernels = center;
      const DualKccaSolution s = solve_kcca_dual(pair, RbfKernel(1.0), RbfKernel(1.2), 1e-2, 1e-2, 4, opts);
      const Matrix px = project_dual(s, View::x, pair.x());
      const Matrix py = project_dual(s, View::y, pair.y());
      CHECK(max_abs(projection_covariance(px) - Matrix::Identity(4, 4)) <= 1e-6);
      CHECK(max_abs(projection_covariance(py) - Matrix::Identity(4, 4)) <= 1e-6);
      CHECK(s.a.rows() == 150);
      CHECK(s.b.rows() == 150);
    }
  }

  TEST_CASE("agrees with a dense nonsymmetric eigensolver") {
    const ViewPair pair = nonlinear_pair(120, 11);
    const double rx = 1e-2, ry = 2e-2;
    const Eigen::Index L = 4;
    const RbfKernel kx(1.1), ky(0.9);
    const DualKccaSolution s = solve_kcca_dual(pair, kx, ky, rx, ry, L);

    const Matrix gx = gram_matrix(Kernel(kx), pair.x());
    const Matrix gy = gram_matrix(Kernel(ky), pair.y());
    const Matrix id = Matrix::Identity(120, 120);
    const Matrix op = (gx + 120 * rx * id).partialPivLu().solve(gy) * (gy + 120 * ry * id).partialPivLu().solve(gx);
    Eigen::EigenSolver<Matrix> eig(op);
    std::vector<double> values;
    for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i) values.push_back(eig.eigenvalues()(i).real());
    std::sort(values.rbegin(), values.rend());
    for (Eigen::Index l = 0; l < L; ++l) CHECK(std::abs(s.eigenvalues(l) - values[static_cast<std::size_t>(l)]) <= 1e-8);

    // A spans an invariant subspace of the operator.
    const Matrix image = op * s.a;
    const Matrix coeff = s.a.colPivHouseholderQr().solve(image);
    CHECK((image - s.a * coeff).norm() <= 1e-8 * image.norm());
  }

  TEST_CASE("project_dual on training data and single queries") {
    const ViewPair pair = nonlinear_pair(60, 13);
    const RbfKernel kx(1.0);
    const DualKccaSolution s = solve_kcca_dual(pair, kx, RbfKernel(1.0), 1e-2, 1e-2, 2);
    const Matrix kxa = gram_matrix(Kernel(kx), pair.x()) * s.a;
    CHECK(max_abs(project_dual(s, View::x, pair.x()) - kxa) <= 1e-12);
    const std::vector<std::size_t> third{2};
    const Matrix row = project_dual(s, View::x, select_rows(pair.x(), third));
    CHECK(max_abs(row - kxa.row(2)) <= 1e-12);
  }

  TEST_CASE("project_dual matches an explicit kernel expansion") {
    const ViewPair pair = nonlinear_pair(50, 17);
    const RbfKernel ky(0.7);
    const DualKccaSolution s = solve_kcca_dual(pair, RbfKernel(1.0), ky, 1e-2, 1e-2, 2);
    const DataMatrix q = test::gaussian_data(9, 3, 99);
    const Matrix got = project_dual(s, View::y, q);
    for (std::size_t r = 0; r < 9; ++r) {
      for (Eigen::Index l = 0; l < 2; ++l) {
        double sum = 0.0;
        for (std::size_t i = 0; i < 50; ++i) sum += s.b(static_cast<Eigen::Index>(i), l) * rbf_eval(ky, q.row(r), pair.y().row(i));
        CHECK(got(static_cast<Eigen::Index>(r), l) == doctest::Approx(sum).epsilon(1e-10));
      }
    }
    CHECK_THROWS_AS(project_dual(s, View::y, test::gaussian_data(2, 4, 0)), ShapeError);
  }

  TEST_CASE("centered kernels expand against the centered Gram") {
    const ViewPair pair = nonlinear_pair(40, 19);
    DualKccaOptions opts;
    opts.center_kernels = true;
    const RbfKernel kx(1.0);
    const DualKccaSolution s = solve_kcca_dual(pair, kx, RbfKernel(1.0), 1e-2, 1e-2, 2, opts);
    const Matrix k = gram_matrix(Kernel(kx), pair.x());
    const Matrix h = Matrix::Identity(40, 40) - Matrix::Constant(40, 40, 1.0 / 40.0);
    CHECK(max_abs(project_dual(s, View::x, pair.x()) - h * k * h * s.a) <= 1e-10);
  }

  TEST_CASE("parameter checks") {
    const ViewPair pair = nonlinear_pair(60, 23);
    DualKccaOptions opts;
    opts.max_samples = 50;
    CHECK_THROWS_AS(solve_kcca_dual(pair, RbfKernel(1.0), RbfKernel(1.0), 1e-2, 1e-2, 2, opts), ParameterError);
    CHECK_THROWS_AS(solve_kcca_dual(pair, RbfKernel(1.0), RbfKernel(1.0), -1.0, 1e-2, 2), ParameterError);
    CHECK_THROWS_AS(solve_kcca_dual(pair, RbfKernel(1.0), RbfKernel(1.0), 1e-2, 1e-2, 60), ParameterError);
    CHECK(DualKccaOptions{}.max_samples == 5000);
  }
}
