#include "kcca/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "kcca/errors.hpp"

namespace kcca {

RbfKernel::RbfKernel(double width) : width_(width) {
  if (!(width > 0.0) || !std::isfinite(width)) {
    throw ParameterError("RBF kernel width must be positive and finite");
  }
}

double rbf_eval(const RbfKernel& k, std::span<const double> x, std::span<const double> x2) {
  if (x.size() != x2.size()) {
    throw ShapeError("rbf_eval dimension mismatch: " + std::to_string(x.size()) + " vs " +
                     std::to_string(x2.size()));
  }
  double sq = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - x2[i];
    sq += d * d;
  }
  return std::exp(-sq / (2.0 * k.width() * k.width()));
}

Matrix squared_distances(const Eigen::Ref<const RowMatrix>& a, const Eigen::Ref<const RowMatrix>& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("distance dimension mismatch: " + std::to_string(a.cols()) + " vs " +
                     std::to_string(b.cols()));
  }
  const Vector na = a.rowwise().squaredNorm();
  const Vector nb = b.rowwise().squaredNorm();
  Matrix d = -2.0 * (a * b.transpose());
  d.colwise() += na;
  d.rowwise() += nb.transpose();
  return d.cwiseMax(0.0);
}

Matrix gram_matrix(const Kernel& k, const Eigen::Ref<const RowMatrix>& a,
                   const Eigen::Ref<const RowMatrix>& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("gram_matrix dimension mismatch: " + std::to_string(a.cols()) + " vs " +
                     std::to_string(b.cols()));
  }
  if (std::holds_alternative<LinearKernel>(k)) return a * b.transpose();
  const double s = std::get<RbfKernel>(k).width();
  return (squared_distances(a, b) * (-1.0 / (2.0 * s * s))).array().exp().matrix();
}

Matrix gram_matrix(const Kernel& k, const DataMatrix& a, const DataMatrix& b) {
  return gram_matrix(k, a.values(), b.values());
}

Matrix gram_matrix(const Kernel& k, const Eigen::Ref<const RowMatrix>& a) {
  Matrix g = gram_matrix(k, a, a);
  g = (0.5 * (g + g.transpose())).eval();
  if (std::holds_alternative<RbfKernel>(k)) g.diagonal().setOnes();
  return g;
}

Matrix gram_matrix(const Kernel& k, const DataMatrix& a) { return gram_matrix(k, a.values()); }

double median_heuristic(const DataMatrix& a, std::size_t n_samples, std::uint64_t seed) {
  if (a.rows() < 2) throw ParameterError("median heuristic needs at least two rows");
  if (n_samples < 2) throw ParameterError("median heuristic needs n_samples >= 2");
  const auto rows = sample_indices(a.rows(), std::min(n_samples, a.rows()), seed);
  const DataMatrix sample = select_rows(a, rows);
  const Matrix d2 = squared_distances(sample.values(), sample.values());

  const Eigen::Index n = d2.rows();
  std::vector<double> dist;
  dist.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = j + 1; i < n; ++i) dist.push_back(std::sqrt(d2(i, j)));

  const std::size_t mid = dist.size() / 2;
  std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid), dist.end());
  double median = dist[mid];
  if (dist.size() % 2 == 0) {
    const double below = *std::max_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid));
    median = 0.5 * (median + below);
  }
  if (!(median > 0.0)) {
    throw NumericError("median pairwise distance is zero (sampled points identical); set the bandwidth manually");
  }
  return median;
}

}  // namespace kcca
