#include "kcca/features.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "kcca/errors.hpp"

namespace kcca {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::uint64_t hash_values(const double* data, std::size_t count, std::uint64_t h) {
  return fingerprint_bytes({reinterpret_cast<const unsigned char*>(data), count * sizeof(double)}, h);
}

}  // namespace

RffMap::RffMap(std::size_t input_dim, std::size_t features, double width, std::uint64_t seed,
               bool materialize)
    : input_dim_(input_dim), features_(features), width_(width), seed_(seed) {
  if (input_dim < 1) throw ParameterError("random features need input dimension >= 1");
  if (features < 1) throw ParameterError("random features need M >= 1");
  if (!(width > 0.0) || !std::isfinite(width)) throw ParameterError("kernel width must be positive");
  if (materialize) {
    const std::size_t count = (features + kBlock - 1) / kBlock;
    blocks_.reserve(count);
    for (std::size_t i = 0; i < count; ++i) blocks_.push_back(generate_block(i));
  }
}

RffMap::Block RffMap::generate_block(std::size_t index) const {
  std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, kTwoPi);

  const std::size_t begin = index * kBlock;
  const std::size_t count = std::min(kBlock, features_ - begin);
  Block block{RowMatrix(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(input_dim_)),
              Vector(static_cast<Eigen::Index>(count))};
  for (Eigen::Index j = 0; j < block.w.rows(); ++j) {
    for (Eigen::Index i = 0; i < block.w.cols(); ++i) block.w(j, i) = normal(rng) / width_;
    double b = phase(rng);
    if (b >= kTwoPi) b = 0.0;
    block.b(j) = b;
  }
  return block;
}

template <typename Fn>
void RffMap::for_each_block(Fn&& fn) const {
  const std::size_t count = (features_ + kBlock - 1) / kBlock;
  for (std::size_t i = 0; i < count; ++i) {
    if (materialized()) {
      fn(i * kBlock, blocks_[i]);
    } else {
      fn(i * kBlock, generate_block(i));
    }
  }
}

Matrix RffMap::frequencies() const {
  Matrix w(static_cast<Eigen::Index>(features_), static_cast<Eigen::Index>(input_dim_));
  for_each_block([&](std::size_t begin, const Block& block) {
    w.middleRows(static_cast<Eigen::Index>(begin), block.w.rows()) = block.w;
  });
  return w;
}

Vector RffMap::phases() const {
  Vector b(static_cast<Eigen::Index>(features_));
  for_each_block([&](std::size_t begin, const Block& block) {
    b.segment(static_cast<Eigen::Index>(begin), block.b.size()) = block.b;
  });
  return b;
}

Matrix RffMap::transform(const Eigen::Ref<const RowMatrix>& x) const {
  if (static_cast<std::size_t>(x.cols()) != input_dim_) {
    throw ShapeError("random feature map expects " + std::to_string(input_dim_) +
                     " input columns, got " + std::to_string(x.cols()));
  }
  const double scale = std::sqrt(2.0 / static_cast<double>(features_));
  Matrix out(x.rows(), static_cast<Eigen::Index>(features_));
  for_each_block([&](std::size_t begin, const Block& block) {
    Matrix z = x * block.w.transpose();
    z.rowwise() += block.b.transpose();
    out.middleCols(static_cast<Eigen::Index>(begin), block.w.rows()) = scale * z.array().cos().matrix();
  });
  return out;
}

std::uint64_t RffMap::fingerprint() const {
  std::uint64_t h = fingerprint_bytes({});
  for_each_block([&](std::size_t, const Block& block) {
    h = hash_values(block.w.data(), static_cast<std::size_t>(block.w.size()), h);
    h = hash_values(block.b.data(), static_cast<std::size_t>(block.b.size()), h);
  });
  return h;
}

RffMap rff_fit(std::size_t input_dim, std::size_t features, double width, std::uint64_t seed) {
  return RffMap(input_dim, features, width, seed, true);
}

Matrix rff_transform(const RffMap& map, const DataMatrix& x) { return map.transform(x.values()); }

Matrix NystromMap::transform(const Eigen::Ref<const RowMatrix>& x) const {
  if (x.cols() != static_cast<Eigen::Index>(landmarks.cols())) {
    throw ShapeError("Nystrom map expects " + std::to_string(landmarks.cols()) +
                     " input columns, got " + std::to_string(x.cols()));
  }
  return gram_matrix(kernel, x, landmarks.values()) * (r_tilde * lambda_inv_sqrt.asDiagonal());
}

std::uint64_t NystromMap::fingerprint() const {
  std::uint64_t h = kcca::fingerprint(landmarks);
  const double width = kernel.width();
  h = hash_values(&width, 1, h);
  h = hash_values(r_tilde.data(), static_cast<std::size_t>(r_tilde.size()), h);
  return hash_values(lambda_inv_sqrt.data(), static_cast<std::size_t>(lambda_inv_sqrt.size()), h);
}

NystromMap nystrom_fit(const DataMatrix& landmarks, const RbfKernel& k, double relative_floor) {
  if (!(relative_floor >= 0.0)) throw ParameterError("Nystrom floor must be nonnegative");
  const Matrix g = gram_matrix(k, landmarks);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(g);
  if (eig.info() != Eigen::Success) throw NumericError("eigendecomposition of the landmark Gram failed");

  // Eigen returns ascending eigenvalues; keep the largest ones, largest first.
  const Vector& lambda = eig.eigenvalues();
  const Eigen::Index m = lambda.size();
  const double floor = relative_floor * lambda(m - 1);
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = m - 1; i >= 0; --i) {
    if (lambda(i) > 0.0 && lambda(i) >= floor) keep.push_back(i);
  }
  if (keep.empty()) {
    throw NumericError("all landmark Gram eigenvalues are below the floor (degenerate landmarks)");
  }
  NystromMap map{landmarks, k, Matrix(), Vector()};
  map.floor = floor;
  map.kept = keep.size();
  map.r_tilde.resize(m, static_cast<Eigen::Index>(keep.size()));
  map.lambda_inv_sqrt.resize(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c) {
    const auto col = static_cast<Eigen::Index>(c);
    map.r_tilde.col(col) = eig.eigenvectors().col(keep[c]);
    map.lambda_inv_sqrt(col) = 1.0 / std::sqrt(lambda(keep[c]));
  }
  return map;
}

Matrix nystrom_transform(const NystromMap& map, const DataMatrix& x) { return map.transform(x.values()); }

DataMatrix choose_landmarks(const DataMatrix& x, std::size_t count, std::uint64_t seed) {
  if (count < 1) throw ParameterError("need at least one landmark");
  const auto rows = sample_indices(x.rows(), count, seed);
  return select_rows(x, rows);
}

Matrix transform_features(const FeatureMap& map, const Eigen::Ref<const RowMatrix>& x) {
  return std::visit([&](const auto& m) { return m.transform(x); }, map);
}

std::size_t feature_dim(const FeatureMap& map) {
  if (const auto* rff = std::get_if<RffMap>(&map)) return rff->features();
  return std::get<NystromMap>(map).kept;
}

std::size_t input_dim(const FeatureMap& map) {
  if (const auto* rff = std::get_if<RffMap>(&map)) return rff->input_dim();
  return std::get<NystromMap>(map).landmarks.cols();
}

std::uint64_t map_fingerprint(const FeatureMap& map) {
  return std::visit([](const auto& m) { return m.fingerprint(); }, map);
}

}  // namespace kcca
