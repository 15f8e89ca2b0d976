#include "kcca/knoi.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "kcca/errors.hpp"

namespace kcca {

namespace {

constexpr double kWhiteningFloor = 1e-8;
constexpr double kFinalizeFloor = 1e-10;
constexpr Eigen::Index kProjectionBlock = 2048;

Matrix symmetric(const Matrix& m) { return 0.5 * (m + m.transpose()); }

// Statistics blended into the running estimates plus the resulting gradients.
struct StepTerms {
  Vector mx, my;
  Matrix sxx, syy;
  KnoiGradients grad;
};

StepTerms step_terms(const KnoiState& state, const Eigen::Ref<const Matrix>& phi_x,
                     const Eigen::Ref<const Matrix>& phi_y, double rho, double weight_decay) {
  if (phi_x.rows() != phi_y.rows() || phi_x.rows() < 1) {
    throw ShapeError("minibatch views must have the same, nonzero number of rows");
  }
  if (phi_x.cols() != state.u.rows() || phi_y.cols() != state.v.rows()) {
    throw ShapeError("minibatch feature dimension does not match (U, V)");
  }
  const double inv_b = 1.0 / static_cast<double>(phi_x.rows());
  const Matrix px = phi_x * state.u;
  const Matrix py = phi_y * state.v;

  StepTerms t;
  t.mx = rho * state.mx + (1.0 - rho) * px.colwise().mean().transpose();
  t.my = rho * state.my + (1.0 - rho) * py.colwise().mean().transpose();
  const Matrix cx = px.rowwise() - t.mx.transpose();
  const Matrix cy = py.rowwise() - t.my.transpose();
  t.sxx = symmetric(rho * state.sxx + (1.0 - rho) * inv_b * (cx.transpose() * cx));
  t.syy = symmetric(rho * state.syy + (1.0 - rho) * inv_b * (cy.transpose() * cy));

  const Matrix whiten_y = psd_inverse_sqrt(t.syy, kWhiteningFloor);
  const Matrix whiten_x = psd_inverse_sqrt(t.sxx, kWhiteningFloor);
  t.grad.du = inv_b * (phi_x.transpose() * (cx - cy * whiten_y)) + weight_decay * state.u;
  t.grad.dv = inv_b * (phi_y.transpose() * (cy - cx * whiten_x)) + weight_decay * state.v;
  return t;
}

// Streams rows through the feature map and U in blocks.
Matrix stream_projection(const FeatureMap& map, const Matrix& weights,
                         const Eigen::Ref<const RowMatrix>& rows) {
  Matrix out(rows.rows(), weights.cols());
  for (Eigen::Index start = 0; start < rows.rows(); start += kProjectionBlock) {
    const Eigen::Index count = std::min(kProjectionBlock, rows.rows() - start);
    out.middleRows(start, count) = transform_features(map, rows.middleRows(start, count)) * weights;
  }
  return out;
}

void check_maps(const ViewPair& pair, const FeatureMap& map_x, const FeatureMap& map_y) {
  if (input_dim(map_x) != pair.x().cols() || input_dim(map_y) != pair.y().cols()) {
    throw ShapeError("feature map input dimensions do not match the view pair");
  }
}

RowMatrix gather(const RowMatrix& m, std::span<const std::size_t> rows) {
  RowMatrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t k = 0; k < rows.size(); ++k)
    out.row(static_cast<Eigen::Index>(k)) = m.row(static_cast<Eigen::Index>(rows[k]));
  return out;
}

Matrix gather(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t k = 0; k < rows.size(); ++k)
    out.row(static_cast<Eigen::Index>(k)) = m.row(static_cast<Eigen::Index>(rows[k]));
  return out;
}

}  // namespace

void KnoiConfig::validate() const {
  if (dim < 1) throw ParameterError("KNOI projection dimension L must be >= 1");
  if (batch < 1) throw ParameterError("KNOI minibatch size must be >= 1");
  if (!(rho >= 0.0 && rho < 1.0)) throw ParameterError("KNOI time constant rho must lie in [0, 1)");
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw ParameterError("KNOI learning rate must be >= 0");
  if (!(mu >= 0.0 && mu < 1.0)) throw ParameterError("KNOI momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ParameterError("KNOI weight decay must be >= 0");
  if (!(init_std > 0.0) || !std::isfinite(init_std)) {
    throw ParameterError("KNOI init_std must be positive (zero init gives zero covariances)");
  }
  if (warmup() < static_cast<std::size_t>(dim)) {
    throw ParameterError("KNOI warm-up minibatch b0=" + std::to_string(warmup()) +
                         " is smaller than L=" + std::to_string(dim) +
                         "; the initial covariance would be rank-deficient");
  }
  if (!(divergence_ratio >= 0.0 && divergence_ratio < 1.0)) {
    throw ParameterError("divergence ratio must lie in [0, 1)");
  }
}

KnoiModel::KnoiModel(FeatureMap map_x, FeatureMap map_y, Matrix u, Matrix v, FinalizeTransform fin)
    : map_x_(std::move(map_x)), map_y_(std::move(map_y)), u_(std::move(u)), v_(std::move(v)),
      fin_(std::move(fin)) {
  if (static_cast<std::size_t>(u_.rows()) != feature_dim(map_x_) ||
      static_cast<std::size_t>(v_.rows()) != feature_dim(map_y_) || u_.cols() != v_.cols()) {
    throw ShapeError("projection matrices do not match the feature maps");
  }
  if (fin_.wx.rows() != u_.cols() || fin_.wy.rows() != v_.cols()) {
    throw ShapeError("finalize transform does not match the projection dimension");
  }
}

Matrix KnoiModel::raw_projection(View view, const Eigen::Ref<const RowMatrix>& queries) const {
  return view == View::x ? stream_projection(map_x_, u_, queries) : stream_projection(map_y_, v_, queries);
}

std::string format_progress(const ProgressRecord& record) {
  std::ostringstream out;
  out.precision(17);
  out << "iteration=" << record.iteration << " samples_seen=" << record.samples_seen
      << " train_corr=" << record.train_corr;
  if (record.test_corr) out << " test_corr=" << *record.test_corr;
  return out.str();
}

KnoiState knoi_init(const KnoiConfig& cfg, const ViewPair& pair, const FeatureMap& map_x,
                    const FeatureMap& map_y) {
  cfg.validate();
  check_maps(pair, map_x, map_y);
  const auto mx = static_cast<Eigen::Index>(feature_dim(map_x));
  const auto my = static_cast<Eigen::Index>(feature_dim(map_y));
  if (cfg.dim > std::min(mx, my)) throw ParameterError("L exceeds the feature dimension");

  KnoiState state;
  std::mt19937_64 rng(cfg.init_seed);
  std::normal_distribution<double> normal(0.0, cfg.init_std);
  state.u.resize(mx, cfg.dim);
  state.v.resize(my, cfg.dim);
  for (Eigen::Index j = 0; j < cfg.dim; ++j)
    for (Eigen::Index i = 0; i < mx; ++i) state.u(i, j) = normal(rng);
  for (Eigen::Index j = 0; j < cfg.dim; ++j)
    for (Eigen::Index i = 0; i < my; ++i) state.v(i, j) = normal(rng);
  state.du = Matrix::Zero(mx, cfg.dim);
  state.dv = Matrix::Zero(my, cfg.dim);

  const auto rows = sample_indices(pair.rows(), std::min(cfg.warmup(), pair.rows()), cfg.batch_seed);
  knoi_warmup(state, transform_features(map_x, gather(pair.x().values(), rows)),
              transform_features(map_y, gather(pair.y().values(), rows)));
  return state;
}

void knoi_warmup(KnoiState& state, const Eigen::Ref<const Matrix>& phi_x,
                 const Eigen::Ref<const Matrix>& phi_y) {
  if (phi_x.rows() != phi_y.rows() || phi_x.rows() < 1) {
    throw ShapeError("warm-up views must have the same, nonzero number of rows");
  }
  const double inv_b = 1.0 / static_cast<double>(phi_x.rows());
  const Matrix px = phi_x * state.u;
  const Matrix py = phi_y * state.v;
  state.mx = px.colwise().mean().transpose();
  state.my = py.colwise().mean().transpose();
  const Matrix cx = px.rowwise() - state.mx.transpose();
  const Matrix cy = py.rowwise() - state.my.transpose();
  state.sxx = symmetric(inv_b * (cx.transpose() * cx));
  state.syy = symmetric(inv_b * (cy.transpose() * cy));
  state.iter = 0;
}

KnoiGradients knoi_step(KnoiState& state, const Eigen::Ref<const Matrix>& phi_x,
                        const Eigen::Ref<const Matrix>& phi_y, const KnoiConfig& cfg) {
  const std::string where = "at iteration " + std::to_string(state.iter + 1) +
                            "; try a smaller learning rate or a larger time constant";
  StepTerms t;
  try {
    t = step_terms(state, phi_x, phi_y, cfg.rho, cfg.weight_decay);
  } catch (const NumericError& e) {
    // NaN statistics make the whitening eigensolver fail before the gradient exists.
    throw NumericError(std::string(e.what()) + " " + where);
  }
  if (!t.grad.du.allFinite() || !t.grad.dv.allFinite()) {
    throw NumericError("non-finite KNOI gradient " + where);
  }
  state.mx = std::move(t.mx);
  state.my = std::move(t.my);
  state.sxx = std::move(t.sxx);
  state.syy = std::move(t.syy);
  state.du = cfg.mu * state.du - cfg.eta * t.grad.du;
  state.dv = cfg.mu * state.dv - cfg.eta * t.grad.dv;
  state.u += state.du;
  state.v += state.dv;
  ++state.iter;
  return std::move(t.grad);
}

KnoiGradients knoi_batch_gradients(const KnoiState& state, const Eigen::Ref<const Matrix>& phi_x,
                                   const Eigen::Ref<const Matrix>& phi_y, double weight_decay) {
  return step_terms(state, phi_x, phi_y, 0.0, weight_decay).grad;
}

FinalizeTransform finalize_projections(const Eigen::Ref<const Matrix>& px,
                                       const Eigen::Ref<const Matrix>& py) {
  const CovarianceTriple cov = estimate_covariances(px, py, 0.0, 0.0, true);
  double top = 0.0;
  for (const auto& [s, view] : {std::pair{&cov.sxx, "x"}, std::pair{&cov.syy, "y"}}) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(*s, Eigen::EigenvaluesOnly);
    const double hi = eig.eigenvalues().maxCoeff();
    const double lo = eig.eigenvalues().minCoeff();
    if (!(hi > 0.0) || lo < kFinalizeFloor * hi) {
      throw NumericError(std::string("projections of view ") + view +
                         " are rank-deficient; cannot enforce unit covariance");
    }
    top = top == 0.0 ? hi : std::min(top, hi);
  }
  const CcaSolution sol = solve_cca(cov, px.cols(), CcaOptions{kFinalizeFloor * top});
  return {cov.mean_x, cov.mean_y, sol.u, sol.v, sol.sigma};
}

KnoiModel finalize(const KnoiState& state, const ViewPair& pair, const FeatureMap& map_x,
                   const FeatureMap& map_y) {
  check_maps(pair, map_x, map_y);
  FinalizeTransform fin = finalize_projections(stream_projection(map_x, state.u, pair.x().values()),
                                               stream_projection(map_y, state.v, pair.y().values()));
  return KnoiModel(map_x, map_y, state.u, state.v, std::move(fin));
}

Matrix knoi_project(const KnoiModel& model, View view, const DataMatrix& queries) {
  if (queries.cols() != input_dim(model.map(view))) {
    throw ShapeError("query dimensionality " + std::to_string(queries.cols()) +
                     " does not match the feature map (" + std::to_string(input_dim(model.map(view))) + ")");
  }
  const FinalizeTransform& fin = model.transform();
  const Matrix raw = model.raw_projection(view, queries.values());
  if (view == View::x) return (raw.rowwise() - fin.mean_x.transpose()) * fin.wx;
  return (raw.rowwise() - fin.mean_y.transpose()) * fin.wy;
}

KnoiTrainResult knoi_train(const ViewPair& pair, const FeatureMap& map_x, const FeatureMap& map_y,
                           const KnoiConfig& cfg, const ProgressSink& sink, const ViewPair* held_out) {
  KnoiState state = knoi_init(cfg, pair, map_x, map_y);
  const std::size_t n = pair.rows();
  const std::size_t per_epoch = (n + cfg.batch - 1) / cfg.batch;
  const std::size_t total = cfg.max_iters > 0 ? cfg.max_iters : cfg.epochs * per_epoch;

  const std::size_t cache_bytes = n * (feature_dim(map_x) + feature_dim(map_y)) * sizeof(double);
  const bool cached = cache_bytes <= cfg.feature_cache_mib * (std::size_t{1} << 20);
  Matrix phi_x_all, phi_y_all;
  if (cached) {
    phi_x_all = transform_features(map_x, pair.x().values());
    phi_y_all = transform_features(map_y, pair.y().values());
  }

  auto train_projections = [&]() -> std::pair<Matrix, Matrix> {
    if (cached) return {phi_x_all * state.u, phi_y_all * state.v};
    return {stream_projection(map_x, state.u, pair.x().values()),
            stream_projection(map_y, state.v, pair.y().values())};
  };

  std::vector<ProgressRecord> curve;
  std::size_t samples_seen = 0;
  double best = 0.0;
  bool halted = false;
  std::string diagnostic;
  auto checkpoint = [&]() {
    const auto [px, py] = train_projections();
    ProgressRecord rec{state.iter, samples_seen, total_canonical_correlation(px, py), std::nullopt};
    if (held_out) {
      rec.test_corr = total_canonical_correlation(stream_projection(map_x, state.u, held_out->x().values()),
                                                  stream_projection(map_y, state.v, held_out->y().values()));
    }
    curve.push_back(rec);
    if (sink) sink(rec);
    if (rec.iteration > 0 && rec.train_corr < cfg.divergence_ratio * best) {
      halted = true;
      std::ostringstream msg;
      msg << "objective fell to " << rec.train_corr << " from a best of " << best << " at iteration "
          << rec.iteration << "; try a smaller learning rate or a larger time constant rho";
      diagnostic = msg.str();
    }
    best = std::max(best, rec.train_corr);
  };

  checkpoint();
  std::seed_seq order_seq{static_cast<std::uint32_t>(cfg.batch_seed),
                          static_cast<std::uint32_t>(cfg.batch_seed >> 32), 1u};
  std::mt19937_64 order_rng(order_seq);
  std::vector<std::size_t> order(n);
  while (state.iter < total && !halted) {
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (std::size_t i = n - 1; i > 0; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i);
      std::swap(order[i], order[pick(order_rng)]);
    }
    for (std::size_t start = 0; start < n && state.iter < total && !halted; start += cfg.batch) {
      const std::span<const std::size_t> rows(order.data() + start, std::min(cfg.batch, n - start));
      if (cached) {
        knoi_step(state, gather(phi_x_all, rows), gather(phi_y_all, rows), cfg);
      } else {
        knoi_step(state, transform_features(map_x, gather(pair.x().values(), rows)),
                  transform_features(map_y, gather(pair.y().values(), rows)), cfg);
      }
      samples_seen += rows.size();
      const bool epoch_end = start + cfg.batch >= n;
      const bool periodic = cfg.checkpoint_every > 0 && state.iter % cfg.checkpoint_every == 0;
      if (epoch_end || periodic || state.iter == total) checkpoint();
    }
  }

  FinalizeTransform fin = [&] {
    const auto [px, py] = train_projections();
    return finalize_projections(px, py);
  }();
  return {KnoiModel(map_x, map_y, state.u, state.v, std::move(fin)), std::move(curve), state.iter,
          halted, std::move(diagnostic)};
}

}  // namespace kcca
