#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "kcca/cca.hpp"
#include "kcca/features.hpp"

namespace kcca {

/// Optimizer settings for stochastic approximate KCCA. Defaults follow the
/// large-scale split-digit setup (b=2500, rho=0, eta=0.01, mu=0.995).
struct KnoiConfig {
  Eigen::Index dim = 10;  ///< L
  std::size_t batch = 2500;
  double rho = 0.0;
  double eta = 0.01;
  double mu = 0.995;
  double weight_decay = 1e-5;
  double init_std = 0.1;
  /// Passes over the data; ignored when max_iters > 0.
  std::size_t epochs = 1;
  std::size_t max_iters = 0;
  /// Warm-up minibatch size b0; 0 means `batch`.
  std::size_t warmup_batch = 0;
  /// Iterations between objective checkpoints; 0 checkpoints at epoch ends only.
  std::size_t checkpoint_every = 0;
  std::uint64_t init_seed = 0;
  std::uint64_t batch_seed = 0;
  /// Training halts when a checkpoint falls below this fraction of the best so far.
  double divergence_ratio = 0.5;
  /// Precompute training features when they fit in this many MiB (0 disables).
  std::size_t feature_cache_mib = 512;

  void validate() const;
  std::size_t warmup() const { return warmup_batch == 0 ? batch : warmup_batch; }
};

struct KnoiState {
  Matrix u;   ///< Mx x L
  Matrix v;   ///< My x L
  Matrix du;  ///< momentum buffers
  Matrix dv;
  Matrix sxx;  ///< running L x L projection covariances
  Matrix syy;
  Vector mx;   ///< running projection means
  Vector my;
  std::size_t iter = 0;
};

/// Gradients of the two whitened cross-view least-squares problems.
struct KnoiGradients {
  Matrix du;
  Matrix dv;
};

/// Terminal L-dimensional CCA that restores unit projection covariance.
struct FinalizeTransform {
  Vector mean_x;
  Vector mean_y;
  Matrix wx;  ///< L x L
  Matrix wy;
  Vector sigma;
};

class KnoiModel {
 public:
  KnoiModel(FeatureMap map_x, FeatureMap map_y, Matrix u, Matrix v, FinalizeTransform fin);

  const FeatureMap& map(View view) const { return view == View::x ? map_x_ : map_y_; }
  const Matrix& u() const { return u_; }
  const Matrix& v() const { return v_; }
  const FinalizeTransform& transform() const { return fin_; }
  Eigen::Index dim() const { return u_.cols(); }

  /// Raw projections U^T phi(x) before the finalize transform.
  Matrix raw_projection(View view, const Eigen::Ref<const RowMatrix>& queries) const;

 private:
  FeatureMap map_x_;
  FeatureMap map_y_;
  Matrix u_;
  Matrix v_;
  FinalizeTransform fin_;
};

struct ProgressRecord {
  std::size_t iteration = 0;
  std::size_t samples_seen = 0;
  double train_corr = 0.0;
  std::optional<double> test_corr;
};

using ProgressSink = std::function<void(const ProgressRecord&)>;

/// "iteration=12 samples_seen=6000 train_corr=... [test_corr=...]"
std::string format_progress(const ProgressRecord& record);

/// Random Gaussian (U, V), zero momentum, and covariance/mean estimates from a
/// warm-up minibatch of size b0 drawn with cfg.batch_seed.
KnoiState knoi_init(const KnoiConfig& cfg, const ViewPair& pair, const FeatureMap& map_x,
                    const FeatureMap& map_y);

/// Warm-up half of knoi_init for an already featurized minibatch.
void knoi_warmup(KnoiState& state, const Eigen::Ref<const Matrix>& phi_x,
                 const Eigen::Ref<const Matrix>& phi_y);

/// One iteration on a featurized minibatch (rows are samples):
/// running means and covariances, whitened least-squares gradients, momentum update.
/// The batch size is taken from the rows, so a short final batch uses its true size.
KnoiGradients knoi_step(KnoiState& state, const Eigen::Ref<const Matrix>& phi_x,
                        const Eigen::Ref<const Matrix>& phi_y, const KnoiConfig& cfg);

/// Gradients at the current state with the covariance and mean estimates taken
/// from this batch alone (rho = 0); the state is not modified.
KnoiGradients knoi_batch_gradients(const KnoiState& state, const Eigen::Ref<const Matrix>& phi_x,
                                   const Eigen::Ref<const Matrix>& phi_y, double weight_decay);

/// Linear CCA on L-dimensional projections (no regularization, eigenvalue floor 1e-10).
FinalizeTransform finalize_projections(const Eigen::Ref<const Matrix>& px,
                                       const Eigen::Ref<const Matrix>& py);

KnoiModel finalize(const KnoiState& state, const ViewPair& pair, const FeatureMap& map_x,
                   const FeatureMap& map_y);

Matrix knoi_project(const KnoiModel& model, View view, const DataMatrix& queries);

struct KnoiTrainResult {
  KnoiModel model;
  std::vector<ProgressRecord> curve;
  std::size_t iterations = 0;
  bool halted = false;
  std::string diagnostic;
};

KnoiTrainResult knoi_train(const ViewPair& pair, const FeatureMap& map_x, const FeatureMap& map_y,
                           const KnoiConfig& cfg, const ProgressSink& sink = {},
                           const ViewPair* held_out = nullptr);

}  // namespace kcca
