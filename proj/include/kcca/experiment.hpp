#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "kcca/model_io.hpp"

namespace kcca {

/// Sub-seeds are master + offset, so every random stream of an experiment is
/// pinned down by one number.
enum class SeedOffset : std::uint64_t {
  data = 0,
  rff_x = 1,
  rff_y = 2,
  landmarks_x = 3,
  landmarks_y = 4,
  init = 5,
  batch = 6,
  median_x = 7,
  median_y = 8,
};

std::uint64_t derive_seed(std::uint64_t master, SeedOffset offset);

/// One training run, read from an INI-style file:
///
///   [data]   train_x, train_y, test_x, test_y, format = binary|csv
///   [model]  solver, L, M, width_x, width_y (number or "median"), median_samples,
///            rx, ry, center_kernels, name
///   [knoi]   batch, rho, eta, mu, weight_decay, init_std, epochs, max_iters,
///            warmup_batch, checkpoint_every, divergence_ratio, feature_cache_mib
///   [run]    seed, out
///   [provenance]  train_x.fingerprint, ... (manifests only)
///
/// Relative paths are taken relative to the directory holding the file.
struct ExperimentConfig {
  std::filesystem::path train_x, train_y;
  std::filesystem::path test_x, test_y;  ///< both empty when there is no held-out set
  MatrixFormat format = MatrixFormat::binary;

  Solver solver = Solver::cca;
  Eigen::Index dim = 10;
  std::size_t features = 0;
  std::optional<double> width_x, width_y;  ///< nullopt selects the median trick
  std::size_t median_samples = kDefaultMedianSamples;
  double rx = 1e-4;
  double ry = 1e-4;
  bool center_kernels = false;
  std::string name;  ///< label for bench tables; defaults to the solver

  KnoiConfig knoi;
  std::uint64_t seed = 0;
  std::filesystem::path out;

  /// Optional [provenance] section written into manifests: input fingerprints
  /// that must still match when the experiment is re-run.
  KeyValues provenance;

  /// Data files exist and solver-specific fields are in range.
  void validate() const;
  bool has_test() const { return !test_x.empty(); }
  std::string label() const;
};

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Inverse of parse_config, with absolute paths and every field spelled out.
std::string render_config(const ExperimentConfig& cfg);

struct Metrics {
  std::string method;
  std::size_t features = 0;
  Eigen::Index dim = 0;
  double train_corr = 0.0;
  std::optional<double> test_corr;
  double seconds = 0.0;
};

inline constexpr const char* kMetricsHeader = "method,M,L,train_corr,test_corr,seconds";
std::string format_metrics_row(const Metrics& m);

struct TrainOutcome {
  Metrics metrics;
  std::unique_ptr<TrainedModel> model;
  std::vector<ProgressRecord> curve;  ///< empty for closed-form solvers
  std::string diagnostic;             ///< set when KNOI halted early
};

/// Loads the data, fits the configured solver and measures the correlations.
/// The timer covers only the solver call.
TrainOutcome train_experiment(const ExperimentConfig& cfg, const ProgressSink& sink = {});

/// train_experiment plus the output directory: metrics.csv, manifest.ini,
/// model/, and for KNOI learning_curve.csv and progress.log.
TrainOutcome run_train(const ExperimentConfig& cfg);

struct EvalReport {
  double total = 0.0;
  Vector components;
};

EvalReport run_eval(const TrainedModel& model, const ViewPair& pair);
EvalReport run_eval(const std::filesystem::path& model_dir, const std::filesystem::path& x,
                    const std::filesystem::path& y, MatrixFormat format);
std::string format_eval_report(const EvalReport& report);

struct BenchRow {
  std::string method;
  std::size_t features = 0;  ///< 0 prints as "-"
  std::optional<double> corr;
  double minutes = 0.0;
  std::string error;  ///< non-empty marks a failed run
};

/// Aligned text table: Method | M | Canon. Corr. | Time (minutes).
std::string format_bench_table(const std::vector<BenchRow>& rows);
std::string format_bench_csv(const std::vector<BenchRow>& rows);

/// Runs each config in order under out/<index>_<label>/; failures become
/// failed rows. Writes bench.txt, bench.csv and curve_<index>_<label>.csv files.
std::vector<BenchRow> run_bench(const std::vector<ExperimentConfig>& configs,
                                const std::filesystem::path& out);

void write_learning_curve(const std::vector<ProgressRecord>& curve, const std::filesystem::path& path);

}  // namespace kcca
