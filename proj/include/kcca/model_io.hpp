#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>

#include "kcca/kcca_dual.hpp"
#include "kcca/knoi.hpp"

namespace kcca {

enum class Solver { cca, kcca_exact, fkcca, nkcca, knoi };

std::string solver_name(Solver solver);
Solver parse_solver(const std::string& name);

/// Flat "key=value" metadata file.
using KeyValues = std::map<std::string, std::string>;

void write_key_values(const KeyValues& kv, const std::filesystem::path& path);
KeyValues read_key_values(const std::filesystem::path& path);

/// Shortest decimal string that parses back to the same double.
std::string format_double(double value);
double parse_double(const std::string& text, const std::string& what);

/// A trained two-view model that can project new samples and persist itself
/// as a directory of binary matrices plus meta.txt.
class TrainedModel {
 public:
  virtual ~TrainedModel() = default;
  virtual Solver solver() const = 0;
  virtual Eigen::Index dim() const = 0;
  virtual std::size_t input_dim(View view) const = 0;
  /// Feature count M, or 0 when the solver has none.
  virtual std::size_t features() const { return 0; }
  virtual Matrix project(View view, const DataMatrix& queries) const = 0;
  virtual void save(const std::filesystem::path& dir) const = 0;
};

std::unique_ptr<TrainedModel> make_linear_model(CcaSolution sol);
std::unique_ptr<TrainedModel> make_feature_model(Solver solver, FeatureMap map_x, FeatureMap map_y,
                                                 CcaSolution sol);
/// Training views are referenced by path and verified by fingerprint on load.
std::unique_ptr<TrainedModel> make_dual_model(DualKccaSolution sol, std::filesystem::path train_x,
                                              std::filesystem::path train_y, MatrixFormat format);
std::unique_ptr<TrainedModel> make_knoi_model(KnoiModel model);

/// Reloads a model written by TrainedModel::save. Regenerated random feature
/// maps and referenced training files are checked against stored fingerprints.
std::unique_ptr<TrainedModel> load_model(const std::filesystem::path& dir);

}  // namespace kcca
