#include "kcca/model_io.hpp"

#include <charconv>
#include <fstream>

#include "kcca/errors.hpp"

namespace kcca {

namespace fs = std::filesystem;

namespace {

std::string hex(std::uint64_t v) {
  char buf[17];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, 16);
  return std::string(buf, res.ptr);
}

const std::string& require(const KeyValues& kv, const std::string& key) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw IoError("model metadata is missing key '" + key + "'");
  return it->second;
}

std::uint64_t parse_u64(const std::string& text, const std::string& what, int base = 10) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v, base);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw IoError("cannot parse " + what + " from '" + text + "'");
  }
  return v;
}

void save_vector(const Vector& v, const fs::path& path) { write_matrix(Matrix(v), path); }
Vector load_vector(const fs::path& path) {
  const Matrix m = read_dense(path);
  if (m.cols() != 1) throw IoError(path.string() + ": expected a column vector");
  return m.col(0);
}

void save_map(const FeatureMap& map, const std::string& prefix, const fs::path& dir, KeyValues& kv) {
  kv[prefix + ".fingerprint"] = hex(map_fingerprint(map));
  if (const auto* rff = std::get_if<RffMap>(&map)) {
    kv[prefix + ".kind"] = "rff";
    kv[prefix + ".input_dim"] = std::to_string(rff->input_dim());
    kv[prefix + ".features"] = std::to_string(rff->features());
    kv[prefix + ".width"] = format_double(rff->width());
    kv[prefix + ".seed"] = std::to_string(rff->seed());
    return;
  }
  const auto& nys = std::get<NystromMap>(map);
  kv[prefix + ".kind"] = "nystrom";
  kv[prefix + ".width"] = format_double(nys.kernel.width());
  kv[prefix + ".floor"] = format_double(nys.floor);
  write_matrix(nys.landmarks, dir / (prefix + "_landmarks.bin"), MatrixFormat::binary);
  write_matrix(nys.r_tilde, dir / (prefix + "_r_tilde.bin"));
  save_vector(nys.lambda_inv_sqrt, dir / (prefix + "_lambda_inv_sqrt.bin"));
}

FeatureMap load_map(const std::string& prefix, const fs::path& dir, const KeyValues& kv) {
  const std::string& kind = require(kv, prefix + ".kind");
  const std::uint64_t expected = parse_u64(require(kv, prefix + ".fingerprint"), "fingerprint", 16);
  FeatureMap map = [&]() -> FeatureMap {
    if (kind == "rff") {
      return RffMap(parse_u64(require(kv, prefix + ".input_dim"), "input_dim"),
                    parse_u64(require(kv, prefix + ".features"), "features"),
                    parse_double(require(kv, prefix + ".width"), "width"),
                    parse_u64(require(kv, prefix + ".seed"), "seed"));
    }
    if (kind != "nystrom") throw IoError("unknown feature map kind '" + kind + "'");
    NystromMap nys{read_matrix(dir / (prefix + "_landmarks.bin"), MatrixFormat::binary),
                   RbfKernel(parse_double(require(kv, prefix + ".width"), "width")),
                   read_dense(dir / (prefix + "_r_tilde.bin")),
                   load_vector(dir / (prefix + "_lambda_inv_sqrt.bin"))};
    nys.floor = parse_double(require(kv, prefix + ".floor"), "floor");
    nys.kept = static_cast<std::size_t>(nys.lambda_inv_sqrt.size());
    if (nys.r_tilde.cols() != nys.lambda_inv_sqrt.size()) throw IoError("inconsistent Nystrom factors");
    return nys;
  }();
  if (map_fingerprint(map) != expected) {
    throw IoError("feature map '" + prefix + "' fingerprint mismatch: regenerated map differs from the trained one");
  }
  return map;
}

void save_cca(const CcaSolution& sol, const fs::path& dir, KeyValues& kv) {
  write_matrix(sol.u, dir / "u.bin");
  write_matrix(sol.v, dir / "v.bin");
  save_vector(sol.sigma, dir / "sigma.bin");
  save_vector(sol.cov.mean_x, dir / "mean_x.bin");
  save_vector(sol.cov.mean_y, dir / "mean_y.bin");
  kv["rx"] = format_double(sol.cov.rx);
  kv["ry"] = format_double(sol.cov.ry);
  kv["L"] = std::to_string(sol.dim());
}

CcaSolution load_cca(const fs::path& dir, const KeyValues& kv) {
  CcaSolution sol;
  sol.u = read_dense(dir / "u.bin");
  sol.v = read_dense(dir / "v.bin");
  sol.sigma = load_vector(dir / "sigma.bin");
  sol.cov.mean_x = load_vector(dir / "mean_x.bin");
  sol.cov.mean_y = load_vector(dir / "mean_y.bin");
  sol.cov.rx = parse_double(require(kv, "rx"), "rx");
  sol.cov.ry = parse_double(require(kv, "ry"), "ry");
  if (sol.u.cols() != sol.sigma.size() || sol.v.cols() != sol.sigma.size() ||
      static_cast<std::uint64_t>(sol.sigma.size()) != parse_u64(require(kv, "L"), "L") ||
      sol.u.rows() != sol.cov.mean_x.size() || sol.v.rows() != sol.cov.mean_y.size()) {
    throw IoError(dir.string() + ": inconsistent CCA solution files");
  }
  return sol;
}

void prepare_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(dir.string() + ": cannot create directory: " + ec.message());
}

std::size_t map_input_dim(const FeatureMap& map) { return kcca::input_dim(map); }

class LinearModel final : public TrainedModel {
 public:
  explicit LinearModel(CcaSolution sol) : sol_(std::move(sol)) {}
  Solver solver() const override { return Solver::cca; }
  Eigen::Index dim() const override { return sol_.dim(); }
  std::size_t input_dim(View view) const override {
    return static_cast<std::size_t>(view == View::x ? sol_.u.rows() : sol_.v.rows());
  }
  Matrix project(View view, const DataMatrix& q) const override {
    return view == View::x ? sol_.project_x(q.values()) : sol_.project_y(q.values());
  }
  void save(const fs::path& dir) const override {
    prepare_dir(dir);
    KeyValues kv{{"solver", solver_name(Solver::cca)}};
    save_cca(sol_, dir, kv);
    write_key_values(kv, dir / "meta.txt");
  }

 private:
  CcaSolution sol_;
};

class FeatureModel final : public TrainedModel {
 public:
  FeatureModel(Solver solver, FeatureMap map_x, FeatureMap map_y, CcaSolution sol)
      : solver_(solver), map_x_(std::move(map_x)), map_y_(std::move(map_y)), sol_(std::move(sol)) {}
  Solver solver() const override { return solver_; }
  Eigen::Index dim() const override { return sol_.dim(); }
  std::size_t input_dim(View view) const override { return map_input_dim(view == View::x ? map_x_ : map_y_); }
  std::size_t features() const override { return feature_dim(map_x_); }
  Matrix project(View view, const DataMatrix& q) const override {
    if (view == View::x) return sol_.project_x(transform_features(map_x_, q.values()));
    return sol_.project_y(transform_features(map_y_, q.values()));
  }
  void save(const fs::path& dir) const override {
    prepare_dir(dir);
    KeyValues kv{{"solver", solver_name(solver_)}};
    save_cca(sol_, dir, kv);
    save_map(map_x_, "map_x", dir, kv);
    save_map(map_y_, "map_y", dir, kv);
    write_key_values(kv, dir / "meta.txt");
  }

 private:
  Solver solver_;
  FeatureMap map_x_;
  FeatureMap map_y_;
  CcaSolution sol_;
};

void save_kernel(const Kernel& k, const std::string& prefix, KeyValues& kv) {
  if (const auto* rbf = std::get_if<RbfKernel>(&k)) {
    kv[prefix + ".kind"] = "rbf";
    kv[prefix + ".width"] = format_double(rbf->width());
  } else {
    kv[prefix + ".kind"] = "linear";
  }
}

Kernel load_kernel(const std::string& prefix, const KeyValues& kv) {
  const std::string& kind = require(kv, prefix + ".kind");
  if (kind == "linear") return LinearKernel{};
  if (kind != "rbf") throw IoError("unknown kernel kind '" + kind + "'");
  return RbfKernel(parse_double(require(kv, prefix + ".width"), "kernel width"));
}

class DualModel final : public TrainedModel {
 public:
  DualModel(DualKccaSolution sol, fs::path train_x, fs::path train_y, MatrixFormat format)
      : sol_(std::move(sol)), train_x_(std::move(train_x)), train_y_(std::move(train_y)), format_(format) {}
  Solver solver() const override { return Solver::kcca_exact; }
  Eigen::Index dim() const override { return sol_.dim(); }
  std::size_t input_dim(View view) const override {
    return view == View::x ? sol_.train_x.cols() : sol_.train_y.cols();
  }
  Matrix project(View view, const DataMatrix& q) const override { return project_dual(sol_, view, q); }
  void save(const fs::path& dir) const override {
    prepare_dir(dir);
    KeyValues kv{{"solver", solver_name(Solver::kcca_exact)}};
    write_matrix(sol_.a, dir / "a.bin");
    write_matrix(sol_.b, dir / "b.bin");
    save_vector(sol_.correlations, dir / "correlations.bin");
    save_kernel(sol_.kernel_x, "kernel_x", kv);
    save_kernel(sol_.kernel_y, "kernel_y", kv);
    kv["rx"] = format_double(sol_.rx);
    kv["ry"] = format_double(sol_.ry);
    kv["L"] = std::to_string(sol_.dim());
    kv["centered"] = sol_.centered ? "true" : "false";
    if (sol_.centered) {
      save_vector(sol_.gram_mean_x, dir / "gram_mean_x.bin");
      save_vector(sol_.gram_mean_y, dir / "gram_mean_y.bin");
      kv["gram_grand_x"] = format_double(sol_.gram_grand_x);
      kv["gram_grand_y"] = format_double(sol_.gram_grand_y);
    }
    kv["train_x"] = fs::absolute(train_x_).string();
    kv["train_y"] = fs::absolute(train_y_).string();
    kv["train_format"] = format_ == MatrixFormat::binary ? "binary" : "csv";
    kv["train_x.fingerprint"] = hex(sol_.fingerprint_x);
    kv["train_y.fingerprint"] = hex(sol_.fingerprint_y);
    write_key_values(kv, dir / "meta.txt");
  }

  static std::unique_ptr<TrainedModel> load(const fs::path& dir, const KeyValues& kv) {
    const MatrixFormat format = parse_format(require(kv, "train_format"));
    const fs::path px = require(kv, "train_x");
    const fs::path py = require(kv, "train_y");
    DataMatrix tx = read_matrix(px, format);
    DataMatrix ty = read_matrix(py, format);
    if (fingerprint(tx) != parse_u64(require(kv, "train_x.fingerprint"), "fingerprint", 16) ||
        fingerprint(ty) != parse_u64(require(kv, "train_y.fingerprint"), "fingerprint", 16)) {
      throw IoError(dir.string() + ": referenced training files do not match the fingerprints recorded at training time");
    }
    DualKccaSolution sol{read_dense(dir / "a.bin"),
                         read_dense(dir / "b.bin"),
                         std::move(tx),
                         std::move(ty),
                         load_kernel("kernel_x", kv),
                         load_kernel("kernel_y", kv),
                         parse_double(require(kv, "rx"), "rx"),
                         parse_double(require(kv, "ry"), "ry"),
                         Vector(),
                         load_vector(dir / "correlations.bin"),
                         require(kv, "centered") == "true",
                         Vector(),
                         Vector()};
    sol.eigenvalues = sol.correlations.cwiseAbs2();
    sol.fingerprint_x = fingerprint(sol.train_x);
    sol.fingerprint_y = fingerprint(sol.train_y);
    if (sol.centered) {
      sol.gram_mean_x = load_vector(dir / "gram_mean_x.bin");
      sol.gram_mean_y = load_vector(dir / "gram_mean_y.bin");
      sol.gram_grand_x = parse_double(require(kv, "gram_grand_x"), "gram_grand_x");
      sol.gram_grand_y = parse_double(require(kv, "gram_grand_y"), "gram_grand_y");
    }
    if (sol.a.rows() != static_cast<Eigen::Index>(sol.train_x.rows()) ||
        sol.b.rows() != static_cast<Eigen::Index>(sol.train_y.rows())) {
      throw IoError(dir.string() + ": dual coefficients do not match the training files");
    }
    return std::make_unique<DualModel>(std::move(sol), px, py, format);
  }

 private:
  DualKccaSolution sol_;
  fs::path train_x_;
  fs::path train_y_;
  MatrixFormat format_;
};

class KnoiTrainedModel final : public TrainedModel {
 public:
  explicit KnoiTrainedModel(KnoiModel model) : model_(std::move(model)) {}
  Solver solver() const override { return Solver::knoi; }
  Eigen::Index dim() const override { return model_.dim(); }
  std::size_t input_dim(View view) const override { return map_input_dim(model_.map(view)); }
  std::size_t features() const override { return feature_dim(model_.map(View::x)); }
  Matrix project(View view, const DataMatrix& q) const override { return knoi_project(model_, view, q); }
  void save(const fs::path& dir) const override {
    prepare_dir(dir);
    KeyValues kv{{"solver", solver_name(Solver::knoi)}, {"L", std::to_string(model_.dim())}};
    save_map(model_.map(View::x), "map_x", dir, kv);
    save_map(model_.map(View::y), "map_y", dir, kv);
    write_matrix(model_.u(), dir / "u.bin");
    write_matrix(model_.v(), dir / "v.bin");
    const FinalizeTransform& fin = model_.transform();
    write_matrix(fin.wx, dir / "finalize_wx.bin");
    write_matrix(fin.wy, dir / "finalize_wy.bin");
    save_vector(fin.mean_x, dir / "finalize_mean_x.bin");
    save_vector(fin.mean_y, dir / "finalize_mean_y.bin");
    save_vector(fin.sigma, dir / "finalize_sigma.bin");
    write_key_values(kv, dir / "meta.txt");
  }

  static std::unique_ptr<TrainedModel> load(const fs::path& dir, const KeyValues& kv) {
    FinalizeTransform fin{load_vector(dir / "finalize_mean_x.bin"), load_vector(dir / "finalize_mean_y.bin"),
                          read_dense(dir / "finalize_wx.bin"), read_dense(dir / "finalize_wy.bin"),
                          load_vector(dir / "finalize_sigma.bin")};
    KnoiModel model(load_map("map_x", dir, kv), load_map("map_y", dir, kv), read_dense(dir / "u.bin"),
                    read_dense(dir / "v.bin"), std::move(fin));
    return std::make_unique<KnoiTrainedModel>(std::move(model));
  }

 private:
  KnoiModel model_;
};

}  // namespace

std::string solver_name(Solver solver) {
  switch (solver) {
    case Solver::cca: return "cca";
    case Solver::kcca_exact: return "kcca-exact";
    case Solver::fkcca: return "fkcca";
    case Solver::nkcca: return "nkcca";
    case Solver::knoi: return "knoi";
  }
  return "unknown";
}

Solver parse_solver(const std::string& name) {
  for (Solver s : {Solver::cca, Solver::kcca_exact, Solver::fkcca, Solver::nkcca, Solver::knoi}) {
    if (solver_name(s) == name) return s;
  }
  throw ParameterError("unknown solver '" + name + "' (expected cca, kcca-exact, fkcca, nkcca or knoi)");
}

std::string format_double(double value) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& text, const std::string& what) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    throw ParameterError("cannot parse " + what + " from '" + text + "'");
  }
  return v;
}

void write_key_values(const KeyValues& kv, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  for (const auto& [k, v] : kv) out << k << '=' << v << '\n';
  if (!out) throw IoError(path.string() + ": write failed");
}

KeyValues read_key_values(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string() + ": cannot open for reading");
  KeyValues kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw IoError(path.string() + ": line " + std::to_string(lineno) + " is not key=value");
    }
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

std::unique_ptr<TrainedModel> make_linear_model(CcaSolution sol) {
  return std::make_unique<LinearModel>(std::move(sol));
}

std::unique_ptr<TrainedModel> make_feature_model(Solver solver, FeatureMap map_x, FeatureMap map_y,
                                                 CcaSolution sol) {
  return std::make_unique<FeatureModel>(solver, std::move(map_x), std::move(map_y), std::move(sol));
}

std::unique_ptr<TrainedModel> make_dual_model(DualKccaSolution sol, fs::path train_x, fs::path train_y,
                                              MatrixFormat format) {
  return std::make_unique<DualModel>(std::move(sol), std::move(train_x), std::move(train_y), format);
}

std::unique_ptr<TrainedModel> make_knoi_model(KnoiModel model) {
  return std::make_unique<KnoiTrainedModel>(std::move(model));
}

std::unique_ptr<TrainedModel> load_model(const fs::path& dir) {
  const KeyValues kv = read_key_values(dir / "meta.txt");
  const Solver solver = parse_solver(require(kv, "solver"));
  switch (solver) {
    case Solver::cca:
      return make_linear_model(load_cca(dir, kv));
    case Solver::fkcca:
    case Solver::nkcca:
      return make_feature_model(solver, load_map("map_x", dir, kv), load_map("map_y", dir, kv),
                                load_cca(dir, kv));
    case Solver::kcca_exact:
      return DualModel::load(dir, kv);
    case Solver::knoi:
      return KnoiTrainedModel::load(dir, kv);
  }
  throw IoError(dir.string() + ": unsupported solver");
}

}  // namespace kcca
