#include "kcca/experiment.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>

#include "kcca/errors.hpp"

namespace kcca {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::uint64_t parse_count(const std::string& text, const std::string& key) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    throw ParameterError("config key '" + key + "' expects a non-negative integer, got '" + text + "'");
  }
  return v;
}

bool parse_bool(const std::string& text, const std::string& key) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ParameterError("config key '" + key + "' expects true or false, got '" + text + "'");
}

std::optional<double> parse_width(const std::string& text, const std::string& key) {
  if (text == "median") return std::nullopt;
  return parse_double(text, key);
}

std::string render_width(const std::optional<double>& w) { return w ? format_double(*w) : "median"; }

fs::path resolve(const fs::path& base, const std::string& value) {
  const fs::path p(value);
  return p.is_absolute() || base.empty() ? p : base / p;
}

std::string hex(std::uint64_t v) {
  char buf[17];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, 16);
  return std::string(buf, res.ptr);
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const fs::path&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto path_key = [&t](const std::string& key, fs::path ExperimentConfig::*field) {
      t["data." + key] = [field](ExperimentConfig& c, const std::string& v, const fs::path& base) {
        c.*field = resolve(base, v);
      };
    };
    path_key("train_x", &ExperimentConfig::train_x);
    path_key("train_y", &ExperimentConfig::train_y);
    path_key("test_x", &ExperimentConfig::test_x);
    path_key("test_y", &ExperimentConfig::test_y);
    t["data.format"] = [](ExperimentConfig& c, const std::string& v, const fs::path&) { c.format = parse_format(v); };

    t["model.solver"] = [](ExperimentConfig& c, const std::string& v, const fs::path&) { c.solver = parse_solver(v); };
    t["model.L"] = [](ExperimentConfig& c, const std::string& v, const fs::path&) {
      c.dim = static_cast<Eigen::Index>(parse_count(v, "model.L"));
    };
    t["model.M"] = [](ExperimentConfig& c, const std::string& v, const fs::path&) { c.features = parse_count(v, "model.M"); };
    t["model.width_x"] = [](ExperimentConfig& c, const std::string& v, const fs::path&) {
      c.width_x = parse_width(v, "model.width_x");
    };
    t["model.width_y"] = [](ExperimentConfig& c, const std::string& v, const fs::path&) {
      c.width_y = parse_width(v, "model.width_y");
    };
    t["model.median_samples"] = [](ExperimentConfig& c, const std::string& v, const fs::path&) {
      c.median_samples = parse_count(v, "model.median_samples");
    };
    t["model.rx"] = [](ExperimentConfig& c, const std::string& v, const fs::path&) { c.rx = parse_double(v, "model.rx"); };
    t["model.ry"] = [](ExperimentConfig& c, const std::string& v, const fs::path&) { c.ry = parse_double(v, "model.ry"); };
    t["model.center_kernels"] = [](ExperimentConfig& c, const std::string& v, const fs::path&) {
      c.center_kernels = parse_bool(v, "model.center_kernels");
    };
    t["model.name"] = [](ExperimentConfig& c, const std::string& v, const fs::path&) { c.name = v; };

    auto knoi_count = [&t](const std::string& key, std::size_t KnoiConfig::*field) {
      t["knoi." + key] = [field, key](ExperimentConfig& c, const std::string& v, const fs::path&) {
        c.knoi.*field = parse_count(v, "knoi." + key);
      };
    };
    auto knoi_real = [&t](const std::string& key, double KnoiConfig::*field) {
      t["knoi." + key] = [field, key](ExperimentConfig& c, const std::string& v, const fs::path&) {
        c.knoi.*field = parse_double(v, "knoi." + key);
      };
    };
    knoi_count("batch", &KnoiConfig::batch);
    knoi_count("epochs", &KnoiConfig::epochs);
    knoi_count("max_iters", &KnoiConfig::max_iters);
    knoi_count("warmup_batch", &KnoiConfig::warmup_batch);
    knoi_count("checkpoint_every", &KnoiConfig::checkpoint_every);
    knoi_count("feature_cache_mib", &KnoiConfig::feature_cache_mib);
    knoi_real("rho", &KnoiConfig::rho);
    knoi_real("eta", &KnoiConfig::eta);
    knoi_real("mu", &KnoiConfig::mu);
    knoi_real("weight_decay", &KnoiConfig::weight_decay);
    knoi_real("init_std", &KnoiConfig::init_std);
    knoi_real("divergence_ratio", &KnoiConfig::divergence_ratio);

    t["run.seed"] = [](ExperimentConfig& c, const std::string& v, const fs::path&) { c.seed = parse_count(v, "run.seed"); };
    t["run.out"] = [](ExperimentConfig& c, const std::string& v, const fs::path& base) { c.out = resolve(base, v); };
    return t;
  }();
  return table;
}

void require_file(const fs::path& p, const std::string& what) {
  if (!fs::is_regular_file(p)) throw IoError(what + " file '" + p.string() + "' does not exist");
}

bool uses_features(Solver s) { return s == Solver::fkcca || s == Solver::nkcca || s == Solver::knoi; }
bool uses_kernel(Solver s) { return s != Solver::cca; }

ViewPair load_pair(const fs::path& x, const fs::path& y, MatrixFormat format) {
  return ViewPair(read_matrix(x, format), read_matrix(y, format));
}

void check_provenance(const ExperimentConfig& cfg, const std::string& key, const DataMatrix& m,
                      const fs::path& path) {
  const auto it = cfg.provenance.find(key + ".fingerprint");
  if (it == cfg.provenance.end()) return;
  if (it->second != hex(fingerprint(m))) {
    throw IoError(path.string() + ": contents differ from the file recorded in the manifest (" + key + ")");
  }
}

double resolve_width(const std::optional<double>& width, const DataMatrix& view, const ExperimentConfig& cfg,
                     SeedOffset offset) {
  if (width) return *width;
  return median_heuristic(view, cfg.median_samples, derive_seed(cfg.seed, offset));
}

double evaluate(const TrainedModel& model, const ViewPair& pair) {
  return total_canonical_correlation(model.project(View::x, pair.x()), model.project(View::y, pair.y()));
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  out << text;
  if (!out) throw IoError(path.string() + ": write failed");
}

std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return s;
}

std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

std::string safe_label(const std::string& s) {
  std::string out = s;
  for (char& c : out) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
  }
  return out;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, SeedOffset offset) {
  return master + static_cast<std::uint64_t>(offset);
}

std::string ExperimentConfig::label() const { return name.empty() ? solver_name(solver) : name; }

void ExperimentConfig::validate() const {
  require_file(train_x, "train_x");
  require_file(train_y, "train_y");
  if (test_x.empty() != test_y.empty()) throw ParameterError("test_x and test_y must be given together");
  if (has_test()) {
    require_file(test_x, "test_x");
    require_file(test_y, "test_y");
  }
  if (dim < 1) throw ParameterError("L must be >= 1");
  if (!(rx >= 0.0) || !(ry >= 0.0) || !std::isfinite(rx) || !std::isfinite(ry)) {
    throw ParameterError("rx and ry must be finite and >= 0");
  }
  if (uses_features(solver)) {
    if (features == 0) throw ParameterError(solver_name(solver) + " needs the feature count M");
    if (static_cast<std::size_t>(dim) > features) {
      throw ParameterError("L=" + std::to_string(dim) + " exceeds M=" + std::to_string(features));
    }
  }
  if (uses_kernel(solver)) {
    for (const auto& w : {width_x, width_y}) {
      if (w && !(*w > 0.0 && std::isfinite(*w))) throw ParameterError("kernel widths must be positive");
    }
    if ((!width_x || !width_y) && median_samples < 2) {
      throw ParameterError("the median trick needs median_samples >= 2");
    }
  }
  if (center_kernels && solver != Solver::kcca_exact) {
    throw ParameterError("center_kernels only applies to kcca-exact");
  }
  if (solver == Solver::knoi) {
    KnoiConfig k = knoi;
    k.dim = dim;
    k.validate();
  }
}

ExperimentConfig parse_config(const std::string& text, const fs::path& base_dir) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ParameterError("config line " + std::to_string(e.line()) + ": " + e.message());
  }
  ExperimentConfig cfg;
  for (const auto& [section, entries] : tree) {
    if (entries.empty() && !entries.data().empty()) {
      throw ParameterError("config key '" + section + "' is outside of any section");
    }
    if (section != "data" && section != "model" && section != "knoi" && section != "run" &&
        section != "provenance") {
      throw ParameterError("unknown config section [" + section + "]");
    }
    for (const auto& [key, node] : entries) {
      const std::string value = trim(node.data());
      if (section == "provenance") {
        cfg.provenance[key] = value;
        continue;
      }
      const auto it = setters().find(section + "." + key);
      if (it == setters().end()) throw ParameterError("unknown config key '" + key + "' in [" + section + "]");
      it->second(cfg, value, base_dir);
    }
  }
  cfg.knoi.dim = cfg.dim;
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string() + ": cannot open config");
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return parse_config(text.str(), path.parent_path());
  } catch (const Error& e) {
    throw ParameterError(path.string() + ": " + e.what());
  }
}

std::string render_config(const ExperimentConfig& c) {
  std::ostringstream out;
  auto abs = [](const fs::path& p) { return p.empty() ? std::string() : fs::absolute(p).lexically_normal().string(); };
  out << "[data]\n"
      << "train_x = " << abs(c.train_x) << "\n"
      << "train_y = " << abs(c.train_y) << "\n";
  if (c.has_test()) {
    out << "test_x = " << abs(c.test_x) << "\n"
        << "test_y = " << abs(c.test_y) << "\n";
  }
  out << "format = " << (c.format == MatrixFormat::binary ? "binary" : "csv") << "\n\n"
      << "[model]\n"
      << "solver = " << solver_name(c.solver) << "\n"
      << "L = " << c.dim << "\n"
      << "M = " << c.features << "\n"
      << "width_x = " << render_width(c.width_x) << "\n"
      << "width_y = " << render_width(c.width_y) << "\n"
      << "median_samples = " << c.median_samples << "\n"
      << "rx = " << format_double(c.rx) << "\n"
      << "ry = " << format_double(c.ry) << "\n"
      << "center_kernels = " << (c.center_kernels ? "true" : "false") << "\n";
  if (!c.name.empty()) out << "name = " << c.name << "\n";
  const KnoiConfig& k = c.knoi;
  out << "\n[knoi]\n"
      << "batch = " << k.batch << "\n"
      << "rho = " << format_double(k.rho) << "\n"
      << "eta = " << format_double(k.eta) << "\n"
      << "mu = " << format_double(k.mu) << "\n"
      << "weight_decay = " << format_double(k.weight_decay) << "\n"
      << "init_std = " << format_double(k.init_std) << "\n"
      << "epochs = " << k.epochs << "\n"
      << "max_iters = " << k.max_iters << "\n"
      << "warmup_batch = " << k.warmup_batch << "\n"
      << "checkpoint_every = " << k.checkpoint_every << "\n"
      << "divergence_ratio = " << format_double(k.divergence_ratio) << "\n"
      << "feature_cache_mib = " << k.feature_cache_mib << "\n\n"
      << "[run]\n"
      << "seed = " << c.seed << "\n";
  if (!c.out.empty()) out << "out = " << abs(c.out) << "\n";
  if (!c.provenance.empty()) {
    out << "\n[provenance]\n";
    for (const auto& [key, value] : c.provenance) out << key << " = " << value << "\n";
  }
  return out.str();
}

std::string format_metrics_row(const Metrics& m) {
  std::ostringstream out;
  out << csv_field(m.method) << ',' << m.features << ',' << m.dim << ',' << format_double(m.train_corr) << ','
      << (m.test_corr ? format_double(*m.test_corr) : std::string()) << ',' << format_double(m.seconds);
  return out.str();
}

TrainOutcome train_experiment(const ExperimentConfig& cfg, const ProgressSink& sink) {
  cfg.validate();
  const ViewPair train = load_pair(cfg.train_x, cfg.train_y, cfg.format);
  check_provenance(cfg, "train_x", train.x(), cfg.train_x);
  check_provenance(cfg, "train_y", train.y(), cfg.train_y);
  std::optional<ViewPair> test;
  if (cfg.has_test()) {
    test.emplace(load_pair(cfg.test_x, cfg.test_y, cfg.format));
    check_provenance(cfg, "test_x", test->x(), cfg.test_x);
    check_provenance(cfg, "test_y", test->y(), cfg.test_y);
    if (test->x().cols() != train.x().cols() || test->y().cols() != train.y().cols()) {
      throw ShapeError("test views have different dimensionality from the training views");
    }
  }

  double sx = 0.0, sy = 0.0;
  if (uses_kernel(cfg.solver)) {
    sx = resolve_width(cfg.width_x, train.x(), cfg, SeedOffset::median_x);
    sy = resolve_width(cfg.width_y, train.y(), cfg, SeedOffset::median_y);
  }

  TrainOutcome result;
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  switch (cfg.solver) {
    case Solver::cca:
      result.model = make_linear_model(solve_cca(estimate_covariances(train, cfg.rx, cfg.ry, true), cfg.dim));
      break;
    case Solver::kcca_exact: {
      DualKccaOptions opts;
      opts.center_kernels = cfg.center_kernels;
      if (train.rows() > opts.max_samples) {
        throw ParameterError("kcca-exact refuses N=" + std::to_string(train.rows()) + " (limit " +
                             std::to_string(opts.max_samples) + "); use fkcca, nkcca or knoi instead");
      }
      result.model = make_dual_model(
          solve_kcca_dual(train, RbfKernel(sx), RbfKernel(sy), cfg.rx, cfg.ry, cfg.dim, opts), cfg.train_x,
          cfg.train_y, cfg.format);
      break;
    }
    case Solver::fkcca:
    case Solver::nkcca: {
      FeatureMap map_x = cfg.solver == Solver::fkcca
                             ? FeatureMap(RffMap(train.x().cols(), cfg.features, sx,
                                                 derive_seed(cfg.seed, SeedOffset::rff_x)))
                             : FeatureMap(nystrom_fit(choose_landmarks(train.x(), cfg.features,
                                                                       derive_seed(cfg.seed, SeedOffset::landmarks_x)),
                                                      RbfKernel(sx)));
      FeatureMap map_y = cfg.solver == Solver::fkcca
                             ? FeatureMap(RffMap(train.y().cols(), cfg.features, sy,
                                                 derive_seed(cfg.seed, SeedOffset::rff_y)))
                             : FeatureMap(nystrom_fit(choose_landmarks(train.y(), cfg.features,
                                                                       derive_seed(cfg.seed, SeedOffset::landmarks_y)),
                                                      RbfKernel(sy)));
      const Matrix phi_x = transform_features(map_x, train.x().values());
      const Matrix phi_y = transform_features(map_y, train.y().values());
      CcaSolution sol = solve_cca(estimate_covariances(phi_x, phi_y, cfg.rx, cfg.ry, true), cfg.dim);
      result.model = make_feature_model(cfg.solver, std::move(map_x), std::move(map_y), std::move(sol));
      break;
    }
    case Solver::knoi: {
      KnoiConfig k = cfg.knoi;
      k.dim = cfg.dim;
      k.init_seed = derive_seed(cfg.seed, SeedOffset::init);
      k.batch_seed = derive_seed(cfg.seed, SeedOffset::batch);
      const FeatureMap map_x(RffMap(train.x().cols(), cfg.features, sx, derive_seed(cfg.seed, SeedOffset::rff_x)));
      const FeatureMap map_y(RffMap(train.y().cols(), cfg.features, sy, derive_seed(cfg.seed, SeedOffset::rff_y)));
      KnoiTrainResult r = knoi_train(train, map_x, map_y, k, sink, test ? &*test : nullptr);
      result.curve = std::move(r.curve);
      result.diagnostic = std::move(r.diagnostic);
      result.model = make_knoi_model(std::move(r.model));
      break;
    }
  }
  const double seconds = std::chrono::duration<double>(Clock::now() - start).count();

  result.metrics.method = cfg.label();
  result.metrics.features = uses_features(cfg.solver) ? cfg.features : 0;
  result.metrics.dim = result.model->dim();
  result.metrics.train_corr = evaluate(*result.model, train);
  if (test) result.metrics.test_corr = evaluate(*result.model, *test);
  result.metrics.seconds = seconds;
  return result;
}

void write_learning_curve(const std::vector<ProgressRecord>& curve, const fs::path& path) {
  const bool with_test = !curve.empty() && curve.front().test_corr.has_value();
  std::ostringstream out;
  out << (with_test ? "samples_seen,train_corr,test_corr\n" : "samples_seen,train_corr\n");
  for (const auto& r : curve) {
    out << r.samples_seen << ',' << format_double(r.train_corr);
    if (with_test) out << ',' << format_double(r.test_corr.value_or(std::nan("")));
    out << '\n';
  }
  write_text(path, out.str());
}

TrainOutcome run_train(const ExperimentConfig& cfg) {
  if (cfg.out.empty()) throw ParameterError("no output directory given (set [run] out or pass --out)");
  std::error_code ec;
  fs::create_directories(cfg.out, ec);
  if (ec) throw IoError(cfg.out.string() + ": cannot create output directory: " + ec.message());

  std::ofstream log(cfg.out / "progress.log", std::ios::trunc);
  TrainOutcome outcome = train_experiment(cfg, [&log](const ProgressRecord& r) {
    log << format_progress(r) << '\n';
    log.flush();
  });
  log.close();
  if (outcome.curve.empty()) fs::remove(cfg.out / "progress.log", ec);

  ExperimentConfig manifest = cfg;
  const auto stamp = [&](const std::string& key, const fs::path& p) {
    manifest.provenance[key + ".fingerprint"] = hex(fingerprint(read_matrix(p, cfg.format)));
  };
  stamp("train_x", cfg.train_x);
  stamp("train_y", cfg.train_y);
  if (cfg.has_test()) {
    stamp("test_x", cfg.test_x);
    stamp("test_y", cfg.test_y);
  }
  write_text(cfg.out / "manifest.ini", render_config(manifest));
  write_text(cfg.out / "metrics.csv", std::string(kMetricsHeader) + "\n" + format_metrics_row(outcome.metrics) + "\n");
  if (!outcome.curve.empty()) write_learning_curve(outcome.curve, cfg.out / "learning_curve.csv");
  if (!outcome.diagnostic.empty()) write_text(cfg.out / "diagnostic.txt", outcome.diagnostic + "\n");
  outcome.model->save(cfg.out / "model");
  return outcome;
}

EvalReport run_eval(const TrainedModel& model, const ViewPair& pair) {
  if (pair.x().cols() != model.input_dim(View::x) || pair.y().cols() != model.input_dim(View::y)) {
    throw ShapeError("evaluation views have " + std::to_string(pair.x().cols()) + " and " +
                     std::to_string(pair.y().cols()) + " columns; the model expects " +
                     std::to_string(model.input_dim(View::x)) + " and " + std::to_string(model.input_dim(View::y)));
  }
  EvalReport report;
  report.components = canonical_correlations(model.project(View::x, pair.x()), model.project(View::y, pair.y()));
  report.total = report.components.sum();
  return report;
}

EvalReport run_eval(const fs::path& model_dir, const fs::path& x, const fs::path& y, MatrixFormat format) {
  const auto model = load_model(model_dir);
  return run_eval(*model, load_pair(x, y, format));
}

std::string format_eval_report(const EvalReport& report) {
  std::ostringstream out;
  out << "component,correlation\n";
  for (Eigen::Index i = 0; i < report.components.size(); ++i) {
    out << (i + 1) << ',' << format_double(report.components(i)) << '\n';
  }
  out << "total," << format_double(report.total) << '\n';
  return out.str();
}

std::string format_bench_table(const std::vector<BenchRow>& rows) {
  const std::vector<std::string> header{"Method", "M", "Canon. Corr.", "Time (minutes)"};
  std::vector<std::vector<std::string>> cells;
  for (const auto& r : rows) {
    const bool failed = !r.error.empty();
    cells.push_back({upper(r.method), r.features == 0 ? "-" : std::to_string(r.features),
                     failed ? "failed" : (r.corr ? fixed2(*r.corr) : "-"), failed ? "-" : fixed2(r.minutes)});
  }
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    width[c] = header[c].size();
    for (const auto& row : cells) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream out;
  auto emit = [&](const std::vector<std::string>& row) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c > 0) out << " | ";
      // Method is left-aligned, numbers right-aligned.
      const std::string pad(width[c] - row[c].size(), ' ');
      out << (c == 0 ? row[c] + pad : pad + row[c]);
    }
    out << '\n';
  };
  emit(header);
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c > 0) out << "-+-";
    out << std::string(width[c], '-');
  }
  out << '\n';
  for (const auto& row : cells) emit(row);
  for (const auto& r : rows) {
    if (!r.error.empty()) out << "failed " << r.method << ": " << r.error << '\n';
  }
  return out.str();
}

std::string format_bench_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream out;
  out << "method,M,total_corr,minutes,status\n";
  for (const auto& r : rows) {
    const bool failed = !r.error.empty();
    out << csv_field(r.method) << ',' << r.features << ','
        << (!failed && r.corr ? format_double(*r.corr) : std::string()) << ','
        << (failed ? std::string() : format_double(r.minutes)) << ','
        << (failed ? csv_field("failed: " + r.error) : std::string("ok")) << '\n';
  }
  return out.str();
}

std::vector<BenchRow> run_bench(const std::vector<ExperimentConfig>& configs, const fs::path& out) {
  if (configs.empty()) throw ParameterError("bench needs at least one config");
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError(out.string() + ": cannot create output directory: " + ec.message());

  std::vector<BenchRow> rows;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    ExperimentConfig cfg = configs[i];
    const std::string tag = std::to_string(i + 1) + "_" + safe_label(cfg.label());
    cfg.out = out / tag;
    BenchRow row{cfg.label(), uses_features(cfg.solver) ? cfg.features : 0, std::nullopt, 0.0, {}};
    try {
      const TrainOutcome r = run_train(cfg);
      row.corr = r.metrics.test_corr ? r.metrics.test_corr : std::optional<double>(r.metrics.train_corr);
      row.minutes = r.metrics.seconds / 60.0;
      if (!r.curve.empty()) write_learning_curve(r.curve, out / ("curve_" + tag + ".csv"));
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  write_text(out / "bench.txt", format_bench_table(rows));
  write_text(out / "bench.csv", format_bench_csv(rows));
  return rows;
}

}  // namespace kcca
