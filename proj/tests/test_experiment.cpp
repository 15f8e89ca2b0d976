#include <doctest.h>

#include <fstream>
#include <sstream>

#include "kcca/errors.hpp"
#include "kcca/experiment.hpp"
#include "support.hpp"

using namespace kcca;
using kcca::test::TempDir;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Everything in metrics.csv except the trailing seconds column.
std::string metrics_without_time(const fs::path& dir) {
  const std::string text = slurp(dir / "metrics.csv");
  const auto row = text.substr(text.find('\n') + 1);
  return row.substr(0, row.rfind(','));
}

struct Dataset {
  fs::path train_x, train_y, test_x, test_y;
};

Dataset write_views(const fs::path& dir, const ViewPair& train, const ViewPair& test) {
  Dataset d{dir / "train_x.bin", dir / "train_y.bin", dir / "test_x.bin", dir / "test_y.bin"};
  write_matrix(train.x(), d.train_x, MatrixFormat::binary);
  write_matrix(train.y(), d.train_y, MatrixFormat::binary);
  write_matrix(test.x(), d.test_x, MatrixFormat::binary);
  write_matrix(test.y(), d.test_y, MatrixFormat::binary);
  return d;
}

Dataset synthetic_dataset(const fs::path& dir, std::size_t n_train, std::size_t n_test, double noise,
                          std::uint64_t seed) {
  const SyntheticPair s = make_synthetic_pair(n_train + n_test, 6, 5, 3, noise, seed);
  std::vector<std::size_t> tr, te;
  for (std::size_t i = 0; i < n_train + n_test; ++i) (i < n_train ? tr : te).push_back(i);
  return write_views(dir, select_rows(s.pair, tr), select_rows(s.pair, te));
}

Dataset image_dataset(const fs::path& dir, std::size_t n_train, std::size_t n_test, std::uint64_t seed) {
  const ViewPair all = split_image_views(make_synthetic_images(n_train + n_test, 28, 28, seed), 28, 28);
  std::vector<std::size_t> tr, te;
  for (std::size_t i = 0; i < n_train + n_test; ++i) (i < n_train ? tr : te).push_back(i);
  return write_views(dir, select_rows(all, tr), select_rows(all, te));
}

ExperimentConfig config_for(const Dataset& d, Solver solver, Eigen::Index L, std::size_t M = 0) {
  ExperimentConfig cfg;
  cfg.train_x = d.train_x;
  cfg.train_y = d.train_y;
  cfg.test_x = d.test_x;
  cfg.test_y = d.test_y;
  cfg.solver = solver;
  cfg.dim = L;
  cfg.features = M;
  cfg.knoi.dim = L;
  return cfg;
}

}  // namespace

TEST_SUITE("experiment") {
  TEST_CASE("seed offsets") {
    CHECK(derive_seed(100, SeedOffset::data) == 100);
    CHECK(derive_seed(100, SeedOffset::rff_x) == 101);
    CHECK(derive_seed(100, SeedOffset::rff_y) == 102);
    CHECK(derive_seed(100, SeedOffset::landmarks_x) == 103);
    CHECK(derive_seed(100, SeedOffset::landmarks_y) == 104);
    CHECK(derive_seed(100, SeedOffset::init) == 105);
    CHECK(derive_seed(100, SeedOffset::batch) == 106);
    CHECK(derive_seed(100, SeedOffset::median_x) == 107);
    CHECK(derive_seed(100, SeedOffset::median_y) == 108);
  }

  TEST_CASE("config parsing") {
    const std::string text =
        "# comment\n"
        "[data]\ntrain_x = a/x.bin\ntrain_y = /abs/y.bin\nformat = csv\n"
        "[model]\nsolver = knoi\nL = 7\nM = 128\nwidth_x = median\nwidth_y = 2.5\nrx = 0.001\n"
        "[knoi]\nbatch = 64\neta = 0.05\nepochs = 3\nrho = 0.5\n"
        "[run]\nseed = 42\nout = runs/one\n";
    const ExperimentConfig c = parse_config(text, "/base");
    CHECK(c.train_x == fs::path("/base/a/x.bin"));
    CHECK(c.train_y == fs::path("/abs/y.bin"));
    CHECK(c.format == MatrixFormat::csv);
    CHECK(c.solver == Solver::knoi);
    CHECK(c.dim == 7);
    CHECK(c.features == 128);
    CHECK(!c.width_x.has_value());
    CHECK(*c.width_y == 2.5);
    CHECK(c.rx == 0.001);
    CHECK(c.ry == 1e-4);
    CHECK(c.knoi.batch == 64);
    CHECK(c.knoi.eta == 0.05);
    CHECK(c.knoi.epochs == 3);
    CHECK(c.knoi.rho == 0.5);
    CHECK(c.seed == 42);
    CHECK(c.out == fs::path("/base/runs/one"));
    CHECK(!c.has_test());
    CHECK(c.label() == "knoi");
  }

  TEST_CASE("config errors") {
    CHECK_THROWS_WITH_AS(parse_config("[model]\nsolvr = cca\n", ""), doctest::Contains("solvr"), ParameterError);
    CHECK_THROWS_WITH_AS(parse_config("[modle]\nsolver = cca\n", ""), doctest::Contains("modle"), ParameterError);
    CHECK_THROWS_AS(parse_config("[model]\nsolver = dsgd\n", ""), ParameterError);
    CHECK_THROWS_AS(parse_config("[model]\nL = -3\n", ""), ParameterError);
    CHECK_THROWS_AS(parse_config("[model]\nrx = abc\n", ""), ParameterError);
    CHECK_THROWS_AS(parse_config("[model\nrx = 1\n", ""), ParameterError);
    CHECK_THROWS_AS(load_config("/nonexistent/config.ini"), IoError);
  }

  TEST_CASE("rendered configs parse back to the same experiment") {
    TempDir dir;
    ExperimentConfig c = config_for(synthetic_dataset(dir.path(), 50, 20, 0.5, 1), Solver::nkcca, 3, 40);
    c.width_x = 1.25;
    c.knoi.mu = 0.9;
    c.seed = 77;
    c.name = "nk-small";
    c.out = dir / "out";
    c.provenance["train_x.fingerprint"] = "abc";
    const ExperimentConfig back = parse_config(render_config(c), "");
    CHECK(render_config(back) == render_config(c));
    CHECK(back.train_x == c.train_x);
    CHECK(*back.width_x == 1.25);
    CHECK(!back.width_y.has_value());
    CHECK(back.provenance == c.provenance);
  }

  TEST_CASE("validation happens before any work") {
    TempDir dir;
    const Dataset d = synthetic_dataset(dir.path(), 50, 20, 0.5, 2);
    ExperimentConfig c = config_for(d, Solver::fkcca, 3);
    CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("M"), ParameterError);
    c.features = 2;
    CHECK_THROWS_AS(c.validate(), ParameterError);
    c = config_for(d, Solver::knoi, 3, 20);
    c.knoi.batch = 2;
    CHECK_THROWS_AS(c.validate(), ParameterError);
    c = config_for(d, Solver::cca, 3);
    c.train_x = dir / "missing.bin";
    CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("missing.bin"), IoError);
    c = config_for(d, Solver::fkcca, 3, 10);
    c.center_kernels = true;
    CHECK_THROWS_AS(c.validate(), ParameterError);
    c = config_for(d, Solver::cca, 3);
    c.test_y.clear();
    CHECK_THROWS_AS(c.validate(), ParameterError);
  }

  TEST_CASE("linear CCA on noiseless shared latents") {
    TempDir dir;
    const ExperimentConfig c = config_for(synthetic_dataset(dir.path(), 500, 300, 0.0, 3), Solver::cca, 3);
    ExperimentConfig exact = c;
    exact.rx = exact.ry = 0.0;
    const TrainOutcome r = train_experiment(exact);
    CHECK(std::abs(*r.metrics.test_corr - 3.0) <= 0.05);
    CHECK(r.metrics.features == 0);
    CHECK(r.metrics.dim == 3);
  }

  TEST_CASE("fkcca runs are reproducible under the master seed") {
    TempDir dir;
    ExperimentConfig c = config_for(synthetic_dataset(dir.path(), 300, 100, 0.5, 4), Solver::fkcca, 3, 64);
    c.seed = 9;
    const TrainOutcome a = train_experiment(c);
    const TrainOutcome b = train_experiment(c);
    CHECK(a.metrics.train_corr == b.metrics.train_corr);
    CHECK(*a.metrics.test_corr == *b.metrics.test_corr);
    c.seed = 10;
    CHECK(train_experiment(c).metrics.train_corr != a.metrics.train_corr);
  }

  TEST_CASE("kcca-exact refuses large N") {
    TempDir dir;
    const DataMatrix big = test::gaussian_data(5001, 1, 1);
    write_matrix(big, dir / "x.bin", MatrixFormat::binary);
    ExperimentConfig c;
    c.train_x = c.train_y = dir / "x.bin";
    c.solver = Solver::kcca_exact;
    c.dim = 1;
    c.width_x = c.width_y = 1.0;
    CHECK_THROWS_WITH_AS(train_experiment(c), doctest::Contains("fkcca"), ParameterError);
  }

  TEST_CASE("train writes metrics, manifest, curve and model; eval replays them") {
    TempDir dir;
    const Dataset d = synthetic_dataset(dir.path(), 600, 200, 0.5, 5);
    ExperimentConfig c = config_for(d, Solver::knoi, 3, 64);
    c.knoi.batch = 50;
    c.knoi.eta = 0.1;
    c.knoi.epochs = 4;
    c.out = dir / "run";
    const TrainOutcome r = run_train(c);
    for (const char* f : {"metrics.csv", "manifest.ini", "learning_curve.csv", "progress.log", "model/meta.txt"})
      CHECK(fs::exists(c.out / f));

    const std::string metrics = slurp(c.out / "metrics.csv");
    CHECK(metrics.rfind("method,M,L,train_corr,test_corr,seconds\nknoi,64,3,", 0) == 0);

    std::istringstream curve(slurp(c.out / "learning_curve.csv"));
    std::string line;
    std::getline(curve, line);
    CHECK(line == "samples_seen,train_corr,test_corr");
    std::vector<double> values;
    while (std::getline(curve, line)) {
      const auto first = line.find(',');
      values.push_back(std::stod(line.substr(first + 1, line.find(',', first + 1) - first - 1)));
    }
    CHECK(values.size() == r.curve.size());
    CHECK(values.size() == 5);
    CHECK(values.back() > values.front());

    const EvalReport own = run_eval(c.out / "model", d.train_x, d.train_y, MatrixFormat::binary);
    CHECK(std::abs(own.total - r.metrics.train_corr) <= 1e-8);
    CHECK(own.components.size() == 3);
    CHECK(format_eval_report(own).rfind("component,correlation\n1,", 0) == 0);
  }

  TEST_CASE("re-running from the manifest reproduces the metrics") {
    TempDir dir;
    const Dataset d = synthetic_dataset(dir.path(), 300, 100, 0.5, 6);
    for (Solver s : {Solver::nkcca, Solver::knoi, Solver::kcca_exact}) {
      ExperimentConfig c = config_for(d, s, 2, 32);
      c.knoi.batch = 50;
      c.out = dir / ("first_" + solver_name(s));
      run_train(c);
      ExperimentConfig again = load_config(c.out / "manifest.ini");
      again.out = dir / ("second_" + solver_name(s));
      run_train(again);
      CHECK(metrics_without_time(c.out) == metrics_without_time(again.out));
    }
  }

  TEST_CASE("manifest fingerprints catch changed inputs") {
    TempDir dir;
    const Dataset d = synthetic_dataset(dir.path(), 100, 50, 0.5, 7);
    ExperimentConfig c = config_for(d, Solver::cca, 2);
    c.out = dir / "run";
    run_train(c);
    write_matrix(test::gaussian_data(100, 6, 1), d.train_x, MatrixFormat::binary);
    CHECK_THROWS_WITH_AS(train_experiment(load_config(c.out / "manifest.ini")), doctest::Contains("manifest"), IoError);
  }

  TEST_CASE("shuffled test pairing destroys the correlation") {
    TempDir dir;
    const Dataset d = synthetic_dataset(dir.path(), 2000, 2000, 0.5, 8);
    ExperimentConfig c = config_for(d, Solver::fkcca, 3, 128);
    const TrainOutcome r = train_experiment(c);
    const DataMatrix tx = read_matrix(d.test_x, MatrixFormat::binary);
    const DataMatrix ty = read_matrix(d.test_y, MatrixFormat::binary);
    const auto perm = sample_indices(ty.rows(), ty.rows(), 1234);
    const EvalReport shuffled = run_eval(*r.model, ViewPair(tx, select_rows(ty, perm)));
    CHECK(shuffled.total <= 0.1 * 3);
    CHECK(run_eval(*r.model, ViewPair(tx, ty)).total > 1.0);
  }

  TEST_CASE("identical projections score exactly L") {
    const DataMatrix x = test::gaussian_data(400, 5, 9);
    const auto model = make_linear_model(solve_cca(estimate_covariances(ViewPair(x, x), 0.0, 0.0, true), 4));
    CHECK(run_eval(*model, ViewPair(x, x)).total == doctest::Approx(4.0).epsilon(1e-12));
    CHECK_THROWS_AS(run_eval(*model, ViewPair(x, test::gaussian_data(400, 3, 1))), ShapeError);
  }

  TEST_CASE("bench table golden output") {
    const std::vector<BenchRow> rows{
        {"cca", 0, 20.53, 0.012, ""},
        {"fkcca", 1024, 27.7412, 0.5, ""},
        {"knoi", 512, std::nullopt, 3.0, "objective diverged"},
    };
    const std::string expected =
        "Method |    M | Canon. Corr. | Time (minutes)\n"
        "-------+------+--------------+---------------\n"
        "CCA    |    - |        20.53 |           0.01\n"
        "FKCCA  | 1024 |        27.74 |           0.50\n"
        "KNOI   |  512 |       failed |              -\n"
        "failed knoi: objective diverged\n";
    CHECK(format_bench_table(rows) == expected);
    CHECK(format_bench_csv(rows) ==
          "method,M,total_corr,minutes,status\n"
          "cca,0,20.53,0.012,ok\n"
          "fkcca,1024,27.7412,0.5,ok\n"
          "knoi,512,,,failed: objective diverged\n");
  }

  TEST_CASE("bench records failures and keeps going") {
    TempDir dir;
    const Dataset d = synthetic_dataset(dir.path(), 200, 100, 0.5, 10);
    ExperimentConfig good = config_for(d, Solver::cca, 2);
    ExperimentConfig bad = config_for(d, Solver::fkcca, 2, 16);
    bad.train_x = dir / "missing.bin";
    ExperimentConfig iterative = config_for(d, Solver::knoi, 2, 16);
    iterative.knoi.batch = 50;
    const std::vector<BenchRow> rows = run_bench({good, bad, iterative}, dir / "bench");
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].error.empty());
    CHECK(rows[1].error.find("missing.bin") != std::string::npos);
    CHECK(rows[2].error.empty());
    CHECK(fs::exists(dir / "bench" / "bench.txt"));
    CHECK(fs::exists(dir / "bench" / "bench.csv"));
    CHECK(fs::exists(dir / "bench" / "curve_3_knoi.csv"));
    CHECK(slurp(dir / "bench" / "bench.txt") == format_bench_table(rows));
  }

  TEST_CASE("FKCCA correlation grows with M") {
    TempDir dir;
    double small = 0.0, large = 0.0;
    const Dataset d = image_dataset(dir.path(), 1500, 500, 21);
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      ExperimentConfig c = config_for(d, Solver::fkcca, 10, 256);
      c.seed = seed;
      small += *train_experiment(c).metrics.test_corr;
      c.features = 1024;
      large += *train_experiment(c).metrics.test_corr;
    }
    CHECK(large >= small);
  }

  TEST_CASE("linear CCA is the weakest method on split images") {
    TempDir dir;
    const Dataset d = image_dataset(dir.path(), 5000, 1000, 22);
    std::vector<ExperimentConfig> configs{config_for(d, Solver::cca, 10), config_for(d, Solver::fkcca, 10, 512),
                                          config_for(d, Solver::nkcca, 10, 512), config_for(d, Solver::knoi, 10, 512)};
    configs[3].knoi.batch = 100;
    configs[3].knoi.eta = 0.1;
    configs[3].knoi.epochs = 20;
    const std::vector<BenchRow> rows = run_bench(configs, dir / "bench");
    for (const auto& r : rows) REQUIRE(r.error.empty());
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(*rows[0].corr < *rows[i].corr);
  }
}
