// kcca: dataset preparation, training, evaluation and benchmarking for
// exact and approximate kernel CCA.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "kcca/errors.hpp"
#include "kcca/experiment.hpp"

namespace fs = std::filesystem;
using namespace kcca;

namespace {

std::string extension(MatrixFormat f) { return f == MatrixFormat::binary ? ".bin" : ".csv"; }

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(dir.string() + ": cannot create directory: " + ec.message());
}

void write_manifest(const fs::path& dir, const std::string& command,
                    const std::vector<std::pair<std::string, std::string>>& entries) {
  std::ofstream out(dir / "manifest.ini", std::ios::trunc);
  out << "[prepare]\ncommand = " << command << "\n";
  for (const auto& [k, v] : entries) out << k << " = " << v << "\n";
  if (!out) throw IoError((dir / "manifest.ini").string() + ": write failed");
}

void write_pair(const ViewPair& pair, const fs::path& dir, const std::string& stem, MatrixFormat f) {
  write_matrix(pair.x(), dir / (stem + "_x" + extension(f)), f);
  write_matrix(pair.y(), dir / (stem + "_y" + extension(f)), f);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exact and approximate kernel CCA"};
  app.require_subcommand(1);
  std::string format_name = "binary";

  // prepare
  auto* prepare = app.add_subcommand("prepare", "Create or reshape two-view datasets");
  prepare->require_subcommand(1);
  fs::path prep_out;
  std::uint64_t prep_seed = 0;
  auto common = [&](CLI::App* cmd, bool seeded) {
    cmd->add_option("--out", prep_out, "Output directory")->required();
    cmd->add_option("--format", format_name, "Matrix file format")->check(CLI::IsMember({"csv", "binary"}));
    if (seeded) cmd->add_option("--seed", prep_seed, "Random seed");
  };

  auto* split = prepare->add_subcommand("split-image", "Left/right image halves as views x/y");
  fs::path split_input;
  std::size_t img_w = 28, img_h = 28;
  split->add_option("--input", split_input, "Row-major image matrix")->required()->check(CLI::ExistingFile);
  split->add_option("--width", img_w, "Image width");
  split->add_option("--height", img_h, "Image height");
  common(split, false);

  auto* synth = prepare->add_subcommand("synth", "Shared-latent Gaussian views with a known spectrum");
  std::size_t syn_n = 1000, syn_dx = 20, syn_dy = 20, syn_latent = 5;
  double syn_noise = 0.5;
  synth->add_option("--n", syn_n, "Samples");
  synth->add_option("--dx", syn_dx, "Dimension of view x");
  synth->add_option("--dy", syn_dy, "Dimension of view y");
  synth->add_option("--latent", syn_latent, "Shared latent dimensions");
  synth->add_option("--noise", syn_noise, "Noise standard deviation");
  common(synth, true);

  auto* glyphs = prepare->add_subcommand("synth-images", "Synthetic glyph images, split into halves");
  std::size_t gl_n = 6000;
  glyphs->add_option("--n", gl_n, "Images");
  glyphs->add_option("--width", img_w, "Image width");
  glyphs->add_option("--height", img_h, "Image height");
  common(glyphs, true);

  auto* subset = prepare->add_subcommand("subset", "Seeded row sample, optionally with a held-out split");
  fs::path sub_x, sub_y;
  std::size_t sub_n = 0, sub_test = 0;
  subset->add_option("--x", sub_x, "View x file")->required()->check(CLI::ExistingFile);
  subset->add_option("--y", sub_y, "View y file")->required()->check(CLI::ExistingFile);
  subset->add_option("--n", sub_n, "Training rows")->required();
  subset->add_option("--test-n", sub_test, "Held-out rows, disjoint from the training rows");
  common(subset, true);

  // train
  auto* train = app.add_subcommand("train", "Fit one configured solver");
  fs::path config_path, out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> format_override;
  train->add_option("--config", config_path, "Experiment config")->required()->check(CLI::ExistingFile);
  train->add_option("--seed", seed, "Override the master seed");
  train->add_option("--out", out_dir, "Override the output directory");
  train->add_option("--format", format_override, "Override the data file format")
      ->check(CLI::IsMember({"csv", "binary"}));

  // eval
  auto* eval = app.add_subcommand("eval", "Total canonical correlation of a saved model on two views");
  fs::path model_dir, eval_x, eval_y, eval_out;
  eval->add_option("--model", model_dir, "Model directory")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--x", eval_x, "View x file")->required()->check(CLI::ExistingFile);
  eval->add_option("--y", eval_y, "View y file")->required()->check(CLI::ExistingFile);
  eval->add_option("--format", format_name, "Matrix file format")->check(CLI::IsMember({"csv", "binary"}));
  eval->add_option("--out", eval_out, "Also write the report to this file");

  // bench
  auto* bench = app.add_subcommand("bench", "Run several configs and tabulate them");
  std::vector<fs::path> bench_configs;
  bench->add_option("--config", bench_configs, "Experiment configs, run in order")
      ->required()
      ->check(CLI::ExistingFile);
  bench->add_option("--out", out_dir, "Output directory")->required();
  bench->add_option("--seed", seed, "Override the master seed of every config");

  CLI11_PARSE(app, argc, argv);

  try {
    if (prepare->parsed()) {
      const MatrixFormat f = parse_format(format_name);
      ensure_dir(prep_out);
      if (split->parsed()) {
        const ViewPair pair = split_image_views(read_matrix(split_input, f), img_w, img_h);
        write_pair(pair, prep_out, "data", f);
        write_manifest(prep_out, "split-image",
                       {{"input", fs::absolute(split_input).string()}, {"width", std::to_string(img_w)},
                        {"height", std::to_string(img_h)}, {"rows", std::to_string(pair.rows())}});
      } else if (synth->parsed()) {
        const SyntheticPair s = make_synthetic_pair(syn_n, syn_dx, syn_dy, syn_latent, syn_noise, prep_seed);
        write_pair(s.pair, prep_out, "data", f);
        write_matrix(Matrix(s.correlations), prep_out / ("correlations" + extension(f)), f);
        write_manifest(prep_out, "synth",
                       {{"seed", std::to_string(prep_seed)}, {"n", std::to_string(syn_n)},
                        {"dx", std::to_string(syn_dx)}, {"dy", std::to_string(syn_dy)},
                        {"latent", std::to_string(syn_latent)}, {"noise", format_double(syn_noise)}});
      } else if (glyphs->parsed()) {
        const DataMatrix images = make_synthetic_images(gl_n, img_w, img_h, prep_seed);
        write_matrix(images, prep_out / ("images" + extension(f)), f);
        write_pair(split_image_views(images, img_w, img_h), prep_out, "data", f);
        write_manifest(prep_out, "synth-images",
                       {{"seed", std::to_string(prep_seed)}, {"n", std::to_string(gl_n)},
                        {"width", std::to_string(img_w)}, {"height", std::to_string(img_h)}});
      } else if (subset->parsed()) {
        const ViewPair all(read_matrix(sub_x, f), read_matrix(sub_y, f));
        if (sub_n + sub_test > all.rows()) {
          throw ParameterError("requested " + std::to_string(sub_n + sub_test) + " rows but the views have only " +
                               std::to_string(all.rows()));
        }
        const auto rows = sample_indices(all.rows(), sub_n + sub_test, derive_seed(prep_seed, SeedOffset::data));
        const std::span<const std::size_t> picked(rows);
        write_pair(select_rows(all, picked.first(sub_n)), prep_out, "train", f);
        if (sub_test > 0) write_pair(select_rows(all, picked.subspan(sub_n)), prep_out, "test", f);
        write_manifest(prep_out, "subset",
                       {{"x", fs::absolute(sub_x).string()}, {"y", fs::absolute(sub_y).string()},
                        {"seed", std::to_string(prep_seed)}, {"n", std::to_string(sub_n)},
                        {"test_n", std::to_string(sub_test)}});
      }
    } else if (train->parsed()) {
      ExperimentConfig cfg = load_config(config_path);
      if (seed) cfg.seed = *seed;
      if (!out_dir.empty()) cfg.out = out_dir;
      if (format_override) cfg.format = parse_format(*format_override);
      try {
        const TrainOutcome r = run_train(cfg);
        std::cout << kMetricsHeader << '\n' << format_metrics_row(r.metrics) << '\n';
        if (!r.diagnostic.empty()) std::cerr << "kcca: training halted: " << r.diagnostic << '\n';
      } catch (const std::exception& e) {
        throw Error(config_path.string() + " (solver " + solver_name(cfg.solver) + "): " + e.what());
      }
    } else if (eval->parsed()) {
      const std::string report = format_eval_report(run_eval(model_dir, eval_x, eval_y, parse_format(format_name)));
      std::cout << report;
      if (!eval_out.empty()) {
        std::ofstream out(eval_out, std::ios::trunc);
        out << report;
        if (!out) throw IoError(eval_out.string() + ": write failed");
      }
    } else if (bench->parsed()) {
      std::vector<ExperimentConfig> configs;
      for (const auto& path : bench_configs) {
        configs.push_back(load_config(path));
        if (seed) configs.back().seed = *seed;
      }
      std::cout << format_bench_table(run_bench(configs, out_dir));
    }
  } catch (const std::exception& e) {
    std::cerr << "kcca: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
