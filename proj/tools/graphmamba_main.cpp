#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "gm/checkpoint.hpp"
#include "gm/cube.hpp"
#include "gm/estimate.hpp"
#include "gm/metrics.hpp"
#include "gm/patches.hpp"
#include "gm/ppm.hpp"
#include "gm/runconfig.hpp"
#include "gm/threads.hpp"
#include "gm/train.hpp"

namespace {

// Every failure class gets its own exit code so scripts can branch on what
// went wrong without scraping stderr.
int exit_code_for(gm::ErrorKind kind) {
  switch (kind) {
    case gm::ErrorKind::InvalidArgument:
    case gm::ErrorKind::ShapeMismatch:
      return 2;
    case gm::ErrorKind::BadMagic:
    case gm::ErrorKind::Truncated:
    case gm::ErrorKind::SizeMismatch:
      return 3;
    case gm::ErrorKind::SplitError:
      return 4;
    case gm::ErrorKind::NonFinite:
      return 5;
    case gm::ErrorKind::IoError:
      return 6;
  }
  return 1;
}

struct Cli {
  std::string config_path;
  std::vector<std::string> overrides;
  uint64_t seed = 0;
  bool seed_given = false;
  std::string out;
  bool deterministic = false;

  gm::RunConfig resolve() const {
    gm::RunConfig rc =
        config_path.empty() ? gm::RunConfig{} : gm::load_config(config_path);
    for (const std::string& kv : overrides) {
      size_t eq = kv.find('=');
      if (eq == std::string::npos)
        gm::raise(gm::ErrorKind::InvalidArgument,
                  "--set needs section.key=value, got \"" + kv + "\"");
      rc.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (seed_given) rc.train.seed = seed;  // the flag beats the file
    return rc;
  }
};

void add_common(CLI::App* cmd, Cli& cli, bool out_required) {
  cmd->add_option("--config", cli.config_path, "settings file (section.key = value)");
  cmd->add_option("--set", cli.overrides, "override one setting, e.g. --set train.epochs=10")
      ->take_all();
  cmd->add_option("--seed", cli.seed, "run seed; overrides train.seed")
      ->each([&cli](const std::string&) { cli.seed_given = true; });
  auto* out = cmd->add_option("--out", cli.out, "output path");
  if (out_required) out->required();
  cmd->add_flag("--deterministic", cli.deterministic, "single-threaded, bitwise-reproducible");
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) gm::raise(gm::ErrorKind::IoError, "cannot open for writing: " + path);
  f << text;
  if (!f) gm::raise(gm::ErrorKind::IoError, "short write: " + path);
}

// bands/classes may be pinned in the config; 0 means take them from the cube.
gm::ModelConfig model_for_cube(gm::ModelConfig cfg, const gm::HsiCube& cube) {
  if (cfg.bands == 0) cfg.bands = cube.bands;
  if (cfg.classes == 0) cfg.classes = cube.num_classes;
  if (cfg.bands != cube.bands)
    gm::raise(gm::ErrorKind::InvalidArgument,
              "config expects " + std::to_string(cfg.bands) + " bands but the cube has " +
                  std::to_string(cube.bands));
  if (cfg.classes != cube.num_classes)
    gm::raise(gm::ErrorKind::InvalidArgument,
              "config expects " + std::to_string(cfg.classes) + " classes but the cube has " +
                  std::to_string(cube.num_classes));
  return cfg;
}

gm::HsiCube load_cube_for(const gm::RunConfig& rc) {
  if (rc.data.cube.empty())
    gm::raise(gm::ErrorKind::InvalidArgument, "data.cube must name an HSIC file");
  gm::HsiCube cube = gm::load_cube(rc.data.cube);
  if (rc.data.normalize) gm::normalize_bands(cube);
  return cube;
}

// Checkpoints remember whether their training data was normalized; scoring
// follows the checkpoint, not the current config.
bool normalize_from(const gm::Checkpoint& ck, bool fallback) {
  const std::string* flag = ck.find_meta("data.normalize");
  if (!flag) return fallback;
  return *flag == "1" || *flag == "true";
}

int cmd_synth(const Cli& cli) {
  gm::RunConfig rc = cli.resolve();
  gm::HsiCube cube = gm::generate_synthetic(rc.synth.height, rc.synth.width, rc.synth.bands,
                                            rc.synth.classes, rc.synth.noise, rc.train.seed);
  gm::save_cube(cube, cli.out);
  return 0;
}

int cmd_train(const Cli& cli) {
  gm::RunConfig rc = cli.resolve();
  gm::HsiCube cube = load_cube_for(rc);
  gm::ModelConfig cfg = model_for_cube(rc.model, cube);
  cfg.validate();

  gm::PatchSet patches = gm::extract_patches(cube, cfg.patch_size, 1);
  gm::Split split = gm::stratified_split(patches, rc.train.fraction, rc.train.seed);
  auto result = gm::train_model<float>(cfg, rc.train, patches, split.train, &split.test);

  std::vector<std::pair<std::string, std::string>> extra = {
      {"data.normalize", rc.data.normalize ? "1" : "0"},
      {"train.seed", std::to_string(rc.train.seed)},
      {"train.fraction", std::to_string(rc.train.fraction)},
      {"train.epochs", std::to_string(rc.train.epochs)},
  };
  gm::save_checkpoint(gm::make_checkpoint(cfg, result.params, extra), cli.out);
  gm::write_history(result.history, cli.out + ".history.csv");

  int threads = gm::resolve_threads(cli.deterministic);
  gm::Metrics metrics =
      gm::evaluate_model(result.params, cfg, patches, split.test, rc.train.batch_size, threads);
  std::string text = gm::format_metrics(metrics);
  write_text(cli.out + ".metrics.txt", text);
  std::fputs(text.c_str(), stdout);
  return 0;
}

int cmd_eval(const Cli& cli) {
  gm::RunConfig rc = cli.resolve();
  if (rc.eval.checkpoint.empty())
    gm::raise(gm::ErrorKind::InvalidArgument, "eval.checkpoint must name a trained model");
  gm::Checkpoint ck = gm::load_checkpoint(rc.eval.checkpoint);
  gm::ModelConfig cfg = gm::config_from_checkpoint(ck);
  gm::ModelParams<float> params = gm::params_from_checkpoint(ck);

  if (rc.data.cube.empty())
    gm::raise(gm::ErrorKind::InvalidArgument, "data.cube must name an HSIC file");
  gm::HsiCube cube = gm::load_cube(rc.data.cube);
  if (normalize_from(ck, rc.data.normalize)) gm::normalize_bands(cube);

  gm::PatchSet patches = gm::extract_patches(cube, cfg.patch_size, 1);
  gm::Split split = gm::stratified_split(patches, rc.train.fraction, rc.train.seed);
  int threads = gm::resolve_threads(cli.deterministic);
  gm::Metrics metrics =
      gm::evaluate_model(params, cfg, patches, split.test, rc.train.batch_size, threads);
  std::string text = gm::format_metrics(metrics);
  if (!cli.out.empty()) write_text(cli.out, text);
  std::fputs(text.c_str(), stdout);
  return 0;
}

int cmd_predict(const Cli& cli) {
  gm::RunConfig rc = cli.resolve();
  if (rc.predict.checkpoint.empty())
    gm::raise(gm::ErrorKind::InvalidArgument, "predict.checkpoint must name a trained model");
  gm::Checkpoint ck = gm::load_checkpoint(rc.predict.checkpoint);
  gm::ModelConfig cfg = gm::config_from_checkpoint(ck);
  gm::ModelParams<float> params = gm::params_from_checkpoint(ck);

  if (rc.data.cube.empty())
    gm::raise(gm::ErrorKind::InvalidArgument, "data.cube must name an HSIC file");
  gm::HsiCube cube = gm::load_cube(rc.data.cube);
  if (normalize_from(ck, rc.data.normalize)) gm::normalize_bands(cube);

  int threads = gm::resolve_threads(cli.deterministic);
  std::vector<int32_t> map =
      gm::predict_map(params, cfg, cube, rc.train.batch_size, threads);
  gm::write_class_map(cli.out, cube.width, cube.height, map);
  return 0;
}

int cmd_estimate(const Cli& cli) {
  gm::RunConfig rc = cli.resolve();
  rc.model.validate();
  gm::ResourceReport report = gm::estimate_resources(rc.model, rc.train.batch_size);
  std::string text = gm::format_report(rc.model, report);
  if (!cli.out.empty()) write_text(cli.out, text);
  std::fputs(text.c_str(), stdout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hyperspectral patch classifier: tokenize, prioritize, attend, recur"};
  app.require_subcommand(1);

  Cli synth_cli, train_cli, eval_cli, predict_cli, estimate_cli;
  CLI::App* synth = app.add_subcommand("synth", "generate a labeled synthetic cube");
  add_common(synth, synth_cli, true);
  CLI::App* train = app.add_subcommand("train", "fit a model; writes checkpoint + history + metrics");
  add_common(train, train_cli, true);
  CLI::App* eval = app.add_subcommand("eval", "score a checkpoint on a cube's held-out split");
  add_common(eval, eval_cli, false);
  CLI::App* predict = app.add_subcommand("predict", "render a class map image");
  add_common(predict, predict_cli, true);
  CLI::App* estimate = app.add_subcommand("estimate", "report parameters, memory, and flops");
  add_common(estimate, estimate_cli, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (synth->parsed()) return cmd_synth(synth_cli);
    if (train->parsed()) return cmd_train(train_cli);
    if (eval->parsed()) return cmd_eval(eval_cli);
    if (predict->parsed()) return cmd_predict(predict_cli);
    if (estimate->parsed()) return cmd_estimate(estimate_cli);
  } catch (const gm::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
