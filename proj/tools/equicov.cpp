// equicov: command-line front end.
//
//   equicov sample   --config run.cfg [--seed N] [--workers N] [--out DIR]
//   equicov metadist --config run.cfg ...
//   equicov contour  --config run.cfg ...
//   equicov voidtest --config run.cfg ...

#include <CLI11.hpp>

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "equicov/cli.hpp"
#include "equicov/config.hpp"

int main(int argc, char** argv) {
  using namespace equicov;

  CLI::App app{"Equi-coverage simulator for PPP/PCP cellular networks with multi-slope pathloss"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  std::optional<std::string> out_dir;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "Experiment config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Override run.seed");
    sub->add_option("--workers", workers, "Worker threads (default: EQUICOV_WORKERS or all cores)");
    sub->add_option("--out", out_dir, "Output directory (default: output.directory)");
  };
  auto* sample = app.add_subcommand("sample", "Write one typical-user scene as pattern CSVs");
  auto* metadist = app.add_subcommand("metadist", "Estimate the SIR meta distribution");
  auto* contour = app.add_subcommand("contour", "Verify an equi-coverage family and/or extract level sets");
  auto* voidtest = app.add_subcommand("voidtest", "Void-probability scaling tests for PPP/TCP/MCP");
  for (auto* s : {sample, metadist, contour, voidtest}) add_common(s);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? cli::kPass : cli::kUsage;
  }

  try {
    ExperimentConfig cfg = load_config(config_path);
    if (seed) cfg.seed = *seed;
    if (workers) cfg.workers = *workers;
    if (out_dir) cfg.output_directory = *out_dir;
    const std::filesystem::path out = cfg.output_directory;

    if (sample->parsed()) return cli::cmd_sample(cfg, out);
    if (metadist->parsed()) return cli::cmd_metadist(cfg, out);
    if (contour->parsed()) return cli::cmd_contour(cfg, out);
    if (voidtest->parsed()) return cli::cmd_voidtest(cfg, out);
  } catch (const ConfigError& e) {
    std::cerr << "equicov: " << e.what() << '\n';
    return cli::kUsage;
  } catch (const ParameterError& e) {
    std::cerr << "equicov: invalid parameter: " << e.what() << '\n';
    return cli::kUsage;
  } catch (const std::exception& e) {
    std::cerr << "equicov: " << e.what() << '\n';
    return cli::kRuntime;
  }
  return cli::kUsage;
}
