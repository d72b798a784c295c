#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "pmadapt/config.hpp"
#include "pmadapt/error.hpp"
#include "pmadapt/experiment.hpp"

namespace {

constexpr int kUsageError = 2;
constexpr int kRuntimeError = 1;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pseudo-marginal MCMC with adaptive particle counts"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::optional<std::string> out_dir;
  bool force = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment config file")->required();
    sub->add_option("--seed", seed, "base seed (overrides the config)");
    sub->add_option("--jobs", jobs, "concurrent runs")->check(CLI::PositiveNumber);
    sub->add_option("--out", out_dir, "output directory (overrides the config)");
    sub->add_flag("--force", force, "overwrite existing generated data");
  };
  CLI::App* run = app.add_subcommand("run", "run MH, PM or APM chains");
  CLI::App* tune = app.add_subcommand("tune", "run the three-step tuning pipeline");
  CLI::App* gen = app.add_subcommand("gen-data", "generate a dataset with a manifest");
  CLI::App* compare = app.add_subcommand("compare", "run MH, tuned PM and APM side by side");
  for (CLI::App* sub : {run, tune, gen, compare}) add_common(sub);

  CLI11_PARSE(app, argc, argv);

  pmadapt::Config config;
  try {
    config = pmadapt::Config::load(config_path);
    if (seed) config.set("seed", std::to_string(*seed));
    if (jobs) config.set("jobs", std::to_string(*jobs));
    if (out_dir) config.set("output_dir", *out_dir);
  } catch (const pmadapt::Error& e) {
    std::cerr << "pmadapt: " << config_path << ": " << e.what() << '\n';
    return kUsageError;
  }

  pmadapt::CommandOptions opts;
  opts.force = force;
  opts.log = &std::cout;
  try {
    if (run->parsed()) return pmadapt::cmd_run(config, opts);
    if (tune->parsed()) return pmadapt::cmd_tune(config, opts);
    if (gen->parsed()) return pmadapt::cmd_gen_data(config, opts);
    return pmadapt::cmd_compare(config, opts);
  } catch (const pmadapt::ConfigError& e) {
    std::cerr << "pmadapt: configuration error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "pmadapt: " << e.what() << '\n';
    return kRuntimeError;
  }
}
