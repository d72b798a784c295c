#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "pmadapt/adaptation.hpp"
#include "pmadapt/config.hpp"
#include "pmadapt/diagnostics.hpp"
#include "pmadapt/model.hpp"
#include "pmadapt/rng.hpp"
#include "pmadapt/tuner.hpp"

namespace pmadapt {

/// Everything needed to launch chains, resolved from a Config.
struct Experiment {
  std::string model_name;
  std::shared_ptr<const Model> model;
  ParamVector theta0;
  Eigen::MatrixXd sigma_p;
  double l = 2.0;
  double burn_in_frac = 0.2;
  std::int64_t iterations = 0;
  int runs = 1;
  int jobs = 1;
  int n_particles = 100;
  std::uint64_t seed = 1;
  AdaptConfig adapt;
  TuneConfig tune;
  std::int64_t final_iters = 0;
};

/// sigma_opt for a tabulated dimension (1.16 for d = 1, 1.44 for d = 9).
std::optional<double> default_sigma_opt(std::size_t dim);

/// Loads the dataset named by model.data_path, or regenerates it from
/// model.data_seed (default: seed) when the path is empty.
Experiment build_experiment(const Config& config);

/// Substreams of a run stream used by the compare command.
namespace compare_key {
inline constexpr std::uint64_t kMh = 101;
inline constexpr std::uint64_t kTune = 102;
inline constexpr std::uint64_t kApm = 103;
}  // namespace compare_key

/// Stream of run r: (seed, seed xor r).
RngStream run_stream(std::uint64_t seed, int run_index);

/// Mean and SD (divisor n - 1; 0 for one run) of every scalar and vector
/// statistic, plus median/min/max of the final and last-20-epoch N.
nlohmann::json aggregate(const std::vector<ChainSummary>& runs);

struct CommandOptions {
  bool force = false;
  std::ostream* log = nullptr;  ///< progress lines; null for silence
};

int cmd_run(const Config& config, const CommandOptions& opts);
int cmd_tune(const Config& config, const CommandOptions& opts);
int cmd_gen_data(const Config& config, const CommandOptions& opts);
int cmd_compare(const Config& config, const CommandOptions& opts);

/// Output path "<output_dir>/<stem>_<hash><suffix>".
std::string output_path(const Config& config, const std::string& stem, const std::string& suffix);

/// Generator settings recorded next to a generated dataset, as a config that
/// regenerates it.
Config manifest_config(const nlohmann::json& manifest);

}  // namespace pmadapt
