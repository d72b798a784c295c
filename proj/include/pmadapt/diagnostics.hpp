#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "pmadapt/mcmc_core.hpp"

namespace pmadapt {

struct Moments {
  Eigen::VectorXd mean;
  Eigen::VectorXd var;  ///< divisor n - 1
};

/// Per-coordinate mean and variance of rows [burn_in, rows) of an
/// iterations x d sample matrix.
Moments moments(const Eigen::MatrixXd& chain, std::int64_t burn_in);

/// Overlapping-batch-means estimate of the asymptotic variance of the sample
/// mean, scaled by n:
///   n b / ((n - b)(n - b + 1)) * sum_{k=0}^{n-b} (Ybar_k(b) - Ybar)^2.
/// Default batch size floor(sqrt(n)); requires n >= 2b.
double obm_variance(std::span<const double> series, std::optional<int> batch_size = std::nullopt);

/// sigma^2_OBM / s^2, floored at 1. Throws DegenerateInput on zero variance.
double obm_if(std::span<const double> series, std::optional<int> batch_size = std::nullopt);

/// Monte Carlo standard error of the mean, sqrt(sigma^2_OBM / n).
double mcse(std::span<const double> series, std::optional<int> batch_size = std::nullopt);

/// Geweke z-score of the first `first_frac` against the last `last_frac` of
/// the series, each segment's variance estimated by OBM. Identical constant
/// segments give 0; distinct constant segments throw DegenerateInput.
double geweke_z(std::span<const double> series, double first_frac = 0.2, double last_frac = 0.5);

/// Effective samples per minute.
double esm(std::int64_t sample_size, double if_estimate, double minutes);

/// Autocorrelations for lags 0..max_lag with the biased (1/n) normalisation.
std::vector<double> acf(std::span<const double> series, int max_lag);

struct ChainSummary {
  std::size_t dim = 0;
  std::int64_t iterations = 0;
  std::int64_t burn_in = 0;
  std::int64_t retained = 0;
  Eigen::VectorXd post_mean;
  Eigen::VectorXd post_var;
  Eigen::VectorXd mcse;
  double post_mean_norm = 0.0;
  double post_var_norm = 0.0;
  double accept_rate = 0.0;
  Eigen::VectorXd if_per_coord;
  double if_sum = 0.0;
  Eigen::VectorXd geweke_z;
  double wall_clock_s = 0.0;
  double esm = 0.0;
  int n_final = 0;
  double n_mean = 0.0;
  /// Median particle count over the last 20 epoch boundaries (the final N
  /// when the run closed no epoch).
  double n_median_last20 = 0.0;
  double n_sd_last20 = 0.0;
  std::int64_t epochs = 0;
  std::int64_t adapt_events = 0;
};

/// Diagnostics of a finished run with `burn_in` leading iterations dropped.
/// Coordinates with zero retained variance get IF 1 and Geweke z 0.
ChainSummary summarize(const ChainRun& run, std::int64_t burn_in);

nlohmann::json to_json(const ChainSummary& s);
ChainSummary summary_from_json(const nlohmann::json& j);

/// "1h02m22s" style duration.
std::string format_hms(double seconds);

}  // namespace pmadapt
