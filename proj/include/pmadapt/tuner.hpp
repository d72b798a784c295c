#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "pmadapt/diagnostics.hpp"
#include "pmadapt/model.hpp"
#include "pmadapt/rng.hpp"
#include "pmadapt/trace.hpp"

namespace pmadapt {

struct TuneConfig {
  int n_init = 100;                 ///< N_1 of the preliminary run
  std::int64_t prelim_iters = 10000;
  double prelim_burn_in_frac = 0.2;
  int mc_iters = 10000;             ///< M
  int search_lo = 100;
  int search_hi = 1000;
  int precision = 1;                ///< a_1
  double sigma_opt = 1.16;
  double l = 2.0;
  Eigen::MatrixXd sigma_p;          ///< preliminary proposal is l^2 sigma_p / d
  double final_burn_in_frac = 0.2;
  int jobs = 1;                     ///< threads for the Monte Carlo replications

  void validate() const;
};

/// Sample standard deviation (divisor m - 1) of m independent estimates of
/// log p_hat at theta_hat with n particles. Replication r draws from
/// rng.substream(r); results do not depend on `jobs`. Throws EstimatorError
/// if any replication returns a zero estimate.
double sigma_n_mc(const Model& model, const ParamVector& theta_hat, int n, int m,
                  const RngStream& rng, int jobs = 1);

struct SearchRow {
  int tested_n = 0;
  double sigma_hat = 0.0;
  int lo = 0;  ///< interval after this evaluation
  int hi = 0;
};

struct SearchResult {
  int n_opt = 0;
  double sigma_at_opt = 0.0;
  int midpoint_evaluations = 0;
  std::vector<SearchRow> trace;  ///< two endpoint rows, then one row per midpoint
};

/// Bisection on N for sigma(N) = sigma_opt. Requires sigma(lo) > sigma_opt >
/// sigma(hi). Midpoint lo + ceil((hi - lo) / 2); sigma(mid) > sigma_opt moves
/// lo up, otherwise hi down; stops once hi - lo <= precision. Returns the
/// tested N with sigma closest to sigma_opt (ties to the smaller N).
SearchResult dichotomic_search(const std::function<double(int)>& sigma_of, int lo, int hi,
                               int precision, double sigma_opt);

/// The search with sigma_n_mc; each N is evaluated once, from rng.substream(N).
SearchResult dichotomic_search(const Model& model, const ParamVector& theta_hat,
                               const TuneConfig& config, const RngStream& rng);

void write_search_csv(const SearchResult& result, std::ostream& out);

struct PipelineReport {
  ParamVector theta_hat;
  Eigen::MatrixXd sigma_hat_cov;
  ChainSummary step1;
  SearchResult search;
  int n_opt = 0;
  ChainSummary step3;
  double step1_s = 0.0;
  double step2_s = 0.0;
  double step3_s = 0.0;
  double total_s = 0.0;
};

namespace pipeline_key {
inline constexpr std::uint64_t kStep1 = 11;
inline constexpr std::uint64_t kSearch = 12;
inline constexpr std::uint64_t kStep3 = 13;
}  // namespace pipeline_key

/// Preliminary PM run at N_1 from theta0, search at its posterior mean, then
/// a PM run at N_opt started from that mean with covariance l^2 Sigma_hat / d.
/// `force_n_opt` skips the search.
PipelineReport run_pipeline(const Model& model, const ParamVector& theta0, const TuneConfig& config,
                            std::int64_t final_iters, const RngStream& rng, TraceSink& step3_sink,
                            std::optional<int> force_n_opt = std::nullopt);

nlohmann::json to_json(const PipelineReport& r);

}  // namespace pmadapt
