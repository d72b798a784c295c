#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "pmadapt/mcmc_core.hpp"
#include "pmadapt/model.hpp"
#include "pmadapt/rng.hpp"

namespace pmadapt {

/// Adaptation probability p_j = scale * j^(-exponent) for epoch j >= 1.
struct ProbSchedule {
  double scale = 1.0;
  double exponent = 0.5;

  double operator()(std::int64_t j) const;
  /// p_j must lie in [0, 1], be non-increasing and vanish: scale in [0, 1]
  /// and exponent > 0 (any exponent when scale == 0).
  void validate() const;
};

struct AdaptConfig {
  int epoch_size = 100;  ///< K
  int step_size = 1;     ///< a
  double sigma_opt = 1.16;
  double sigma_tol = 0.015;  ///< sigma_e
  ProbSchedule prob;
  int n_init = 100;  ///< N_0

  void validate() const;
};

/// Neumaier-compensated running sum of parameter vectors.
class CompensatedSum {
 public:
  explicit CompensatedSum(Eigen::Index dim = 0)
      : sum_(Eigen::VectorXd::Zero(dim)), comp_(Eigen::VectorXd::Zero(dim)) {}
  void add(const Eigen::VectorXd& x);
  Eigen::VectorXd value() const { return sum_ + comp_; }

 private:
  Eigen::VectorXd sum_;
  Eigen::VectorXd comp_;
};

/// Bookkeeping for epoch-based noise estimation.
struct AdaptState {
  std::int64_t epoch_index = 0;  ///< completed epochs j
  int n_current = 1;
  ParamVector theta_mean;  ///< refreshed only at epoch boundaries
  CompensatedSum theta_sum;
  std::int64_t iter_count = 0;
  std::int64_t epoch_observations = 0;
  /// Recycled log-likelihoods of the open epoch. Iterations whose proposal
  /// fell outside the prior support contribute nothing.
  std::vector<double> epoch_buffer;
  std::optional<double> sigma_hat_last;
  std::int64_t adapt_events = 0;
};

AdaptState make_adapt_state(const ParamVector& theta0, int n_init, int epoch_size);

/// Records the post-decision chain value theta_l and the iteration's recycled
/// log-likelihood. Does not refresh theta_mean. Throws std::logic_error if more
/// than `epoch_size` observations arrive without a boundary.
void observe(AdaptState& state, const ParamVector& theta, std::optional<double> recycled_log_lik,
             int epoch_size);

/// Square root of the unbiased sample variance of the buffer. Absent when the
/// epoch is invalid: any -inf entry, or fewer than two entries.
std::optional<double> epoch_sigma_hat(std::span<const double> buffer);

/// Closes the epoch without touching N: computes sigma_hat, refreshes
/// theta_mean = theta_sum / iter_count, advances j and clears the buffer.
EpochRecord close_epoch(AdaptState& state);

/// Full boundary update: sigma_hat, then the direction rule
///   sigma_hat > sigma_opt + sigma_e            -> N += a with probability p_j
///   sigma_hat < sigma_opt - sigma_e and N > a  -> N -= a with probability p_j
/// then the mean refresh of close_epoch. An invalid epoch skips the N update.
/// The coin for p_j is drawn from `rng` only when an update is eligible.
EpochRecord epoch_boundary(AdaptState& state, const AdaptConfig& config, RngStream& rng);

/// Constant particle count. With `monitor_epoch_size` set, it also tracks the
/// running mean and closes epochs exactly like the adaptive controller (so the
/// trace carries recycled values and sigma_hat) but never changes N.
class FixedController final : public Controller {
 public:
  explicit FixedController(int n);
  FixedController(int n, const ParamVector& theta0, int monitor_epoch_size);

  int particles() const override { return n_; }
  const ParamVector* recycle_target() const override;
  std::optional<EpochRecord> observe(const ParamVector& theta,
                                     std::optional<double> recycled_log_lik) override;

 private:
  int n_;
  int epoch_size_ = 0;
  std::optional<AdaptState> monitor_;
};

/// The adaptive pseudo-marginal controller. Its adaptation coin flips use a
/// dedicated stream so the chain's own draws do not depend on them.
class ApmController final : public Controller {
 public:
  ApmController(AdaptConfig config, const ParamVector& theta0, RngStream rng);

  int particles() const override { return state_.n_current; }
  const ParamVector* recycle_target() const override { return &state_.theta_mean; }
  std::optional<EpochRecord> observe(const ParamVector& theta,
                                     std::optional<double> recycled_log_lik) override;

  const AdaptState& state() const { return state_; }
  const AdaptConfig& config() const { return config_; }

 private:
  AdaptConfig config_;
  AdaptState state_;
  RngStream rng_;
};

}  // namespace pmadapt
