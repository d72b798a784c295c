#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "pmadapt/model.hpp"
#include "pmadapt/rng.hpp"
#include "pmadapt/trace.hpp"

namespace pmadapt {

/// Symmetric Gaussian random-walk proposal N(theta, covariance).
///
/// The covariance must be symmetric positive definite, or identically zero
/// (a degenerate proposal that always returns the current point). The lower
/// Cholesky factor is computed once at construction.
class ProposalSpec {
 public:
  explicit ProposalSpec(Eigen::MatrixXd covariance);

  /// Covariance l^2 * sigma_p / d, the usual optimal-scaling parameterisation.
  static ProposalSpec scaled(double l, const Eigen::MatrixXd& sigma_p);

  std::size_t dim() const { return static_cast<std::size_t>(covariance_.rows()); }
  const Eigen::MatrixXd& covariance() const { return covariance_; }
  const Eigen::MatrixXd& cholesky_factor() const { return factor_; }

  /// theta + L z with z drawn from `rng` (exactly dim() normal draws).
  ParamVector propose(const ParamVector& theta, RngStream& rng) const;
  /// theta + L z for a caller-supplied standard-normal vector.
  ParamVector shift(const ParamVector& theta, const Eigen::VectorXd& z) const;

 private:
  Eigen::MatrixXd covariance_;
  Eigen::MatrixXd factor_;
};

/// Metropolis-Hastings accept/reject for a symmetric proposal, in log space.
/// Draws exactly one uniform u and accepts iff log(u) < proposed - current.
/// Throws InvalidChainState if both values are -inf or either is NaN.
bool mh_accept_log(double log_post_current, double log_post_proposed, RngStream& rng);

/// The pseudo-marginal chain state. The estimate at theta is never refreshed
/// while the chain stays put.
struct ChainState {
  ParamVector theta;
  double log_lik_est = 0.0;
  double log_prior = 0.0;
  int n_particles = 1;

  double log_post() const { return log_lik_est + log_prior; }
  bool operator==(const ChainState&) const = default;
};

struct StepOutcome {
  ParamVector proposed;
  /// -inf when the proposal falls outside the prior support (estimator not called).
  double proposed_log_lik = 0.0;
  std::optional<double> recycled_log_lik;
  bool accepted = false;
};

struct StepResult {
  ChainState state;
  StepOutcome outcome;
};

/// Draws a fresh estimate at theta0 with n particles. Throws InvalidChainState
/// when the prior or the estimate is zero there.
ChainState initial_state(const Model& model, const ParamVector& theta0, int n, RngStream& rng);

/// One pseudo-marginal Metropolis-Hastings transition with n particles.
/// `recycle_at` (nullable) is forwarded to the estimator.
StepResult pm_step(const ChainState& state, const Model& model, const ProposalSpec& prop, int n,
                   const ParamVector* recycle_at, RngStream& rng);

/// End-of-epoch report emitted by a controller.
struct EpochRecord {
  std::int64_t epoch_index = 0;
  std::int64_t iteration = 0;
  /// Absent when the epoch was invalid (a zero estimate in the buffer, or
  /// fewer than two usable entries).
  std::optional<double> sigma_hat;
  int n_before = 0;
  int n_after = 0;
};

/// Supplies N for each iteration and consumes the post-decision chain value.
class Controller {
 public:
  virtual ~Controller() = default;
  /// Particle count for the next iteration.
  virtual int particles() const = 0;
  /// Point at which the estimator should recycle its draw; null to skip.
  virtual const ParamVector* recycle_target() const = 0;
  /// Called once per iteration after the accept/reject decision.
  virtual std::optional<EpochRecord> observe(const ParamVector& theta,
                                             std::optional<double> recycled_log_lik) = 0;
};

/// Result of a chain run.
struct ChainRun {
  Eigen::MatrixXd samples;  ///< iterations x d, row l is theta_l
  std::vector<int> n_used;  ///< particle count used at each iteration
  std::vector<EpochRecord> epochs;
  std::int64_t accepted = 0;
  std::int64_t total = 0;
  double wall_clock_s = 0.0;
  ChainState final_state;

  double accept_rate() const {
    return total == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(total);
  }
};

/// Runs `iterations` pseudo-marginal steps with N supplied by `controller`,
/// streaming every iteration to `sink`. On a sink failure the sink is flushed
/// and the IoError propagates.
ChainRun run_chain(const ChainState& init, const Model& model, const ProposalSpec& prop,
                   Controller& controller, std::int64_t iterations, TraceSink& sink,
                   RngStream& rng);

}  // namespace pmadapt
