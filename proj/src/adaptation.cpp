#include "pmadapt/adaptation.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "pmadapt/error.hpp"

namespace pmadapt {

double ProbSchedule::operator()(std::int64_t j) const {
  if (j < 1) throw InvalidArgument("epoch index must be >= 1");
  if (scale == 0.0) return 0.0;
  return scale * std::pow(static_cast<double>(j), -exponent);
}

void ProbSchedule::validate() const {
  if (!(scale >= 0.0 && scale <= 1.0)) throw ConfigError("adaptation probability scale must be in [0, 1]");
  if (scale > 0.0 && !(exponent > 0.0)) {
    throw ConfigError("adaptation probability exponent must be > 0 so that p_j -> 0");
  }
}

void AdaptConfig::validate() const {
  if (epoch_size < 2) throw ConfigError("epoch size K must be >= 2");
  if (step_size < 1) throw ConfigError("step size a must be >= 1");
  if (!(sigma_opt > 0.0)) throw ConfigError("sigma_opt must be positive");
  if (!(sigma_tol > 0.0) || !(sigma_tol < sigma_opt)) {
    throw ConfigError("sigma_tol must satisfy 0 < sigma_tol < sigma_opt");
  }
  if (n_init < 1) throw ConfigError("initial particle count must be >= 1");
  prob.validate();
}

void CompensatedSum::add(const Eigen::VectorXd& x) {
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double t = sum_[k] + x[k];
    if (std::abs(sum_[k]) >= std::abs(x[k])) {
      comp_[k] += (sum_[k] - t) + x[k];
    } else {
      comp_[k] += (x[k] - t) + sum_[k];
    }
    sum_[k] = t;
  }
}

AdaptState make_adapt_state(const ParamVector& theta0, int n_init, int epoch_size) {
  AdaptState s;
  s.n_current = n_init;
  s.theta_mean = theta0;
  s.theta_sum = CompensatedSum(theta0.size());
  s.epoch_buffer.reserve(static_cast<std::size_t>(epoch_size));
  return s;
}

void observe(AdaptState& state, const ParamVector& theta, std::optional<double> recycled_log_lik,
             int epoch_size) {
  if (state.epoch_observations >= epoch_size) {
    throw std::logic_error("adaptation: observe called past an epoch boundary");
  }
  state.theta_sum.add(theta);
  ++state.iter_count;
  ++state.epoch_observations;
  if (recycled_log_lik) state.epoch_buffer.push_back(*recycled_log_lik);
}

std::optional<double> epoch_sigma_hat(std::span<const double> buffer) {
  if (buffer.size() < 2) return std::nullopt;
  double mean = 0.0;
  for (double v : buffer) {
    if (!std::isfinite(v)) return std::nullopt;
    mean += v;
  }
  mean /= static_cast<double>(buffer.size());
  double ss = 0.0;
  for (double v : buffer) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(buffer.size() - 1));
}

EpochRecord close_epoch(AdaptState& state) {
  if (state.iter_count == 0 || state.epoch_observations == 0) {
    throw std::logic_error("adaptation: epoch boundary with no observations");
  }
  EpochRecord rec;
  rec.sigma_hat = epoch_sigma_hat(state.epoch_buffer);
  rec.n_before = state.n_current;
  rec.n_after = state.n_current;
  state.sigma_hat_last = rec.sigma_hat;
  state.theta_mean = state.theta_sum.value() / static_cast<double>(state.iter_count);
  ++state.epoch_index;
  rec.epoch_index = state.epoch_index;
  state.epoch_buffer.clear();
  state.epoch_observations = 0;
  return rec;
}

EpochRecord epoch_boundary(AdaptState& state, const AdaptConfig& config, RngStream& rng) {
  if (state.epoch_observations != config.epoch_size) {
    throw std::logic_error("adaptation: boundary reached before K observations");
  }
  const std::int64_t j = state.epoch_index + 1;
  const int n_before = state.n_current;
  const std::optional<double> sigma = epoch_sigma_hat(state.epoch_buffer);
  if (sigma) {
    int direction = 0;
    if (*sigma > config.sigma_opt + config.sigma_tol) {
      direction = 1;
    } else if (*sigma < config.sigma_opt - config.sigma_tol && n_before > config.step_size) {
      direction = -1;
    }
    if (direction != 0 && rng.uniform() < config.prob(j)) {
      state.n_current = n_before + direction * config.step_size;
      ++state.adapt_events;
    }
  }
  const int n_after = state.n_current;
  EpochRecord rec = close_epoch(state);
  rec.n_before = n_before;
  rec.n_after = n_after;
  return rec;
}

FixedController::FixedController(int n) : n_(n) {
  if (n < 1) throw InvalidArgument("particle count must be >= 1");
}

FixedController::FixedController(int n, const ParamVector& theta0, int monitor_epoch_size)
    : FixedController(n) {
  if (monitor_epoch_size < 2) throw InvalidArgument("monitor epoch size must be >= 2");
  epoch_size_ = monitor_epoch_size;
  monitor_ = make_adapt_state(theta0, n, monitor_epoch_size);
}

const ParamVector* FixedController::recycle_target() const {
  return monitor_ ? &monitor_->theta_mean : nullptr;
}

std::optional<EpochRecord> FixedController::observe(const ParamVector& theta,
                                                    std::optional<double> recycled_log_lik) {
  if (!monitor_) return std::nullopt;
  pmadapt::observe(*monitor_, theta, recycled_log_lik, epoch_size_);
  if (monitor_->epoch_observations < epoch_size_) return std::nullopt;
  return close_epoch(*monitor_);
}

ApmController::ApmController(AdaptConfig config, const ParamVector& theta0, RngStream rng)
    : config_(config), state_(make_adapt_state(theta0, config.n_init, config.epoch_size)),
      rng_(std::move(rng)) {
  config_.validate();
}

std::optional<EpochRecord> ApmController::observe(const ParamVector& theta,
                                                  std::optional<double> recycled_log_lik) {
  pmadapt::observe(state_, theta, recycled_log_lik, config_.epoch_size);
  if (state_.epoch_observations < config_.epoch_size) return std::nullopt;
  return epoch_boundary(state_, config_, rng_);
}

}  // namespace pmadapt
