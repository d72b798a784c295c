#include "pmadapt/mcmc_core.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "pmadapt/error.hpp"

namespace pmadapt {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace

ProposalSpec::ProposalSpec(Eigen::MatrixXd covariance) : covariance_(std::move(covariance)) {
  if (covariance_.rows() == 0 || covariance_.rows() != covariance_.cols()) {
    throw InvalidArgument("proposal covariance must be a non-empty square matrix");
  }
  if (!covariance_.allFinite()) throw InvalidArgument("proposal covariance has non-finite entries");
  const double scale = covariance_.cwiseAbs().maxCoeff();
  if ((covariance_ - covariance_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw InvalidArgument("proposal covariance is not symmetric");
  }
  if (scale == 0.0) {
    factor_ = Eigen::MatrixXd::Zero(covariance_.rows(), covariance_.cols());
    return;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(covariance_);
  if (llt.info() != Eigen::Success) {
    throw InvalidArgument("proposal covariance is not positive definite");
  }
  factor_ = llt.matrixL();
}

ProposalSpec ProposalSpec::scaled(double l, const Eigen::MatrixXd& sigma_p) {
  if (!(l > 0.0)) throw InvalidArgument("proposal scale l must be positive");
  return ProposalSpec(l * l * sigma_p / static_cast<double>(sigma_p.rows()));
}

ParamVector ProposalSpec::propose(const ParamVector& theta, RngStream& rng) const {
  Eigen::VectorXd z(theta.size());
  rng.fill_normal({z.data(), static_cast<std::size_t>(z.size())});
  return shift(theta, z);
}

ParamVector ProposalSpec::shift(const ParamVector& theta, const Eigen::VectorXd& z) const {
  if (theta.size() != covariance_.rows() || z.size() != covariance_.rows()) {
    throw InvalidArgument("proposal dimension mismatch");
  }
  return theta + factor_.triangularView<Eigen::Lower>() * z;
}

bool mh_accept_log(double log_post_current, double log_post_proposed, RngStream& rng) {
  if (std::isnan(log_post_current) || std::isnan(log_post_proposed)) {
    throw InvalidChainState("NaN log posterior in acceptance test");
  }
  if (log_post_current == kNegInf && log_post_proposed == kNegInf) {
    throw InvalidChainState("both current and proposed log posteriors are -inf");
  }
  const double u = rng.uniform();
  const double diff = log_post_proposed - log_post_current;
  if (diff >= 0.0) return true;
  return std::log(u) < diff;
}

ChainState initial_state(const Model& model, const ParamVector& theta0, int n, RngStream& rng) {
  check_param(model, theta0);
  if (n < 1) throw InvalidArgument("particle count must be >= 1");
  ChainState s;
  s.theta = theta0;
  s.n_particles = n;
  s.log_prior = model.log_prior(theta0);
  if (s.log_prior == kNegInf) throw InvalidChainState("initial point outside the prior support");
  s.log_lik_est = model.estimate_loglik(theta0, nullptr, n, rng).log_lik;
  if (s.log_lik_est == kNegInf || std::isnan(s.log_lik_est)) {
    throw InvalidChainState("likelihood estimate at the initial point is zero");
  }
  return s;
}

StepResult pm_step(const ChainState& state, const Model& model, const ProposalSpec& prop, int n,
                   const ParamVector* recycle_at, RngStream& rng) {
  if (n < 1) throw InvalidArgument("particle count must be >= 1");
  StepResult r{state, {}};
  r.outcome.proposed = prop.propose(state.theta, rng);
  const double lp = model.log_prior(r.outcome.proposed);
  if (lp == kNegInf) {
    r.outcome.proposed_log_lik = kNegInf;
    r.outcome.accepted = mh_accept_log(state.log_post(), kNegInf, rng);
    return r;
  }
  EstimateWithAux est = model.estimate_loglik(r.outcome.proposed, recycle_at, n, rng);
  r.outcome.proposed_log_lik = est.log_lik;
  r.outcome.recycled_log_lik = est.recycled_log_lik;
  r.outcome.accepted = mh_accept_log(state.log_post(), est.log_lik + lp, rng);
  if (r.outcome.accepted) {
    r.state.theta = r.outcome.proposed;
    r.state.log_lik_est = est.log_lik;
    r.state.log_prior = lp;
    r.state.n_particles = n;
  }
  return r;
}

ChainRun run_chain(const ChainState& init, const Model& model, const ProposalSpec& prop,
                   Controller& controller, std::int64_t iterations, TraceSink& sink,
                   RngStream& rng) {
  if (iterations < 1) throw InvalidArgument("iterations must be >= 1");
  check_param(model, init.theta);
  if (prop.dim() != model.dim()) throw InvalidArgument("proposal and model dimensions differ");

  const auto d = static_cast<Eigen::Index>(model.dim());
  ChainRun run;
  run.samples.resize(iterations, d);
  run.n_used.reserve(static_cast<std::size_t>(iterations));

  const auto start = std::chrono::steady_clock::now();
  ChainState state = init;
  TraceRecord rec;
  try {
    sink.begin(model.dim());
    for (std::int64_t l = 0; l < iterations; ++l) {
      const int n = controller.particles();
      StepResult step = pm_step(state, model, prop, n, controller.recycle_target(), rng);
      state = std::move(step.state);
      run.accepted += step.outcome.accepted ? 1 : 0;
      run.samples.row(l) = state.theta.transpose();
      run.n_used.push_back(n);

      std::optional<EpochRecord> epoch = controller.observe(state.theta, step.outcome.recycled_log_lik);

      rec.iter = l + 1;
      rec.theta = state.theta;
      rec.n_particles = n;
      rec.log_lik_est = state.log_lik_est;
      rec.accepted = step.outcome.accepted;
      rec.recycled_log_lik = step.outcome.recycled_log_lik;
      rec.epoch_end = epoch.has_value();
      rec.sigma_hat = epoch ? epoch->sigma_hat : std::nullopt;
      if (epoch) {
        epoch->iteration = l + 1;
        run.epochs.push_back(*epoch);
      }
      sink.write(rec);
    }
    sink.flush();
  } catch (...) {
    try {
      sink.flush();
    } catch (...) {
    }
    throw;
  }
  run.total = iterations;
  run.final_state = state;
  run.wall_clock_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return run;
}

}  // namespace pmadapt
