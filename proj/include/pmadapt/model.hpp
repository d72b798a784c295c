#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "pmadapt/rng.hpp"

namespace pmadapt {

/// A point in parameter space, in model units.
using ParamVector = Eigen::VectorXd;

/// Log of an unbiased likelihood estimate, plus the estimate recomputed at a
/// second parameter point from the same auxiliary draw mapped through the
/// model's recycling transformation.
struct EstimateWithAux {
  double log_lik = 0.0;
  std::optional<double> recycled_log_lik;
};

/// Contract for a target model: prior, optional exact likelihood, unbiased
/// log-likelihood estimator and recycling transformation.
///
/// Implementations are immutable after construction; every member is pure
/// given the supplied RNG, so one model can be shared by concurrent chains.
class Model {
 public:
  virtual ~Model() = default;

  virtual std::string name() const = 0;
  virtual std::size_t dim() const = 0;

  /// log p(theta); -inf outside the support.
  virtual double log_prior(const ParamVector& theta) const = 0;

  /// Exact log-likelihood when tractable. Absence is a value, not an error.
  virtual std::optional<double> exact_loglik(const ParamVector& theta) const = 0;

  /// Draws V ~ m_{n,theta} and returns log p_hat(y | theta, V). When
  /// `recycle_at` is non-null the estimate at that point, computed from
  /// h(V, theta, *recycle_at), is returned alongside. The model's h is the
  /// identity when both points coincide, so the two values are then equal.
  virtual EstimateWithAux estimate_loglik(const ParamVector& theta,
                                          const ParamVector* recycle_at, int n,
                                          RngStream& rng) const = 0;
};

/// Adapter that substitutes the exact likelihood for the estimator. Running
/// the pseudo-marginal kernel over it is plain Metropolis-Hastings; no RNG
/// draws are consumed by `estimate_loglik`.
class ExactLikelihoodModel final : public Model {
 public:
  /// Throws InvalidArgument if `inner` has no exact likelihood.
  explicit ExactLikelihoodModel(std::shared_ptr<const Model> inner);

  std::string name() const override { return inner_->name() + "-exact"; }
  std::size_t dim() const override { return inner_->dim(); }
  double log_prior(const ParamVector& theta) const override { return inner_->log_prior(theta); }
  std::optional<double> exact_loglik(const ParamVector& theta) const override {
    return inner_->exact_loglik(theta);
  }
  EstimateWithAux estimate_loglik(const ParamVector& theta, const ParamVector* recycle_at, int n,
                                  RngStream& rng) const override;

 private:
  std::shared_ptr<const Model> inner_;
};

/// Throws InvalidArgument unless theta has the model's dimension and is finite.
void check_param(const Model& model, const ParamVector& theta);

}  // namespace pmadapt
