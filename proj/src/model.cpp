#include "pmadapt/model.hpp"

#include "pmadapt/error.hpp"

namespace pmadapt {

void check_param(const Model& model, const ParamVector& theta) {
  if (static_cast<std::size_t>(theta.size()) != model.dim()) {
    throw InvalidArgument("parameter has dimension " + std::to_string(theta.size()) + ", model " +
                          model.name() + " expects " + std::to_string(model.dim()));
  }
  if (!theta.allFinite()) throw InvalidArgument("parameter has non-finite coordinates");
}

ExactLikelihoodModel::ExactLikelihoodModel(std::shared_ptr<const Model> inner)
    : inner_(std::move(inner)) {
  if (!inner_) throw InvalidArgument("null model");
  if (!inner_->exact_loglik(ParamVector::Zero(static_cast<Eigen::Index>(inner_->dim())))) {
    throw InvalidArgument("model " + inner_->name() +
                          " has no exact likelihood; Metropolis-Hastings is not available");
  }
}

EstimateWithAux ExactLikelihoodModel::estimate_loglik(const ParamVector& theta,
                                                      const ParamVector* recycle_at, int /*n*/,
                                                      RngStream& /*rng*/) const {
  EstimateWithAux out;
  out.log_lik = *inner_->exact_loglik(theta);
  if (recycle_at != nullptr) out.recycled_log_lik = *inner_->exact_loglik(*recycle_at);
  return out;
}

}  // namespace pmadapt
