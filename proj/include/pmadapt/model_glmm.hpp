#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pmadapt/model.hpp"
#include "pmadapt/rng.hpp"

namespace pmadapt::glmm {

// Logistic random-intercept model:
//   y_{t,j} | u_t ~ Bernoulli(logistic(c_{t,j}' beta + u_t)),  u_t ~ N(0, tau),
//   beta ~ N(0, 1e4 I_8),  tau ~ InvGamma(shape 1, scale 1.5).
// Parameters are packed as (beta_1..beta_8, tau).

inline constexpr int kCovariates = 8;
inline constexpr int kDim = kCovariates + 1;

using CovariateMatrix = Eigen::Matrix<double, Eigen::Dynamic, kCovariates, Eigen::RowMajor>;

struct Subject {
  std::string id;
  std::vector<std::uint8_t> y;
  CovariateMatrix covariates;  ///< one row per response

  std::size_t responses() const { return y.size(); }
};

struct GlmmData {
  std::vector<Subject> subjects;

  std::size_t size() const { return subjects.size(); }
  std::size_t total_responses() const;
};

/// Parses "subject,y,x1,...,x8". Rows are grouped by subject id in order of
/// first appearance; row order within a subject is preserved.
GlmmData parse_csv(std::istream& in);
GlmmData ingest_csv(const std::string& path);
/// Subjects are written with their ids, in order.
void write_csv(const GlmmData& data, std::ostream& out);

/// Covariates: an intercept column of ones followed by 7 iid standard normals.
GlmmData generate(int t_subjects, int j_per, const Eigen::VectorXd& beta_true, double tau_true,
                  RngStream& rng);

/// Maximiser over u of sum_j [y_j eta_j - log(1 + e^eta_j)] - u^2 / (2 tau),
/// eta_j = offsets_j + u, by Newton's method safeguarded with bisection on the
/// bracket [-tau J, tau J] (the score changes sign there). Converges to
/// |score| < 1e-10; throws EstimatorError after 100 iterations.
double conditional_mode(std::span<const std::uint8_t> y, std::span<const double> offsets, double tau);
double conditional_mode(const Subject& subject, const Eigen::VectorXd& beta, double tau);

double inverse_gamma_log_pdf(double x, double shape, double scale);

/// Sigma_p used by the reference analysis of the respiratory-infection data.
Eigen::MatrixXd default_sigma_p();
/// Starting point used by the reference analysis of the same data.
ParamVector default_theta0();

class GlmmModel final : public Model {
 public:
  explicit GlmmModel(GlmmData data);

  std::string name() const override { return "glmm"; }
  std::size_t dim() const override { return kDim; }
  double log_prior(const ParamVector& theta) const override;
  /// Always absent: the likelihood is a product of intractable integrals.
  std::optional<double> exact_loglik(const ParamVector&) const override { return std::nullopt; }

  /// Per subject: U_n ~ N(u_hat_t(theta), tau), weight g(y_t|U,theta) phi(U;0,tau)/phi(U;u_hat,tau).
  /// The recycled value maps the draws to U' = u_hat_t(target) + sqrt(tau_target / tau)(U - u_hat_t(theta))
  /// and evaluates the same weights under the target parameter.
  EstimateWithAux estimate_loglik(const ParamVector& theta, const ParamVector* recycle_at, int n,
                                  RngStream& rng) const override;

  /// Per-subject log of (1/n) sum_k w(draws[k]) under theta, where draws are
  /// explicit random-intercept values. Used to check the recycled law.
  double subject_log_lik_from_draws(std::size_t t, const ParamVector& theta,
                                    std::span<const double> draws) const;

  const GlmmData& data() const { return data_; }

 private:
  GlmmData data_;
};

}  // namespace pmadapt::glmm
