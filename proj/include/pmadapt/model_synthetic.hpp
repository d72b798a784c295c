#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pmadapt/model.hpp"
#include "pmadapt/rng.hpp"

namespace pmadapt::synthetic {

// Latent Gaussian model with theta-dependent latent variance:
//   U_t | theta ~ N(theta, 1 / (theta^2 + 1)),   Y_t | U_t ~ N(U_t, 1),
//   theta ~ N(0, sigma0^2).
// Marginally Y_t | theta ~ N(theta, (theta^2 + 2) / (theta^2 + 1)).

struct SyntheticData {
  std::vector<double> y;
  double gen_theta = 0.0;
  std::uint64_t gen_seed = 0;

  std::size_t size() const { return y.size(); }
};

struct SyntheticConfig {
  double sigma0 = 1e5;
};

/// Stream id used when a dataset is generated from a bare seed.
inline constexpr std::uint64_t kDataStream = 0xda7aULL;

/// Draws U_t then y_t for t = 1..t using `draw_normal` for standard normals.
SyntheticData generate_data(int t, double theta_bar, const std::function<double()>& draw_normal);
SyntheticData generate_data(int t, double theta_bar, RngStream& rng);
/// Reproducible from (seed, t, theta_bar) alone.
SyntheticData generate_data(int t, double theta_bar, std::uint64_t seed);

/// CSV with header "t,y".
void write_csv(const SyntheticData& data, std::ostream& out);
SyntheticData read_csv(std::istream& in);
SyntheticData read_csv_file(const std::string& path);

/// Unnormalised log posterior
///   (T/2) log((θ²+1)/(θ²+2)) − ½[((θ²+1)/(θ²+2)) Σ(θ−y_t)² + θ²/σ0²].
double exact_log_posterior(double theta, const SyntheticData& data, const SyntheticConfig& config);

/// log E[W_1^2] for the single-particle weight W_1 = p_hat_{T,1} / p_T at theta.
double log_weight_second_moment(double theta, const SyntheticData& data);

/// Recycling map: sends V ~ N(proposed, 1/(proposed²+1)) to N(target, 1/(target²+1)).
inline double recycle_transform(double v, double proposed, double target) {
  return std::sqrt((proposed * proposed + 1.0) / (target * target + 1.0)) * (v - proposed) + target;
}

class SyntheticModel final : public Model {
 public:
  explicit SyntheticModel(SyntheticData data, SyntheticConfig config = {});

  std::string name() const override { return "synthetic"; }
  std::size_t dim() const override { return 1; }
  double log_prior(const ParamVector& theta) const override;
  std::optional<double> exact_loglik(const ParamVector& theta) const override;

  /// Importance-sampling estimator prod_t (1/N) sum_n phi(y_t; U_{t,n}, 1) with
  /// U_{t,n} ~ N(theta, 1/(theta²+1)). Draws T*n normals, observation-major.
  EstimateWithAux estimate_loglik(const ParamVector& theta, const ParamVector* recycle_at, int n,
                                  RngStream& rng) const override;

  /// The T x n auxiliary matrix the estimator would draw from `rng`.
  Eigen::MatrixXd draw_aux(double theta, int n, RngStream& rng) const;
  /// Estimator evaluated on explicit auxiliary draws.
  double log_lik_from_aux(const Eigen::MatrixXd& aux) const;

  const SyntheticData& data() const { return data_; }
  const SyntheticConfig& config() const { return config_; }

  /// Proposal variance l^2 * (2/T) with l^2 = 4: the inverse Fisher
  /// information at theta = 0 scaled by the one-dimensional optimum.
  double default_proposal_variance() const { return 8.0 / static_cast<double>(data_.size()); }

 private:
  SyntheticData data_;
  SyntheticConfig config_;
};

}  // namespace pmadapt::synthetic
