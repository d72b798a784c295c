#include "pmadapt/model_synthetic.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "pmadapt/error.hpp"
#include "pmadapt/log_sum_exp.hpp"
#include "pmadapt/trace.hpp"

namespace pmadapt::synthetic {

namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

double log_normal_pdf(double x, double mean, double var) {
  const double e = x - mean;
  return -0.5 * std::log(2.0 * std::numbers::pi * var) - 0.5 * e * e / var;
}

double theta_of(const ParamVector& theta) {
  if (theta.size() != 1) throw InvalidArgument("synthetic model is one-dimensional");
  return theta[0];
}

}  // namespace

SyntheticData generate_data(int t, double theta_bar, const std::function<double()>& draw_normal) {
  if (t < 1) throw InvalidArgument("number of observations must be >= 1");
  SyntheticData data;
  data.gen_theta = theta_bar;
  data.y.reserve(static_cast<std::size_t>(t));
  const double latent_sd = 1.0 / std::sqrt(theta_bar * theta_bar + 1.0);
  for (int i = 0; i < t; ++i) {
    const double u = theta_bar + latent_sd * draw_normal();
    data.y.push_back(u + draw_normal());
  }
  return data;
}

SyntheticData generate_data(int t, double theta_bar, RngStream& rng) {
  return generate_data(t, theta_bar, [&rng] { return rng.normal(); });
}

SyntheticData generate_data(int t, double theta_bar, std::uint64_t seed) {
  RngStream rng(seed, kDataStream);
  SyntheticData data = generate_data(t, theta_bar, rng);
  data.gen_seed = seed;
  return data;
}

void write_csv(const SyntheticData& data, std::ostream& out) {
  out << "t,y\n";
  for (std::size_t i = 0; i < data.y.size(); ++i) {
    out << (i + 1) << ',' << format_double(data.y[i]) << '\n';
  }
}

SyntheticData read_csv(std::istream& in) {
  SyntheticData data;
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw ParseError(1, "empty file");
  ++lineno;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "t,y") throw ParseError(lineno, "expected header \"t,y\"");
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ParseError(lineno, "expected two fields");
    try {
      std::size_t used = 0;
      const std::string field = line.substr(comma + 1);
      const double y = std::stod(field, &used);
      if (used != field.size() || !std::isfinite(y)) throw std::invalid_argument("y");
      data.y.push_back(y);
    } catch (const std::exception&) {
      throw ParseError(lineno, "invalid y value");
    }
  }
  if (data.y.empty()) throw ParseError(lineno, "no observations");
  return data;
}

SyntheticData read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return read_csv(in);
}

double exact_log_posterior(double theta, const SyntheticData& data, const SyntheticConfig& config) {
  const double t2 = theta * theta;
  const double ratio = (t2 + 1.0) / (t2 + 2.0);
  double ss = 0.0;
  for (double y : data.y) ss += (theta - y) * (theta - y);
  const double n = static_cast<double>(data.size());
  return 0.5 * n * std::log(ratio) - 0.5 * (ratio * ss + t2 / (config.sigma0 * config.sigma0));
}

double log_weight_second_moment(double theta, const SyntheticData& data) {
  const double t2 = theta * theta;
  const double n = static_cast<double>(data.size());
  double ss = 0.0;
  for (double y : data.y) ss += (theta - y) * (theta - y);
  return n * std::log(t2 + 2.0) - 0.5 * n * std::log(t2 + 1.0) - 0.5 * n * std::log(t2 + 3.0) +
         (t2 + 1.0) / ((t2 + 2.0) * (t2 + 3.0)) * ss;
}

SyntheticModel::SyntheticModel(SyntheticData data, SyntheticConfig config)
    : data_(std::move(data)), config_(config) {
  if (data_.y.empty()) throw InvalidArgument("synthetic model needs at least one observation");
  if (!(config_.sigma0 > 0.0)) throw InvalidArgument("prior sd sigma0 must be positive");
}

double SyntheticModel::log_prior(const ParamVector& theta) const {
  return log_normal_pdf(theta_of(theta), 0.0, config_.sigma0 * config_.sigma0);
}

std::optional<double> SyntheticModel::exact_loglik(const ParamVector& theta) const {
  const double th = theta_of(theta);
  const double var = (th * th + 2.0) / (th * th + 1.0);
  double sum = 0.0;
  for (double y : data_.y) sum += log_normal_pdf(y, th, var);
  return sum;
}

EstimateWithAux SyntheticModel::estimate_loglik(const ParamVector& theta,
                                                const ParamVector* recycle_at, int n,
                                                RngStream& rng) const {
  if (n < 1) throw InvalidArgument("particle count must be >= 1");
  const double th = theta_of(theta);
  const double sd = 1.0 / std::sqrt(th * th + 1.0);
  const bool recycle = recycle_at != nullptr;
  const double target = recycle ? theta_of(*recycle_at) : 0.0;
  // h(V) = target + sd_target * (V - th) / sd, i.e. the same standard-normal
  // innovations rescaled to the target's latent law.
  const double target_sd = 1.0 / std::sqrt(target * target + 1.0);

  thread_local std::vector<double> z;
  thread_local std::vector<double> scratch;
  z.resize(static_cast<std::size_t>(n));
  scratch.resize(static_cast<std::size_t>(n));

  double primary = 0.0;
  double recycled = 0.0;
  for (double y : data_.y) {
    rng.fill_normal(z);
    primary += log_mean_gauss_kernel(y, th, sd, z, scratch);
    if (recycle) recycled += log_mean_gauss_kernel(y, target, target_sd, z, scratch);
  }
  const double offset = static_cast<double>(data_.size()) * kHalfLog2Pi;
  EstimateWithAux out;
  out.log_lik = primary - offset;
  if (recycle) out.recycled_log_lik = recycled - offset;
  return out;
}

Eigen::MatrixXd SyntheticModel::draw_aux(double theta, int n, RngStream& rng) const {
  const double sd = 1.0 / std::sqrt(theta * theta + 1.0);
  Eigen::MatrixXd aux(static_cast<Eigen::Index>(data_.size()), n);
  for (Eigen::Index t = 0; t < aux.rows(); ++t) {
    for (Eigen::Index k = 0; k < n; ++k) aux(t, k) = theta + sd * rng.normal();
  }
  return aux;
}

double SyntheticModel::log_lik_from_aux(const Eigen::MatrixXd& aux) const {
  if (aux.rows() != static_cast<Eigen::Index>(data_.size())) {
    throw InvalidArgument("auxiliary matrix must have one row per observation");
  }
  std::vector<double> terms(static_cast<std::size_t>(aux.cols()));
  double total = 0.0;
  for (Eigen::Index t = 0; t < aux.rows(); ++t) {
    for (Eigen::Index k = 0; k < aux.cols(); ++k) {
      terms[static_cast<std::size_t>(k)] = log_normal_pdf(data_.y[static_cast<std::size_t>(t)], aux(t, k), 1.0);
    }
    total += log_mean_exp(terms);
  }
  return total;
}

}  // namespace pmadapt::synthetic
