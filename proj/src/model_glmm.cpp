#include "pmadapt/model_glmm.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <unordered_map>

#include "pmadapt/error.hpp"
#include "pmadapt/log_sum_exp.hpp"
#include "pmadapt/trace.hpp"

namespace pmadapt::glmm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kPriorBetaVar = 1e4;
constexpr double kTauShape = 1.0;
constexpr double kTauScale = 1.5;
constexpr int kMaxNewtonIterations = 100;
constexpr double kScoreTolerance = 1e-10;

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

/// Log importance weight of one random-intercept draw.
double log_weight(std::span<const std::uint8_t> y, std::span<const double> offsets, double v,
                  double mode, double tau) {
  double lw = (mode * mode - 2.0 * v * mode) / (2.0 * tau);
  for (std::size_t j = 0; j < y.size(); ++j) {
    const double eta = offsets[j] + v;
    lw += (y[j] ? eta : 0.0) - softplus(eta);
  }
  return lw;
}

void subject_offsets(const Subject& s, const Eigen::VectorXd& beta, std::vector<double>& out) {
  out.resize(s.responses());
  Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<Eigen::Index>(out.size())) =
      s.covariates * beta;
}

}  // namespace

std::size_t GlmmData::total_responses() const {
  std::size_t n = 0;
  for (const auto& s : subjects) n += s.responses();
  return n;
}

GlmmData parse_csv(std::istream& in) {
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line)) throw ParseError(lineno, "empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "subject,y,x1,x2,x3,x4,x5,x6,x7,x8") {
    throw ParseError(lineno, "expected header \"subject,y,x1,...,x8\"");
  }
  GlmmData data;
  std::unordered_map<std::string, std::size_t> index;
  std::vector<std::vector<std::array<double, kCovariates>>> rows;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != 2 + kCovariates) {
      throw ParseError(lineno, "expected 10 fields, found " + std::to_string(fields.size()));
    }
    if (fields[0].empty()) throw ParseError(lineno, "empty subject id");
    std::uint8_t y = 0;
    if (fields[1] == "0") {
      y = 0;
    } else if (fields[1] == "1") {
      y = 1;
    } else {
      throw ParseError(lineno, "response must be 0 or 1, got \"" + fields[1] + "\"");
    }
    std::array<double, kCovariates> x{};
    for (int k = 0; k < kCovariates; ++k) {
      const std::string& f = fields[static_cast<std::size_t>(2 + k)];
      try {
        std::size_t used = 0;
        x[static_cast<std::size_t>(k)] = std::stod(f, &used);
        if (used != f.size() || !std::isfinite(x[static_cast<std::size_t>(k)])) {
          throw std::invalid_argument(f);
        }
      } catch (const std::exception&) {
        throw ParseError(lineno, "invalid covariate x" + std::to_string(k + 1) + " \"" + f + "\"");
      }
    }
    auto [it, inserted] = index.try_emplace(fields[0], data.subjects.size());
    if (inserted) {
      data.subjects.push_back(Subject{fields[0], {}, {}});
      rows.emplace_back();
    }
    data.subjects[it->second].y.push_back(y);
    rows[it->second].push_back(x);
  }
  if (data.subjects.empty()) throw ParseError(lineno, "no data rows");
  for (std::size_t s = 0; s < data.subjects.size(); ++s) {
    auto& cov = data.subjects[s].covariates;
    cov.resize(static_cast<Eigen::Index>(rows[s].size()), kCovariates);
    for (std::size_t r = 0; r < rows[s].size(); ++r) {
      for (int k = 0; k < kCovariates; ++k) {
        cov(static_cast<Eigen::Index>(r), k) = rows[s][r][static_cast<std::size_t>(k)];
      }
    }
  }
  return data;
}

GlmmData ingest_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return parse_csv(in);
}

void write_csv(const GlmmData& data, std::ostream& out) {
  out << "subject,y,x1,x2,x3,x4,x5,x6,x7,x8\n";
  for (const auto& s : data.subjects) {
    for (std::size_t j = 0; j < s.responses(); ++j) {
      out << s.id << ',' << static_cast<int>(s.y[j]);
      for (int k = 0; k < kCovariates; ++k) {
        out << ',' << format_double(s.covariates(static_cast<Eigen::Index>(j), k));
      }
      out << '\n';
    }
  }
}

GlmmData generate(int t_subjects, int j_per, const Eigen::VectorXd& beta_true, double tau_true,
                  RngStream& rng) {
  if (t_subjects < 1 || j_per < 1) throw InvalidArgument("subject and response counts must be >= 1");
  if (beta_true.size() != kCovariates) throw InvalidArgument("beta must have 8 entries");
  if (!(tau_true > 0.0)) throw InvalidArgument("tau must be positive");
  GlmmData data;
  data.subjects.reserve(static_cast<std::size_t>(t_subjects));
  const double sd = std::sqrt(tau_true);
  for (int t = 0; t < t_subjects; ++t) {
    Subject s;
    s.id = std::to_string(t + 1);
    s.covariates.resize(j_per, kCovariates);
    for (int j = 0; j < j_per; ++j) {
      s.covariates(j, 0) = 1.0;
      for (int k = 1; k < kCovariates; ++k) s.covariates(j, k) = rng.normal();
    }
    const double u = sd * rng.normal();
    for (int j = 0; j < j_per; ++j) {
      const double eta = s.covariates.row(j).dot(beta_true) + u;
      s.y.push_back(rng.uniform() < logistic(eta) ? 1 : 0);
    }
    data.subjects.push_back(std::move(s));
  }
  return data;
}

double conditional_mode(std::span<const std::uint8_t> y, std::span<const double> offsets, double tau) {
  if (!(tau > 0.0)) throw InvalidArgument("conditional_mode: tau must be positive");
  if (y.empty()) return 0.0;
  const double bound = tau * static_cast<double>(y.size());
  double lo = -bound;
  double hi = bound;
  double u = 0.0;
  double step_old = hi - lo;
  double step = step_old;
  for (int it = 0; it < kMaxNewtonIterations; ++it) {
    double score = -u / tau;
    double curvature = -1.0 / tau;
    for (std::size_t j = 0; j < y.size(); ++j) {
      const double p = logistic(offsets[j] + u);
      score += static_cast<double>(y[j]) - p;
      curvature -= p * (1.0 - p);
    }
    if (std::abs(score) < kScoreTolerance) return u;
    if (score > 0.0) {
      lo = u;
    } else {
      hi = u;
    }
    // Newton unless it leaves the bracket or fails to halve the step from two
    // iterations back; then bisect.
    double next = u - score / curvature;
    if (!(next > lo && next < hi) || std::abs(2.0 * score) > std::abs(step_old * curvature)) {
      next = 0.5 * (lo + hi);
    }
    step_old = step;
    step = next - u;
    if (next == u) return u;
    u = next;
  }
  throw EstimatorError("conditional mode did not converge in 100 iterations");
}

double conditional_mode(const Subject& subject, const Eigen::VectorXd& beta, double tau) {
  std::vector<double> offsets;
  subject_offsets(subject, beta, offsets);
  return conditional_mode(subject.y, offsets, tau);
}

double inverse_gamma_log_pdf(double x, double shape, double scale) {
  if (!(x > 0.0)) return kNegInf;
  return shape * std::log(scale) - std::lgamma(shape) - (shape + 1.0) * std::log(x) - scale / x;
}

Eigen::MatrixXd default_sigma_p() {
  Eigen::MatrixXd m(kDim, kDim);
  // clang-format off
  m <<  0.0530,  0.0003, -0.0211,  0.0149,  0.0103, -0.0251, -0.0009, -0.0343, -0.0384,
        0.0003,  0.0001, -0.0004,  0.0000,  0.0001,  0.0001,  0.0001, -0.0003, -0.0003,
       -0.0211, -0.0004,  0.2570, -0.0103, -0.0065,  0.0112,  0.0000, -0.0094, -0.0119,
        0.0149,  0.0000, -0.0103,  0.0318,  0.0070,  0.0001,  0.0003,  0.0050, -0.0033,
        0.0103,  0.0001, -0.0065,  0.0070,  0.0321, -0.0006,  0.0004, -0.0005,  0.0000,
       -0.0251,  0.0001,  0.0112,  0.0001, -0.0006,  0.0761,  0.0002, -0.0015, -0.0075,
       -0.0009,  0.0001,  0.0000,  0.0003,  0.0004,  0.0002,  0.0008,  0.0071, -0.0011,
       -0.0343, -0.0003, -0.0094,  0.0050, -0.0005, -0.0015,  0.0071,  0.2169,  0.0064,
       -0.0384, -0.0003, -0.0119, -0.0033,  0.0000, -0.0075, -0.0011,  0.0064,  0.1348;
  // clang-format on
  return m;
}

ParamVector default_theta0() {
  ParamVector t(kDim);
  t << -2.788, -0.035, 0.560, -0.614, -0.173, -0.461, -0.052, 0.192, 0.944;
  return t;
}

GlmmModel::GlmmModel(GlmmData data) : data_(std::move(data)) {
  if (data_.subjects.empty()) throw InvalidArgument("GLMM data has no subjects");
  for (const auto& s : data_.subjects) {
    if (s.responses() == 0 || static_cast<std::size_t>(s.covariates.rows()) != s.responses()) {
      throw InvalidArgument("subject " + s.id + " has inconsistent responses/covariates");
    }
  }
}

double GlmmModel::log_prior(const ParamVector& theta) const {
  if (theta.size() != kDim) throw InvalidArgument("GLMM parameter must have 9 entries");
  const double tau = theta[kCovariates];
  if (!(tau > 0.0)) return kNegInf;
  const double beta_ss = theta.head(kCovariates).squaredNorm();
  const double lp_beta = -0.5 * kCovariates * std::log(2.0 * std::numbers::pi * kPriorBetaVar) -
                         0.5 * beta_ss / kPriorBetaVar;
  return lp_beta + inverse_gamma_log_pdf(tau, kTauShape, kTauScale);
}

EstimateWithAux GlmmModel::estimate_loglik(const ParamVector& theta, const ParamVector* recycle_at,
                                           int n, RngStream& rng) const {
  if (n < 1) throw InvalidArgument("particle count must be >= 1");
  if (theta.size() != kDim) throw InvalidArgument("GLMM parameter must have 9 entries");
  const double tau = theta[kCovariates];
  if (!(tau > 0.0)) throw InvalidArgument("GLMM estimator needs tau > 0");
  const Eigen::VectorXd beta = theta.head(kCovariates);
  const bool recycle = recycle_at != nullptr;
  double tau_r = 1.0;
  Eigen::VectorXd beta_r;
  if (recycle) {
    if (recycle_at->size() != kDim) throw InvalidArgument("GLMM recycle target must have 9 entries");
    tau_r = (*recycle_at)[kCovariates];
    if (!(tau_r > 0.0)) throw InvalidArgument("GLMM recycle target needs tau > 0");
    beta_r = recycle_at->head(kCovariates);
  }
  const double sd = std::sqrt(tau);
  const double sd_r = std::sqrt(tau_r);

  thread_local std::vector<double> z;
  thread_local std::vector<double> lw;
  thread_local std::vector<double> offsets;
  thread_local std::vector<double> offsets_r;
  z.resize(static_cast<std::size_t>(n));
  lw.resize(static_cast<std::size_t>(n));

  EstimateWithAux out;
  double total = 0.0;
  double total_r = 0.0;
  for (const auto& s : data_.subjects) {
    subject_offsets(s, beta, offsets);
    const double mode = conditional_mode(s.y, offsets, tau);
    rng.fill_normal(z);
    for (std::size_t k = 0; k < z.size(); ++k) {
      lw[k] = log_weight(s.y, offsets, mode + sd * z[k], mode, tau);
    }
    total += log_mean_exp(lw);
    if (recycle) {
      subject_offsets(s, beta_r, offsets_r);
      const double mode_r = conditional_mode(s.y, offsets_r, tau_r);
      // h(V) = mode_r + sqrt(tau_r / tau) (V - mode) = mode_r + sd_r * z
      for (std::size_t k = 0; k < z.size(); ++k) {
        lw[k] = log_weight(s.y, offsets_r, mode_r + sd_r * z[k], mode_r, tau_r);
      }
      total_r += log_mean_exp(lw);
    }
  }
  out.log_lik = std::isfinite(total) ? total : kNegInf;
  if (recycle) out.recycled_log_lik = std::isfinite(total_r) ? total_r : kNegInf;
  return out;
}

double GlmmModel::subject_log_lik_from_draws(std::size_t t, const ParamVector& theta,
                                             std::span<const double> draws) const {
  const Subject& s = data_.subjects.at(t);
  const double tau = theta[kCovariates];
  std::vector<double> offsets;
  subject_offsets(s, theta.head(kCovariates), offsets);
  const double mode = conditional_mode(s.y, offsets, tau);
  std::vector<double> terms(draws.size());
  for (std::size_t k = 0; k < draws.size(); ++k) {
    terms[k] = log_weight(s.y, offsets, draws[k], mode, tau);
  }
  return log_mean_exp(terms);
}

}  // namespace pmadapt::glmm
