#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "pmadapt/error.hpp"
#include "pmadapt/model_synthetic.hpp"

using namespace pmadapt;
using namespace pmadapt::synthetic;

namespace {

ParamVector vec1(double x) { return ParamVector::Constant(1, x); }

double sum_sq(const std::vector<double>& y, double c) {
  double s = 0.0;
  for (double v : y) s += (v - c) * (v - c);
  return s;
}

/// Mean and SE of exp(log p_hat - exact) over `reps` replications.
std::pair<double, double> ratio_stats(const SyntheticModel& m, double theta, int n, int reps,
                                      std::uint64_t seed) {
  const double exact = *m.exact_loglik(vec1(theta));
  std::vector<double> w(static_cast<std::size_t>(reps));
  RngStream rng(seed, 0);
  for (auto& v : w) v = std::exp(m.estimate_loglik(vec1(theta), nullptr, n, rng).log_lik - exact);
  return {oracle::mean(w), oracle::se(w)};
}

/// log prod_t E[g_t^2] / p_t^2 from Gaussian product identities:
/// E[phi(y; U, 1)^2] = N(y; theta, s2 + 1/2) / (2 sqrt(pi)) and p_t = N(y; theta, s2 + 1).
double direct_log_second_moment(double theta, const std::vector<double>& y) {
  const double s2 = 1.0 / (theta * theta + 1.0);
  double out = 0.0;
  for (double v : y) {
    out += oracle::log_normal_pdf(v, theta, s2 + 0.5) - std::log(2.0 * std::sqrt(std::numbers::pi)) -
           2.0 * oracle::log_normal_pdf(v, theta, s2 + 1.0);
  }
  return out;
}

/// Delta-method variance of log p_hat with n particles.
double log_estimate_variance(double theta, const std::vector<double>& y, int n) {
  double v = 0.0;
  for (double yt : y) v += std::expm1(direct_log_second_moment(theta, {yt})) / n;
  return v;
}

}  // namespace

TEST_CASE("generator: marginal variance 2 at theta_bar = 0") {
  const SyntheticData d = generate_data(100000, 0.0, 77ULL);
  CHECK(std::abs(oracle::var(d.y) - 2.0) < 3.0 * oracle::var_se(d.y));
}

TEST_CASE("generator: zero-variance stub returns theta_bar") {
  const SyntheticData d = generate_data(1, 0.75, [] { return 0.0; });
  REQUIRE(d.size() == 1);
  CHECK(d.y[0] == 0.75);
}

TEST_CASE("generator: T = 200 sample mean on the CLT scale and seed reproducibility") {
  const SyntheticData d = generate_data(200, 0.0, 7ULL);
  CHECK(std::abs(oracle::mean(d.y)) < 3.0 * std::sqrt(2.0 / 200.0));
  CHECK(generate_data(200, 0.0, 7ULL).y == d.y);
  CHECK(generate_data(200, 0.0, 8ULL).y != d.y);
  CHECK_THROWS_AS(generate_data(0, 0.0, 1ULL), InvalidArgument);
}

TEST_CASE("CSV round trip and parse errors") {
  const SyntheticData d = generate_data(20, 0.3, 3ULL);
  std::stringstream ss;
  write_csv(d, ss);
  CHECK(read_csv(ss).y == d.y);
  std::istringstream bad("t,y\n1,0.5\n2,abc\n");
  try {
    read_csv(bad);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  std::istringstream empty("");
  CHECK_THROWS_AS(read_csv(empty), ParseError);
}

TEST_CASE("exact posterior and likelihood closed forms") {
  const SyntheticData d = generate_data(200, 0.0, 7ULL);
  const SyntheticConfig cfg;
  const double t = 200.0;
  CHECK(exact_log_posterior(0.0, d, cfg) ==
        doctest::Approx(-(t / 2) * std::log(2.0) - 0.25 * sum_sq(d.y, 0.0)).epsilon(1e-13));
  const SyntheticModel m(d);
  double at0 = 0.0;
  double at1 = 0.0;
  for (double y : d.y) {
    at0 += oracle::log_normal_pdf(y, 0.0, 2.0);
    at1 += oracle::log_normal_pdf(y, 1.0, 1.5);
  }
  CHECK(*m.exact_loglik(vec1(0.0)) == doctest::Approx(at0).epsilon(1e-13));
  CHECK(*m.exact_loglik(vec1(1.0)) == doctest::Approx(at1).epsilon(1e-13));
  CHECK(m.log_prior(vec1(0.0)) == doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi * 1e10)));
}

TEST_CASE("exact posterior is even for symmetric data and concentrates near 0") {
  SyntheticData zeros;
  zeros.y.assign(10, 0.0);
  for (double th : {0.1, 0.7, 3.0}) {
    CHECK(exact_log_posterior(th, zeros, {}) == exact_log_posterior(-th, zeros, {}));
  }
  const SyntheticData d = generate_data(200, 0.0, 7ULL);
  const double peak = exact_log_posterior(0.0, d, {});
  auto dens = [&](double x) { return std::exp(exact_log_posterior(x, d, {}) - peak); };
  const double inner = oracle::integrate(dens, -1.0, 1.0);
  const double total = inner + oracle::integrate(dens, -20.0, -1.0) + oracle::integrate(dens, 1.0, 20.0);
  CHECK(inner / total > 0.999);
}

TEST_CASE("estimator with many particles matches the exact likelihood") {
  const SyntheticModel m(generate_data(200, 0.0, 7ULL));
  RngStream rng(1, 1);
  const double est = m.estimate_loglik(vec1(0.0), nullptr, 100000, rng).log_lik;
  const double sd = std::sqrt(log_estimate_variance(0.0, m.data().y, 100000));
  MESSAGE("error " << est - *m.exact_loglik(vec1(0.0)) << ", predicted sd " << sd);
  CHECK(std::abs(est - *m.exact_loglik(vec1(0.0))) < 4.0 * sd);
  const SyntheticModel small(generate_data(5, 0.0, 19ULL));
  const double est5 = small.estimate_loglik(vec1(0.0), nullptr, 100000, rng).log_lik;
  CHECK(std::abs(est5 - *small.exact_loglik(vec1(0.0))) < 0.05);
}

TEST_CASE("fused estimator agrees with explicit auxiliary draws") {
  const SyntheticModel m(generate_data(30, 0.0, 7ULL));
  const double theta = 0.4;
  const double target = -0.2;
  RngStream a(5, 5);
  RngStream b(5, 5);
  const auto est = m.estimate_loglik(vec1(theta), nullptr, 25, a);
  const Eigen::MatrixXd aux = m.draw_aux(theta, 25, b);
  CHECK(est.log_lik == doctest::Approx(m.log_lik_from_aux(aux)).epsilon(1e-12));

  RngStream c(6, 6);
  RngStream d(6, 6);
  const ParamVector tgt = vec1(target);
  const auto rec = m.estimate_loglik(vec1(theta), &tgt, 25, c);
  Eigen::MatrixXd moved = m.draw_aux(theta, 25, d);
  for (Eigen::Index i = 0; i < moved.size(); ++i) moved(i) = recycle_transform(moved(i), theta, target);
  CHECK(*rec.recycled_log_lik == doctest::Approx(m.log_lik_from_aux(moved)).epsilon(1e-12));
}

TEST_CASE("transformed draws follow the target's latent law") {
  RngStream rng(2, 2);
  std::vector<double> v(100000);
  for (auto& x : v) x = recycle_transform(1.0 + std::sqrt(0.5) * rng.normal(), 1.0, 0.0);
  CHECK(std::abs(oracle::mean(v)) < 3.0 * oracle::se(v));
  CHECK(std::abs(oracle::var(v) - 1.0) < 3.0 * oracle::var_se(v));
  CHECK(recycle_transform(0.37, 0.2, 0.2) == 0.37);
}

TEST_CASE("property: recycle law for random parameter pairs") {
  std::mt19937_64 gen(15);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int trial = 0; trial < 10; ++trial) {
    const double prop = u(gen);
    const double target = u(gen);
    RngStream rng(trial, 9);
    std::vector<double> v(20000);
    const double sd = 1.0 / std::sqrt(prop * prop + 1.0);
    for (auto& x : v) x = recycle_transform(prop + sd * rng.normal(), prop, target);
    CHECK(std::abs(oracle::mean(v) - target) < 3.0 * oracle::se(v));
    CHECK(std::abs(oracle::var(v) - 1.0 / (target * target + 1.0)) < 3.0 * oracle::var_se(v));
  }
}

TEST_CASE("second moment of the single-particle weight") {
  const SyntheticData d = generate_data(200, 0.0, 7ULL);
  const double t = 200.0;
  CHECK(log_weight_second_moment(0.0, d) ==
        doctest::Approx(t * std::log(2.0) - (t / 2) * std::log(3.0) + sum_sq(d.y, 0.0) / 6.0).epsilon(1e-13));
  SyntheticData zeros;
  zeros.y.assign(10, 0.0);
  CHECK(std::abs(std::exp(log_weight_second_moment(100.0, zeros) - 10.0) - 1.0) < 0.01);
  const SyntheticData ten = generate_data(10, 0.0, 11ULL);
  for (double theta : {-2.0, 0.3, 1.0, 100.0}) {
    CHECK(log_weight_second_moment(theta, ten) ==
          doctest::Approx(direct_log_second_moment(theta, ten.y)).epsilon(1e-10));
  }
}

TEST_CASE("Monte Carlo E[W^2] matches the closed form on a T = 5 dataset") {
  const SyntheticModel m(generate_data(5, 0.0, 19ULL));
  const double theta = 0.0;
  const double exact = *m.exact_loglik(vec1(theta));
  RngStream rng(3, 3);
  std::vector<double> w2(1000000);
  for (auto& v : w2) v = std::exp(2.0 * (m.estimate_loglik(vec1(theta), nullptr, 1, rng).log_lik - exact));
  const double closed = std::exp(log_weight_second_moment(theta, m.data()));
  MESSAGE("E[W^2] Monte Carlo " << oracle::mean(w2) << " +- " << oracle::se(w2) << ", closed form " << closed);
  CHECK(std::abs(oracle::mean(w2) - closed) < 3.0 * oracle::se(w2));
}

TEST_CASE("property: unbiasedness on a T = 5 dataset") {
  const SyntheticModel m(generate_data(5, 0.0, 19ULL));
  std::uint64_t seed = 40;
  for (int n : {1, 10, 100}) {
    for (double theta : {0.0, 0.5}) {
      const auto [mean, se] = ratio_stats(m, theta, n, 100000, seed++);
      INFO("N = " << n << ", theta = " << theta << ": " << mean << " +- " << se);
      // six simultaneous checks, so a 4 SE band
      CHECK(std::abs(mean - 1.0) < 4.0 * se);
    }
  }
}

TEST_CASE("quadrature oracle recovers a narrow Gaussian") {
  const auto m = oracle::posterior_moments([](double x) { return -0.5 * (x + 0.03) * (x + 0.03) / 0.0001; },
                                           -3.0, 3.0, 0.0);
  CHECK(m.mean == doctest::Approx(-0.03).epsilon(1e-9));
  CHECK(m.var == doctest::Approx(0.0001).epsilon(1e-7));
}
