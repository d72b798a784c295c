#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "pmadapt/diagnostics.hpp"
#include "pmadapt/error.hpp"
#include "pmadapt/model_synthetic.hpp"
#include "pmadapt/samplers.hpp"

using namespace pmadapt;

namespace {

Eigen::MatrixXd as_chain(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

double naive_obm(const std::vector<double>& y, int b) {
  const auto n = static_cast<int>(y.size());
  const double ybar = oracle::mean(y);
  double ss = 0.0;
  for (int k = 0; k <= n - b; ++k) {
    double m = 0.0;
    for (int i = k; i < k + b; ++i) m += y[static_cast<std::size_t>(i)];
    m /= b;
    ss += (m - ybar) * (m - ybar);
  }
  return static_cast<double>(n) * b / ((n - b) * (n - b + 1.0)) * ss;
}

}  // namespace

TEST_CASE("moments examples") {
  const Moments c = moments(as_chain({4.0, 4.0, 4.0}), 0);
  CHECK(c.mean[0] == 4.0);
  CHECK(c.var[0] == 0.0);
  const Moments two = moments(as_chain({0.0, 2.0}), 0);
  CHECK(two.mean[0] == 1.0);
  CHECK(two.var[0] == 2.0);
  const Moments burn = moments(as_chain({100.0, 0.0, 2.0}), 1);
  CHECK(burn.mean[0] == 1.0);
  CHECK_THROWS_AS(moments(as_chain({1.0, 2.0}), 1), DegenerateInput);
  CHECK_THROWS_AS(moments(as_chain({1.0, 2.0}), 2), InvalidArgument);
}

TEST_CASE("property: moments are order-free") {
  std::mt19937_64 gen(12);
  for (int trial = 0; trial < 20; ++trial) {
    auto v = oracle::ar1(500 + trial, 0.7, trial);
    const Moments a = moments(as_chain(v), 0);
    std::shuffle(v.begin(), v.end(), gen);
    const Moments b = moments(as_chain(v), 0);
    CHECK(a.mean[0] == doctest::Approx(b.mean[0]).epsilon(1e-12));
    CHECK(a.var[0] == doctest::Approx(b.var[0]).epsilon(1e-12));
  }
}

TEST_CASE("OBM variance matches the defining sum") {
  const auto y = oracle::ar1(2000, 0.6, 5);
  for (int b : {1, 7, 44, 1000}) CHECK(obm_variance(y, b) == doctest::Approx(naive_obm(y, b)).epsilon(1e-10));
  CHECK(obm_variance(y) == doctest::Approx(naive_obm(y, 44)).epsilon(1e-10));
  CHECK_THROWS_AS(obm_variance(y, 1001), InvalidArgument);
}

TEST_CASE("IF calibration on iid and AR(1) input") {
  const double iid = obm_if(oracle::iid_normal(100000, 1));
  const double ar = obm_if(oracle::ar1(100000, 0.5, 2));
  MESSAGE("IF iid " << iid << ", AR(1) " << ar);
  CHECK(std::abs(iid - 1.0) <= 0.1);
  CHECK(std::abs(ar - 3.0) <= 0.5);
}

TEST_CASE("property: IF is shift- and scale-invariant") {
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> u(-100.0, 100.0);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = oracle::ar1(5000, 0.8, trial);
    double a = u(gen);
    if (std::abs(a) < 1e-3) a = 1.0;
    const double b = u(gen);
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = a * x[i] + b;
    CHECK(obm_if(y) == doctest::Approx(obm_if(x)).epsilon(1e-9));
  }
}

TEST_CASE("property: IF of a permuted chain is close to 1") {
  std::mt19937_64 gen(8);
  const std::size_t n = 100000;
  const double b = std::floor(std::sqrt(static_cast<double>(n)));
  const double se = std::sqrt(4.0 * b / (3.0 * n));
  for (int trial = 0; trial < 3; ++trial) {
    auto x = oracle::ar1(n, 0.9, 100 + trial);
    std::shuffle(x.begin(), x.end(), gen);
    CHECK(std::abs(obm_if(x) - 1.0) < 3.0 * se);
  }
}

TEST_CASE("IF rejects constant input and floors at 1") {
  CHECK_THROWS_AS(obm_if(std::vector<double>(100, 2.0)), DegenerateInput);
  std::vector<double> alt(10000);
  for (std::size_t i = 0; i < alt.size(); ++i) alt[i] = i % 2 ? 1.0 : -1.0;
  CHECK(obm_if(alt) == 1.0);
}

TEST_CASE("Geweke z") {
  CHECK(geweke_z(std::vector<double>(1000, 3.0)) == 0.0);
  const double z = geweke_z(oracle::iid_normal(100000, 9));
  MESSAGE("iid Geweke z " << z);
  CHECK(std::abs(z) < 3.0);
  auto jump = oracle::iid_normal(100000, 10);
  for (std::size_t i = jump.size() / 2; i < jump.size(); ++i) jump[i] += 5.0;
  CHECK(std::abs(geweke_z(jump)) > 10.0);
  std::vector<double> step(1000, 0.0);
  std::fill(step.begin() + 500, step.end(), 1.0);
  CHECK_THROWS_AS(geweke_z(step), DegenerateInput);
  CHECK_THROWS_AS(geweke_z(jump, 0.6, 0.5), InvalidArgument);
}

TEST_CASE("effective samples per minute") {
  CHECK(std::abs(esm(800000, 12.372, 62.37) - 1037.0) <= 1.0);
  CHECK(esm(100, 1.0, 1.0) == 100.0);
  CHECK(esm(600000, 85.081, 667.08) == doctest::Approx(10.57).epsilon(1e-3));
}

TEST_CASE("autocorrelation") {
  const auto x = oracle::ar1(100000, 0.5, 21);
  const auto r = acf(x, 5);
  CHECK(r[0] == 1.0);
  for (int k = 1; k <= 5; ++k) CHECK(std::abs(r[static_cast<std::size_t>(k)] - std::pow(0.5, k)) < 0.02);
  std::vector<double> alt(1000);
  for (std::size_t i = 0; i < alt.size(); ++i) alt[i] = i % 2 ? 1.0 : -1.0;
  CHECK(acf(alt, 1)[1] == doctest::Approx(-1.0).epsilon(2.0 / 1000));
  CHECK_THROWS_AS(acf(std::vector<double>(10, 1.0), 2), DegenerateInput);
  CHECK_THROWS_AS(acf(alt, 1000), InvalidArgument);
}

TEST_CASE("summary fields and JSON round trip") {
  ChainRun run;
  run.samples.resize(400, 2);
  const auto a = oracle::ar1(400, 0.3, 1);
  const auto b = oracle::ar1(400, 0.3, 2);
  for (int i = 0; i < 400; ++i) {
    run.samples(i, 0) = a[static_cast<std::size_t>(i)];
    run.samples(i, 1) = 10.0 + b[static_cast<std::size_t>(i)];
  }
  run.accepted = 123;
  run.total = 400;
  run.wall_clock_s = 30.0;
  run.n_used.assign(400, 10);
  for (int j = 1; j <= 25; ++j) run.epochs.push_back({j, 16 * j, 1.0, 10 + j, 10 + j + 1});
  run.final_state.n_particles = 11;
  const ChainSummary s = summarize(run, 100);
  CHECK(s.accept_rate == 123.0 / 400.0);
  CHECK(s.retained == 300);
  CHECK(s.post_mean_norm == doctest::Approx(s.post_mean.norm()));
  CHECK(s.post_var_norm == doctest::Approx(s.post_var.norm()));
  CHECK(s.if_sum == doctest::Approx(s.if_per_coord.sum()));
  CHECK(s.n_final == 36);
  CHECK(s.n_median_last20 == 26.5);
  CHECK(s.epochs == 25);
  CHECK(s.adapt_events == 25);
  CHECK(s.esm == doctest::Approx(300.0 / (s.if_sum * 0.5)));
  const ChainSummary back = summary_from_json(nlohmann::json::parse(to_json(s).dump()));
  CHECK(to_json(back) == to_json(s));
}

TEST_CASE("format_hms") {
  CHECK(format_hms(3742.0) == "1h02m22s");
  CHECK(format_hms(0.4) == "0h00m00s");
}
