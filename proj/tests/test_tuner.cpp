#include <doctest.h>

#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "pmadapt/error.hpp"
#include "pmadapt/model_synthetic.hpp"
#include "pmadapt/samplers.hpp"
#include "pmadapt/tuner.hpp"

using namespace pmadapt;

namespace {

ParamVector vec1(double x) { return ParamVector::Constant(1, x); }

const synthetic::SyntheticModel& shared_model() {
  static const synthetic::SyntheticModel m(synthetic::generate_data(200, 0.0, 7ULL));
  return m;
}

int ceil_log2(double x) { return static_cast<int>(std::ceil(std::log2(x))); }

}  // namespace

TEST_CASE("sigma_n_mc on stub models") {
  const oracle::ConstantModel constant(1, -4.0);
  CHECK(sigma_n_mc(constant, vec1(0.0), 10, 50, RngStream(1, 1)) == 0.0);
  CHECK_THROWS_AS(sigma_n_mc(constant, vec1(0.0), 10, 1, RngStream(1, 1)), InvalidArgument);
  const oracle::ConstantModel zero(1, -std::numeric_limits<double>::infinity());
  CHECK_THROWS_AS(sigma_n_mc(zero, vec1(0.0), 10, 5, RngStream(1, 1)), EstimatorError);

  const oracle::LognormalNoiseModel noise(1, 10.0);
  const double s = sigma_n_mc(noise, vec1(0.0), 25, 20000, RngStream(2, 2));
  CHECK(std::abs(s - 2.0) < 3.0 * 2.0 / std::sqrt(2.0 * 20000));
}

TEST_CASE("sigma_n_mc does not depend on the thread count") {
  const auto& m = shared_model();
  const double one = sigma_n_mc(m, vec1(0.0), 20, 200, RngStream(3, 3), 1);
  const double three = sigma_n_mc(m, vec1(0.0), 20, 200, RngStream(3, 3), 3);
  CHECK(one == three);
}

TEST_CASE("synthetic sigma_N falls like 1/sqrt(N)") {
  const auto& m = shared_model();
  const double s100 = sigma_n_mc(m, vec1(0.0), 100, 10000, RngStream(4, 100));
  const double s400 = sigma_n_mc(m, vec1(0.0), 400, 10000, RngStream(4, 400));
  const double s1600 = sigma_n_mc(m, vec1(0.0), 1600, 10000, RngStream(4, 1600));
  MESSAGE("sigma(100) " << s100 << ", sigma(400) " << s400 << ", sigma(1600) " << s1600);
  CHECK(s400 / s100 > 0.4);
  CHECK(s400 / s100 < 0.6);
  CHECK(s100 > s400);
  CHECK(s400 > s1600);
}

TEST_CASE("search replays the reference progression") {
  const std::map<int, double> table = {{100, 1.652}, {1000, 0.521}, {550, 0.703}, {325, 0.926},
                                       {213, 1.120},  {157, 1.306}, {185, 1.200}, {199, 1.165},
                                       {206, 1.140},  {203, 1.162}, {205, 1.145}, {204, 1.143}};
  const SearchResult r = dichotomic_search([&](int n) { return table.at(n); }, 100, 1000, 1, 1.16);
  std::vector<int> mids;
  for (std::size_t i = 2; i < r.trace.size(); ++i) mids.push_back(r.trace[i].tested_n);
  CHECK(mids == std::vector<int>{550, 325, 213, 157, 185, 199, 206, 203, 205, 204});
  CHECK(r.trace.back().lo == 203);
  CHECK(r.trace.back().hi == 204);
  CHECK(r.n_opt == 203);
  CHECK(r.sigma_at_opt == 1.162);
  CHECK(r.midpoint_evaluations == 10);
}

TEST_CASE("adjacent bracket needs no midpoint") {
  const SearchResult r = dichotomic_search([](int n) { return n == 10 ? 1.2 : 1.0; }, 10, 11, 1, 1.16);
  CHECK(r.midpoint_evaluations == 0);
  CHECK(r.n_opt == 10);
}

TEST_CASE("noise-free c/sqrt(N) stub converges next to the crossing") {
  const double sigma_opt = 1.16;
  const double c = sigma_opt * std::sqrt(400.0);
  const SearchResult r =
      dichotomic_search([&](int n) { return c / std::sqrt(static_cast<double>(n)); }, 100, 1000, 1, sigma_opt);
  CHECK(r.n_opt >= 399);
  CHECK(r.n_opt <= 401);
}

TEST_CASE("bracketing failure asks for a wider interval") {
  try {
    dichotomic_search([](int) { return 0.5; }, 100, 1000, 1, 1.16);
    FAIL("expected an error");
  } catch (const InvalidArgument& e) {
    CHECK(std::string(e.what()).find("widen") != std::string::npos);
  }
  CHECK_THROWS_AS(dichotomic_search([](int) { return 1.0; }, 10, 10, 1, 1.16), InvalidArgument);
}

TEST_CASE("property: intervals shrink, terminate within precision, and respect the step bound") {
  std::mt19937_64 gen(31);
  for (int trial = 0; trial < 500; ++trial) {
    const int lo = 1 + static_cast<int>(gen() % 500);
    const int hi = lo + 1 + static_cast<int>(gen() % 5000);
    const int a1 = 1 + static_cast<int>(gen() % 20);
    const double crossing = lo + 0.5 + static_cast<double>(gen() % 1000) / 1000.0 * (hi - lo - 1);
    const double power = 0.2 + static_cast<double>(gen() % 100) / 50.0;
    auto sigma = [&](int n) { return std::pow(crossing / n, power); };
    const SearchResult r = dichotomic_search(sigma, lo, hi, a1, 1.0);
    int width = hi - lo;
    for (std::size_t i = 2; i < r.trace.size(); ++i) {
      const int w = r.trace[i].hi - r.trace[i].lo;
      REQUIRE(w < width);
      REQUIRE(w <= width / 2 + 1);
      width = w;
    }
    REQUIRE(width <= a1);
    const int bound = hi - lo > a1 ? ceil_log2(static_cast<double>(hi - lo) / a1) + 1 : 0;
    REQUIRE(r.midpoint_evaluations <= bound);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& row : r.trace) best = std::min(best, std::abs(row.sigma_hat - 1.0));
    REQUIRE(std::abs(r.sigma_at_opt - 1.0) == best);
  }
}

TEST_CASE("model search is deterministic and evaluates each N once") {
  const oracle::LognormalNoiseModel noise(1, 1.16 * std::sqrt(300.0));
  TuneConfig cfg;
  cfg.mc_iters = 2000;
  cfg.sigma_p = Eigen::MatrixXd::Identity(1, 1);
  const SearchResult a = dichotomic_search(noise, vec1(0.0), cfg, RngStream(5, 5));
  const SearchResult b = dichotomic_search(noise, vec1(0.0), cfg, RngStream(5, 5));
  REQUIRE(a.trace.size() == b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    CHECK(a.trace[i].tested_n == b.trace[i].tested_n);
    CHECK(a.trace[i].sigma_hat == b.trace[i].sigma_hat);
  }
  CHECK(std::abs(a.n_opt - 300) < 30);
  std::ostringstream csv;
  write_search_csv(a, csv);
  CHECK(csv.str().rfind("tested_n,sigma_hat,lo,hi\n100,", 0) == 0);
}

TEST_CASE("tune config validation") {
  TuneConfig c;
  c.search_hi = c.search_lo;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TuneConfig{};
  c.mc_iters = 1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("desk-scale synthetic pipeline") {
  const auto& m = shared_model();
  TuneConfig cfg;
  cfg.prelim_iters = 10000;
  cfg.mc_iters = 1000;
  cfg.sigma_p = Eigen::MatrixXd::Constant(1, 1, 2.0 / 200.0);
  NullTraceSink sink;
  const PipelineReport r = run_pipeline(m, vec1(0.0), cfg, 50000, RngStream(9, 9), sink);
  MESSAGE("N_opt " << r.n_opt << ", step 3 acceptance " << r.step3.accept_rate);
  CHECK(r.step3.accept_rate > 0.10);
  CHECK(r.step3.accept_rate < 0.45);
  CHECK(r.search.trace.back().hi - r.search.trace.back().lo <= 1);
  CHECK(r.total_s >= r.step1_s + r.step2_s + r.step3_s - 1e-6);
  const auto j = to_json(r);
  CHECK(j.at("n_opt") == r.n_opt);
  CHECK(j.at("wall_clock_s").contains("step2"));
}

TEST_CASE("forcing N_opt = N_1 makes step 3 a plain PM run") {
  const auto& m = shared_model();
  TuneConfig cfg;
  cfg.n_init = 50;
  cfg.prelim_iters = 2000;
  cfg.sigma_p = Eigen::MatrixXd::Constant(1, 1, 2.0 / 200.0);
  const RngStream rng(10, 10);
  MemoryTraceSink step3;
  const PipelineReport r = run_pipeline(m, vec1(0.0), cfg, 3000, rng, step3, cfg.n_init);
  MemoryTraceSink plain;
  run_pm(m, r.theta_hat, ProposalSpec::scaled(cfg.l, r.sigma_hat_cov), cfg.n_init, 3000, plain,
         rng.substream(pipeline_key::kStep3));
  REQUIRE(step3.records.size() == plain.records.size());
  for (std::size_t i = 0; i < plain.records.size(); ++i) {
    REQUIRE(step3.records[i].theta == plain.records[i].theta);
    REQUIRE(step3.records[i].log_lik_est == plain.records[i].log_lik_est);
  }
}
