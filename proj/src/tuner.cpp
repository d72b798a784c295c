#include "pmadapt/tuner.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <thread>

#include "pmadapt/error.hpp"
#include "pmadapt/samplers.hpp"

namespace pmadapt {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<double> vec_to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

void TuneConfig::validate() const {
  if (n_init < 1) throw ConfigError("tune.n_init must be >= 1");
  if (prelim_iters < 2) throw ConfigError("tune.prelim_iters must be >= 2");
  if (!(prelim_burn_in_frac >= 0.0 && prelim_burn_in_frac < 1.0)) {
    throw ConfigError("preliminary burn-in fraction must be in [0, 1)");
  }
  if (!(final_burn_in_frac >= 0.0 && final_burn_in_frac < 1.0)) {
    throw ConfigError("burn-in fraction must be in [0, 1)");
  }
  if (mc_iters < 2) throw ConfigError("tune.mc_iters must be >= 2");
  if (search_lo < 1 || search_hi <= search_lo) {
    throw ConfigError("tune.search_lo must be >= 1 and below tune.search_hi");
  }
  if (precision < 1) throw ConfigError("tune.precision must be >= 1");
  if (!(sigma_opt > 0.0)) throw ConfigError("sigma_opt must be positive");
  if (!(l > 0.0)) throw ConfigError("proposal scale l must be positive");
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
}

double sigma_n_mc(const Model& model, const ParamVector& theta_hat, int n, int m,
                  const RngStream& rng, int jobs) {
  if (m < 2) throw InvalidArgument("sigma_n_mc needs m >= 2");
  if (n < 1) throw InvalidArgument("particle count must be >= 1");
  check_param(model, theta_hat);
  std::vector<double> draws(static_cast<std::size_t>(m));
  auto work = [&](int first, int step) {
    for (int r = first; r < m; r += step) {
      RngStream rep = rng.substream(static_cast<std::uint64_t>(r));
      draws[static_cast<std::size_t>(r)] = model.estimate_loglik(theta_hat, nullptr, n, rep).log_lik;
    }
  };
  const int workers = std::max(1, std::min(jobs, m));
  if (workers == 1) {
    work(0, 1);
  } else {
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          work(w, workers);
        } catch (...) {
          errors[static_cast<std::size_t>(w)] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  double mean = 0.0;
  for (double v : draws) {
    if (!std::isfinite(v)) throw EstimatorError("zero likelihood estimate while estimating sigma_N");
    mean += v;
  }
  mean /= m;
  double ss = 0.0;
  for (double v : draws) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / (m - 1));
}

SearchResult dichotomic_search(const std::function<double(int)>& sigma_of, int lo, int hi,
                               int precision, double sigma_opt) {
  if (lo < 1 || hi <= lo) throw InvalidArgument("search interval must satisfy 1 <= lo < hi");
  if (precision < 1) throw InvalidArgument("search precision must be >= 1");
  SearchResult res;
  const double s_lo = sigma_of(lo);
  const double s_hi = sigma_of(hi);
  res.trace.push_back({lo, s_lo, lo, hi});
  res.trace.push_back({hi, s_hi, lo, hi});
  if (!(s_lo > sigma_opt && sigma_opt > s_hi)) {
    throw InvalidArgument("search interval [" + std::to_string(lo) + ", " + std::to_string(hi) +
                          "] does not bracket sigma_opt (sigma(lo) = " + std::to_string(s_lo) +
                          ", sigma(hi) = " + std::to_string(s_hi) +
                          "); widen the interval so that sigma(lo) > sigma_opt > sigma(hi)");
  }
  while (hi - lo > precision) {
    const int mid = lo + (hi - lo + 1) / 2;
    const double s = sigma_of(mid);
    ++res.midpoint_evaluations;
    if (s > sigma_opt) {
      lo = mid;
    } else {
      hi = mid;
    }
    res.trace.push_back({mid, s, lo, hi});
  }
  double best = std::numeric_limits<double>::infinity();
  for (const auto& row : res.trace) {
    const double gap = std::abs(row.sigma_hat - sigma_opt);
    if (gap < best || (gap == best && row.tested_n < res.n_opt)) {
      best = gap;
      res.n_opt = row.tested_n;
      res.sigma_at_opt = row.sigma_hat;
    }
  }
  return res;
}

SearchResult dichotomic_search(const Model& model, const ParamVector& theta_hat,
                               const TuneConfig& config, const RngStream& rng) {
  std::map<int, double> cache;
  auto sigma_of = [&](int n) {
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    const double s = sigma_n_mc(model, theta_hat, n, config.mc_iters,
                                rng.substream(static_cast<std::uint64_t>(n)), config.jobs);
    cache.emplace(n, s);
    return s;
  };
  return dichotomic_search(sigma_of, config.search_lo, config.search_hi, config.precision,
                           config.sigma_opt);
}

void write_search_csv(const SearchResult& result, std::ostream& out) {
  out << "tested_n,sigma_hat,lo,hi\n";
  for (const auto& r : result.trace) {
    out << r.tested_n << ',' << format_double(r.sigma_hat) << ',' << r.lo << ',' << r.hi << '\n';
  }
  if (!out) throw IoError("failed to write search trace");
}

PipelineReport run_pipeline(const Model& model, const ParamVector& theta0, const TuneConfig& config,
                            std::int64_t final_iters, const RngStream& rng, TraceSink& step3_sink,
                            std::optional<int> force_n_opt) {
  config.validate();
  if (final_iters < 2) throw InvalidArgument("final run needs at least two iterations");
  if (config.sigma_p.rows() != static_cast<Eigen::Index>(model.dim())) {
    throw InvalidArgument("tune sigma_p dimension does not match the model");
  }
  PipelineReport rep;
  const auto t0 = std::chrono::steady_clock::now();

  NullTraceSink null_sink;
  const ChainRun step1 = run_pm(model, theta0, ProposalSpec::scaled(config.l, config.sigma_p),
                                config.n_init, config.prelim_iters, null_sink,
                                rng.substream(pipeline_key::kStep1));
  const auto burn1 = static_cast<std::int64_t>(config.prelim_burn_in_frac *
                                               static_cast<double>(config.prelim_iters));
  rep.step1 = summarize(step1, burn1);
  const Eigen::MatrixXd kept = step1.samples.bottomRows(step1.samples.rows() - burn1);
  rep.theta_hat = kept.colwise().mean().transpose();
  const Eigen::MatrixXd centred = kept.rowwise() - rep.theta_hat.transpose();
  rep.sigma_hat_cov = centred.transpose() * centred / static_cast<double>(kept.rows() - 1);
  rep.step1_s = seconds_since(t0);

  const auto t1 = std::chrono::steady_clock::now();
  if (force_n_opt) {
    rep.n_opt = *force_n_opt;
  } else {
    rep.search = dichotomic_search(model, rep.theta_hat, config, rng.substream(pipeline_key::kSearch));
    rep.n_opt = rep.search.n_opt;
  }
  rep.step2_s = seconds_since(t1);

  const auto t2 = std::chrono::steady_clock::now();
  const ChainRun step3 = run_pm(model, rep.theta_hat, ProposalSpec::scaled(config.l, rep.sigma_hat_cov),
                                rep.n_opt, final_iters, step3_sink, rng.substream(pipeline_key::kStep3));
  rep.step3 = summarize(step3, static_cast<std::int64_t>(config.final_burn_in_frac *
                                                         static_cast<double>(final_iters)));
  rep.step3_s = seconds_since(t2);
  rep.total_s = seconds_since(t0);
  return rep;
}

nlohmann::json to_json(const PipelineReport& r) {
  nlohmann::json j;
  j["theta_hat"] = vec_to_std(r.theta_hat);
  nlohmann::json cov = nlohmann::json::array();
  for (Eigen::Index i = 0; i < r.sigma_hat_cov.rows(); ++i) {
    cov.push_back(vec_to_std(r.sigma_hat_cov.row(i).transpose()));
  }
  j["sigma_hat_cov"] = cov;
  j["n_opt"] = r.n_opt;
  j["sigma_at_opt"] = r.search.sigma_at_opt;
  j["midpoint_evaluations"] = r.search.midpoint_evaluations;
  j["step1"] = to_json(r.step1);
  j["step3"] = to_json(r.step3);
  j["wall_clock_s"] = {{"step1", r.step1_s}, {"step2", r.step2_s}, {"step3", r.step3_s}, {"total", r.total_s}};
  return j;
}

}  // namespace pmadapt
