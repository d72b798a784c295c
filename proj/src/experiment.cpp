#include "pmadapt/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "pmadapt/error.hpp"
#include "pmadapt/model_glmm.hpp"
#include "pmadapt/model_synthetic.hpp"
#include "pmadapt/samplers.hpp"
#include "pmadapt/trace.hpp"

namespace pmadapt {

namespace {

namespace fs = std::filesystem;


const std::vector<std::string> kSyntheticGenKeys = {"model.t", "model.theta_bar"};
const std::vector<std::string> kGlmmGenKeys = {"model.subjects", "model.per_subject",
                                               "model.beta_true", "model.tau_true"};

int checked_int(const Config& c, const std::string& key, std::int64_t min) {
  const std::int64_t v = c.get_int(key);
  if (v < min || v > std::numeric_limits<int>::max()) {
    throw ConfigError(key + " must be >= " + std::to_string(min));
  }
  return static_cast<int>(v);
}

std::uint64_t data_seed(const Config& c) {
  return c.get("model.data_seed").empty() ? c.get_u64("seed") : c.get_u64("model.data_seed");
}

Eigen::VectorXd beta_true(const Config& c) {
  const auto b = c.get_list("model.beta_true");
  if (b.size() != glmm::kCovariates) throw ConfigError("model.beta_true needs 8 values");
  return Eigen::Map<const Eigen::VectorXd>(b.data(), glmm::kCovariates);
}

glmm::GlmmData generate_glmm(const Config& c) {
  RngStream rng(data_seed(c), synthetic::kDataStream);
  const double tau = c.get_double("model.tau_true");
  if (!(tau > 0.0)) throw ConfigError("model.tau_true must be positive");
  return glmm::generate(checked_int(c, "model.subjects", 1), checked_int(c, "model.per_subject", 1),
                        beta_true(c), tau, rng);
}

synthetic::SyntheticData generate_synthetic(const Config& c) {
  return synthetic::generate_data(checked_int(c, "model.t", 1), c.get_double("model.theta_bar"),
                                  data_seed(c));
}

Eigen::MatrixXd sigma_p_from(const std::vector<double>& v, std::size_t d) {
  const auto n = static_cast<Eigen::Index>(d);
  if (v.size() == d * d) {
    return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        v.data(), n, n);
  }
  if (v.size() == d) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), n).asDiagonal();
  }
  throw ConfigError("proposal.sigma_p needs d*d (full) or d (diagonal) values");
}

void ensure_dir(const Config& c) {
  std::error_code ec;
  fs::create_directories(c.get("output_dir"), ec);
  if (ec) throw IoError("cannot create output directory " + c.get("output_dir") + ": " + ec.message());
}

void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path);
}

/// Runs fn(0..count-1) on up to `jobs` threads; rethrows the first failure.
template <class Fn>
void parallel_for(int count, int jobs, Fn fn) {
  const int workers = std::max(1, std::min(jobs, count));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

void log_line(const CommandOptions& opts, std::mutex& mu, const std::string& line) {
  if (!opts.log) return;
  std::lock_guard lock(mu);
  *opts.log << line << '\n';
  opts.log->flush();
}

std::string run_line(const std::string& what, int r, int runs, const ChainSummary& s) {
  std::ostringstream os;
  os << what << " run " << (r + 1) << "/" << runs << ": accept " << format_double(s.accept_rate)
     << ", final N " << s.n_final << ", IF " << format_double(s.if_sum) << ", time "
     << format_hms(s.wall_clock_s);
  return os.str();
}

nlohmann::json stats_of(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  return {{"mean", mean}, {"sd", sd}};
}

nlohmann::json order_stats(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  const double median = v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
  return {{"median", median}, {"min", v.front()}, {"max", v.back()}};
}

nlohmann::json agreement(const std::string& a, const std::vector<ChainSummary>& ra, const std::string& b,
                         const std::vector<ChainSummary>& rb) {
  auto mean_se = [](const std::vector<ChainSummary>& rs) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(rs.front().post_mean.size());
    Eigen::VectorXd var = Eigen::VectorXd::Zero(mean.size());
    for (const auto& s : rs) {
      mean += s.post_mean;
      var += s.mcse.cwiseProduct(s.mcse);
    }
    const auto n = static_cast<double>(rs.size());
    return std::pair{Eigen::VectorXd(mean / n), Eigen::VectorXd(var.cwiseSqrt() / n)};
  };
  const auto [ma, sa] = mean_se(ra);
  const auto [mb, sb] = mean_se(rb);
  std::vector<double> z(static_cast<std::size_t>(ma.size()));
  bool agree = true;
  for (Eigen::Index k = 0; k < ma.size(); ++k) {
    const double se = std::sqrt(sa[k] * sa[k] + sb[k] * sb[k]);
    z[static_cast<std::size_t>(k)] = (ma[k] - mb[k]) / se;
    agree = agree && std::abs(ma[k] - mb[k]) <= 3.0 * se;
  }
  return {{"methods", {a, b}}, {"z", z}, {"agree_within_3se", agree}};
}

}  // namespace

std::optional<double> default_sigma_opt(std::size_t dim) {
  if (dim == 1) return 1.16;
  if (dim == 9) return 1.44;
  return std::nullopt;
}

RngStream run_stream(std::uint64_t seed, int run_index) {
  return RngStream(seed, seed ^ static_cast<std::uint64_t>(run_index));
}

Experiment build_experiment(const Config& c) {
  Experiment e;
  e.model_name = c.get("model");
  e.seed = c.get_u64("seed");
  const std::string path = c.get("model.data_path");
  if (e.model_name == "synthetic") {
    auto data = path.empty() ? generate_synthetic(c) : synthetic::read_csv_file(path);
    synthetic::SyntheticConfig sc;
    sc.sigma0 = c.get_double("model.sigma0");
    const double t = static_cast<double>(data.size());
    e.model = std::make_shared<synthetic::SyntheticModel>(std::move(data), sc);
    e.theta0 = ParamVector::Zero(1);
    e.sigma_p = Eigen::MatrixXd::Constant(1, 1, 2.0 / t);
    e.l = 2.0;
    e.burn_in_frac = 0.2;
  } else if (e.model_name == "glmm") {
    auto data = path.empty() ? generate_glmm(c) : glmm::ingest_csv(path);
    e.model = std::make_shared<glmm::GlmmModel>(std::move(data));
    if (path.empty()) {
      e.theta0.resize(glmm::kDim);
      e.theta0 << beta_true(c), c.get_double("model.tau_true");
    } else {
      e.theta0 = glmm::default_theta0();
    }
    e.sigma_p = glmm::default_sigma_p();
    e.l = 2.2;
    e.burn_in_frac = 0.4;
  } else {
    throw ConfigError("model must be synthetic or glmm, got \"" + e.model_name + "\"");
  }
  const std::size_t d = e.model->dim();

  if (const auto t0 = c.get_list("proposal.theta0"); !t0.empty()) {
    if (t0.size() != d) throw ConfigError("proposal.theta0 must have " + std::to_string(d) + " values");
    e.theta0 = Eigen::Map<const Eigen::VectorXd>(t0.data(), static_cast<Eigen::Index>(d));
  }
  if (const auto sp = c.get_list("proposal.sigma_p"); !sp.empty()) e.sigma_p = sigma_p_from(sp, d);
  if (const auto l = c.get_optional_double("proposal.l")) e.l = *l;
  if (const auto b = c.get_optional_double("burn_in_frac")) e.burn_in_frac = *b;
  if (!(e.burn_in_frac >= 0.0 && e.burn_in_frac < 1.0)) throw ConfigError("burn_in_frac must be in [0, 1)");

  e.iterations = c.get_int("iterations");
  if (e.iterations < 2) throw ConfigError("iterations must be >= 2");
  e.runs = checked_int(c, "runs", 1);
  e.jobs = checked_int(c, "jobs", 1);
  e.n_particles = checked_int(c, "n_particles", 1);

  std::optional<double> sigma_opt = c.get_optional_double("adapt.sigma_opt");
  if (!sigma_opt) sigma_opt = default_sigma_opt(d);
  if (!sigma_opt) {
    throw ConfigError("no tabulated sigma_opt for d = " + std::to_string(d) + "; set adapt.sigma_opt");
  }
  e.adapt.n_init = checked_int(c, "adapt.n_init", 1);
  e.adapt.epoch_size = checked_int(c, "adapt.epoch_size", 2);
  e.adapt.step_size = checked_int(c, "adapt.step_size", 1);
  e.adapt.sigma_opt = *sigma_opt;
  e.adapt.sigma_tol = c.get_double("adapt.sigma_tol");
  e.adapt.prob.scale = c.get_double("adapt.prob_scale");
  e.adapt.prob.exponent = c.get_double("adapt.prob_exponent");
  e.adapt.validate();

  e.tune.n_init = checked_int(c, "tune.n_init", 1);
  e.tune.prelim_iters = c.get_int("tune.prelim_iters");
  e.tune.prelim_burn_in_frac = e.burn_in_frac;
  e.tune.mc_iters = checked_int(c, "tune.mc_iters", 2);
  e.tune.search_lo = checked_int(c, "tune.search_lo", 1);
  e.tune.search_hi = checked_int(c, "tune.search_hi", 1);
  e.tune.precision = checked_int(c, "tune.precision", 1);
  e.tune.sigma_opt = *sigma_opt;
  e.tune.l = e.l;
  e.tune.sigma_p = e.sigma_p;
  e.tune.final_burn_in_frac = e.burn_in_frac;
  e.tune.jobs = e.jobs;
  e.tune.validate();
  e.final_iters = c.get("tune.final_iters").empty() ? e.iterations : c.get_int("tune.final_iters");
  if (e.final_iters < 2) throw ConfigError("tune.final_iters must be >= 2");

  check_param(*e.model, e.theta0);
  ProposalSpec::scaled(e.l, e.sigma_p);  // validates Sigma_p
  return e;
}

std::string output_path(const Config& config, const std::string& stem, const std::string& suffix) {
  return (fs::path(config.get("output_dir")) / (stem + "_" + config.hash() + suffix)).string();
}

nlohmann::json aggregate(const std::vector<ChainSummary>& runs) {
  if (runs.empty()) throw InvalidArgument("aggregate needs at least one run");
  std::vector<nlohmann::json> js;
  for (const auto& s : runs) js.push_back(to_json(s));
  nlohmann::json out;
  out["runs"] = runs.size();
  nlohmann::json stats;
  for (const auto& [key, first] : js.front().items()) {
    if (first.is_array()) {
      nlohmann::json means = nlohmann::json::array();
      nlohmann::json sds = nlohmann::json::array();
      for (std::size_t k = 0; k < first.size(); ++k) {
        std::vector<double> v;
        for (const auto& j : js) v.push_back(j.at(key).at(k).get<double>());
        const auto st = stats_of(v);
        means.push_back(st["mean"]);
        sds.push_back(st["sd"]);
      }
      stats[key] = {{"mean", means}, {"sd", sds}};
    } else {
      std::vector<double> v;
      for (const auto& j : js) v.push_back(j.at(key).get<double>());
      stats[key] = stats_of(v);
    }
  }
  out["stats"] = stats;
  std::vector<double> n_final;
  std::vector<double> n_last;
  for (const auto& s : runs) {
    n_final.push_back(s.n_final);
    n_last.push_back(s.n_median_last20);
  }
  out["n_final"] = order_stats(n_final);
  out["n_median_last20"] = order_stats(n_last);
  return out;
}

int cmd_run(const Config& config, const CommandOptions& opts) {
  const Experiment e = build_experiment(config);
  const std::string mode = config.get("mode");
  if (mode != "mh" && mode != "pm" && mode != "apm") {
    throw ConfigError("run mode must be mh, pm or apm, got \"" + mode + "\"");
  }
  if (mode == "mh" && !e.model->exact_loglik(e.theta0)) {
    throw ConfigError("mode mh needs an exact likelihood, which the " + e.model_name + " model lacks");
  }
  ensure_dir(config);
  const ProposalSpec prop = ProposalSpec::scaled(e.l, e.sigma_p);
  std::vector<ChainSummary> summaries(static_cast<std::size_t>(e.runs));
  std::mutex log_mu;
  parallel_for(e.runs, e.jobs, [&](int r) {
    const std::string stem = mode + "_run" + std::to_string(r);
    CsvTraceSink sink(output_path(config, stem, ".trace.csv"));
    const RngStream rng = run_stream(e.seed, r);
    ChainRun run;
    if (mode == "mh") {
      run = run_mh(*e.model, e.theta0, prop, e.iterations, sink, rng);
    } else if (mode == "pm") {
      run = run_pm(*e.model, e.theta0, prop, e.n_particles, e.iterations, sink, rng);
    } else {
      run = run_apm(*e.model, e.theta0, prop, e.adapt, e.iterations, sink, rng);
    }
    const ChainSummary s =
        summarize(run, static_cast<std::int64_t>(e.burn_in_frac * static_cast<double>(e.iterations)));
    write_json(output_path(config, stem, ".summary.json"), to_json(s));
    summaries[static_cast<std::size_t>(r)] = s;
    log_line(opts, log_mu, run_line(mode, r, e.runs, s));
  });
  nlohmann::json agg = aggregate(summaries);
  agg["mode"] = mode;
  agg["model"] = e.model_name;
  agg["config_hash"] = config.hash();
  write_json(output_path(config, mode + "_aggregate", ".json"), agg);
  return 0;
}

int cmd_tune(const Config& config, const CommandOptions& opts) {
  Experiment e = build_experiment(config);
  ensure_dir(config);
  if (e.runs > 1 && e.jobs > 1) e.tune.jobs = 1;
  std::vector<ChainSummary> summaries(static_cast<std::size_t>(e.runs));
  std::vector<double> n_opt(static_cast<std::size_t>(e.runs));
  std::vector<double> total_s(static_cast<std::size_t>(e.runs));
  std::mutex log_mu;
  parallel_for(e.runs, e.jobs, [&](int r) {
    const std::string stem = "tune_run" + std::to_string(r);
    CsvTraceSink sink(output_path(config, stem, ".trace.csv"));
    const PipelineReport rep =
        run_pipeline(*e.model, e.theta0, e.tune, e.final_iters, run_stream(e.seed, r), sink);
    std::ofstream search(output_path(config, stem, ".search.csv"), std::ios::binary | std::ios::trunc);
    if (!search) throw IoError("cannot open search trace for writing");
    write_search_csv(rep.search, search);
    write_json(output_path(config, stem, ".report.json"), to_json(rep));
    summaries[static_cast<std::size_t>(r)] = rep.step3;
    n_opt[static_cast<std::size_t>(r)] = rep.n_opt;
    total_s[static_cast<std::size_t>(r)] = rep.total_s;
    log_line(opts, log_mu,
             "tune run " + std::to_string(r + 1) + "/" + std::to_string(e.runs) + ": N_opt " +
                 std::to_string(rep.n_opt) + " (" + std::to_string(rep.search.midpoint_evaluations) +
                 " midpoints), step 3 accept " + format_double(rep.step3.accept_rate) +
                 ", total time " + format_hms(rep.total_s));
  });
  nlohmann::json agg = aggregate(summaries);
  agg["mode"] = "tune";
  agg["model"] = e.model_name;
  agg["config_hash"] = config.hash();
  agg["n_opt"] = order_stats(n_opt);
  agg["total_wall_clock_s"] = stats_of(total_s);
  write_json(output_path(config, "tune_aggregate", ".json"), agg);
  return 0;
}

int cmd_gen_data(const Config& config, const CommandOptions& opts) {
  const std::string model = config.get("model");
  if (!config.get("model.data_path").empty()) {
    throw ConfigError("gen-data generates a dataset; unset model.data_path");
  }
  const std::vector<std::string>* keys = nullptr;
  if (model == "synthetic") {
    keys = &kSyntheticGenKeys;
  } else if (model == "glmm") {
    keys = &kGlmmGenKeys;
  } else {
    throw ConfigError("model must be synthetic or glmm, got \"" + model + "\"");
  }
  ensure_dir(config);
  const std::string data_path = output_path(config, "data_" + model, ".csv");
  const std::string manifest_path = output_path(config, "data_" + model, ".manifest.json");
  if (!opts.force && (fs::exists(data_path) || fs::exists(manifest_path))) {
    throw IoError(data_path + " already exists; pass --force to overwrite");
  }
  {
    std::ofstream out(data_path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + data_path);
    if (model == "synthetic") {
      synthetic::write_csv(generate_synthetic(config), out);
    } else {
      glmm::write_csv(generate_glmm(config), out);
    }
    if (!out) throw IoError("failed writing " + data_path);
  }
  nlohmann::json manifest;
  manifest["model"] = model;
  manifest["seed"] = data_seed(config);
  manifest["file"] = fs::path(data_path).filename().string();
  manifest["config_hash"] = config.hash();
  nlohmann::json gen;
  for (const auto& k : *keys) gen[k] = config.get(k);
  manifest["generator"] = gen;
  write_json(manifest_path, manifest);
  if (opts.log) *opts.log << "wrote " << data_path << '\n';
  return 0;
}

Config manifest_config(const nlohmann::json& manifest) {
  Config c;
  c.set("model", manifest.at("model").get<std::string>());
  c.set("model.data_seed", std::to_string(manifest.at("seed").get<std::uint64_t>()));
  for (const auto& [k, v] : manifest.at("generator").items()) c.set(k, v.get<std::string>());
  return c;
}

int cmd_compare(const Config& config, const CommandOptions& opts) {
  Experiment e = build_experiment(config);
  ensure_dir(config);
  if (e.runs > 1 && e.jobs > 1) e.tune.jobs = 1;
  const bool with_mh = e.model->exact_loglik(e.theta0).has_value();
  const ProposalSpec prop = ProposalSpec::scaled(e.l, e.sigma_p);
  const auto burn = [&](std::int64_t iters) {
    return static_cast<std::int64_t>(e.burn_in_frac * static_cast<double>(iters));
  };
  const auto runs = static_cast<std::size_t>(e.runs);
  std::vector<ChainSummary> mh(with_mh ? runs : 0);
  std::vector<ChainSummary> tuned(runs);
  std::vector<ChainSummary> apm(runs);
  std::mutex log_mu;
  parallel_for(e.runs, e.jobs, [&](int r) {
    const RngStream rng = run_stream(e.seed, r);
    const auto ur = static_cast<std::size_t>(r);
    if (with_mh) {
      const std::string stem = "compare_mh_run" + std::to_string(r);
      CsvTraceSink sink(output_path(config, stem, ".trace.csv"));
      mh[ur] = summarize(run_mh(*e.model, e.theta0, prop, e.iterations, sink, rng.substream(compare_key::kMh)),
                         burn(e.iterations));
      write_json(output_path(config, stem, ".summary.json"), to_json(mh[ur]));
      log_line(opts, log_mu, run_line("compare mh", r, e.runs, mh[ur]));
    }
    {
      const std::string stem = "compare_pm_run" + std::to_string(r);
      CsvTraceSink sink(output_path(config, stem, ".trace.csv"));
      const PipelineReport rep =
          run_pipeline(*e.model, e.theta0, e.tune, e.final_iters, rng.substream(compare_key::kTune), sink);
      tuned[ur] = rep.step3;
      write_json(output_path(config, stem, ".summary.json"), to_json(tuned[ur]));
      write_json(output_path(config, stem, ".report.json"), to_json(rep));
      log_line(opts, log_mu, run_line("compare pm", r, e.runs, tuned[ur]));
    }
    {
      const std::string stem = "compare_apm_run" + std::to_string(r);
      CsvTraceSink sink(output_path(config, stem, ".trace.csv"));
      apm[ur] = summarize(
          run_apm(*e.model, e.theta0, prop, e.adapt, e.iterations, sink, rng.substream(compare_key::kApm)),
          burn(e.iterations));
      write_json(output_path(config, stem, ".summary.json"), to_json(apm[ur]));
      log_line(opts, log_mu, run_line("compare apm", r, e.runs, apm[ur]));
    }
  });
  nlohmann::json agg;
  agg["mode"] = "compare";
  agg["model"] = e.model_name;
  agg["config_hash"] = config.hash();
  agg["pm"] = aggregate(tuned);
  agg["apm"] = aggregate(apm);
  nlohmann::json checks = nlohmann::json::array();
  checks.push_back(agreement("pm", tuned, "apm", apm));
  if (with_mh) {
    agg["mh"] = aggregate(mh);
    checks.push_back(agreement("mh", mh, "pm", tuned));
    checks.push_back(agreement("mh", mh, "apm", apm));
  }
  agg["agreement"] = checks;
  write_json(output_path(config, "compare_aggregate", ".json"), agg);
  if (opts.log) {
    for (const auto& c : checks) {
      *opts.log << "agreement " << c["methods"][0].get<std::string>() << " vs "
                << c["methods"][1].get<std::string>() << ": "
                << (c["agree_within_3se"].get<bool>() ? "within" : "outside") << " 3 SE\n";
    }
  }
  return 0;
}

}  // namespace pmadapt
