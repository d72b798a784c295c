#include "pmadapt/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "pmadapt/error.hpp"

namespace pmadapt {

namespace {

double mean_of(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double sample_var(std::span<const double> x) {
  const double m = mean_of(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return ss / static_cast<double>(x.size() - 1);
}

std::vector<double> column(const Eigen::MatrixXd& m, Eigen::Index c, std::int64_t from) {
  std::vector<double> out(static_cast<std::size_t>(m.rows() - from));
  for (Eigen::Index r = from; r < m.rows(); ++r) out[static_cast<std::size_t>(r - from)] = m(r, c);
  return out;
}

Eigen::VectorXd vec_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> vec_to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

Moments moments(const Eigen::MatrixXd& chain, std::int64_t burn_in) {
  if (burn_in < 0 || burn_in >= chain.rows()) throw InvalidArgument("burn-in must be in [0, length)");
  if (chain.rows() - burn_in < 2) throw DegenerateInput("moments need at least two retained samples");
  Moments m;
  m.mean.resize(chain.cols());
  m.var.resize(chain.cols());
  for (Eigen::Index c = 0; c < chain.cols(); ++c) {
    const auto col = column(chain, c, burn_in);
    m.mean[c] = mean_of(col);
    m.var[c] = sample_var(col);
  }
  return m;
}

double obm_variance(std::span<const double> series, std::optional<int> batch_size) {
  const auto n = static_cast<std::int64_t>(series.size());
  if (n < 2) throw DegenerateInput("OBM needs at least two values");
  const std::int64_t b =
      batch_size ? *batch_size : static_cast<std::int64_t>(std::floor(std::sqrt(static_cast<double>(n))));
  if (b < 1) throw InvalidArgument("batch size must be >= 1");
  if (n < 2 * b) throw InvalidArgument("series length must be at least twice the batch size");
  const double ybar = mean_of(series);
  // Window sums of the centred series, updated by sliding.
  double window = 0.0;
  for (std::int64_t i = 0; i < b; ++i) window += series[static_cast<std::size_t>(i)] - ybar;
  double ss = 0.0;
  const double inv_b = 1.0 / static_cast<double>(b);
  for (std::int64_t k = 0;; ++k) {
    const double dev = window * inv_b;
    ss += dev * dev;
    if (k + b >= n) break;
    window += series[static_cast<std::size_t>(k + b)] - series[static_cast<std::size_t>(k)];
  }
  const auto nd = static_cast<double>(n);
  const auto bd = static_cast<double>(b);
  return nd * bd / ((nd - bd) * (nd - bd + 1.0)) * ss;
}

double obm_if(std::span<const double> series, std::optional<int> batch_size) {
  if (series.size() < 2) throw DegenerateInput("IF needs at least two values");
  const double s2 = sample_var(series);
  if (!(s2 > 0.0)) throw DegenerateInput("IF undefined for a series with zero variance");
  return std::max(1.0, obm_variance(series, batch_size) / s2);
}

double mcse(std::span<const double> series, std::optional<int> batch_size) {
  return std::sqrt(obm_variance(series, batch_size) / static_cast<double>(series.size()));
}

double geweke_z(std::span<const double> series, double first_frac, double last_frac) {
  if (!(first_frac > 0.0 && first_frac < 1.0 && last_frac > 0.0 && last_frac < 1.0) ||
      first_frac + last_frac > 1.0) {
    throw InvalidArgument("Geweke fractions must lie in (0,1) and not overlap");
  }
  const std::size_t n = series.size();
  const auto na = static_cast<std::size_t>(std::floor(first_frac * static_cast<double>(n)));
  const auto nb = static_cast<std::size_t>(std::floor(last_frac * static_cast<double>(n)));
  if (na < 2 || nb < 2) throw DegenerateInput("Geweke segments need at least two values each");
  const auto a = series.subspan(0, na);
  const auto b = series.subspan(n - nb, nb);
  const double diff = mean_of(a) - mean_of(b);
  const double var = obm_variance(a) / static_cast<double>(na) + obm_variance(b) / static_cast<double>(nb);
  if (!(var > 0.0)) {
    if (diff == 0.0) return 0.0;
    throw DegenerateInput("Geweke z undefined: constant segments with different means");
  }
  return diff / std::sqrt(var);
}

double esm(std::int64_t sample_size, double if_estimate, double minutes) {
  return static_cast<double>(sample_size) / (if_estimate * minutes);
}

std::vector<double> acf(std::span<const double> series, int max_lag) {
  const auto n = series.size();
  if (max_lag < 0 || static_cast<std::size_t>(max_lag) >= n) {
    throw InvalidArgument("max_lag must be in [0, length)");
  }
  const double m = mean_of(series);
  double c0 = 0.0;
  for (double v : series) c0 += (v - m) * (v - m);
  if (!(c0 > 0.0)) throw DegenerateInput("autocorrelation undefined for a constant series");
  std::vector<double> out(static_cast<std::size_t>(max_lag) + 1);
  for (std::size_t k = 0; k < out.size(); ++k) {
    double ck = 0.0;
    for (std::size_t i = 0; i + k < n; ++i) ck += (series[i] - m) * (series[i + k] - m);
    out[k] = ck / c0;
  }
  return out;
}

ChainSummary summarize(const ChainRun& run, std::int64_t burn_in) {
  ChainSummary s;
  s.dim = static_cast<std::size_t>(run.samples.cols());
  s.iterations = run.samples.rows();
  s.burn_in = burn_in;
  s.retained = s.iterations - burn_in;
  const Moments m = moments(run.samples, burn_in);
  s.post_mean = m.mean;
  s.post_var = m.var;
  s.post_mean_norm = m.mean.norm();
  s.post_var_norm = m.var.norm();
  s.accept_rate = run.accept_rate();
  const auto d = static_cast<Eigen::Index>(s.dim);
  s.if_per_coord.resize(d);
  s.geweke_z.resize(d);
  s.mcse.resize(d);
  for (Eigen::Index c = 0; c < d; ++c) {
    const auto col = column(run.samples, c, burn_in);
    s.mcse[c] = mcse(col);
    if (m.var[c] > 0.0) {
      s.if_per_coord[c] = obm_if(col);
      s.geweke_z[c] = geweke_z(col);
    } else {
      s.if_per_coord[c] = 1.0;
      s.geweke_z[c] = 0.0;
    }
  }
  s.if_sum = s.if_per_coord.sum();
  s.wall_clock_s = run.wall_clock_s;
  s.esm = run.wall_clock_s > 0.0 ? esm(s.retained, s.if_sum, run.wall_clock_s / 60.0) : 0.0;

  s.n_final = run.final_state.n_particles;
  if (!run.n_used.empty()) {
    double total = 0.0;
    for (int n : run.n_used) total += n;
    s.n_mean = total / static_cast<double>(run.n_used.size());
    s.n_final = run.epochs.empty() ? run.n_used.back() : run.epochs.back().n_after;
  }
  s.epochs = static_cast<std::int64_t>(run.epochs.size());
  for (const auto& e : run.epochs) s.adapt_events += e.n_after != e.n_before ? 1 : 0;
  std::vector<double> last;
  const std::size_t take = std::min<std::size_t>(20, run.epochs.size());
  for (std::size_t i = run.epochs.size() - take; i < run.epochs.size(); ++i) {
    last.push_back(run.epochs[i].n_after);
  }
  if (last.empty()) {
    s.n_median_last20 = s.n_final;
  } else {
    std::vector<double> sorted = last;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t h = sorted.size() / 2;
    s.n_median_last20 = sorted.size() % 2 ? sorted[h] : 0.5 * (sorted[h - 1] + sorted[h]);
    s.n_sd_last20 = last.size() > 1 ? std::sqrt(sample_var(last)) : 0.0;
  }
  return s;
}

nlohmann::json to_json(const ChainSummary& s) {
  nlohmann::json j;
  j["dim"] = s.dim;
  j["iterations"] = s.iterations;
  j["burn_in"] = s.burn_in;
  j["retained"] = s.retained;
  j["post_mean"] = vec_to_std(s.post_mean);
  j["post_var"] = vec_to_std(s.post_var);
  j["mcse"] = vec_to_std(s.mcse);
  j["post_mean_norm"] = s.post_mean_norm;
  j["post_var_norm"] = s.post_var_norm;
  j["accept_rate"] = s.accept_rate;
  j["if_per_coord"] = vec_to_std(s.if_per_coord);
  j["if_sum"] = s.if_sum;
  j["geweke_z"] = vec_to_std(s.geweke_z);
  j["wall_clock_s"] = s.wall_clock_s;
  j["esm"] = s.esm;
  j["n_final"] = s.n_final;
  j["n_mean"] = s.n_mean;
  j["n_median_last20"] = s.n_median_last20;
  j["n_sd_last20"] = s.n_sd_last20;
  j["epochs"] = s.epochs;
  j["adapt_events"] = s.adapt_events;
  return j;
}

ChainSummary summary_from_json(const nlohmann::json& j) {
  ChainSummary s;
  s.dim = j.at("dim").get<std::size_t>();
  s.iterations = j.at("iterations").get<std::int64_t>();
  s.burn_in = j.at("burn_in").get<std::int64_t>();
  s.retained = j.at("retained").get<std::int64_t>();
  s.post_mean = vec_from_json(j.at("post_mean"));
  s.post_var = vec_from_json(j.at("post_var"));
  s.mcse = vec_from_json(j.at("mcse"));
  s.post_mean_norm = j.at("post_mean_norm").get<double>();
  s.post_var_norm = j.at("post_var_norm").get<double>();
  s.accept_rate = j.at("accept_rate").get<double>();
  s.if_per_coord = vec_from_json(j.at("if_per_coord"));
  s.if_sum = j.at("if_sum").get<double>();
  s.geweke_z = vec_from_json(j.at("geweke_z"));
  s.wall_clock_s = j.at("wall_clock_s").get<double>();
  s.esm = j.at("esm").get<double>();
  s.n_final = j.at("n_final").get<int>();
  s.n_mean = j.at("n_mean").get<double>();
  s.n_median_last20 = j.at("n_median_last20").get<double>();
  s.n_sd_last20 = j.at("n_sd_last20").get<double>();
  s.epochs = j.at("epochs").get<std::int64_t>();
  s.adapt_events = j.at("adapt_events").get<std::int64_t>();
  return s;
}

std::string format_hms(double seconds) {
  const auto total = static_cast<long long>(std::llround(std::max(0.0, seconds)));
  char buf[64];
  std::snprintf(buf, sizeof buf, "%lldh%02lldm%02llds", total / 3600, (total / 60) % 60, total % 60);
  return buf;
}

}  // namespace pmadapt
