#include "pmadapt/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "pmadapt/error.hpp"

namespace pmadapt {

namespace {

// Empty defaults are resolved from the model when the experiment is built.
const std::map<std::string, std::string>& schema() {
  static const std::map<std::string, std::string> s = {
      {"model", "synthetic"},
      {"mode", "apm"},
      {"iterations", "200000"},
      {"burn_in_frac", ""},
      {"seed", "1"},
      {"runs", "1"},
      {"jobs", "1"},
      {"output_dir", "out"},
      {"n_particles", "100"},
      {"model.data_path", ""},
      {"model.data_seed", ""},
      {"model.t", "200"},
      {"model.theta_bar", "0"},
      {"model.sigma0", "100000"},
      {"model.subjects", "30"},
      {"model.per_subject", "4"},
      {"model.beta_true", "-1,0.5,-0.5,0.5,-0.5,0.25,-0.25,0"},
      {"model.tau_true", "20"},
      {"proposal.l", ""},
      {"proposal.sigma_p", ""},
      {"proposal.theta0", ""},
      {"adapt.n_init", "100"},
      {"adapt.epoch_size", "100"},
      {"adapt.step_size", "1"},
      {"adapt.sigma_opt", ""},
      {"adapt.sigma_tol", "0.015"},
      {"adapt.prob_scale", "1"},
      {"adapt.prob_exponent", "0.5"},
      {"tune.n_init", "100"},
      {"tune.prelim_iters", "10000"},
      {"tune.mc_iters", "10000"},
      {"tune.search_lo", "100"},
      {"tune.search_hi", "1000"},
      {"tune.precision", "1"},
      {"tune.final_iters", ""},
  };
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* first = text.data();
  const char* last = first + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (text.empty() || ec != std::errc() || ptr != last) {
    throw ConfigError("invalid value for " + key + ": \"" + text + "\"");
  }
  return value;
}

}  // namespace

Config Config::parse(std::istream& in) {
  Config c;
  std::string line;
  std::string section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(lineno, "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(lineno, "expected key = value");
    std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ParseError(lineno, "empty key");
    if (!section.empty()) key = section + "." + key;
    try {
      c.set(key, trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ParseError(lineno, e.what());
    }
  }
  return c;
}

Config Config::parse_string(const std::string& text) {
  std::istringstream in(text);
  return parse(in);
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  return parse(in);
}

void Config::set(const std::string& key, const std::string& value) {
  if (schema().count(key) == 0) throw ConfigError("unknown config key \"" + key + "\"");
  values_[key] = value;
}

std::string Config::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it != values_.end()) return it->second;
  const auto d = schema().find(key);
  if (d == schema().end()) throw ConfigError("unknown config key \"" + key + "\"");
  return d->second;
}

std::int64_t Config::get_int(const std::string& key) const {
  return parse_number<std::int64_t>(key, get(key));
}

std::uint64_t Config::get_u64(const std::string& key) const {
  return parse_number<std::uint64_t>(key, get(key));
}

double Config::get_double(const std::string& key) const {
  return parse_number<double>(key, get(key));
}

std::optional<double> Config::get_optional_double(const std::string& key) const {
  if (get(key).empty()) return std::nullopt;
  return get_double(key);
}

std::vector<double> Config::get_list(const std::string& key) const {
  std::vector<double> out;
  const std::string text = get(key);
  if (text.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto comma = text.find(',', start);
    out.push_back(parse_number<double>(key, trim(text.substr(start, comma - start))));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string Config::serialize() const {
  std::string out;
  for (const auto& [key, def] : schema()) {
    out += key + " = " + get(key) + "\n";
  }
  return out;
}

std::string Config::hash() const {
  std::string text;
  for (const auto& [key, def] : schema()) {
    if (key == "output_dir" || key == "jobs") continue;
    text += key + " = " + get(key) + "\n";
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(text)));
  return buf;
}

const std::vector<std::string>& Config::keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> v;
    for (const auto& [key, def] : schema()) v.push_back(key);
    return v;
  }();
  return k;
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace pmadapt
