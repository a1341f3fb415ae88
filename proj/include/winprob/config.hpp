#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "winprob/closed_form.hpp"
#include "winprob/common.hpp"
#include "winprob/simulate.hpp"

// Flat sectioned key-value configuration for simulation runs.
//
// Grammar (one parser, no nesting):
//   - blank lines and lines starting with '#' or ';' are ignored
//   - [section] opens a section; keys before any section are invalid
//   - key = value, both trimmed; values may contain spaces and commas
//   - list values are comma separated
// Section names: sim, dist1, dist2, covariate, stratum.<label>,
// stratum.<label>.dist1, stratum.<label>.dist2. Stratum labels are
// processed in lexicographic order.

namespace winprob {

// Unusable configuration or command line; the CLI maps this to exit code 1.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct ParsedConfig {
  std::map<std::string, std::map<std::string, std::string>> sections;
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && (s[a] == ' ' || s[a] == '\t' || s[a] == '\r')) ++a;
  while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t' || s[b - 1] == '\r')) --b;
  return s.substr(a, b - a);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  if (out.size() == 1 && out[0].empty()) out.clear();
  return out;
}

}  // namespace detail

inline ParsedConfig parse_config(const std::string& text) {
  ParsedConfig cfg;
  std::string section;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t stop = text.find('\n', start);
    if (stop == std::string::npos) stop = text.size();
    std::string line = detail::trim(text.substr(start, stop - start));
    start = stop + 1;
    ++line_no;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) throw ConfigError(where + "malformed section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw ConfigError(where + "empty section name");
      cfg.sections[section];  // a section may legitimately stay empty
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    if (section.empty()) throw ConfigError(where + "key outside any section");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + "empty key");
    auto& sec = cfg.sections[section];
    if (sec.count(key)) throw ConfigError(where + "duplicate key '" + key + "' in [" + section + "]");
    sec[key] = value;
  }
  return cfg;
}

enum class SimMode { OperatingCharacteristics, Convergence };

struct SimRun {
  SimMode mode = SimMode::OperatingCharacteristics;
  SimConfig config;
  std::optional<std::uint64_t> seed;  // resolved against the environment by the CLI
};

namespace detail {

inline double req_double(const std::map<std::string, std::string>& sec, const std::string& path,
                         const std::string& key) {
  auto it = sec.find(key);
  if (it == sec.end()) throw ConfigError(path + "." + key + ": required");
  auto v = parse_double_strict(it->second);
  if (!v) throw ConfigError(path + "." + key + ": invalid number '" + it->second + "'");
  return *v;
}

inline double opt_double(const std::map<std::string, std::string>& sec, const std::string& path,
                         const std::string& key, double fallback) {
  auto it = sec.find(key);
  if (it == sec.end()) return fallback;
  auto v = parse_double_strict(it->second);
  if (!v) throw ConfigError(path + "." + key + ": invalid number '" + it->second + "'");
  return *v;
}

inline std::uint64_t req_count(const std::map<std::string, std::string>& sec,
                               const std::string& path, const std::string& key) {
  auto it = sec.find(key);
  if (it == sec.end()) throw ConfigError(path + "." + key + ": required");
  std::uint64_t v = 0;
  const char* first = it->second.data();
  const char* last = first + it->second.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last)
    throw ConfigError(path + "." + key + ": invalid count '" + it->second + "'");
  return v;
}

inline void check_keys(const std::map<std::string, std::string>& sec, const std::string& path,
                       const std::set<std::string>& allowed) {
  for (const auto& [k, v] : sec)
    if (!allowed.count(k)) throw ConfigError(path + "." + k + ": unknown key");
}

inline DistSpec dist_from(const std::map<std::string, std::string>& sec, const std::string& path) {
  auto fam_it = sec.find("family");
  if (fam_it == sec.end()) throw ConfigError(path + ".family: required");
  const std::string& fam = fam_it->second;
  if (fam == "normal") {
    check_keys(sec, path, {"family", "mean", "sd"});
    Normal d{opt_double(sec, path, "mean", 0.0), opt_double(sec, path, "sd", 1.0)};
    if (!(d.sd > 0.0)) throw ConfigError(path + ".sd: must be positive");
    return d;
  }
  if (fam == "uniform") {
    check_keys(sec, path, {"family", "a", "delta"});
    UniformShift d{req_double(sec, path, "a"), opt_double(sec, path, "delta", 0.0)};
    if (!(d.a > 0.0)) throw ConfigError(path + ".a: must be positive");
    return d;
  }
  if (fam == "exponential") {
    check_keys(sec, path, {"family", "rate"});
    Exponential d{req_double(sec, path, "rate")};
    if (!(d.rate > 0.0)) throw ConfigError(path + ".rate: must be positive");
    return d;
  }
  if (fam == "bernoulli") {
    check_keys(sec, path, {"family", "p"});
    Bernoulli d{req_double(sec, path, "p")};
    if (!(d.p >= 0.0 && d.p <= 1.0)) throw ConfigError(path + ".p: must be in [0,1]");
    return d;
  }
  if (fam == "categorical") {
    check_keys(sec, path, {"family", "probs"});
    auto it = sec.find("probs");
    if (it == sec.end()) throw ConfigError(path + ".probs: required");
    OrdinalCategorical d;
    for (const auto& item : split_list(it->second)) {
      auto v = parse_double_strict(item);
      if (!v) throw ConfigError(path + ".probs: invalid number '" + item + "'");
      d.probs.push_back(*v);
    }
    try {
      validate(DistSpec{d});
    } catch (const DataError& e) {
      throw ConfigError(path + ".probs: " + e.what());
    }
    return d;
  }
  throw ConfigError(path + ".family: unknown family '" + fam + "'");
}

inline const std::set<std::string>& known_methods() {
  static const std::set<std::string> methods{
      "wp",       "adjusted",          "stratified",      "adjusted-stratified",
      "wilcoxon", "fligner-policello", "z0",              "rank-regression",
      "van-elteren", "rank-ancova"};
  return methods;
}

}  // namespace detail

inline SimRun sim_config_from(const ParsedConfig& parsed) {
  SimRun run;
  auto sim_it = parsed.sections.find("sim");
  if (sim_it == parsed.sections.end()) throw ConfigError("[sim]: required section");
  const auto& sim = sim_it->second;
  detail::check_keys(sim, "[sim]",
                     {"mode", "replicates", "alpha", "seed", "n1", "n2", "methods", "weights"});

  auto mode_it = sim.find("mode");
  if (mode_it == sim.end()) throw ConfigError("[sim].mode: required");
  if (mode_it->second == "oc") {
    run.mode = SimMode::OperatingCharacteristics;
  } else if (mode_it->second == "convergence") {
    run.mode = SimMode::Convergence;
  } else {
    throw ConfigError("[sim].mode: must be 'oc' or 'convergence'");
  }

  SimConfig& cfg = run.config;
  cfg.alpha = detail::opt_double(sim, "[sim]", "alpha", 0.05);
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw ConfigError("[sim].alpha: must be in (0,1)");
  if (sim.count("seed")) run.seed = detail::req_count(sim, "[sim]", "seed");
  if (run.mode == SimMode::OperatingCharacteristics) {
    cfg.replicates = detail::req_count(sim, "[sim]", "replicates");
    if (cfg.replicates < 1) throw ConfigError("[sim].replicates: must be at least 1");
  }
  if (sim.count("methods")) {
    cfg.methods.clear();
    for (const auto& m : detail::split_list(sim.at("methods"))) {
      if (!detail::known_methods().count(m))
        throw ConfigError("[sim].methods: unknown method '" + m + "'");
      cfg.methods.push_back(m);
    }
    if (cfg.methods.empty()) throw ConfigError("[sim].methods: empty list");
  }
  if (sim.count("weights")) {
    const std::string& w = sim.at("weights");
    if (w == "sample-size") {
      cfg.weights.scheme = WeightScheme::SampleSize;
    } else if (w == "van-elteren") {
      cfg.weights.scheme = WeightScheme::VanElteren;
    } else {
      throw ConfigError("[sim].weights: must be 'sample-size' or 'van-elteren'");
    }
  }

  // Stratum sections, lexicographic by label.
  std::set<std::string> labels;
  for (const auto& [name, sec] : parsed.sections) {
    if (name.rfind("stratum.", 0) != 0) continue;
    std::string rest = name.substr(8);
    for (const char* suffix : {".dist1", ".dist2"}) {
      const std::size_t pos = rest.rfind(suffix);
      if (pos != std::string::npos && pos == rest.size() - 6) rest = rest.substr(0, pos);
    }
    if (rest.empty()) throw ConfigError("[" + name + "]: empty stratum label");
    labels.insert(rest);
  }
  for (const auto& label : labels) {
    const std::string base = "stratum." + label;
    auto sec_it = parsed.sections.find(base);
    if (sec_it == parsed.sections.end()) throw ConfigError("[" + base + "]: required section");
    detail::check_keys(sec_it->second, "[" + base + "]", {"n1", "n2"});
    SimStratum st;
    st.label = label;
    st.n1 = detail::req_count(sec_it->second, "[" + base + "]", "n1");
    st.n2 = detail::req_count(sec_it->second, "[" + base + "]", "n2");
    for (const char* which : {"dist1", "dist2"}) {
      auto d_it = parsed.sections.find(base + "." + which);
      if (d_it == parsed.sections.end())
        throw ConfigError("[" + base + "." + which + "]: required section");
      DistSpec d = detail::dist_from(d_it->second, "[" + base + "." + which + "]");
      if (std::string(which) == "dist1") {
        st.dist1 = d;
      } else {
        st.dist2 = d;
      }
    }
    cfg.strata.push_back(std::move(st));
  }

  if (cfg.strata.empty()) {
    for (const char* which : {"dist1", "dist2"}) {
      auto d_it = parsed.sections.find(which);
      if (d_it == parsed.sections.end())
        throw ConfigError(std::string("[") + which + "]: required section");
      DistSpec d = detail::dist_from(d_it->second, std::string("[") + which + "]");
      if (std::string(which) == "dist1") {
        cfg.dist1 = d;
      } else {
        cfg.dist2 = d;
      }
    }
    cfg.n1 = detail::req_count(sim, "[sim]", "n1");
    cfg.n2 = detail::req_count(sim, "[sim]", "n2");
  } else {
    if (run.mode == SimMode::Convergence)
      throw ConfigError("[sim].mode: convergence mode is unstratified");
    if (sim.count("n1") || sim.count("n2"))
      throw ConfigError("[sim].n1: unexpected with stratum sections");
    if (parsed.sections.count("dist1") || parsed.sections.count("dist2"))
      throw ConfigError("[dist1]: unexpected with stratum sections");
  }

  if (auto cov_it = parsed.sections.find("covariate"); cov_it != parsed.sections.end()) {
    detail::check_keys(cov_it->second, "[covariate]", {"rho", "shift1", "shift2"});
    CovariateModel cm;
    cm.rho = detail::req_double(cov_it->second, "[covariate]", "rho");
    if (!(cm.rho > -1.0 && cm.rho < 1.0))
      throw ConfigError("[covariate].rho: must be in (-1,1)");
    cm.shift1 = detail::opt_double(cov_it->second, "[covariate]", "shift1", 0.0);
    cm.shift2 = detail::opt_double(cov_it->second, "[covariate]", "shift2", 0.0);
    run.config.covariate = cm;
  }

  for (const auto& [name, sec] : parsed.sections) {
    (void)sec;
    if (name == "sim" || name == "dist1" || name == "dist2" || name == "covariate") continue;
    if (name.rfind("stratum.", 0) == 0) continue;
    throw ConfigError("[" + name + "]: unknown section");
  }
  return run;
}

}  // namespace winprob
