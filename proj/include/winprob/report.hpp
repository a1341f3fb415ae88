#pragma once

#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "winprob/adjust.hpp"
#include "winprob/classical.hpp"
#include "winprob/simulate.hpp"
#include "winprob/version.hpp"
#include "winprob/wincore.hpp"

// JSON and CSV report assembly shared by the CLI and the end-to-end tests.

namespace winprob {

using ordered_json = nlohmann::ordered_json;

// Doubles stay doubles (the serializer is round-trip exact); infinities
// become the strings "inf"/"-inf" because JSON has no literal for them.
inline ordered_json json_number(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

struct AnalysisReport {
  std::string method;
  std::size_t n1 = 0;  // placebo
  std::size_t n2 = 0;  // active
  std::vector<std::pair<std::string, StratumSizes>> per_stratum;
  std::optional<Estimate> estimate;         // theta scale
  std::optional<double> kappa;              // point estimate on the ratio scale
  std::optional<WinRatioResult> kappa_ci;   // ratio-scale interval (method wr)
  std::optional<long long> nnt;             // only when theta_hat > 1/2
  std::optional<double> shift;              // location-shift estimators
  std::optional<TestResult> test;           // rank tests without an estimate
  std::vector<std::pair<std::string, double>> diagnostics;
  std::optional<std::vector<std::pair<std::string, double>>> stratum_weights;
  std::optional<std::vector<std::pair<std::string, double>>> stratum_theta;
  ordered_json settings = ordered_json::object();
};

inline ordered_json to_json(const AnalysisReport& r) {
  ordered_json out;
  out["method"] = r.method;
  ordered_json n;
  n["placebo"] = r.n1;
  n["active"] = r.n2;
  if (!r.per_stratum.empty()) {
    ordered_json per;
    for (const auto& [label, sz] : r.per_stratum) {
      per[label] = ordered_json{{"placebo", sz.n1}, {"active", sz.n2}};
    }
    n["per_stratum"] = per;
  }
  out["n"] = n;

  if (r.estimate || r.shift) {
    ordered_json est;
    if (r.estimate) est["theta"] = json_number(r.estimate->estimate);
    if (r.kappa) est["kappa"] = json_number(*r.kappa);
    if (r.nnt) est["nnt"] = *r.nnt;
    if (r.shift) est["shift"] = json_number(*r.shift);
    out["estimate"] = est;
  }
  if (r.estimate) {
    out["se"] = json_number(r.estimate->se);
    ordered_json ci;
    if (r.kappa_ci) {
      ci["lower"] = json_number(r.kappa_ci->ci_lower);
      ci["upper"] = json_number(r.kappa_ci->ci_upper);
    } else {
      ci["lower"] = json_number(r.estimate->ci_lower);
      ci["upper"] = json_number(r.estimate->ci_upper);
    }
    ci["alpha"] = json_number(r.estimate->alpha);
    out["ci"] = ci;
    out["z"] = json_number(r.estimate->z);
    out["p_value"] = json_number(r.estimate->p_value);
  } else if (r.test) {
    out["z"] = json_number(r.test->statistic);
    out["p_value"] = json_number(r.test->p_value);
  }

  ordered_json diag = ordered_json::object();
  for (const auto& [k, v] : r.diagnostics) diag[k] = json_number(v);
  out["diagnostics"] = diag;
  if (r.stratum_weights) {
    ordered_json w;
    for (const auto& [label, v] : *r.stratum_weights) w[label] = json_number(v);
    out["stratum_weights"] = w;
  }
  if (r.stratum_theta) {
    ordered_json t;
    for (const auto& [label, v] : *r.stratum_theta) t[label] = json_number(v);
    out["theta_by_stratum"] = t;
  }
  out["settings"] = r.settings;
  out["version"] = kVersion;
  return out;
}

inline ordered_json to_json(const MethodOC& m, std::size_t replicates, double alpha) {
  ordered_json out;
  out["method"] = m.method;
  out["rejection_rate"] = json_number(m.rejection_rate);
  // Monte-Carlo half-width at three binomial standard errors around alpha.
  out["rejection_mc_tolerance"] =
      json_number(3.0 * std::sqrt(alpha * (1.0 - alpha) / static_cast<double>(replicates)));
  if (m.coverage) out["coverage"] = json_number(*m.coverage);
  out["mean_estimate"] = json_number(m.mean_estimate);
  if (m.mean_se) out["mean_se"] = json_number(*m.mean_se);
  out["sd_estimate"] = json_number(m.sd_estimate);
  if (m.mean_se && *m.mean_se > 0.0)
    out["sd_over_mean_se"] = json_number(m.sd_estimate / *m.mean_se);
  return out;
}

inline ordered_json simulation_report(const OperatingCharacteristics& oc,
                                      const ordered_json& settings) {
  ordered_json out;
  out["mode"] = "oc";
  out["replicates"] = oc.replicates;
  out["alpha"] = json_number(oc.alpha);
  out["seed"] = oc.seed;
  if (oc.theta_true) out["theta_true"] = json_number(*oc.theta_true);
  if (oc.theta_str_true) out["theta_stratified_true"] = json_number(*oc.theta_str_true);
  ordered_json methods = ordered_json::array();
  for (const auto& m : oc.methods) methods.push_back(to_json(m, oc.replicates, oc.alpha));
  out["methods"] = methods;
  out["seed_lineage"] = oc.seed_lineage;
  out["settings"] = settings;
  out["version"] = kVersion;
  return out;
}

// Round-trip-exact decimal for CSV cells; NaN becomes an empty field.
inline std::string csv_number(double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string convergence_csv(const std::vector<ConvergencePoint>& series) {
  std::string out = "n2,theta_hat,se\n";
  for (const auto& pt : series) {
    out += std::to_string(pt.n2);
    out += ',';
    out += csv_number(pt.theta_hat);
    out += ',';
    out += csv_number(pt.se);
    out += '\n';
  }
  return out;
}

}  // namespace winprob
