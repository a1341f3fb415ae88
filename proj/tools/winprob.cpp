// Command-line front door: CSV ingestion, composite construction, analysis
// dispatch, simulation runs, and report emission. All statistical work lives
// in the headers; this file is argument plumbing and formatting.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "winprob/adjust.hpp"
#include "winprob/classical.hpp"
#include "winprob/composite.hpp"
#include "winprob/config.hpp"
#include "winprob/csv.hpp"
#include "winprob/report.hpp"
#include "winprob/simulate.hpp"
#include "winprob/version.hpp"
#include "winprob/wincore.hpp"

namespace {

using namespace winprob;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  out << content;
}

struct AnalyzeOptions {
  std::string file;
  std::string method;
  double alpha = 0.05;
  std::string weights = "sample-size";
  std::string death_strategy;  // empty: responses stay numeric
  std::string missing = "error";
  bool json_only = false;
  std::string out_path;
};

bool needs_stratum(const std::string& m) {
  return m == "stratified" || m == "adjusted-stratified" || m == "van-elteren" ||
         m == "rank-ancova";
}

bool needs_covariate(const std::string& m) {
  return m == "adjusted" || m == "adjusted-stratified" || m == "rank-regression" ||
         m == "rank-ancova";
}

// Methods with a pairwise-comparison path; the others need midranks, which
// universal-tie values do not admit.
bool pairwise_capable(const std::string& m) {
  return m == "wp" || m == "wr" || m == "adjusted" || m == "stratified" ||
         m == "adjusted-stratified" || m == "fligner-policello";
}

std::vector<std::string> required_columns(const AnalyzeOptions& o) {
  std::vector<std::string> cols{"subject_id", "group", "response"};
  if (needs_stratum(o.method)) cols.push_back("stratum");
  if (needs_covariate(o.method)) cols.push_back("covariate");
  if (!o.death_strategy.empty()) {
    cols.push_back("died");
    if (o.death_strategy == "last-value") cols.push_back("last_value");
    if (o.death_strategy == "survival-time") cols.push_back("death_time");
  }
  if (o.missing == "ties") cols.push_back("missing");
  return cols;
}

template <class T>
struct Prepared {
  TwoSample<T> pooled;
  std::optional<CovariatePair> cov;
  StratifiedData<T> strat;
  std::vector<std::pair<std::string, StratumSizes>> per_stratum;
};

// Splits rows into the two arms, and when asked also into labeled strata
// (label order is lexicographic) with per-stratum covariates attached.
template <class T>
Prepared<T> group_rows(const Dataset& ds, const std::vector<T>& values, bool with_cov,
                       bool with_strata, const WeightSpec& wspec) {
  Prepared<T> out;
  CovariatePair pooled_cov;
  std::map<std::string, Stratum<T>> strata;
  for (std::size_t i = 0; i < ds.rows.size(); ++i) {
    const DataRow& row = ds.rows[i];
    const bool active = row.group == 1;
    (active ? out.pooled.y2 : out.pooled.y1).push_back(values[i]);
    if (with_cov) (active ? pooled_cov.x2 : pooled_cov.x1).push_back(*row.covariate);
    if (with_strata) {
      Stratum<T>& st = strata[*row.stratum];
      (active ? st.sample.y2 : st.sample.y1).push_back(values[i]);
      if (with_cov) {
        if (!st.covariate) st.covariate.emplace();
        (active ? st.covariate->x2 : st.covariate->x1).push_back(*row.covariate);
      }
    }
  }
  if (with_cov) out.cov = std::move(pooled_cov);
  if (with_strata) {
    out.strat.weights = wspec;
    for (auto& [label, st] : strata) {
      st.label = label;
      out.per_stratum.push_back({label, {st.sample.n1(), st.sample.n2()}});
      out.strat.strata.push_back(std::move(st));
    }
  }
  return out;
}

template <class T, class Cmp>
AnalysisReport analyze_dispatch(const std::string& method, const Prepared<T>& P, double alpha,
                                Cmp cmp, bool use_ranks) {
  AnalysisReport r;
  r.method = method;
  r.n1 = P.pooled.n1();
  r.n2 = P.pooled.n2();
  r.per_stratum = P.per_stratum;

  auto attach_estimate = [&](const Estimate& est, bool ratio_scale_ci) {
    r.estimate = est;
    if (est.estimate >= 0.0) {
      WinRatioResult wr = win_ratio(est);
      r.kappa = wr.kappa;
      if (ratio_scale_ci) r.kappa_ci = wr;
    }
    if (est.estimate > 0.5) r.nnt = nnt(est.estimate);
  };
  auto attach_stratified = [&](const StratifiedEstimate& se) {
    attach_estimate(se.overall, false);
    std::vector<std::pair<std::string, double>> w, t;
    for (std::size_t h = 0; h < P.strat.strata.size(); ++h) {
      w.push_back({P.strat.strata[h].label, se.weights[h]});
      t.push_back({P.strat.strata[h].label, se.theta_by_stratum[h]});
    }
    r.stratum_weights = std::move(w);
    r.stratum_theta = std::move(t);
  };

  if (method == "wp" || method == "wr") {
    attach_estimate(wp_test(P.pooled, alpha, cmp, use_ranks), method == "wr");
  } else if (method == "adjusted") {
    attach_estimate(adjusted_wp(P.pooled, *P.cov, alpha, cmp, use_ranks), false);
  } else if (method == "stratified") {
    attach_stratified(stratified_wp(P.strat, alpha, cmp, use_ranks));
  } else if (method == "adjusted-stratified") {
    attach_stratified(adjusted_stratified_wp(P.strat, alpha, cmp, use_ranks));
  } else if (method == "wilcoxon") {
    r.test = wilcoxon_test(P.pooled, cmp);
    try {
      r.diagnostics.push_back({"wilcoxon_ratio", statistic_ratio_wilcoxon(P.pooled, cmp)});
    } catch (const DataError&) {
    } catch (const DegenerateError&) {
    }
  } else if (method == "fligner-policello") {
    r.test = fligner_policello(P.pooled, cmp, use_ranks);
    try {
      const double f = r.test->statistic;
      const double z0 = z0_statistic(P.pooled, cmp, use_ranks).statistic;
      if (f != 0.0) r.diagnostics.push_back({"fligner_ratio", (z0 * z0) / (f * f)});
    } catch (const DataError&) {
    } catch (const DegenerateError&) {
    }
  } else if (method == "hodges-lehmann") {
    if constexpr (std::is_same_v<T, double>) {
      r.shift = hodges_lehmann(P.pooled);
    } else {
      throw DataError("HL requires numeric responses");
    }
  } else if (method == "rank-regression") {
    r.test = regression_on_ranks(P.pooled, *P.cov, cmp);
  } else if (method == "van-elteren") {
    r.test = van_elteren(P.strat, cmp);
    try {
      r.diagnostics.push_back({"van_elteren_ratio", statistic_ratio_van_elteren(P.strat, cmp)});
    } catch (const DataError&) {
    } catch (const DegenerateError&) {
    }
  } else if (method == "rank-ancova") {
    r.test = rank_ancova(P.strat, cmp);
  } else {
    throw ConfigError("unknown method: " + method);
  }
  return r;
}

std::string fmt6(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string fmtg(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

void print_human(const AnalysisReport& r) {
  std::printf("%-22s %s\n", "method", r.method.c_str());
  std::printf("%-22s %zu/%zu\n", "n (placebo/active)", r.n1, r.n2);
  if (r.stratum_weights && r.stratum_theta) {
    for (std::size_t h = 0; h < r.per_stratum.size(); ++h) {
      const auto& [label, sz] = r.per_stratum[h];
      std::printf("%-22s n=%zu/%zu  weight=%s  theta=%s\n", ("stratum " + label).c_str(), sz.n1,
                  sz.n2, fmt6((*r.stratum_weights)[h].second).c_str(),
                  fmt6((*r.stratum_theta)[h].second).c_str());
    }
  }
  if (r.estimate) {
    std::printf("%-22s %s\n", "theta", fmt6(r.estimate->estimate).c_str());
    if (r.kappa) std::printf("%-22s %s\n", "kappa", fmt6(*r.kappa).c_str());
    if (r.nnt) std::printf("%-22s %lld\n", "nnt", static_cast<long long>(*r.nnt));
    std::printf("%-22s %s\n", "se", fmt6(r.estimate->se).c_str());
    char level[32];
    std::snprintf(level, sizeof(level), "%.1f%% CI", 100.0 * (1.0 - r.estimate->alpha));
    const double lo = r.kappa_ci ? r.kappa_ci->ci_lower : r.estimate->ci_lower;
    const double hi = r.kappa_ci ? r.kappa_ci->ci_upper : r.estimate->ci_upper;
    std::printf("%-22s [%s, %s]%s\n", level, fmt6(lo).c_str(), fmt6(hi).c_str(),
                r.kappa_ci ? " (ratio scale)" : "");
    std::printf("%-22s %s\n", "z", fmt6(r.estimate->z).c_str());
    std::printf("%-22s %s\n", "p-value", fmt6(r.estimate->p_value).c_str());
  } else if (r.test) {
    std::printf("%-22s %s\n", "z", fmt6(r.test->statistic).c_str());
    std::printf("%-22s %s\n", "p-value", fmt6(r.test->p_value).c_str());
    if (r.test->rank_sum) std::printf("%-22s %s\n", "rank sum (active)", fmtg(*r.test->rank_sum).c_str());
    if (r.test->residual_sum)
      std::printf("%-22s %s\n", "residual sum (active)", fmtg(*r.test->residual_sum).c_str());
  }
  if (r.shift) std::printf("%-22s %s\n", "shift", fmtg(*r.shift).c_str());
  for (const auto& [name, value] : r.diagnostics)
    std::printf("%-22s %s\n", name.c_str(), fmt6(value).c_str());
}

int run_analyze(const AnalyzeOptions& o) {
  if (!(o.alpha > 0.0 && o.alpha < 1.0)) throw ConfigError("--alpha: must be in (0,1)");
  const bool missing_ties = o.missing == "ties";
  const bool composite = !o.death_strategy.empty() || missing_ties;
  if (composite && o.method == "hodges-lehmann") throw DataError("HL requires numeric responses");
  if (missing_ties && !pairwise_capable(o.method))
    throw DataError("missing-as-ties disables rank-based methods");

  const Dataset ds = load_dataset(read_file(o.file), required_columns(o));

  WeightSpec wspec;
  wspec.scheme =
      o.weights == "van-elteren" ? WeightScheme::VanElteren : WeightScheme::SampleSize;

  ordered_json settings;
  settings["alpha"] = json_number(o.alpha);
  if (o.method == "stratified" || o.method == "adjusted-stratified")
    settings["weights"] = o.weights;
  if (!o.death_strategy.empty()) settings["death_strategy"] = o.death_strategy;
  settings["missing"] = o.missing;

  const bool with_cov = needs_covariate(o.method);
  const bool with_strata = needs_stratum(o.method);
  AnalysisReport rep;
  if (composite) {
    DeathStrategy strategy = DeathStrategy::AllDeathsEqual;
    if (o.death_strategy == "last-value") strategy = DeathStrategy::DeathsByLastValue;
    if (o.death_strategy == "survival-time") strategy = DeathStrategy::DeathsBySurvivalTime;
    std::vector<SubjectRecord> recs;
    recs.reserve(ds.rows.size());
    for (const DataRow& row : ds.rows) {
      SubjectRecord rec;
      rec.id = row.subject_id;
      rec.change_at_T = row.response;
      rec.died_before_T = row.died.value_or(false);
      rec.death_time = row.death_time;
      rec.last_change_alive = row.last_value;
      rec.missing_not_death = row.missing.value_or(false);
      recs.push_back(std::move(rec));
    }
    const std::vector<CompositeValue> values = build_composite(recs, strategy, missing_ties);
    const auto P = group_rows<CompositeValue>(ds, values, with_cov, with_strata, wspec);
    rep = analyze_dispatch(o.method, P, o.alpha, CompositeCompare{}, !missing_ties);
  } else {
    std::vector<double> values;
    values.reserve(ds.rows.size());
    for (const DataRow& row : ds.rows) {
      if (!row.response) throw DataError("missing response: " + row.subject_id);
      values.push_back(*row.response);
    }
    const auto P = group_rows<double>(ds, values, with_cov, with_strata, wspec);
    rep = analyze_dispatch(o.method, P, o.alpha, DefaultCompare<double>{}, true);
  }
  rep.settings = settings;

  const std::string json_text = to_json(rep).dump(2) + "\n";
  if (!o.out_path.empty()) write_file(o.out_path, json_text);
  if (o.json_only) {
    std::fputs(json_text.c_str(), stdout);
  } else {
    print_human(rep);
  }
  return 0;
}

struct NntOptions {
  std::vector<double> kappas;
  bool json_only = false;
};

int run_nnt(const NntOptions& o) {
  struct RowV {
    double kappa;
    double theta;
    long long count;
  };
  std::vector<RowV> rows;
  auto add_kappa = [&](double k) {
    if (!(k > 1.0)) throw DataError("no benefit");
    const double th = k / (1.0 + k);
    rows.push_back({k, th, nnt(th)});
  };
  if (o.kappas.empty()) {
    for (double k : {1.05, 1.1, 1.15, 1.18, 1.2, 1.25, 1.3, 1.35, 1.4, 1.45, 1.5, 2.0, 3.0})
      add_kappa(k);
    // Certain-benefit limit: theta = 1, every pair treated helps one person.
    rows.push_back({std::numeric_limits<double>::infinity(), 1.0, nnt(1.0)});
  } else {
    for (double k : o.kappas) add_kappa(k);
  }
  if (o.json_only) {
    ordered_json out;
    ordered_json arr = ordered_json::array();
    for (const RowV& r : rows)
      arr.push_back(ordered_json{
          {"kappa", json_number(r.kappa)}, {"theta", json_number(r.theta)}, {"nnt", r.count}});
    out["rows"] = arr;
    out["version"] = kVersion;
    std::fputs((out.dump(2) + "\n").c_str(), stdout);
  } else {
    std::printf("%-10s %-10s %s\n", "kappa", "theta", "NNT");
    for (const RowV& r : rows)
      std::printf("%-10s %-10s %lld\n", fmtg(r.kappa).c_str(), fmt6(r.theta).c_str(), r.count);
  }
  return 0;
}

struct SimulateOptions {
  std::string config_path;
  std::size_t workers = 1;
  std::string out_path;
};

int run_simulate(const SimulateOptions& o) {
  const ParsedConfig parsed = parse_config(read_file(o.config_path));
  SimRun run = sim_config_from(parsed);

  // The environment seed takes precedence over the config seed; one of the
  // two must be present so every run is reproducible by construction.
  if (const char* env = std::getenv("WINPROB_SEED"); env && *env) {
    std::uint64_t seed = 0;
    const char* last = env + std::string(env).size();
    auto [ptr, ec] = std::from_chars(env, last, seed);
    if (ec != std::errc{} || ptr != last)
      throw ConfigError(std::string("WINPROB_SEED: invalid seed '") + env + "'");
    run.config.seed = seed;
  } else if (run.seed) {
    run.config.seed = *run.seed;
  } else {
    throw ConfigError("[sim].seed: required (or set WINPROB_SEED)");
  }
  run.config.workers = o.workers == 0 ? 1 : o.workers;

  // Echo the configuration verbatim; worker count and paths are excluded so
  // the report bytes depend only on the statistical inputs.
  ordered_json settings;
  for (const auto& [name, sec] : parsed.sections) {
    ordered_json body = ordered_json::object();
    for (const auto& [k, v] : sec) body[k] = v;
    settings[name] = body;
  }

  std::string out;
  if (run.mode == SimMode::OperatingCharacteristics) {
    out = simulation_report(operating_characteristics(run.config), settings).dump(2) + "\n";
  } else {
    out = convergence_csv(convergence_study(run.config));
  }
  if (!o.out_path.empty()) {
    write_file(o.out_path, out);
  } else {
    std::fputs(out.c_str(), stdout);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Win probability and win ratio analysis for two-group ordinal outcomes"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  AnalyzeOptions ao;
  NntOptions no;
  SimulateOptions so;

  CLI::App* an = app.add_subcommand("analyze", "Analyze a CSV dataset");
  an->add_option("file", ao.file, "input CSV path")->required();
  an->add_option("--method", ao.method, "analysis method")
      ->required()
      ->check(CLI::IsMember({"wp", "wr", "adjusted", "stratified", "adjusted-stratified",
                             "wilcoxon", "fligner-policello", "hodges-lehmann",
                             "rank-regression", "van-elteren", "rank-ancova"}));
  an->add_option("--alpha", ao.alpha, "two-sided level (default 0.05)");
  an->add_option("--weights", ao.weights, "stratum weighting (default sample-size)")
      ->check(CLI::IsMember({"sample-size", "van-elteren"}));
  an->add_option("--death-strategy", ao.death_strategy,
                 "composite ordering of deaths (default: numeric responses)")
      ->check(CLI::IsMember({"equal", "last-value", "survival-time"}));
  an->add_option("--missing", ao.missing, "missing-response policy (default error)")
      ->check(CLI::IsMember({"error", "ties"}));
  an->add_flag("--json", ao.json_only, "print the JSON report instead of the table");
  an->add_option("--out", ao.out_path, "also write the JSON report to this path");

  CLI::App* nt = app.add_subcommand("nnt-table", "Number needed to treat by win ratio");
  nt->add_option("--kappa", no.kappas, "win ratio values (default: built-in table)");
  nt->add_flag("--json", no.json_only, "print JSON instead of the table");

  CLI::App* si = app.add_subcommand("simulate", "Run a simulation described by a config file");
  si->add_option("config", so.config_path, "configuration file path")->required();
  si->add_option("--workers", so.workers, "worker threads (default 1)");
  si->add_option("--out", so.out_path, "write the report to this path instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (an->parsed()) return run_analyze(ao);
    if (nt->parsed()) return run_nnt(no);
    if (si->parsed()) return run_simulate(so);
  } catch (const DegenerateError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
