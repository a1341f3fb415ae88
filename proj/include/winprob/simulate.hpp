#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "winprob/adjust.hpp"
#include "winprob/classical.hpp"
#include "winprob/closed_form.hpp"
#include "winprob/common.hpp"
#include "winprob/rng.hpp"
#include "winprob/wincore.hpp"

// Monte-Carlo engine for operating characteristics (type I error, power,
// coverage) and single-path convergence studies. Every replicate draws from
// its own stream derived from (seed, replicate index), so results are
// byte-identical for a given config no matter how many workers run.

namespace winprob {

struct CovariateModel {
  double rho = 0.0;    // correlation with the latent normal behind the response
  double shift1 = 0.0; // added to placebo covariates
  double shift2 = 0.0; // added to active covariates
};

struct SimStratum {
  std::string label;
  DistSpec dist1 = Normal{};
  DistSpec dist2 = Normal{};
  std::size_t n1 = 0;
  std::size_t n2 = 0;
};

struct SimConfig {
  DistSpec dist1 = Normal{};  // used when strata is empty
  DistSpec dist2 = Normal{};
  std::size_t n1 = 0;
  std::size_t n2 = 0;  // sweep maximum in convergence mode
  std::vector<SimStratum> strata;
  std::optional<CovariateModel> covariate;
  WeightSpec weights;
  std::size_t replicates = 1;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  std::vector<std::string> methods{"wp"};
  std::size_t workers = 1;
};

struct MethodOC {
  std::string method;
  double rejection_rate = 0.0;
  std::optional<double> coverage;  // CI-producing estimators only
  double mean_estimate = 0.0;      // theta-scale estimate or z, per method
  std::optional<double> mean_se;
  double sd_estimate = 0.0;  // empirical spread of the per-replicate estimates
};

struct OperatingCharacteristics {
  std::vector<MethodOC> methods;
  std::size_t replicates = 0;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  std::optional<double> theta_true;      // pooled truth, when a closed form exists
  std::optional<double> theta_str_true;  // weighted per-stratum truth
  std::string seed_lineage = "stream(seed, replicate) = mt19937_64(mix64(seed xor mix64(replicate)))";
};

struct ConvergencePoint {
  std::size_t n2 = 0;
  double theta_hat = 0.0;
  double se = std::numeric_limits<double>::quiet_NaN();  // NaN until n2 >= 2
};

namespace detail {

inline bool method_is_stratified(const std::string& m) {
  return m == "stratified" || m == "adjusted-stratified" || m == "van-elteren" ||
         m == "rank-ancova";
}

inline bool method_needs_covariate(const std::string& m) {
  return m == "adjusted" || m == "adjusted-stratified" || m == "rank-regression" ||
         m == "rank-ancova";
}

inline bool method_has_ci(const std::string& m) {
  return m == "wp" || m == "adjusted" || m == "stratified" || m == "adjusted-stratified";
}

struct RepOutcome {
  double estimate = 0.0;
  double se = 0.0;
  bool reject = false;
  bool cover = false;
  bool has_se = false;
};

struct RepData {
  StratifiedData<double> strata;
  TwoSample<double> pooled;
  CovariatePair pooled_cov;
};

// One subject: the response comes from the inverse CDF of its distribution,
// the covariate from a Gaussian copula against the latent normal behind the
// response. Draw order is fixed and documented by this code: response
// first, then the covariate's independent normal.
inline double draw_subject(const DistSpec& dist, const CovariateModel* cm, double shift,
                           std::mt19937_64& eng, double* cov_out) {
  const double u = uniform_open(eng);
  const double y = quantile_of(dist, u);
  if (cm != nullptr) {
    const double zy = normal_quantile(u);
    const double z2 = normal_quantile(uniform_open(eng));
    *cov_out = shift + cm->rho * zy + std::sqrt(1.0 - cm->rho * cm->rho) * z2;
  }
  return y;
}

inline RepData generate_replicate(const SimConfig& cfg, std::uint64_t rep) {
  std::mt19937_64 eng = replicate_rng(cfg.seed, rep);
  const CovariateModel* cm = cfg.covariate ? &*cfg.covariate : nullptr;
  RepData d;
  d.strata.weights = cfg.weights;
  std::vector<SimStratum> layout = cfg.strata;
  if (layout.empty()) layout.push_back({"all", cfg.dist1, cfg.dist2, cfg.n1, cfg.n2});
  for (const auto& sp : layout) {
    Stratum<double> st;
    st.label = sp.label;
    CovariatePair cov;
    double x = 0.0;
    for (std::size_t i = 0; i < sp.n1; ++i) {
      st.sample.y1.push_back(draw_subject(sp.dist1, cm, cm ? cm->shift1 : 0.0, eng, &x));
      if (cm) cov.x1.push_back(x);
    }
    for (std::size_t j = 0; j < sp.n2; ++j) {
      st.sample.y2.push_back(draw_subject(sp.dist2, cm, cm ? cm->shift2 : 0.0, eng, &x));
      if (cm) cov.x2.push_back(x);
    }
    d.pooled.y1.insert(d.pooled.y1.end(), st.sample.y1.begin(), st.sample.y1.end());
    d.pooled.y2.insert(d.pooled.y2.end(), st.sample.y2.begin(), st.sample.y2.end());
    if (cm) {
      d.pooled_cov.x1.insert(d.pooled_cov.x1.end(), cov.x1.begin(), cov.x1.end());
      d.pooled_cov.x2.insert(d.pooled_cov.x2.end(), cov.x2.begin(), cov.x2.end());
      st.covariate = std::move(cov);
    }
    d.strata.strata.push_back(std::move(st));
  }
  return d;
}

// Cheap invariants re-verified on every generated replicate: the rank and
// placement forms must tell one story, and the biased-coefficient
// denominator can never exceed the Fligner-Policello one.
inline void replicate_sanity(const RepData& d) {
  RankVectors rv = group_ranks(d.pooled.y1, d.pooled.y2);
  IndividualProportions pr = placements_from_ranks(rv);
  const double n1 = static_cast<double>(rv.n1), n2 = static_cast<double>(rv.n2);
  const double w = rv.rbar2 * n2;
  const double lhs = n1 * n2 * pr.theta_hat;
  const double rhs = w - n2 * (n2 + 1.0) / 2.0;
  if (std::fabs(lhs - rhs) > 1e-7 * std::max(1.0, n1 * n2))
    throw std::logic_error("rank-sum identity failed on replicate");
  const double extra = pr.theta_hat * (1.0 - pr.theta_hat) / (n1 * n2);
  if (extra < -1e-15 || pr.theta_hat < -1e-12 || pr.theta_hat > 1.0 + 1e-12)
    throw std::logic_error("placement range failed on replicate");
}

inline RepOutcome evaluate_method(const std::string& m, const RepData& d, double alpha,
                                  const std::optional<double>& truth_pooled,
                                  const std::optional<double>& truth_str) {
  RepOutcome o;
  auto from_estimate = [&](const Estimate& e, const std::optional<double>& truth) {
    o.estimate = e.estimate;
    o.se = e.se;
    o.has_se = true;
    o.reject = e.p_value < alpha;
    if (truth) o.cover = e.ci_lower <= *truth && *truth <= e.ci_upper;
  };
  auto from_test = [&](const TestResult& t) {
    o.estimate = t.statistic;
    o.reject = t.p_value < alpha;
  };
  if (m == "wp") {
    from_estimate(wp_test(d.pooled, alpha), truth_pooled);
  } else if (m == "adjusted") {
    from_estimate(adjusted_wp(d.pooled, d.pooled_cov, alpha), truth_pooled);
  } else if (m == "stratified") {
    from_estimate(stratified_wp(d.strata, alpha).overall, truth_str);
  } else if (m == "adjusted-stratified") {
    from_estimate(adjusted_stratified_wp(d.strata, alpha).overall, truth_str);
  } else if (m == "wilcoxon") {
    from_test(wilcoxon_test(d.pooled));
  } else if (m == "fligner-policello") {
    from_test(fligner_policello(d.pooled));
  } else if (m == "z0") {
    from_test(z0_statistic(d.pooled));
  } else if (m == "rank-regression") {
    from_test(regression_on_ranks(d.pooled, d.pooled_cov));
  } else if (m == "van-elteren") {
    from_test(van_elteren(d.strata));
  } else if (m == "rank-ancova") {
    from_test(rank_ancova(d.strata));
  } else {
    throw DataError("unknown method: " + m);
  }
  return o;
}

}  // namespace detail

// Pooled win probability implied by the stratum layout: every cross-stratum
// placebo/active pair contributes, weighted by its share of all pairs.
inline std::optional<double> pooled_theta_true(const SimConfig& cfg) {
  std::vector<SimStratum> layout = cfg.strata;
  if (layout.empty()) layout.push_back({"all", cfg.dist1, cfg.dist2, cfg.n1, cfg.n2});
  double tot1 = 0.0, tot2 = 0.0;
  for (const auto& s : layout) {
    tot1 += static_cast<double>(s.n1);
    tot2 += static_cast<double>(s.n2);
  }
  double theta = 0.0;
  try {
    for (const auto& a : layout)
      for (const auto& b : layout)
        theta += static_cast<double>(a.n1) / tot1 * (static_cast<double>(b.n2) / tot2) *
                 theta_closed_form(a.dist1, b.dist2);
  } catch (const DataError&) {
    return std::nullopt;
  }
  return theta;
}

inline std::optional<double> stratified_theta_true(const SimConfig& cfg) {
  std::vector<SimStratum> layout = cfg.strata;
  if (layout.empty()) layout.push_back({"all", cfg.dist1, cfg.dist2, cfg.n1, cfg.n2});
  std::vector<StratumSizes> sizes;
  for (const auto& s : layout) sizes.push_back({s.n1, s.n2});
  std::vector<double> w = strata_weights(sizes, cfg.weights);
  double theta = 0.0;
  try {
    for (std::size_t h = 0; h < layout.size(); ++h)
      theta += w[h] * theta_closed_form(layout[h].dist1, layout[h].dist2);
  } catch (const DataError&) {
    return std::nullopt;
  }
  return theta;
}

inline OperatingCharacteristics operating_characteristics(const SimConfig& cfg) {
  if (cfg.replicates < 1) throw DataError("replicates must be at least 1");
  if (cfg.methods.empty()) throw DataError("no methods selected");
  if (cfg.covariate && !(std::fabs(cfg.covariate->rho) < 1.0))
    throw DataError("covariate correlation must lie in (-1,1)");
  for (const auto& m : cfg.methods) {
    if (detail::method_needs_covariate(m) && !cfg.covariate)
      throw DataError("method needs covariate model: " + m);
  }
  {
    std::vector<SimStratum> layout = cfg.strata;
    if (layout.empty()) layout.push_back({"all", cfg.dist1, cfg.dist2, cfg.n1, cfg.n2});
    for (const auto& s : layout) {
      if (s.n1 < 2 || s.n2 < 2) throw DataError("variance needs at least 2 per group");
      validate(s.dist1);
      validate(s.dist2);
    }
  }

  const std::optional<double> truth_pooled = pooled_theta_true(cfg);
  const std::optional<double> truth_str = stratified_theta_true(cfg);
  const std::size_t R = cfg.replicates;
  const std::size_t M = cfg.methods.size();

  std::vector<detail::RepOutcome> results(R * M);
  auto run_one = [&](std::size_t r) {
    detail::RepData d = detail::generate_replicate(cfg, r);
    detail::replicate_sanity(d);
    for (std::size_t k = 0; k < M; ++k)
      results[r * M + k] =
          detail::evaluate_method(cfg.methods[k], d, cfg.alpha, truth_pooled, truth_str);
  };

  const std::size_t workers = cfg.workers == 0 ? 1 : cfg.workers;
  if (workers <= 1) {
    for (std::size_t r = 0; r < R; ++r) run_one(r);
  } else {
    // Workers race only for replicate indices; every result lands in its
    // preallocated slot and the reduction below runs in index order, so the
    // output cannot depend on the schedule.
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::mutex failure_mu;
    for (std::size_t t = 0; t < workers; ++t) {
      pool.emplace_back([&] {
        try {
          for (std::size_t r = next.fetch_add(1); r < R; r = next.fetch_add(1)) run_one(r);
        } catch (...) {
          std::lock_guard<std::mutex> lk(failure_mu);
          if (!failure) failure = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
  }

  OperatingCharacteristics oc;
  oc.replicates = R;
  oc.alpha = cfg.alpha;
  oc.seed = cfg.seed;
  oc.theta_true = truth_pooled;
  oc.theta_str_true = truth_str;
  for (std::size_t k = 0; k < M; ++k) {
    MethodOC moc;
    moc.method = cfg.methods[k];
    double sum = 0.0, sum_sq = 0.0, sum_se = 0.0;
    std::size_t rejects = 0, covers = 0;
    for (std::size_t r = 0; r < R; ++r) {
      const auto& o = results[r * M + k];
      sum += o.estimate;
      sum_sq += o.estimate * o.estimate;
      sum_se += o.se;
      rejects += o.reject ? 1 : 0;
      covers += o.cover ? 1 : 0;
    }
    const double n = static_cast<double>(R);
    moc.rejection_rate = static_cast<double>(rejects) / n;
    moc.mean_estimate = sum / n;
    moc.sd_estimate = R > 1 ? std::sqrt(std::max(0.0, (sum_sq - sum * sum / n) / (n - 1.0))) : 0.0;
    const bool has_ci = detail::method_has_ci(cfg.methods[k]);
    if (has_ci) moc.mean_se = sum_se / n;
    const std::optional<double>& truth =
        detail::method_is_stratified(cfg.methods[k]) ? truth_str : truth_pooled;
    if (has_ci && truth) moc.coverage = static_cast<double>(covers) / n;
    oc.methods.push_back(std::move(moc));
  }
  return oc;
}

// Single seeded sample path: the placebo arm is drawn once, then the active
// arm grows one subject at a time with the win proportion and its standard
// error updated incrementally.
inline std::vector<ConvergencePoint> convergence_study(const SimConfig& cfg) {
  if (!cfg.strata.empty()) throw DataError("convergence mode is unstratified");
  if (cfg.n1 < 2) throw DataError("variance needs at least 2 per group");
  if (cfg.n2 < 1) throw DataError("sweep needs at least 1 active subject");
  validate(cfg.dist1);
  validate(cfg.dist2);
  std::mt19937_64 eng = replicate_rng(cfg.seed, 0);
  const std::size_t n1 = cfg.n1;
  std::vector<double> y1(n1);
  for (double& v : y1) v = sample_draw(cfg.dist1, eng);

  std::vector<double> qwins(n1, 0.0);  // per-placebo win counts against active draws so far
  std::vector<double> pwins;           // per-active win counts against the placebo arm
  pwins.reserve(cfg.n2);
  double sum_p = 0.0;
  std::vector<ConvergencePoint> path;
  path.reserve(cfg.n2);
  for (std::size_t j = 1; j <= cfg.n2; ++j) {
    const double eta = sample_draw(cfg.dist2, eng);
    double pw = 0.0;
    for (std::size_t i = 0; i < n1; ++i) {
      if (y1[i] < eta) {
        pw += 1.0;
      } else if (eta < y1[i]) {
        qwins[i] += 1.0;
      } else {
        pw += 0.5;
        qwins[i] += 0.5;
      }
    }
    pwins.push_back(pw);
    sum_p += pw;
    ConvergencePoint pt;
    pt.n2 = j;
    const double fn1 = static_cast<double>(n1), fj = static_cast<double>(j);
    pt.theta_hat = sum_p / (fn1 * fj);
    if (j >= 2) {
      const double q_mean = 1.0 - pt.theta_hat;
      double sq = 0.0, sp = 0.0;
      for (double qa : qwins) {
        const double q = qa / fj;
        sq += (q - q_mean) * (q - q_mean);
      }
      for (double pa : pwins) {
        const double p = pa / fn1;
        sp += (p - pt.theta_hat) * (p - pt.theta_hat);
      }
      pt.se = std::sqrt(sq / (fn1 * (fn1 - 1.0)) + sp / (fj * (fj - 1.0)));
    }
    path.push_back(pt);
  }
  return path;
}

}  // namespace winprob
