#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "winprob/common.hpp"
#include "winprob/normal.hpp"
#include "winprob/wincore.hpp"

// Covariate-adjusted win proportion, stratified win proportion with
// size-based weight families, and the adjusted-with-stratification
// estimator that combines both.

namespace winprob {

struct CovariatePair {
  std::vector<double> x1;  // placebo covariates, length n1
  std::vector<double> x2;  // active covariates, length n2
};

enum class WeightScheme { SampleSize, VanElteren, Custom };

struct WeightSpec {
  WeightScheme scheme = WeightScheme::SampleSize;
  std::vector<double> custom;  // only read when scheme == Custom
};

// Cross moments feeding the covariate adjustment. mean_diff and
// cov_theta_diff are both oriented active-minus-placebo: cov_theta_diff
// estimates the covariance between theta_hat and the covariate mean
// difference, which is what makes the subtraction below remove (rather
// than double) the imbalance-driven part of theta_hat.
struct AdjustmentMoments {
  double theta_hat = 0.0;
  double var_theta = 0.0;       // squared standard error of theta_hat
  double mean_diff = 0.0;       // mean(x2) - mean(x1)
  double var_mean_diff = 0.0;   // var(x1)/n1 + var(x2)/n2
  double cov_theta_diff = 0.0;  // cov(x1,q)/n1 + cov(x2,p)/n2
  std::size_t n1 = 0;
  std::size_t n2 = 0;
};

inline AdjustmentMoments adjustment_moments(const IndividualProportions& pr,
                                            const CovariatePair& cov) {
  const std::size_t n1 = pr.q.size(), n2 = pr.p.size();
  if (cov.x1.size() != n1 || cov.x2.size() != n2) throw DataError("covariate length mismatch");
  if (n1 < 2 || n2 < 2) throw DataError("variance needs at least 2 per group");
  AdjustmentMoments m;
  m.n1 = n1;
  m.n2 = n2;
  m.theta_hat = pr.theta_hat;
  m.var_theta = variance_theta(pr);
  m.mean_diff = mean(cov.x2) - mean(cov.x1);
  m.var_mean_diff = sample_variance(cov.x1) / static_cast<double>(n1) +
                    sample_variance(cov.x2) / static_cast<double>(n2);
  m.cov_theta_diff = sample_covariance(cov.x1, pr.q) / static_cast<double>(n1) +
                     sample_covariance(cov.x2, pr.p) / static_cast<double>(n2);
  return m;
}

namespace detail {

// Shared tail of the adjusted estimators: point estimate, variance after
// the regression subtraction, normal CI clamped to the probability scale.
inline Estimate finish_adjusted(double theta, double var_theta, double mean_diff,
                                double var_mean_diff, double cov_theta_diff, std::size_t n1,
                                std::size_t n2, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DataError("alpha must be in (0,1)");
  if (var_mean_diff <= 0.0) throw DataError("constant covariate");
  const double gamma = cov_theta_diff / var_mean_diff;
  const double var_beta = var_theta - cov_theta_diff * gamma;
  if (var_beta <= 0.0) throw DegenerateError("covariance exceeds variance bound");
  Estimate e;
  e.n1 = n1;
  e.n2 = n2;
  e.alpha = alpha;
  e.estimate = theta - mean_diff * gamma;
  e.se = std::sqrt(var_beta);
  const double c = normal_quantile(1.0 - alpha / 2.0);
  e.ci_lower = e.estimate - c * e.se;
  e.ci_upper = e.estimate + c * e.se;
  if (e.ci_lower < 0.0) {
    e.ci_lower = 0.0;
    e.ci_clamped_lower = true;
  }
  if (e.ci_upper > 1.0) {
    e.ci_upper = 1.0;
    e.ci_clamped_upper = true;
  }
  e.z = (e.estimate - 0.5) / e.se;
  e.p_value = two_sided_p(e.z);
  return e;
}

}  // namespace detail

inline Estimate adjusted_estimate(const AdjustmentMoments& m, double alpha) {
  return detail::finish_adjusted(m.theta_hat, m.var_theta, m.mean_diff, m.var_mean_diff,
                                 m.cov_theta_diff, m.n1, m.n2, alpha);
}

template <class T, class Cmp = DefaultCompare<T>>
Estimate adjusted_wp(const TwoSample<T>& s, const CovariatePair& cov, double alpha,
                     Cmp cmp = Cmp{}, bool use_ranks = true) {
  IndividualProportions pr = use_ranks ? win_proportion(s, cmp) : win_proportion_pairwise(s, cmp);
  return adjusted_estimate(adjustment_moments(pr, cov), alpha);
}

// Ordinal covariate: the raw covariate values are replaced by their own
// individual win proportions across groups, turning the covariate mean
// difference into a win-proportion difference on the covariate. A constant
// covariate carries no information and falls back to the crude estimate
// instead of tripping the zero-variance guard.
template <class T, class X, class XCmp = DefaultCompare<X>>
Estimate adjusted_wp_ordinal_covariate(const TwoSample<T>& s, const std::vector<X>& x1,
                                       const std::vector<X>& x2, double alpha,
                                       XCmp xcmp = XCmp{}) {
  IndividualProportions pr = win_proportion(s);
  if (x1.size() != pr.q.size() || x2.size() != pr.p.size())
    throw DataError("covariate length mismatch");
  TwoSample<X> xs{x1, x2};
  IndividualProportions xpr = win_proportion(xs, xcmp);
  bool constant = true;
  for (const X& v : x1)
    if (xcmp(v, x1.front()) != Ordering::Equal) constant = false;
  for (const X& v : x2)
    if (xcmp(v, x1.front()) != Ordering::Equal) constant = false;
  if (constant) return estimate_from_placements(pr, alpha);
  CovariatePair cov{xpr.q, xpr.p};
  return adjusted_estimate(adjustment_moments(pr, cov), alpha);
}

struct StratumSizes {
  std::size_t n1 = 0;
  std::size_t n2 = 0;
};

// Normalized stratum weights. SampleSize uses n_h1*n_h2/n_h, VanElteren
// n_h1*n_h2/(n_h+1); both favor large, balanced strata and coincide as
// strata grow.
inline std::vector<double> strata_weights(const std::vector<StratumSizes>& sizes,
                                          const WeightSpec& spec) {
  if (sizes.empty()) throw DataError("no strata");
  std::vector<double> w(sizes.size());
  if (spec.scheme == WeightScheme::Custom) {
    if (spec.custom.size() != sizes.size()) throw DataError("custom weight count mismatch");
    double sum = 0.0;
    for (double v : spec.custom) {
      if (!(v > 0.0)) throw DataError("custom weights must be positive");
      sum += v;
    }
    if (std::fabs(sum - 1.0) > 1e-9) throw DataError("custom weights must sum to 1");
    for (std::size_t h = 0; h < w.size(); ++h) w[h] = spec.custom[h] / sum;
    return w;
  }
  double sum = 0.0;
  for (std::size_t h = 0; h < sizes.size(); ++h) {
    if (sizes[h].n1 == 0 || sizes[h].n2 == 0) throw DataError("stratum sizes must be positive");
    const double n1 = static_cast<double>(sizes[h].n1);
    const double n2 = static_cast<double>(sizes[h].n2);
    const double denom =
        spec.scheme == WeightScheme::VanElteren ? n1 + n2 + 1.0 : n1 + n2;
    w[h] = n1 * n2 / denom;
    sum += w[h];
  }
  for (double& v : w) v /= sum;
  return w;
}

template <class T>
struct Stratum {
  std::string label;
  TwoSample<T> sample;
  std::optional<CovariatePair> covariate;
};

template <class T>
struct StratifiedData {
  std::vector<Stratum<T>> strata;
  WeightSpec weights;
};

// Estimate plus the per-stratum breakdown the reports need.
struct StratifiedEstimate {
  Estimate overall;
  std::vector<double> weights;
  std::vector<double> theta_by_stratum;
  std::vector<StratumSizes> sizes;
};

template <class T>
std::vector<StratumSizes> stratum_sizes(const StratifiedData<T>& data) {
  std::vector<StratumSizes> sizes;
  sizes.reserve(data.strata.size());
  for (const auto& st : data.strata) sizes.push_back({st.sample.n1(), st.sample.n2()});
  return sizes;
}

namespace detail {

inline Estimate finish_plain(double est, double var, std::size_t n1, std::size_t n2,
                             double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DataError("alpha must be in (0,1)");
  Estimate e;
  e.n1 = n1;
  e.n2 = n2;
  e.alpha = alpha;
  e.estimate = est;
  e.se = std::sqrt(var);
  const double c = normal_quantile(1.0 - alpha / 2.0);
  e.ci_lower = e.estimate - c * e.se;
  e.ci_upper = e.estimate + c * e.se;
  if (e.ci_lower < 0.0) {
    e.ci_lower = 0.0;
    e.ci_clamped_lower = true;
  }
  if (e.ci_upper > 1.0) {
    e.ci_upper = 1.0;
    e.ci_clamped_upper = true;
  }
  e.z = (e.estimate - 0.5) / e.se;
  e.p_value = two_sided_p(e.z);
  return e;
}

}  // namespace detail

// Weighted combination of per-stratum win proportions; independence across
// strata makes the variance the weighted sum of per-stratum variances.
template <class T, class Cmp = DefaultCompare<T>>
StratifiedEstimate stratified_wp(const StratifiedData<T>& data, double alpha, Cmp cmp = Cmp{},
                                 bool use_ranks = true) {
  if (data.strata.empty()) throw DataError("no strata");
  StratifiedEstimate out;
  out.sizes = stratum_sizes(data);
  out.weights = strata_weights(out.sizes, data.weights);
  double theta = 0.0, var = 0.0;
  std::size_t tot1 = 0, tot2 = 0;
  for (std::size_t h = 0; h < data.strata.size(); ++h) {
    const auto& st = data.strata[h];
    IndividualProportions pr =
        use_ranks ? win_proportion(st.sample, cmp) : win_proportion_pairwise(st.sample, cmp);
    const double vh = variance_theta(pr);
    if (vh <= 0.0) throw DegenerateError("degenerate stratum: " + st.label);
    out.theta_by_stratum.push_back(pr.theta_hat);
    theta += out.weights[h] * pr.theta_hat;
    var += out.weights[h] * out.weights[h] * vh;
    tot1 += st.sample.n1();
    tot2 += st.sample.n2();
  }
  out.overall = detail::finish_plain(theta, var, tot1, tot2, alpha);
  return out;
}

// Stratify first, adjust once: theta and the covariate mean difference are
// combined across strata with the same weights, then a single regression
// subtraction removes the covariate-imbalance component. One stratum
// reduces this to adjusted_wp exactly.
template <class T, class Cmp = DefaultCompare<T>>
StratifiedEstimate adjusted_stratified_wp(const StratifiedData<T>& data, double alpha,
                                          Cmp cmp = Cmp{}, bool use_ranks = true) {
  if (data.strata.empty()) throw DataError("no strata");
  StratifiedEstimate out;
  out.sizes = stratum_sizes(data);
  out.weights = strata_weights(out.sizes, data.weights);
  double theta = 0.0, var_theta_str = 0.0, diff = 0.0, var_diff = 0.0, cov = 0.0;
  std::size_t tot1 = 0, tot2 = 0;
  for (std::size_t h = 0; h < data.strata.size(); ++h) {
    const auto& st = data.strata[h];
    if (!st.covariate) throw DataError("stratum missing covariate: " + st.label);
    IndividualProportions pr =
        use_ranks ? win_proportion(st.sample, cmp) : win_proportion_pairwise(st.sample, cmp);
    AdjustmentMoments m = adjustment_moments(pr, *st.covariate);
    if (m.var_theta <= 0.0) throw DegenerateError("degenerate stratum: " + st.label);
    out.theta_by_stratum.push_back(m.theta_hat);
    const double w = out.weights[h];
    theta += w * m.theta_hat;
    diff += w * m.mean_diff;
    var_theta_str += w * w * m.var_theta;
    var_diff += w * w * m.var_mean_diff;
    cov += w * w * m.cov_theta_diff;
    tot1 += st.sample.n1();
    tot2 += st.sample.n2();
  }
  if (var_diff <= 0.0) throw DataError("constant covariate across strata");
  out.overall =
      detail::finish_adjusted(theta, var_theta_str, diff, var_diff, cov, tot1, tot2, alpha);
  return out;
}

}  // namespace winprob
