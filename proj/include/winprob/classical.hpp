#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "winprob/adjust.hpp"
#include "winprob/common.hpp"
#include "winprob/normal.hpp"
#include "winprob/ranks.hpp"
#include "winprob/wincore.hpp"

// Rank-based comparator procedures: Wilcoxon rank-sum, Fligner-Policello,
// Hodges-Lehmann shift, regression on ranks, van Elteren, rank ANCOVA,
// plus the diagnostic statistic ratios relating them to the win-proportion
// tests.

namespace winprob {

struct TestResult {
  double statistic = 0.0;  // z value
  double p_value = 1.0;
  std::string method;
  std::optional<double> rank_sum;      // W of the active group, where defined
  std::optional<double> residual_sum;  // active-group residual-rank sum
  std::optional<double> shift;         // Hodges-Lehmann location shift
};

namespace detail {

inline TestResult make_test(double z, std::string method) {
  TestResult t;
  t.statistic = z;
  t.p_value = two_sided_p(z);
  t.method = std::move(method);
  return t;
}

}  // namespace detail

// Rank-sum test with midranks; the rank variance is estimated from the
// pooled sample (N-1 denominator), which is valid under the null of equal
// distributions, ties included.
template <class T, class Cmp = DefaultCompare<T>>
TestResult wilcoxon_test(const TwoSample<T>& s, Cmp cmp = Cmp{}) {
  if (s.n1() < 2 || s.n2() < 2) throw DataError("variance needs at least 2 per group");
  RankVectors rv = group_ranks(s.y1, s.y2, cmp);
  if (rv.var_r <= 0.0) throw DegenerateError("all values tied");
  const double n1 = static_cast<double>(s.n1());
  const double n2 = static_cast<double>(s.n2());
  const double n = n1 + n2;
  const double w = rv.rbar2 * n2;
  const double z = (w - n2 * (n + 1.0) / 2.0) / std::sqrt(n1 * n2 / n * rv.var_r);
  TestResult t = detail::make_test(z, "wilcoxon");
  t.rank_sum = w;
  return t;
}

// Ratio of the squared win-proportion z to the squared rank-sum z under the
// null. The ratio does not depend on the shared numerator, so it is
// computed from the variance forms and cross-checked against the direct
// quotient whenever that quotient is defined.
template <class T, class Cmp = DefaultCompare<T>>
double statistic_ratio_wilcoxon(const TwoSample<T>& s, Cmp cmp = Cmp{}) {
  if (s.n1() < 2 || s.n2() < 2) throw DataError("variance needs at least 2 per group");
  RankVectors rv = group_ranks(s.y1, s.y2, cmp);
  if (rv.var_r <= 0.0) throw DegenerateError("all values tied");
  IndividualProportions pr = placements_from_ranks(rv);
  const double var = variance_theta(pr);
  if (var <= 0.0) throw DegenerateError("degenerate sample: zero variance");
  const double n1 = static_cast<double>(s.n1());
  const double n2 = static_cast<double>(s.n2());
  const double n = n1 + n2;
  const double ratio = rv.var_r / (n * n1 * n2 * var);
  if (pr.theta_hat != 0.5) {
    const double z_theta = (pr.theta_hat - 0.5) / std::sqrt(var);
    const double z_rank = (pr.theta_hat - 0.5) * n1 * n2 / std::sqrt(n1 * n2 / n * rv.var_r);
    const double direct = (z_theta * z_theta) / (z_rank * z_rank);
    if (std::fabs(direct - ratio) > 1e-10 * std::max(1.0, ratio))
      throw std::logic_error("statistic ratio cross-check failed");
  }
  return ratio;
}

// Median of all n1*n2 pairwise differences y2 - y1; even counts average the
// two central order statistics.
inline double hodges_lehmann(const TwoSample<double>& s) {
  if (s.y1.empty() || s.y2.empty()) throw DataError("empty sample");
  std::vector<double> diffs;
  diffs.reserve(s.n1() * s.n2());
  for (double b : s.y2)
    for (double a : s.y1) diffs.push_back(b - a);
  const std::size_t m = diffs.size();
  if (m % 2 == 1) {
    std::nth_element(diffs.begin(), diffs.begin() + m / 2, diffs.end());
    return diffs[m / 2];
  }
  std::nth_element(diffs.begin(), diffs.begin() + m / 2, diffs.end());
  const double upper = diffs[m / 2];
  const double lower = *std::max_element(diffs.begin(), diffs.begin() + m / 2);
  return 0.5 * (lower + upper);
}

namespace detail {

// Squared denominator of the placement z with 1/n^2 coefficients; shared by
// the Fligner-Policello statistic which adds theta(1-theta)/(n1*n2) to it.
inline double placement_denom_sq(const IndividualProportions& pr) {
  const double n1 = static_cast<double>(pr.q.size());
  const double n2 = static_cast<double>(pr.p.size());
  double sp = 0.0, sq = 0.0;
  for (double p : pr.p) sp += (p - pr.theta_hat) * (p - pr.theta_hat);
  const double q_mean = 1.0 - pr.theta_hat;
  for (double q : pr.q) sq += (q - q_mean) * (q - q_mean);
  return sp / (n2 * n2) + sq / (n1 * n1);
}

}  // namespace detail

template <class T, class Cmp = DefaultCompare<T>>
TestResult fligner_policello(const TwoSample<T>& s, Cmp cmp = Cmp{}, bool use_ranks = true) {
  if (s.n1() < 2 || s.n2() < 2) throw DataError("variance needs at least 2 per group");
  IndividualProportions pr = use_ranks ? win_proportion(s, cmp) : win_proportion_pairwise(s, cmp);
  const double n1 = static_cast<double>(s.n1());
  const double n2 = static_cast<double>(s.n2());
  const double denom_sq =
      detail::placement_denom_sq(pr) + pr.theta_hat * (1.0 - pr.theta_hat) / (n1 * n2);
  if (denom_sq <= 0.0) throw DegenerateError("degenerate sample");
  return detail::make_test((pr.theta_hat - 0.5) / std::sqrt(denom_sq), "fligner-policello");
}

// Placement z with biased (1/n^2) variance coefficients. Its denominator is
// never larger than the Fligner-Policello one, so its squared statistic
// dominates on every sample.
template <class T, class Cmp = DefaultCompare<T>>
TestResult z0_statistic(const TwoSample<T>& s, Cmp cmp = Cmp{}, bool use_ranks = true) {
  if (s.n1() < 2 || s.n2() < 2) throw DataError("variance needs at least 2 per group");
  IndividualProportions pr = use_ranks ? win_proportion(s, cmp) : win_proportion_pairwise(s, cmp);
  const double denom_sq = detail::placement_denom_sq(pr);
  if (denom_sq <= 0.0) throw DegenerateError("degenerate sample");
  return detail::make_test((pr.theta_hat - 0.5) / std::sqrt(denom_sq), "z0");
}

namespace detail {

struct RankResiduals {
  std::vector<double> residuals;  // pooled order: group 1 then group 2
  double active_sum = 0.0;        // sum over the active group
  double var_res = 0.0;           // var(R) - cov(R,X)^2/var(X), exact
  double cov_rx = 0.0;
  double var_x = 0.0;
};

// Residuals of pooled midranks after a simple linear fit on the pooled
// covariate. The fitted slope removes exactly cov^2/var from the rank
// variance, and the residuals sum to zero.
inline RankResiduals rank_residuals(const RankVectors& rv, const std::vector<double>& x) {
  if (x.size() != rv.combined.size()) throw DataError("covariate length mismatch");
  RankResiduals rr;
  rr.var_x = sample_variance(x);
  if (rr.var_x <= 0.0) throw DataError("constant covariate");
  rr.cov_rx = sample_covariance(rv.combined, x);
  const double slope = rr.cov_rx / rr.var_x;
  const double xbar = mean(x);
  rr.residuals.resize(x.size());
  for (std::size_t k = 0; k < x.size(); ++k)
    rr.residuals[k] = (rv.combined[k] - rv.rbar_n) - (x[k] - xbar) * slope;
  for (std::size_t j = rv.n1; j < x.size(); ++j) rr.active_sum += rr.residuals[j];
  rr.var_res = rv.var_r - rr.cov_rx * slope;
  return rr;
}

inline std::vector<double> pooled_covariate(const CovariatePair& cov) {
  std::vector<double> x;
  x.reserve(cov.x1.size() + cov.x2.size());
  x.insert(x.end(), cov.x1.begin(), cov.x1.end());
  x.insert(x.end(), cov.x2.begin(), cov.x2.end());
  return x;
}

}  // namespace detail

// Wilcoxon machinery applied to rank residuals after regressing pooled
// ranks on the pooled covariate. The active residual sum equals
// n1*n2*(theta-1/2) minus the imbalance term (n1*n2/N)(xbar2-xbar1)*slope,
// which is verified here as an internal invariant.
template <class T, class Cmp = DefaultCompare<T>>
TestResult regression_on_ranks(const TwoSample<T>& s, const CovariatePair& cov, Cmp cmp = Cmp{}) {
  if (s.n1() < 2 || s.n2() < 2) throw DataError("variance needs at least 2 per group");
  if (cov.x1.size() != s.n1() || cov.x2.size() != s.n2())
    throw DataError("covariate length mismatch");
  RankVectors rv = group_ranks(s.y1, s.y2, cmp);
  detail::RankResiduals rr = detail::rank_residuals(rv, detail::pooled_covariate(cov));
  if (rr.var_res <= 0.0) throw DegenerateError("degenerate sample: zero variance");
  const double n1 = static_cast<double>(s.n1());
  const double n2 = static_cast<double>(s.n2());
  const double n = n1 + n2;
  const double theta = win_proportion_ranks(rv, s.n1(), s.n2());
  const double expected = n1 * n2 * (theta - 0.5) -
                          n1 * n2 / n * (mean(cov.x2) - mean(cov.x1)) * rr.cov_rx / rr.var_x;
  if (std::fabs(rr.active_sum - expected) > 1e-8 * std::max(1.0, n1 * n2))
    throw std::logic_error("residual-sum invariant failed");
  const double z = rr.active_sum / std::sqrt(n1 * n2 / n * rr.var_res);
  TestResult t = detail::make_test(z, "rank-regression");
  t.residual_sum = rr.active_sum;
  return t;
}

// Stratified rank-sum test combining per-stratum rank sums with
// coefficients 1/(n_h+1).
template <class T, class Cmp = DefaultCompare<T>>
TestResult van_elteren(const StratifiedData<T>& data, Cmp cmp = Cmp{}) {
  if (data.strata.empty()) throw DataError("no strata");
  double num = 0.0, denom_sq = 0.0;
  for (const auto& st : data.strata) {
    if (st.sample.n1() < 2 || st.sample.n2() < 2)
      throw DataError("variance needs at least 2 per group");
    RankVectors rv = group_ranks(st.sample.y1, st.sample.y2, cmp);
    if (rv.var_r <= 0.0) throw DegenerateError("degenerate stratum: " + st.label);
    const double n1 = static_cast<double>(st.sample.n1());
    const double n2 = static_cast<double>(st.sample.n2());
    const double n = n1 + n2;
    const double coeff = 1.0 / (n + 1.0);
    num += coeff * (rv.rbar2 * n2 - n2 * (n + 1.0) / 2.0);
    denom_sq += coeff * coeff * n1 * n2 / n * rv.var_r;
  }
  if (denom_sq <= 0.0) throw DegenerateError("degenerate sample: zero variance");
  return detail::make_test(num / std::sqrt(denom_sq), "van-elteren");
}

// Ratio of the squared stratified win-proportion z (van Elteren weights) to
// the squared van Elteren z under the null. Both statistics share their
// numerator, so the ratio reduces to a variance comparison; the reduction
// is cross-checked against the direct quotient when defined.
template <class T, class Cmp = DefaultCompare<T>>
double statistic_ratio_van_elteren(const StratifiedData<T>& data, Cmp cmp = Cmp{}) {
  if (data.strata.empty()) throw DataError("no strata");
  double num_rank_var = 0.0, num_theta_var = 0.0, shared = 0.0;
  for (const auto& st : data.strata) {
    if (st.sample.n1() < 2 || st.sample.n2() < 2)
      throw DataError("variance needs at least 2 per group");
    RankVectors rv = group_ranks(st.sample.y1, st.sample.y2, cmp);
    if (rv.var_r <= 0.0) throw DegenerateError("degenerate stratum: " + st.label);
    IndividualProportions pr = placements_from_ranks(rv);
    const double var_theta = variance_theta(pr);
    if (var_theta <= 0.0) throw DegenerateError("degenerate stratum: " + st.label);
    const double n1 = static_cast<double>(st.sample.n1());
    const double n2 = static_cast<double>(st.sample.n2());
    const double n = n1 + n2;
    const double w0 = n1 * n2 / (n + 1.0);
    num_rank_var += w0 * w0 * rv.var_r / (n * n1 * n2);
    num_theta_var += w0 * w0 * var_theta;
    shared += w0 * (pr.theta_hat - 0.5);
  }
  const double ratio = num_theta_var == 0.0 ? 0.0 : num_rank_var / num_theta_var;
  if (shared != 0.0) {
    StratifiedData<T> copy = data;
    copy.weights = {WeightScheme::VanElteren, {}};
    const double z_str = stratified_wp(copy, 0.05, cmp).overall.z;
    const double z_elt = van_elteren(data, cmp).statistic;
    const double direct = (z_str * z_str) / (z_elt * z_elt);
    if (std::fabs(direct - ratio) > 1e-10 * std::max(1.0, ratio))
      throw std::logic_error("statistic ratio cross-check failed");
  }
  return ratio;
}

// Van Elteren applied to per-stratum rank residuals: each stratum regresses
// its pooled ranks on its pooled covariate, then the residual rank sums are
// combined with coefficients 1/(n_h+1).
template <class T, class Cmp = DefaultCompare<T>>
TestResult rank_ancova(const StratifiedData<T>& data, Cmp cmp = Cmp{}) {
  if (data.strata.empty()) throw DataError("no strata");
  double num = 0.0, denom_sq = 0.0;
  for (const auto& st : data.strata) {
    if (st.sample.n1() < 2 || st.sample.n2() < 2)
      throw DataError("variance needs at least 2 per group");
    if (!st.covariate) throw DataError("stratum missing covariate: " + st.label);
    RankVectors rv = group_ranks(st.sample.y1, st.sample.y2, cmp);
    const std::vector<double> x = detail::pooled_covariate(*st.covariate);
    if (x.size() != st.sample.n()) throw DataError("covariate length mismatch");
    if (sample_variance(x) <= 0.0) throw DataError("constant covariate in stratum: " + st.label);
    detail::RankResiduals rr = detail::rank_residuals(rv, x);
    if (rr.var_res <= 0.0) throw DegenerateError("degenerate stratum: " + st.label);
    const double n1 = static_cast<double>(st.sample.n1());
    const double n2 = static_cast<double>(st.sample.n2());
    const double n = n1 + n2;
    const double coeff = 1.0 / (n + 1.0);
    num += coeff * rr.active_sum;
    denom_sq += coeff * coeff * n1 * n2 / n * rr.var_res;
  }
  if (denom_sq <= 0.0) throw DegenerateError("degenerate sample: zero variance");
  return detail::make_test(num / std::sqrt(denom_sq), "rank-ancova");
}

// Same statistic assembled from normalized weights and per-stratum win
// proportions instead of raw residual sums. Dual form kept for validation:
// it must agree with rank_ancova to floating-point accuracy.
template <class T, class Cmp = DefaultCompare<T>>
double rank_ancova_weight_form(const StratifiedData<T>& data, Cmp cmp = Cmp{}) {
  if (data.strata.empty()) throw DataError("no strata");
  std::vector<double> w0(data.strata.size());
  double w0_sum = 0.0;
  for (std::size_t h = 0; h < data.strata.size(); ++h) {
    const auto& st = data.strata[h];
    const double n1 = static_cast<double>(st.sample.n1());
    const double n2 = static_cast<double>(st.sample.n2());
    w0[h] = n1 * n2 / (n1 + n2 + 1.0);
    w0_sum += w0[h];
  }
  double num = 0.0, denom_sq = 0.0;
  for (std::size_t h = 0; h < data.strata.size(); ++h) {
    const auto& st = data.strata[h];
    if (!st.covariate) throw DataError("stratum missing covariate: " + st.label);
    RankVectors rv = group_ranks(st.sample.y1, st.sample.y2, cmp);
    detail::RankResiduals rr = detail::rank_residuals(rv, detail::pooled_covariate(*st.covariate));
    const double n1 = static_cast<double>(st.sample.n1());
    const double n2 = static_cast<double>(st.sample.n2());
    const double n = n1 + n2;
    const double w = w0[h] / w0_sum;
    const double theta = win_proportion_ranks(rv, st.sample.n1(), st.sample.n2());
    const double diff = mean(st.covariate->x2) - mean(st.covariate->x1);
    num += w * (theta - 0.5) - w / n * diff * rr.cov_rx / rr.var_x;
    denom_sq += w * w / (n * n1 * n2) * rr.var_res;
  }
  if (denom_sq <= 0.0) throw DegenerateError("degenerate sample: zero variance");
  return num / std::sqrt(denom_sq);
}

}  // namespace winprob
