#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "winprob/common.hpp"
#include "winprob/normal.hpp"
#include "winprob/ranks.hpp"

// Crude win proportion, its variance, confidence interval, hypothesis test,
// the win-ratio transform and the NNT.

namespace winprob {

// Placebo responses y1 (n1) and active responses y2 (n2). Missingness is
// resolved upstream; entries here are always comparable values.
template <class T>
struct TwoSample {
  std::vector<T> y1;
  std::vector<T> y2;

  std::size_t n1() const { return y1.size(); }
  std::size_t n2() const { return y2.size(); }
  std::size_t n() const { return y1.size() + y2.size(); }
};

// Individual win proportions: p[j] is the fraction of the placebo group that
// active subject j beats (ties count half), q[i] the mirror image for placebo
// subject i. mean(p) = 1 - mean(q) = theta_hat holds exactly.
struct IndividualProportions {
  std::vector<double> p;  // length n2
  std::vector<double> q;  // length n1
  double theta_hat = 0.0;
};

// Point estimate with normal-theory inference. Used for both theta and the
// derived win ratio. ci bounds are clamped to [0,1] on the theta scale and
// the clamping is recorded.
struct Estimate {
  double estimate = 0.0;
  double se = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  double z = 0.0;
  double p_value = 1.0;
  double alpha = 0.05;
  std::size_t n1 = 0;
  std::size_t n2 = 0;
  bool ci_clamped_lower = false;
  bool ci_clamped_upper = false;
};

struct WinRatioResult {
  double kappa = 1.0;  // +infinity when theta_hat = 1
  double ci_lower = 0.0;
  double ci_upper = 0.0;  // may be +infinity
  Estimate theta;         // the underlying win-probability estimate
};

// Direct O(n1*n2) double loop. This is the permanent oracle implementation;
// it is also the only valid path when the comparator is not a total order
// (universal-tie values from the missing-as-ties option never sort).
template <class T, class Cmp = DefaultCompare<T>>
IndividualProportions win_proportion_pairwise(const TwoSample<T>& s, Cmp cmp = Cmp{}) {
  if (s.y1.empty() || s.y2.empty()) throw DataError("empty sample");
  const std::size_t n1 = s.n1(), n2 = s.n2();
  IndividualProportions pr;
  pr.p.assign(n2, 0.0);
  pr.q.assign(n1, 0.0);
  for (std::size_t j = 0; j < n2; ++j) {
    for (std::size_t i = 0; i < n1; ++i) {
      switch (cmp(s.y1[i], s.y2[j])) {
        case Ordering::Less: pr.p[j] += 1.0; break;
        case Ordering::Equal:
          pr.p[j] += 0.5;
          pr.q[i] += 0.5;
          break;
        case Ordering::Greater: pr.q[i] += 1.0; break;
      }
    }
  }
  double sum_p = 0.0;
  for (double& v : pr.p) {
    v /= static_cast<double>(n1);
    sum_p += v;
  }
  for (double& v : pr.q) v /= static_cast<double>(n2);
  pr.theta_hat = sum_p / static_cast<double>(n2);
  return pr;
}

// Rank form of the win proportion: theta_hat = sum_j (R2j - R~2j) / (n1*n2).
// Identical to the pairwise form in exact arithmetic, ties included.
inline double win_proportion_ranks(const RankVectors& rv, std::size_t n1, std::size_t n2) {
  double sum = 0.0;
  for (std::size_t j = 0; j < n2; ++j) sum += rv.combined[n1 + j] - rv.within_group_2[j];
  return sum / (static_cast<double>(n1) * static_cast<double>(n2));
}

// Placements recovered from ranks: p_j = (R2j - R~2j)/n1, q_i = (R1i - R~1i)/n2.
// Exact with midranks, so this is the production path for total orders.
inline IndividualProportions placements_from_ranks(const RankVectors& rv) {
  const std::size_t n1 = rv.n1, n2 = rv.n2;
  IndividualProportions pr;
  pr.p.resize(n2);
  pr.q.resize(n1);
  for (std::size_t j = 0; j < n2; ++j)
    pr.p[j] = (rv.combined[n1 + j] - rv.within_group_2[j]) / static_cast<double>(n1);
  for (std::size_t i = 0; i < n1; ++i)
    pr.q[i] = (rv.combined[i] - rv.within_group_1[i]) / static_cast<double>(n2);
  double sum = 0.0;
  for (double v : pr.p) sum += v;
  pr.theta_hat = sum / static_cast<double>(n2);
  return pr;
}

template <class T, class Cmp = DefaultCompare<T>>
IndividualProportions win_proportion(const TwoSample<T>& s, Cmp cmp = Cmp{}) {
  if (s.y1.empty() || s.y2.empty()) throw DataError("empty sample");
  return placements_from_ranks(group_ranks(s.y1, s.y2, cmp));
}

// Squared standard error of theta_hat:
//   sum_i (q_i-(1-theta))^2 / (n1(n1-1)) + sum_j (p_j-theta)^2 / (n2(n2-1)).
// Valid with or without group difference, unlike the rank-sum variance.
// A zero result is a legitimate degenerate value, not an error.
inline double variance_theta(const IndividualProportions& pr) {
  const std::size_t n1 = pr.q.size(), n2 = pr.p.size();
  if (n1 < 2 || n2 < 2) throw DataError("variance needs at least 2 per group");
  const double one_minus_theta = 1.0 - pr.theta_hat;
  double sq = 0.0, sp = 0.0;
  for (double q : pr.q) sq += (q - one_minus_theta) * (q - one_minus_theta);
  for (double p : pr.p) sp += (p - pr.theta_hat) * (p - pr.theta_hat);
  return sq / (static_cast<double>(n1) * static_cast<double>(n1 - 1)) +
         sp / (static_cast<double>(n2) * static_cast<double>(n2 - 1));
}

// Normal-theory estimate, CI and two-sided test from placements.
inline Estimate estimate_from_placements(const IndividualProportions& pr, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DataError("alpha must be in (0,1)");
  const double var = variance_theta(pr);
  if (var <= 0.0) throw DegenerateError("degenerate sample: zero variance");
  Estimate e;
  e.n1 = pr.q.size();
  e.n2 = pr.p.size();
  e.alpha = alpha;
  e.estimate = pr.theta_hat;
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

// Test of theta = 1/2 with the Theorem-1 variance. `use_ranks` selects the
// production O(N log N) path; the pairwise path serves comparators that are
// not total orders.
template <class T, class Cmp = DefaultCompare<T>>
Estimate wp_test(const TwoSample<T>& s, double alpha, Cmp cmp = Cmp{}, bool use_ranks = true) {
  IndividualProportions pr = use_ranks ? win_proportion(s, cmp) : win_proportion_pairwise(s, cmp);
  return estimate_from_placements(pr, alpha);
}

// kappa = theta/(1-theta); CI endpoints are the same monotone map applied to
// the theta CI, never computed on the kappa scale directly.
inline WinRatioResult win_ratio(const Estimate& est) {
  auto f = [](double x) {
    if (x >= 1.0) return std::numeric_limits<double>::infinity();
    return x / (1.0 - x);
  };
  WinRatioResult wr;
  wr.theta = est;
  wr.kappa = f(est.estimate);
  wr.ci_lower = f(est.ci_lower);
  wr.ci_upper = f(est.ci_upper);
  return wr;
}

// NNT = ceil(1/(2*theta-1)) for theta in (0.5, 1]. The reciprocal is snapped
// to the nearest integer when within 1e-8 of one, so exact-integer cases
// (for example theta = 21/41 giving 41) never round up twice.
inline long long nnt(double theta) {
  if (!(theta > 0.5 && theta <= 1.0)) throw DataError("no benefit: NNT undefined");
  double v = 1.0 / (2.0 * theta - 1.0);
  double nearest = std::round(v);
  if (std::fabs(v - nearest) < 1e-8 * std::max(1.0, std::fabs(v))) v = nearest;
  return static_cast<long long>(std::ceil(v));
}

}  // namespace winprob
