#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <vector>

#include "winprob/common.hpp"

namespace winprob {

// Midranks of a sequence under a three-way comparator. Equal values receive
// the arithmetic mean of the integer ranks they span, so the rank total is
// always n(n+1)/2. Comparator-based on purpose: composite endpoints rank
// through the same code path without numeric coercion.
template <class T, class Cmp = DefaultCompare<T>>
std::vector<double> midranks(const std::vector<T>& values, Cmp cmp = Cmp{}) {
  const std::size_t n = values.size();
  if (n == 0) throw DataError("empty sample");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Stable so equal values keep input order internally; the output does not
  // depend on it, but determinism aids debugging.
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return cmp(values[i], values[j]) == Ordering::Less;
  });

  std::vector<double> ranks(n);
  std::size_t start = 0;
  while (start < n) {
    std::size_t stop = start + 1;  // one past the tie run
    while (stop < n && cmp(values[order[start]], values[order[stop]]) == Ordering::Equal) ++stop;
    // Integer ranks start+1 .. stop span the run; their mean is below.
    double rank = 0.5 * static_cast<double>(start + 1 + stop);
    for (std::size_t k = start; k < stop; ++k) ranks[order[k]] = rank;
    start = stop;
  }
  return ranks;
}

// Combined-sample and within-group ranks for a two-group sample, together
// with the rank summaries used by the rank-sum statistics.
struct RankVectors {
  std::vector<double> combined;  // pooled sample, group 1 entries then group 2
  std::vector<double> within_group_1;
  std::vector<double> within_group_2;
  double rbar1 = 0.0;   // mean combined rank of group 1
  double rbar2 = 0.0;   // mean combined rank of group 2
  double rbar_n = 0.0;  // mean of all pooled ranks, always (N+1)/2
  double var_r = 0.0;   // pooled rank variance, N-1 denominator
  std::size_t n1 = 0;
  std::size_t n2 = 0;
};

template <class T, class Cmp = DefaultCompare<T>>
RankVectors group_ranks(const std::vector<T>& y1, const std::vector<T>& y2, Cmp cmp = Cmp{}) {
  if (y1.empty() || y2.empty()) throw DataError("empty sample");
  const std::size_t n1 = y1.size(), n2 = y2.size();
  const std::size_t n = n1 + n2;

  std::vector<T> pooled;
  pooled.reserve(n);
  pooled.insert(pooled.end(), y1.begin(), y1.end());
  pooled.insert(pooled.end(), y2.begin(), y2.end());

  RankVectors rv;
  rv.n1 = n1;
  rv.n2 = n2;
  rv.combined = midranks(pooled, cmp);
  rv.within_group_1 = midranks(y1, cmp);
  rv.within_group_2 = midranks(y2, cmp);

  double sum1 = 0.0, sum2 = 0.0;
  for (std::size_t i = 0; i < n1; ++i) sum1 += rv.combined[i];
  for (std::size_t j = 0; j < n2; ++j) sum2 += rv.combined[n1 + j];
  rv.rbar1 = sum1 / static_cast<double>(n1);
  rv.rbar2 = sum2 / static_cast<double>(n2);
  rv.rbar_n = (sum1 + sum2) / static_cast<double>(n);

  if (n >= 2) {
    double ss = 0.0;
    for (double r : rv.combined) ss += (r - rv.rbar_n) * (r - rv.rbar_n);
    rv.var_r = ss / static_cast<double>(n - 1);
  }
  return rv;
}

}  // namespace winprob
