#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace winprob {

// Outcome of a three-way ordinal comparison.
enum class Ordering { Less, Equal, Greater };

// Invalid or inconsistent input data (bad CSV rows, impossible records,
// malformed configuration values). CLI maps this to exit code 2.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Statistics that cannot be formed on the given sample (zero variance,
// zero denominator). CLI maps this to exit code 3.
class DegenerateError : public std::runtime_error {
 public:
  explicit DegenerateError(const std::string& what) : std::runtime_error(what) {}
};

// Finite decimal with optional sign/exponent; the whole field must parse.
// '.' is the only decimal separator and there are no digit group marks.
inline std::optional<double> parse_double_strict(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, v, std::chars_format::general);
  if (ec != std::errc{} || ptr != last || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline double mean(const std::vector<double>& v) {
  if (v.empty()) throw DataError("empty sample");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Sample variance with n-1 denominator; every moment in this library uses
// the unbiased convention unless a formula states otherwise.
inline double sample_variance(const std::vector<double>& v) {
  if (v.size() < 2) throw DataError("need at least 2 values for variance");
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

inline double sample_covariance(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw DataError("length mismatch in covariance");
  if (a.size() < 2) throw DataError("need at least 2 values for covariance");
  const double ma = mean(a), mb = mean(b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - ma) * (b[i] - mb);
  return s / static_cast<double>(a.size() - 1);
}

// Default three-way comparator. Ordinal equality is exact by construction,
// so no floating tolerance is ever used here.
template <class T>
struct DefaultCompare {
  Ordering operator()(const T& a, const T& b) const {
    if (a < b) return Ordering::Less;
    if (b < a) return Ordering::Greater;
    return Ordering::Equal;
  }
};

}  // namespace winprob
