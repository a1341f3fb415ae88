#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "winprob/common.hpp"
#include "winprob/normal.hpp"
#include "winprob/rng.hpp"

// Closed-form win probabilities for analytically tractable distribution
// pairs. These are the ground truth the simulator and the tests converge
// against. Also hosts the Monte-Carlo estimator of the two asymptotic
// variance components of the win proportion.

namespace winprob {

struct Normal {
  double mean = 0.0;
  double sd = 1.0;
};

// Uniform on (delta, a + delta): width a, shift delta.
struct UniformShift {
  double a = 1.0;
  double delta = 0.0;
};

struct Exponential {
  double rate = 1.0;
};

struct Bernoulli {
  double p = 0.5;
};

// Probabilities over ordered categories 0, 1, ..., k-1.
struct OrdinalCategorical {
  std::vector<double> probs;
};

using DistSpec = std::variant<Normal, UniformShift, Exponential, Bernoulli, OrdinalCategorical>;

inline void validate(const DistSpec& d) {
  if (const auto* n = std::get_if<Normal>(&d)) {
    if (!(n->sd > 0.0)) throw DataError("normal sd must be positive");
  } else if (const auto* u = std::get_if<UniformShift>(&d)) {
    if (!(u->a > 0.0)) throw DataError("uniform width must be positive");
  } else if (const auto* e = std::get_if<Exponential>(&d)) {
    if (!(e->rate > 0.0)) throw DataError("exponential rate must be positive");
  } else if (const auto* b = std::get_if<Bernoulli>(&d)) {
    if (!(b->p >= 0.0 && b->p <= 1.0)) throw DataError("bernoulli p must be in [0,1]");
  } else if (const auto* c = std::get_if<OrdinalCategorical>(&d)) {
    double s = 0.0;
    for (double p : c->probs) {
      if (p < 0.0) throw DataError("categorical probabilities must be nonnegative");
      s += p;
    }
    if (std::fabs(s - 1.0) > 1e-9) throw DataError("categorical probabilities must sum to 1");
  }
}

// P(eta > xi) for xi ~ N(m1, s1^2), eta ~ N(m2, s2^2).
inline double wp_normal(double m1, double s1, double m2, double s2) {
  if (!(s1 > 0.0 && s2 > 0.0)) throw DataError("normal sd must be positive");
  return normal_cdf((m2 - m1) / std::sqrt(s1 * s1 + s2 * s2));
}

// xi ~ U(0,a), eta ~ U(delta, a+delta): quadratic in the shift,
// 1/2 at delta=0 and 1 at delta=a.
inline double wp_uniform_shift(double a, double delta) {
  if (!(a > 0.0)) throw DataError("uniform width must be positive");
  if (!(delta >= 0.0 && delta <= a)) throw DataError("shift must lie in [0, a]");
  return 0.5 + (2.0 * a - delta) * delta / (2.0 * a * a);
}

// Exponential survival times: win probability lambda/(lambda+phi) and the
// win ratio is the inverse hazard ratio lambda/phi.
inline std::pair<double, double> wp_exponential(double lambda, double phi) {
  if (!(lambda > 0.0 && phi > 0.0)) throw DataError("exponential rate must be positive");
  return {lambda / (lambda + phi), lambda / phi};
}

// Proportional hazards with ratio hr: theta = 1/(1+hr), kappa = 1/hr.
inline std::pair<double, double> wp_prop_hazards(double hr) {
  if (!(hr > 0.0)) throw DataError("hazard ratio must be positive");
  return {1.0 / (1.0 + hr), 1.0 / hr};
}

inline double wp_bernoulli(double p, double q) {
  if (!(p >= 0.0 && p <= 1.0 && q >= 0.0 && q <= 1.0)) throw DataError("bernoulli p must be in [0,1]");
  // Exact enumeration of the four joint outcomes collapses to this.
  return 0.5 * (p - q) + 0.5;
}

inline double wp_ordinal_categorical(const std::vector<double>& probs1,
                                     const std::vector<double>& probs2) {
  if (probs1.size() != probs2.size()) throw DataError("category counts differ");
  double theta = 0.0;
  for (std::size_t j = 0; j < probs2.size(); ++j) {
    for (std::size_t i = 0; i < j; ++i) theta += probs2[j] * probs1[i];
    theta += 0.5 * probs2[j] * probs1[j];
  }
  return theta;
}

// Closed-form theta for a spec pair, where one exists. Mixed families other
// than the ones below are not needed by any consumer and are rejected.
inline double theta_closed_form(const DistSpec& d1, const DistSpec& d2) {
  validate(d1);
  validate(d2);
  if (const auto* n1 = std::get_if<Normal>(&d1)) {
    if (const auto* n2 = std::get_if<Normal>(&d2)) return wp_normal(n1->mean, n1->sd, n2->mean, n2->sd);
  }
  if (const auto* u1 = std::get_if<UniformShift>(&d1)) {
    if (const auto* u2 = std::get_if<UniformShift>(&d2)) {
      if (u1->a != u2->a) throw DataError("uniform widths differ: no closed form");
      if (u2->delta >= u1->delta) return wp_uniform_shift(u1->a, u2->delta - u1->delta);
      return 1.0 - wp_uniform_shift(u1->a, u1->delta - u2->delta);
    }
  }
  if (const auto* e1 = std::get_if<Exponential>(&d1)) {
    if (const auto* e2 = std::get_if<Exponential>(&d2)) return wp_exponential(e1->rate, e2->rate).first;
  }
  if (const auto* b1 = std::get_if<Bernoulli>(&d1)) {
    if (const auto* b2 = std::get_if<Bernoulli>(&d2)) return wp_bernoulli(b2->p, b1->p);
  }
  if (const auto* c1 = std::get_if<OrdinalCategorical>(&d1)) {
    if (const auto* c2 = std::get_if<OrdinalCategorical>(&d2))
      return wp_ordinal_categorical(c1->probs, c2->probs);
  }
  throw DataError("no closed form for this distribution pair");
}

// Inverse CDF of a spec; the one sampling transform shared by the whole
// simulator so that copula-correlated draws stay on a single code path.
inline double quantile_of(const DistSpec& d, double u) {
  struct Q {
    double u;
    double operator()(const Normal& n) const { return n.mean + n.sd * normal_quantile(u); }
    double operator()(const UniformShift& us) const { return us.delta + us.a * u; }
    double operator()(const Exponential& e) const { return -std::log1p(-u) / e.rate; }
    double operator()(const Bernoulli& b) const { return u < 1.0 - b.p ? 0.0 : 1.0; }
    double operator()(const OrdinalCategorical& c) const {
      double cum = 0.0;
      for (std::size_t k = 0; k < c.probs.size(); ++k) {
        cum += c.probs[k];
        if (u < cum) return static_cast<double>(k);
      }
      return static_cast<double>(c.probs.size() - 1);
    }
  };
  return std::visit(Q{u}, d);
}

inline double sample_draw(const DistSpec& d, std::mt19937_64& eng) {
  return quantile_of(d, uniform_open(eng));
}

struct VarianceComponents {
  double sigma10_sq = 0.0;  // Cov(1(xi<eta), 1(xi<eta')): shared placebo draw
  double sigma01_sq = 0.0;  // Cov(1(xi<eta), 1(xi'<eta)): shared active draw
  double theta = 0.0;
};

// Monte-Carlo estimate via independent quadruples (xi, xi', eta, eta').
// The win kernel counts ties as half so discrete specs are covered too.
inline VarianceComponents variance_components_mc(const DistSpec& d1, const DistSpec& d2,
                                                 std::uint64_t draws, std::uint64_t seed) {
  validate(d1);
  validate(d2);
  auto h = [](double xi, double eta) { return xi < eta ? 1.0 : (xi == eta ? 0.5 : 0.0); };
  double sum_theta = 0.0, sum10 = 0.0, sum01 = 0.0;
  std::mt19937_64 eng = replicate_rng(seed, 0);
  for (std::uint64_t k = 0; k < draws; ++k) {
    double xi = sample_draw(d1, eng);
    double xi2 = sample_draw(d1, eng);
    double eta = sample_draw(d2, eng);
    double eta2 = sample_draw(d2, eng);
    double h11 = h(xi, eta), h12 = h(xi, eta2), h21 = h(xi2, eta), h22 = h(xi2, eta2);
    sum_theta += 0.5 * (h11 + h22);
    sum10 += h11 * h12;  // shared xi
    sum01 += h11 * h21;  // shared eta
  }
  const double n = static_cast<double>(draws);
  VarianceComponents vc;
  vc.theta = sum_theta / n;
  vc.sigma10_sq = sum10 / n - vc.theta * vc.theta;
  vc.sigma01_sq = sum01 / n - vc.theta * vc.theta;
  return vc;
}

}  // namespace winprob
