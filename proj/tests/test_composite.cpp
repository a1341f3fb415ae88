#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <vector>

#include "winprob/composite.hpp"
#include "winprob/rng.hpp"
#include "winprob/wincore.hpp"

using namespace winprob;

namespace {

SubjectRecord alive(std::string id, double change) {
  SubjectRecord r;
  r.id = std::move(id);
  r.change_at_T = change;
  return r;
}

SubjectRecord death(std::string id, std::optional<double> time = std::nullopt,
                    std::optional<double> last = std::nullopt) {
  SubjectRecord r;
  r.id = std::move(id);
  r.died_before_T = true;
  r.death_time = time;
  r.last_change_alive = last;
  return r;
}

SubjectRecord missing(std::string id) {
  SubjectRecord r;
  r.id = std::move(id);
  r.missing_not_death = true;
  return r;
}

}  // namespace

TEST_CASE("all deaths equal: deaths tie each other and lose to any survivor") {
  auto vals = build_composite({death("d1", 3.0), death("d2", 150.0), alive("a1", -9.5)},
                              DeathStrategy::AllDeathsEqual);
  CompositeCompare cmp;
  REQUIRE(cmp(vals[0], vals[1]) == Ordering::Equal);
  REQUIRE(cmp(vals[0], vals[2]) == Ordering::Less);   // even the worst change beats death
  REQUIRE(cmp(vals[2], vals[1]) == Ordering::Greater);
}

TEST_CASE("deaths ordered by last observed value") {
  auto vals = build_composite(
      {death("d1", std::nullopt, 5.0), death("d2", std::nullopt, -3.0), alive("a1", -20.0)},
      DeathStrategy::DeathsByLastValue);
  CompositeCompare cmp;
  REQUIRE(cmp(vals[0], vals[1]) == Ordering::Greater);  // higher change before dying ranks higher
  REQUIRE(cmp(vals[0], vals[2]) == Ordering::Less);     // but every death stays below survivors
  REQUIRE(cmp(vals[1], vals[2]) == Ordering::Less);

  auto tied = build_composite({death("d1", std::nullopt, 2.0), death("d2", std::nullopt, 2.0)},
                              DeathStrategy::DeathsByLastValue);
  REQUIRE(cmp(tied[0], tied[1]) == Ordering::Equal);  // equal last values are genuine ties
}

TEST_CASE("deaths ordered by survival time") {
  auto vals = build_composite({death("d1", 30.0), death("d2", 200.0), alive("a1", 0.0)},
                              DeathStrategy::DeathsBySurvivalTime);
  CompositeCompare cmp;
  REQUIRE(cmp(vals[1], vals[0]) == Ordering::Greater);  // dying later ranks higher
  REQUIRE(cmp(vals[1], vals[2]) == Ordering::Less);
}

TEST_CASE("record invariant violations name the subject") {
  SubjectRecord bad1 = death("s1");
  bad1.change_at_T = 1.0;
  REQUIRE_THROWS_WITH(build_composite({bad1}, DeathStrategy::AllDeathsEqual),
                      "change recorded for dead subject: s1");

  SubjectRecord bad2 = alive("s2", 0.0);
  bad2.death_time = 5.0;
  REQUIRE_THROWS_WITH(build_composite({bad2}, DeathStrategy::AllDeathsEqual),
                      "death time without death: s2");

  REQUIRE_THROWS_WITH(build_composite({death("s3", -1.0)}, DeathStrategy::DeathsBySurvivalTime),
                      "negative death time: s3");

  REQUIRE_THROWS_WITH(build_composite({missing("s4")}, DeathStrategy::AllDeathsEqual),
                      "missing response: s4");

  SubjectRecord no_change;
  no_change.id = "s5";
  REQUIRE_THROWS_WITH(build_composite({no_change}, DeathStrategy::AllDeathsEqual),
                      "missing response: s5");

  REQUIRE_THROWS_WITH(build_composite({death("s6", 4.0)}, DeathStrategy::DeathsByLastValue),
                      "death lacks last value: s6");

  REQUIRE_THROWS_WITH(
      build_composite({death("s7", std::nullopt, 1.0)}, DeathStrategy::DeathsBySurvivalTime),
      "death lacks death time: s7");
}

TEST_CASE("missing flag overrides a recorded change under the ties option") {
  SubjectRecord r = alive("m1", 4.2);
  r.missing_not_death = true;
  auto vals = build_composite({r, alive("a1", -100.0), death("d1")},
                              DeathStrategy::AllDeathsEqual, true);
  REQUIRE(vals[0].tie_with_all);
  CompositeCompare cmp;
  REQUIRE(cmp(vals[0], vals[1]) == Ordering::Equal);
  REQUIRE(cmp(vals[0], vals[2]) == Ordering::Equal);
  REQUIRE_FALSE(rankable(vals));
  REQUIRE(rankable({vals[1], vals[2]}));

  // Without the ties option the same flagged record is an error.
  REQUIRE_THROWS_WITH(build_composite({r}, DeathStrategy::AllDeathsEqual, false),
                      "missing response: m1");
}

TEST_CASE("zero deaths and zero missing reproduce the raw analysis exactly") {
  const std::vector<double> y1{0.4, -1.2, 3.0, 3.0, 0.4};
  const std::vector<double> y2{1.1, 0.4, -2.5, 3.0};
  std::vector<SubjectRecord> r1, r2;
  for (std::size_t i = 0; i < y1.size(); ++i) r1.push_back(alive("p" + std::to_string(i), y1[i]));
  for (std::size_t j = 0; j < y2.size(); ++j) r2.push_back(alive("a" + std::to_string(j), y2[j]));

  TwoSample<CompositeValue> comp{build_composite(r1, DeathStrategy::AllDeathsEqual),
                                 build_composite(r2, DeathStrategy::AllDeathsEqual)};
  TwoSample<double> raw{y1, y2};

  Estimate ce = wp_test(comp, 0.05, CompositeCompare{});
  Estimate re = wp_test(raw, 0.05);
  REQUIRE(ce.estimate == re.estimate);
  REQUIRE(ce.se == re.se);
  REQUIRE(ce.ci_lower == re.ci_lower);
  REQUIRE(ce.ci_upper == re.ci_upper);

  // The pairwise path agrees with the rank path as well.
  IndividualProportions pw = win_proportion_pairwise(comp, CompositeCompare{});
  REQUIRE(pw.theta_hat == re.estimate);
}

TEST_CASE("universal ties contribute one half to every pair") {
  // Placebo: one survivor at 1, one flagged missing. Active: survivor at 2,
  // one death. Hand count: 1 + 0 + 1/2 + 1/2 over four pairs.
  SubjectRecord m = missing("m");
  TwoSample<CompositeValue> s{
      build_composite({alive("p1", 1.0), m}, DeathStrategy::AllDeathsEqual, true),
      build_composite({alive("a1", 2.0), death("a2")}, DeathStrategy::AllDeathsEqual, true)};
  IndividualProportions pr = win_proportion_pairwise(s, CompositeCompare{});
  REQUIRE(pr.theta_hat == 0.5);
  REQUIRE(pr.p == std::vector<double>{0.75, 0.25});
  REQUIRE(pr.q == std::vector<double>{0.5, 0.5});
}

TEST_CASE("comparator is a total preorder with an absorbing tie class") {
  std::mt19937_64 eng = replicate_rng(2024, 0);
  std::uniform_int_distribution<int> tier(0, 1), key(0, 3), tied(0, 9);
  auto random_value = [&] {
    CompositeValue v;
    v.tier = tier(eng) == 0 ? CompositeValue::Tier::Death : CompositeValue::Tier::Alive;
    v.key = double(key(eng));
    v.tie_with_all = tied(eng) == 0;
    return v;
  };
  CompositeCompare cmp;
  for (int rep = 0; rep < 5000; ++rep) {
    CompositeValue a = random_value(), b = random_value(), c = random_value();
    REQUIRE(cmp(a, a) == Ordering::Equal);
    // Antisymmetry up to ties.
    const Ordering ab = cmp(a, b), ba = cmp(b, a);
    if (ab == Ordering::Less) REQUIRE(ba == Ordering::Greater);
    if (ab == Ordering::Greater) REQUIRE(ba == Ordering::Less);
    if (ab == Ordering::Equal) REQUIRE(ba == Ordering::Equal);
    // Transitivity holds on the totally ordered part.
    if (!a.tie_with_all && !b.tie_with_all && !c.tie_with_all) {
      if (ab == Ordering::Less && cmp(b, c) == Ordering::Less)
        REQUIRE(cmp(a, c) == Ordering::Less);
      if (ab == Ordering::Equal && cmp(b, c) == Ordering::Equal)
        REQUIRE(cmp(a, c) == Ordering::Equal);
    }
    // The tie class absorbs every comparison.
    if (a.tie_with_all) {
      REQUIRE(cmp(a, b) == Ordering::Equal);
      REQUIRE(cmp(a, c) == Ordering::Equal);
    }
  }
}

TEST_CASE("a worst-value death added to the trailing arm cannot lower the win proportion") {
  std::mt19937_64 eng = replicate_rng(2025, 0);
  std::uniform_int_distribution<int> kind(0, 4), change(-3, 3), time(0, 9);
  auto random_records = [&](std::size_t n, const char* prefix) {
    std::vector<SubjectRecord> out;
    for (std::size_t i = 0; i < n; ++i) {
      std::string id = prefix + std::to_string(i);
      if (kind(eng) == 0)
        out.push_back(death(id, double(time(eng)) + 1.0, double(change(eng))));
      else
        out.push_back(alive(id, double(change(eng))));
    }
    return out;
  };
  std::uniform_int_distribution<std::size_t> size(3, 12);
  for (int rep = 0; rep < 200; ++rep) {
    auto r1 = random_records(size(eng), "p");
    auto r2 = random_records(size(eng), "a");
    for (DeathStrategy strat : {DeathStrategy::AllDeathsEqual, DeathStrategy::DeathsByLastValue,
                                DeathStrategy::DeathsBySurvivalTime}) {
      TwoSample<CompositeValue> before{build_composite(r1, strat), build_composite(r2, strat)};
      const double theta0 = win_proportion_pairwise(before, CompositeCompare{}).theta_hat;
      // The appended death sits at (or below) the bottom of the scale: time 0
      // and a last value under every generated one.
      auto r1_plus = r1;
      r1_plus.push_back(death("new", 0.0, -100.0));
      TwoSample<CompositeValue> after{build_composite(r1_plus, strat), before.y2};
      const double theta1 = win_proportion_pairwise(after, CompositeCompare{}).theta_hat;
      REQUIRE(theta1 >= theta0 - 1e-15);
    }
  }
}
