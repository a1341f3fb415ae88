#pragma once

#include <optional>
#include <string>
#include <vector>

#include "winprob/common.hpp"

// Composite ordinal outcome combining a numeric change score with death and
// optionally with non-death missingness. Death always loses to any observed
// change; the strategy only decides how deaths compare among themselves.

namespace winprob {

enum class DeathStrategy { AllDeathsEqual, DeathsByLastValue, DeathsBySurvivalTime };

struct SubjectRecord {
  std::string id;
  std::optional<double> change_at_T;       // absent for deaths and missing records
  bool died_before_T = false;
  std::optional<double> death_time;        // only for deaths
  std::optional<double> last_change_alive; // last change observed before death
  bool missing_not_death = false;
};

// One ordinal value of the composite scale. Tier separates deaths from
// survivors; key orders values within a tier (higher is better under every
// strategy). A tie_with_all value compares Equal to everything, which is a
// comparison rule rather than an ordering, so such values never enter the
// rank-based code paths.
struct CompositeValue {
  enum class Tier { Death = 0, Alive = 1 };
  Tier tier = Tier::Alive;
  double key = 0.0;
  bool tie_with_all = false;
};

struct CompositeCompare {
  Ordering operator()(const CompositeValue& a, const CompositeValue& b) const {
    if (a.tie_with_all || b.tie_with_all) return Ordering::Equal;
    if (a.tier != b.tier)
      return a.tier == CompositeValue::Tier::Death ? Ordering::Less : Ordering::Greater;
    if (a.key < b.key) return Ordering::Less;
    if (b.key < a.key) return Ordering::Greater;
    return Ordering::Equal;
  }
};

// True when every value participates in a total order, so midranks are
// well defined. Universal-tie values force the pairwise comparison path.
inline bool rankable(const std::vector<CompositeValue>& values) {
  for (const auto& v : values)
    if (v.tie_with_all) return false;
  return true;
}

inline CompositeValue build_composite_one(const SubjectRecord& r, DeathStrategy strategy,
                                          bool missing_as_ties) {
  if (r.died_before_T && r.change_at_T)
    throw DataError("change recorded for dead subject: " + r.id);
  if (!r.died_before_T && r.death_time) throw DataError("death time without death: " + r.id);
  if (r.death_time && *r.death_time < 0.0) throw DataError("negative death time: " + r.id);

  CompositeValue v;
  if (r.missing_not_death && !r.died_before_T) {
    if (!missing_as_ties) throw DataError("missing response: " + r.id);
    v.tie_with_all = true;
    return v;
  }
  if (r.died_before_T) {
    v.tier = CompositeValue::Tier::Death;
    switch (strategy) {
      case DeathStrategy::AllDeathsEqual: v.key = 0.0; break;
      case DeathStrategy::DeathsByLastValue:
        if (!r.last_change_alive) throw DataError("death lacks last value: " + r.id);
        v.key = *r.last_change_alive;
        break;
      case DeathStrategy::DeathsBySurvivalTime:
        if (!r.death_time) throw DataError("death lacks death time: " + r.id);
        v.key = *r.death_time;
        break;
    }
    return v;
  }
  if (!r.change_at_T) throw DataError("missing response: " + r.id);
  v.tier = CompositeValue::Tier::Alive;
  v.key = *r.change_at_T;
  return v;
}

inline std::vector<CompositeValue> build_composite(const std::vector<SubjectRecord>& records,
                                                   DeathStrategy strategy,
                                                   bool missing_as_ties = false) {
  std::vector<CompositeValue> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(build_composite_one(r, strategy, missing_as_ties));
  return out;
}

}  // namespace winprob
