// Shared model builders for the test suite.
#ifndef SBM_TESTS_FIXTURES_HPP
#define SBM_TESTS_FIXTURES_HPP

#include <initializer_list>
#include <string>
#include <vector>

#include "sbm/stpa.hpp"

namespace fixtures {

using namespace sbm;

inline ProcessModelVariable var_enum(std::string name, std::initializer_list<const char*> values) {
  ProcessModelVariable v{std::move(name), {}};
  for (const char* val : values) v.values.push_back({val, ValueRange::opaque()});
  return v;
}

inline ProcessModelVariable var_bool(std::string name) {
  return {std::move(name),
          {{"true", ValueRange::boolean_literal(true)}, {"false", ValueRange::boolean_literal(false)}}};
}

inline Context ctx(std::string id,
                   std::initializer_list<std::pair<const char*, const char*>> assignments) {
  Context c{std::move(id), {}};
  for (const auto& [var, val] : assignments) c.assignments.emplace_back(var, val);
  return c;
}

inline UcaRule uca(std::string id, std::string action, UcaKind kind, std::vector<Context> contexts) {
  return {std::move(id), std::move(action), kind, std::move(contexts)};
}

inline DcaRule dca(std::string id, std::string action, DcaKind kind, std::vector<Context> contexts) {
  return {std::move(id), std::move(action), kind, std::move(contexts)};
}

/// One boolean variable, one action demanded while it is true.
inline StpaModel tiny_model() {
  StpaModel m;
  m.controller = "Tiny";
  m.variables = {var_bool("x")};
  m.actions = {"go"};
  m.ucas = {uca("U1", "go", UcaKind::NotProvided, {ctx("C1", {{"x", "true"}})})};
  return m;
}

/// Cruise-control style model: a ranged speed variable against a reference
/// parameter, an enum gap variable, three actions, and all four rule shapes
/// that produce machine structure (demand, forbid, stop-with, keep-with).
/// Both accelerate and decelerate carry a stop-with rule whose context equals
/// the demand context, so synthesis reroutes every entry into the split
/// states and the base states become unreachable.
inline StpaModel cruise_model() {
  StpaModel m;
  m.controller = "Cruise";
  ProcessModelVariable speed{"speed", {}};
  speed.values.push_back(
      {"lessThanDesired", ValueRange::interval(Bound::min(), true, Bound::ref("desiredSpeed"), false)});
  speed.values.push_back({"desired", ValueRange::singleton(Bound::ref("desiredSpeed"))});
  speed.values.push_back(
      {"greaterThanDesired", ValueRange::interval(Bound::ref("desiredSpeed"), false, Bound::max(), true)});
  m.variables.push_back(std::move(speed));
  m.variables.push_back(var_enum("timeGap", {"tooSmall", "enough"}));
  m.actions = {"stop", "accelerate", "decelerate"};
  m.ucas = {
      uca("U1", "stop", UcaKind::NotProvided, {ctx("C1", {{"timeGap", "tooSmall"}})}),
      uca("U2", "stop", UcaKind::Provided, {ctx("C1", {{"timeGap", "enough"}})}),
      uca("U3", "accelerate", UcaKind::AppliedTooLong,
          {ctx("C1", {{"speed", "lessThanDesired"}, {"timeGap", "enough"}})}),
      uca("U4", "decelerate", UcaKind::StoppedTooSoon,
          {ctx("C1", {{"speed", "greaterThanDesired"}, {"timeGap", "enough"}})}),
      uca("U5", "decelerate", UcaKind::AppliedTooLong,
          {ctx("C1", {{"speed", "greaterThanDesired"}, {"timeGap", "enough"}})}),
  };
  m.dcas = {
      dca("D1", "accelerate", DcaKind::Provided,
          {ctx("C1", {{"speed", "lessThanDesired"}, {"timeGap", "enough"}})}),
      dca("D2", "decelerate", DcaKind::Provided,
          {ctx("C1", {{"speed", "greaterThanDesired"}, {"timeGap", "enough"}})}),
  };
  return m;
}

}  // namespace fixtures

#endif  // SBM_TESTS_FIXTURES_HPP
