// Core model layer: valuation spaces and sets, context expansion, rule
// instances, type inference, and model validation.
#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>

#include "fixtures.hpp"
#include "sbm/stpa.hpp"

using namespace sbm;
using fixtures::ctx;
using fixtures::dca;
using fixtures::uca;

namespace {

std::vector<std::string> error_messages(const std::vector<Diagnostic>& diags) {
  std::vector<std::string> out;
  for (const auto& d : diags)
    if (d.severity == Diagnostic::Severity::Error) out.push_back(d.message);
  return out;
}

bool mentions(const std::vector<Diagnostic>& diags, const std::string& needle) {
  for (const auto& d : diags)
    if (d.message.find(needle) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST_CASE("valuation space enumerates the variable domains in declaration order") {
  auto m = fixtures::cruise_model();
  ValuationSpace space(m);

  REQUIRE(space.variable_count() == 2);
  CHECK(space.variable_name(0) == "speed");
  CHECK(space.radix(0) == 3);
  CHECK(space.radix(1) == 2);
  CHECK(space.size() == 6);
  CHECK(space.value_name(0, 1) == "desired");
  CHECK(space.find_variable("timeGap") == 1);
  CHECK(space.find_value(1, "enough") == 1);
  CHECK_FALSE(space.find_variable("nope").has_value());
  CHECK_FALSE(space.find_value(1, "nope").has_value());

  SECTION("index_of and valuation_of are inverse bijections") {
    for (std::size_t i = 0; i < space.size(); ++i) {
      Valuation v = space.valuation_of(i);
      REQUIRE(v.size() == 2);
      CHECK(space.index_of(v) == i);
    }
    // First variable is most significant.
    CHECK(space.index_of({0, 0}) == 0);
    CHECK(space.index_of({0, 1}) == 1);
    CHECK(space.index_of({1, 0}) == 2);
    CHECK(space.index_of({2, 1}) == 5);
  }
}

TEST_CASE("valuation sets behave as finite sets") {
  const std::size_t universe = GENERATE(std::size_t{6}, std::size_t{70});
  ValuationSet a(universe);
  ValuationSet b(universe);
  for (std::size_t i = 0; i < universe; i += 2) a.set(i);
  for (std::size_t i = 0; i < universe; i += 3) b.set(i);

  CHECK(a.count() == (universe + 1) / 2);
  CHECK(a.complement().count() == universe - a.count());
  CHECK((a & b).count() == (universe + 5) / 6);  // multiples of 6, including 0
  CHECK((a | b).complement() == (a.complement() & b.complement()));
  CHECK((a - b) == (a & b.complement()));
  CHECK((a & b).subset_of(a));
  CHECK((a & b).subset_of(b));
  CHECK(a.intersects(b));
  CHECK_FALSE(a.complement().intersects(a));
  CHECK(ValuationSet(universe).none());
  CHECK(ValuationSet(universe, true).count() == universe);

  auto idx = (a & b).indices();
  CHECK(std::is_sorted(idx.begin(), idx.end()));
  for (std::size_t i : idx) CHECK((a & b).test(i));
}

TEST_CASE("expand_context selects exactly the matching valuations") {
  auto m = fixtures::cruise_model();
  ValuationSpace space(m);

  SECTION("a single assignment keeps size/radix valuations") {
    for (std::size_t var = 0; var < space.variable_count(); ++var)
      for (int val = 0; val < space.radix(var); ++val) {
        Context c{"c", {{space.variable_name(var), space.value_name(var, val)}}};
        auto set = expand_context(space, c);
        CHECK(set.count() == space.size() / static_cast<std::size_t>(space.radix(var)));
        for (std::size_t i : set.indices())
          CHECK(space.valuation_of(i)[var] == val);
      }
  }

  SECTION("multiple assignments intersect") {
    Context both{"c", {{"speed", "lessThanDesired"}, {"timeGap", "enough"}}};
    auto s = expand_context(space, both);
    CHECK(s.count() == 1);
    CHECK(s == (expand_context(space, ctx("a", {{"speed", "lessThanDesired"}})) &
                expand_context(space, ctx("b", {{"timeGap", "enough"}}))));
    CHECK(s.subset_of(expand_context(space, ctx("a", {{"speed", "lessThanDesired"}}))));
  }

  SECTION("adding assignments never grows the set") {
    std::mt19937 rng(7);
    ValuationSpace sp(fixtures::cruise_model());
    for (int trial = 0; trial < 200; ++trial) {
      Context c{"c", {}};
      ValuationSet prev(sp.size(), true);
      std::vector<std::size_t> vars{0, 1};
      std::shuffle(vars.begin(), vars.end(), rng);
      for (std::size_t var : vars) {
        int val = std::uniform_int_distribution<int>(0, sp.radix(var) - 1)(rng);
        c.assignments.emplace_back(sp.variable_name(var), sp.value_name(var, val));
        auto cur = expand_context(sp, c);
        CHECK(cur.subset_of(prev));
        prev = cur;
      }
    }
  }

  SECTION("unknown names are rejected") {
    CHECK_THROWS_AS(expand_context(space, ctx("c", {{"nope", "x"}})), std::invalid_argument);
    CHECK_THROWS_AS(expand_context(space, ctx("c", {{"speed", "nope"}})), std::invalid_argument);
  }
}

TEST_CASE("materialize lists the selected valuations") {
  auto m = fixtures::tiny_model();
  ValuationSpace space(m);
  auto set = expand_context(space, ctx("c", {{"x", "true"}}));
  auto vals = materialize(space, set);
  REQUIRE(vals.size() == 1);
  CHECK(space.value_name(0, vals[0][0]) == "true");
}

TEST_CASE("rule instances flatten rules per context in declaration order") {
  StpaModel m = fixtures::tiny_model();
  m.actions.push_back("halt");
  m.ucas = {
      uca("U1", "go", UcaKind::Provided, {ctx("C1", {{"x", "true"}}), ctx("C2", {{"x", "false"}})}),
      uca("U2", "go", UcaKind::TooEarly, {ctx("C1", {{"x", "true"}})}),
  };
  m.dcas = {dca("D1", "halt", DcaKind::NotProvided, {ctx("C1", {{"x", "false"}})})};
  ValuationSpace space(m);
  auto insts = collect_instances(m, space);

  REQUIRE(insts.size() == 4);
  CHECK(insts[0].id == "U1.C1");
  CHECK(insts[1].id == "U1.C2");
  CHECK(insts[2].id == "U2.C1");
  CHECK(insts[3].id == "D1.C1");
  for (int i = 0; i < 4; ++i) CHECK(insts[i].declaration_index == i);
  CHECK(insts[0].shape == RuleShape::Forbidden);
  CHECK(insts[2].shape == RuleShape::ForbiddenAtEntry);
  CHECK(insts[3].shape == RuleShape::Forbidden);  // desired + notProvided forbids
  CHECK(insts[0].set.count() == 1);
}

TEST_CASE("kinds map onto formula shapes, with desired kinds mirrored") {
  CHECK(shape_of(UcaKind::Provided) == RuleShape::Forbidden);
  CHECK(shape_of(UcaKind::NotProvided) == RuleShape::Demanded);
  CHECK(shape_of(UcaKind::TooEarly) == RuleShape::ForbiddenAtEntry);
  CHECK(shape_of(UcaKind::TooLate) == RuleShape::DemandedAtOnce);
  CHECK(shape_of(UcaKind::AppliedTooLong) == RuleShape::StopWithContext);
  CHECK(shape_of(UcaKind::StoppedTooSoon) == RuleShape::KeepWithContext);
  CHECK(shape_of(DcaKind::Provided) == RuleShape::Demanded);
  CHECK(shape_of(DcaKind::NotProvided) == RuleShape::Forbidden);
  CHECK(is_demand(RuleShape::Demanded));
  CHECK(is_demand(RuleShape::DemandedAtOnce));
  CHECK_FALSE(is_demand(RuleShape::StopWithContext));
}

TEST_CASE("concrete types are inferred from the value ranges") {
  CHECK(infer_type(fixtures::var_bool("b")) == ConcreteType::Boolean);
  CHECK(infer_type(fixtures::var_enum("e", {"a", "b", "c"})) == ConcreteType::EnumLike);
  CHECK(infer_type(fixtures::cruise_model().variables[0]) == ConcreteType::Number);

  ProcessModelVariable mixed{"m", {{"a", ValueRange::opaque()},
                                   {"b", ValueRange::singleton(Bound::num(3))}}};
  CHECK(infer_type(mixed) == ConcreteType::Number);
}

TEST_CASE("reference inputs are collected once, in first-appearance order") {
  auto m = fixtures::cruise_model();
  CHECK(reference_inputs(m) == std::vector<std::string>{"desiredSpeed"});

  ProcessModelVariable extra{"level", {}};
  extra.values.push_back({"low", ValueRange::interval(Bound::min(), true, Bound::ref("lo"), false)});
  extra.values.push_back({"mid", ValueRange::interval(Bound::ref("lo"), true, Bound::ref("hi"), false)});
  extra.values.push_back({"high", ValueRange::interval(Bound::ref("hi"), true, Bound::max(), true)});
  m.variables.push_back(extra);
  CHECK(reference_inputs(m) == std::vector<std::string>{"desiredSpeed", "lo", "hi"});
}

TEST_CASE("bound comparison is symbolic") {
  CHECK(compare_bounds(Bound::min(), Bound::num(-1e9)) == -1);
  CHECK(compare_bounds(Bound::num(1e9), Bound::max()) == -1);
  CHECK(compare_bounds(Bound::min(), Bound::max()) == -1);
  CHECK(compare_bounds(Bound::num(2), Bound::num(2)) == 0);
  CHECK(compare_bounds(Bound::num(2), Bound::num(3)) == -1);
  CHECK(compare_bounds(Bound::ref("v"), Bound::ref("v")) == 0);
  CHECK_FALSE(compare_bounds(Bound::ref("v"), Bound::ref("w")).has_value());
  CHECK_FALSE(compare_bounds(Bound::ref("v"), Bound::num(1)).has_value());
}

TEST_CASE("a well-formed model validates without diagnostics") {
  CHECK(validate(fixtures::tiny_model()).empty());
  CHECK(validate(fixtures::cruise_model()).empty());
}

TEST_CASE("structural problems are reported as errors") {
  SECTION("duplicate names") {
    auto m = fixtures::tiny_model();
    m.variables.push_back(fixtures::var_bool("x"));
    CHECK(mentions(validate(m), "duplicate variable 'x'"));

    m = fixtures::tiny_model();
    m.variables[0].values.push_back({"true", ValueRange::boolean_literal(true)});
    CHECK(mentions(validate(m), "duplicate value 'true'"));

    m = fixtures::tiny_model();
    m.actions.push_back("go");
    CHECK(mentions(validate(m), "duplicate control action 'go'"));

    m = fixtures::tiny_model();
    m.dcas = {dca("U1", "go", DcaKind::Provided, {ctx("C1", {{"x", "true"}})})};
    CHECK(mentions(validate(m), "duplicate rule id 'U1'"));
  }

  SECTION("bad references") {
    auto m = fixtures::tiny_model();
    m.ucas[0].action = "stop";
    CHECK(mentions(validate(m), "unknown action 'stop'"));

    m = fixtures::tiny_model();
    m.ucas[0].contexts[0].assignments[0].first = "y";
    CHECK(mentions(validate(m), "unknown variable 'y'"));

    m = fixtures::tiny_model();
    m.ucas[0].contexts[0].assignments[0].second = "maybe";
    CHECK(mentions(validate(m), "unknown value 'x=maybe'"));
  }

  SECTION("degenerate contexts") {
    auto m = fixtures::tiny_model();
    m.ucas[0].contexts.clear();
    CHECK(mentions(validate(m), "has no contexts"));

    m = fixtures::tiny_model();
    m.ucas[0].contexts[0].assignments.clear();
    CHECK(mentions(validate(m), "is empty"));

    m = fixtures::tiny_model();
    m.ucas[0].contexts[0].assignments.emplace_back("x", "false");
    CHECK(mentions(validate(m), "assigns 'x' twice"));
  }

  SECTION("bad value domains") {
    auto m = fixtures::tiny_model();
    m.variables[0].values.pop_back();  // lone boolean literal
    CHECK(mentions(validate(m), "mixes boolean literals"));

    StpaModel n = fixtures::tiny_model();
    n.variables.push_back({"v", {{"p", ValueRange::singleton(Bound::min())}}});
    CHECK(mentions(validate(n), "MIN/MAX as a point"));

    n = fixtures::tiny_model();
    n.variables.push_back({"v", {{"p", ValueRange::interval(Bound::max(), true, Bound::min(), true)}}});
    CHECK(mentions(validate(n), "inverted range"));
  }
}

TEST_CASE("contradicting rules are rejected") {
  auto base = [] {
    StpaModel m;
    m.controller = "C";
    m.variables = {fixtures::var_enum("v", {"a", "b", "c"})};
    m.actions = {"p", "q"};
    return m;
  };

  SECTION("an action both demanded and forbidden in overlapping contexts") {
    auto m = base();
    m.ucas = {uca("U1", "p", UcaKind::NotProvided, {ctx("C1", {{"v", "a"}})}),
              uca("U2", "p", UcaKind::Provided, {ctx("C1", {{"v", "a"}})})};
    auto diags = validate(m);
    REQUIRE(error_messages(diags).size() == 1);
    CHECK(mentions(diags, "both demanded and forbidden"));
    CHECK(diags[0].rules == std::vector<std::string>{"U1.C1", "U2.C1"});

    m.ucas[1].contexts[0] = ctx("C1", {{"v", "b"}});  // disjoint now
    CHECK(validate(m).empty());
  }

  SECTION("two different actions demanded in the same context") {
    auto m = base();
    m.ucas = {uca("U1", "p", UcaKind::NotProvided, {ctx("C1", {{"v", "a"}})})};
    m.dcas = {dca("D1", "q", DcaKind::Provided, {ctx("C1", {{"v", "a"}})})};
    CHECK(mentions(validate(m), "both demanded in overlapping contexts"));

    // The same action demanded twice is fine.
    m.dcas[0].action = "p";
    CHECK(validate(m).empty());
  }

  SECTION("keep-while fully inside the forbidden region is vacuous") {
    auto m = base();
    m.ucas = {uca("U1", "p", UcaKind::StoppedTooSoon, {ctx("C1", {{"v", "a"}})}),
              uca("U2", "p", UcaKind::Provided, {ctx("C1", {{"v", "a"}})})};
    CHECK(validate(m).empty());

    // ... also when it takes the union of several forbidden contexts.
    m.ucas = {uca("U1", "p", UcaKind::StoppedTooSoon,
                  {ctx("C1", {{"v", "a"}}), ctx("C2", {{"v", "b"}})}),
              uca("U2", "p", UcaKind::Provided, {ctx("C1", {{"v", "a"}})}),
              uca("U3", "p", UcaKind::Provided, {ctx("C1", {{"v", "b"}})})};
    CHECK(validate(m).empty());
  }

  SECTION("keep-while reaching beyond a forbidden region") {
    auto m = base();
    m.variables = {fixtures::var_enum("v", {"a", "b"}), fixtures::var_bool("w")};
    m.ucas = {uca("U1", "p", UcaKind::StoppedTooSoon, {ctx("C1", {{"v", "a"}})}),
              uca("U2", "p", UcaKind::Provided, {ctx("C1", {{"v", "a"}, {"w", "true"}})})};
    CHECK(mentions(validate(m), "must be kept inside a context where it is forbidden"));
  }

  SECTION("keep-while against a demand for another action") {
    auto m = base();
    m.ucas = {uca("U1", "p", UcaKind::StoppedTooSoon, {ctx("C1", {{"v", "a"}})})};
    m.dcas = {dca("D1", "q", DcaKind::Provided, {ctx("C1", {{"v", "a"}})})};
    CHECK(mentions(validate(m), "keeping 'p' contradicts demanding 'q'"));
  }

  SECTION("stop-after and keep-while on the same action must coincide") {
    auto m = base();
    m.variables = {fixtures::var_enum("v", {"a", "b"}), fixtures::var_bool("w")};
    m.ucas = {uca("U1", "p", UcaKind::AppliedTooLong, {ctx("C1", {{"v", "a"}})}),
              uca("U2", "p", UcaKind::StoppedTooSoon, {ctx("C1", {{"v", "a"}})})};
    CHECK(validate(m).empty());  // identical contexts cooperate

    m.ucas[1].contexts[0] = ctx("C1", {{"v", "a"}, {"w", "true"}});
    CHECK(mentions(validate(m), "overlap without being identical"));
  }

  SECTION("two stop-afters on the same action must coincide") {
    auto m = base();
    m.variables = {fixtures::var_enum("v", {"a", "b"}), fixtures::var_bool("w")};
    m.ucas = {uca("U1", "p", UcaKind::AppliedTooLong, {ctx("C1", {{"v", "a"}})}),
              uca("U2", "p", UcaKind::AppliedTooLong, {ctx("C1", {{"w", "true"}})})};
    CHECK(mentions(validate(m), "overlap without being identical"));

    m.ucas[1].contexts[0] = ctx("C1", {{"v", "a"}});
    CHECK(validate(m).empty());
  }

  SECTION("demand and stop-after must nest") {
    auto m = base();
    m.variables = {fixtures::var_enum("v", {"a", "b"}), fixtures::var_bool("w")};
    m.ucas = {uca("U1", "p", UcaKind::AppliedTooLong, {ctx("C1", {{"v", "a"}})})};
    m.dcas = {dca("D1", "p", DcaKind::Provided, {ctx("C1", {{"w", "true"}})})};
    CHECK(mentions(validate(m), "overlap without one containing the other"));

    m.dcas[0].contexts[0] = ctx("C1", {{"v", "a"}, {"w", "true"}});  // demand inside stop
    CHECK(validate(m).empty());
  }

  SECTION("diagnostics do not depend on rule declaration order") {
    auto m = base();
    m.variables = {fixtures::var_enum("v", {"a", "b"}), fixtures::var_bool("w")};
    m.ucas = {uca("U1", "p", UcaKind::NotProvided, {ctx("C1", {{"v", "a"}})}),
              uca("U2", "p", UcaKind::Provided, {ctx("C1", {{"v", "a"}, {"w", "true"}})}),
              uca("U3", "q", UcaKind::NotProvided, {ctx("C1", {{"v", "a"}})})};
    auto before = validate(m);
    REQUIRE_FALSE(before.empty());
    std::reverse(m.ucas.begin(), m.ucas.end());
    CHECK(validate(m) == before);
  }
}

TEST_CASE("numeric ranges produce overlap and coverage warnings") {
  StpaModel m;
  m.controller = "N";
  m.actions = {"p"};

  SECTION("overlapping ranges") {
    ProcessModelVariable v{"t", {}};
    v.values.push_back({"low", ValueRange::interval(Bound::min(), true, Bound::num(10), true)});
    v.values.push_back({"high", ValueRange::interval(Bound::num(10), true, Bound::max(), true)});
    m.variables = {v};
    auto diags = validate(m);
    REQUIRE(diags.size() == 1);
    CHECK(diags[0].severity == Diagnostic::Severity::Warning);
    CHECK(mentions(diags, "overlap"));
  }

  SECTION("a gap in coverage") {
    ProcessModelVariable v{"t", {}};
    v.values.push_back({"low", ValueRange::interval(Bound::min(), true, Bound::num(10), false)});
    v.values.push_back({"high", ValueRange::interval(Bound::num(20), true, Bound::max(), true)});
    m.variables = {v};
    CHECK(mentions(validate(m), "do not cover"));

    v.values[1].range = ValueRange::interval(Bound::num(10), true, Bound::max(), true);
    m.variables = {v};
    CHECK(validate(m).empty());
  }

  SECTION("an open point between two open ranges") {
    ProcessModelVariable v{"t", {}};
    v.values.push_back({"low", ValueRange::interval(Bound::min(), true, Bound::num(10), false)});
    v.values.push_back({"high", ValueRange::interval(Bound::num(10), false, Bound::max(), true)});
    m.variables = {v};
    CHECK(mentions(validate(m), "do not cover"));
  }

  SECTION("incomparable references disable the coverage sweep") {
    ProcessModelVariable v{"t", {}};
    v.values.push_back({"low", ValueRange::interval(Bound::min(), true, Bound::ref("a"), false)});
    v.values.push_back({"high", ValueRange::interval(Bound::ref("b"), true, Bound::max(), true)});
    m.variables = {v};
    CHECK(validate(m).empty());
  }

  SECTION("mixing ranged and unranged values warns") {
    ProcessModelVariable v{"t", {}};
    v.values.push_back({"low", ValueRange::interval(Bound::min(), true, Bound::num(1), true)});
    v.values.push_back({"odd", ValueRange::opaque()});
    m.variables = {v};
    auto diags = validate(m);
    CHECK_FALSE(has_errors(diags));
    CHECK(mentions(diags, "mixes ranged and unranged"));
  }
}

TEST_CASE("has_errors distinguishes errors from warnings") {
  std::vector<Diagnostic> diags;
  CHECK_FALSE(has_errors(diags));
  diags.push_back({Diagnostic::Severity::Warning, {}, "w"});
  CHECK_FALSE(has_errors(diags));
  diags.push_back({Diagnostic::Severity::Error, {}, "e"});
  CHECK(has_errors(diags));
}
