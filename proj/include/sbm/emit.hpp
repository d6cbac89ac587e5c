// Serialization of the synthesized machine: the annotated flat-statechart
// text, a lossless JSON document, and GraphViz DOT.
//
// All three emitters are deterministic — byte-identical output for equal
// inputs. The JSON reader is strict: unknown fields, missing fields, wrong
// types, and out-of-range indices are all schema violations.
#ifndef SBM_EMIT_HPP
#define SBM_EMIT_HPP

#include <algorithm>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "sbm/ltl.hpp"
#include "sbm/statechart.hpp"
#include "sbm/stpa.hpp"

namespace sbm {

// ── Textual statechart ──────────────────────────────────────────────────────

namespace detail {

/// Interface type of a process-model variable: boolean when its values are
/// the boolean literals, number when any value carries a numeric range,
/// otherwise an enum over the declared value names.
inline std::string variable_declaration(const ProcessModelVariable& var) {
  bool all_boolean = !var.values.empty();
  bool any_numeric = false;
  for (const AbstractValue& v : var.values) {
    all_boolean = all_boolean && v.range.kind == ValueRange::Kind::BooleanLiteral;
    any_numeric = any_numeric || v.range.is_numeric();
  }
  if (all_boolean) return "boolean " + var.name;
  if (any_numeric) return "number " + var.name;
  std::string decl = "enum " + var.name + " { ";
  for (std::size_t i = 0; i < var.values.size(); ++i)
    decl += (i ? ", " : "") + var.values[i].name;
  return decl + " }";
}

}  // namespace detail

/// Annotated statechart text: the temporal obligations as @LTL lines, the
/// typed interface, the states with their entry actions, and the prioritized
/// transitions with guards rendered as comparisons.
inline std::string emit_textual(const Statechart& sc, const std::vector<TranslatedRule>& formulas) {
  std::string out;
  for (const TranslatedRule& rule : formulas) out += "@LTL \"" + to_string(rule.formula) + "\"\n";

  out += "statechart {\n";
  for (const std::string& input : sc.inputs) out += "  input number " + input + "\n";
  out += "  output enum controlAction { none";
  for (const std::string& action : sc.actions) out += ", " + action;
  out += " }\n";
  for (const ProcessModelVariable& var : sc.internals)
    out += "  internal " + detail::variable_declaration(var) + "\n";

  out += "\n";
  for (std::size_t s = 0; s < sc.states.size(); ++s) {
    const State& state = sc.states[s];
    out += static_cast<int>(s) == sc.initial ? "  initial state " : "  state ";
    out += state.id + " {\n";
    out += "    entry controlAction = " + (state.action.empty() ? "none" : state.action) + "\n";
    out += "  }\n";
  }

  if (!sc.transitions.empty()) out += "\n";
  for (const Transition& t : sc.transitions)
    out += "  " + sc.states[static_cast<std::size_t>(t.source)].id + " -> " +
           sc.states[static_cast<std::size_t>(t.target)].id + " priority " +
           std::to_string(t.priority) + " if " +
           guard_text(sc.internals, sc.space, t.guard) + "\n";
  out += "}\n";
  return out;
}

// ── JSON document ───────────────────────────────────────────────────────────

/// In-memory form of a .sbm.json document: the machine plus its obligations.
struct Document {
  Statechart chart;
  std::vector<TranslatedRule> formulas;
};

namespace detail {

inline const char* origin_label(StateOrigin o) {
  switch (o) {
    case StateOrigin::Initial: return "initial";
    case StateOrigin::Base: return "base";
    case StateOrigin::SplitAppliedTooLong: return "splitAppliedTooLong";
    case StateOrigin::SplitStoppedTooSoon: return "splitStoppedTooSoon";
  }
  return "?";
}

inline const char* class_label(TransitionClass c) {
  switch (c) {
    case TransitionClass::Demand: return "demand";
    case TransitionClass::SplitEntry: return "splitEntry";
    case TransitionClass::Forbid: return "forbid";
    case TransitionClass::Escape: return "escape";
  }
  return "?";
}

inline nlohmann::json bound_json(const Bound& b) {
  switch (b.kind) {
    case Bound::Kind::Min: return {{"kind", "min"}};
    case Bound::Kind::Max: return {{"kind", "max"}};
    case Bound::Kind::Number: return {{"kind", "number"}, {"value", b.number}};
    case Bound::Kind::Reference: return {{"kind", "reference"}, {"name", b.reference}};
  }
  return {};
}

inline nlohmann::json range_json(const ValueRange& r) {
  switch (r.kind) {
    case ValueRange::Kind::Opaque: return {{"kind", "opaque"}};
    case ValueRange::Kind::BooleanLiteral: return {{"kind", "boolean"}, {"value", r.boolean}};
    case ValueRange::Kind::Singleton: return {{"kind", "singleton"}, {"point", bound_json(r.point)}};
    case ValueRange::Kind::Interval:
      return {{"kind", "interval"},
              {"lower", bound_json(r.lower)},
              {"lowerInclusive", r.lower_inclusive},
              {"upper", bound_json(r.upper)},
              {"upperInclusive", r.upper_inclusive}};
  }
  return {};
}

inline nlohmann::json set_json(const ValuationSet& set) {
  nlohmann::json arr = nlohmann::json::array();
  for (std::size_t i : set.indices()) arr.push_back(i);
  return arr;
}

inline nlohmann::json formula_json(const Formula& f) {
  using K = Formula::Kind;
  switch (f.kind) {
    case K::VarEq:
      return {{"op", "var"}, {"var", f.var}, {"val", f.val}, {"text", f.text}};
    case K::ActionEq: return {{"op", "action"}, {"action", f.text}};
    case K::Not: return {{"op", "not"}, {"arg", formula_json(*f.lhs)}};
    case K::Next: return {{"op", "next"}, {"arg", formula_json(*f.lhs)}};
    case K::Finally: return {{"op", "finally"}, {"arg", formula_json(*f.lhs)}};
    case K::Globally: return {{"op", "globally"}, {"arg", formula_json(*f.lhs)}};
    case K::And: return {{"op", "and"}, {"lhs", formula_json(*f.lhs)}, {"rhs", formula_json(*f.rhs)}};
    case K::Or: return {{"op", "or"}, {"lhs", formula_json(*f.lhs)}, {"rhs", formula_json(*f.rhs)}};
    case K::Implies:
      return {{"op", "implies"}, {"lhs", formula_json(*f.lhs)}, {"rhs", formula_json(*f.rhs)}};
    case K::Until:
      return {{"op", "until"}, {"lhs", formula_json(*f.lhs)}, {"rhs", formula_json(*f.rhs)}};
    case K::Release:
      return {{"op", "release"}, {"lhs", formula_json(*f.lhs)}, {"rhs", formula_json(*f.rhs)}};
  }
  return {};
}

}  // namespace detail

/// Lossless JSON form of the machine and its obligations.
inline std::string emit_json(const Statechart& sc, const std::vector<TranslatedRule>& formulas) {
  using detail::bound_json;
  using detail::range_json;
  using detail::set_json;
  nlohmann::json chart;

  nlohmann::json vars = nlohmann::json::array();
  for (const ProcessModelVariable& var : sc.internals) {
    nlohmann::json values = nlohmann::json::array();
    for (const AbstractValue& v : var.values)
      values.push_back({{"name", v.name}, {"range", range_json(v.range)}});
    vars.push_back({{"name", var.name}, {"values", values}});
  }
  chart["variables"] = vars;
  chart["inputs"] = sc.inputs;
  chart["actions"] = sc.actions;
  chart["initial"] = sc.initial;

  nlohmann::json states = nlohmann::json::array();
  for (const State& s : sc.states)
    states.push_back({{"id", s.id},
                      {"action", s.action},
                      {"origin", detail::origin_label(s.origin)},
                      {"splitContextId", s.split_context_id},
                      {"splitContext", set_json(s.split_context)}});
  chart["states"] = states;

  nlohmann::json transitions = nlohmann::json::array();
  for (const Transition& t : sc.transitions)
    transitions.push_back({{"source", t.source},
                           {"target", t.target},
                           {"guard", set_json(t.guard)},
                           {"class", detail::class_label(t.kind)},
                           {"priority", t.priority},
                           {"rank", t.rank},
                           {"provenance", t.provenance}});
  chart["transitions"] = transitions;

  nlohmann::json rules = nlohmann::json::array();
  for (const TranslatedRule& rule : formulas) {
    const RuleInstance& inst = rule.instance;
    nlohmann::json assignments = nlohmann::json::array();
    for (const auto& [var, value] : inst.context.assignments)
      assignments.push_back(nlohmann::json::array({var, value}));
    rules.push_back({{"id", inst.id},
                     {"ruleId", inst.rule_id},
                     {"contextId", inst.context_id},
                     {"action", inst.action},
                     {"shape", shape_label(inst.shape)},
                     {"context", {{"id", inst.context.id}, {"assignments", assignments}}},
                     {"set", set_json(inst.set)},
                     {"declarationIndex", inst.declaration_index},
                     {"formula", detail::formula_json(*rule.formula)}});
  }

  nlohmann::json doc;
  doc["statechart"] = chart;
  doc["formulas"] = rules;
  return doc.dump(2) + "\n";
}

// ── JSON reader ─────────────────────────────────────────────────────────────

namespace detail {

/// Reject objects with fields outside `allowed`; schema evolution is explicit.
inline void expect_keys(const nlohmann::json& j, std::initializer_list<std::string_view> allowed,
                        const char* what) {
  if (!j.is_object()) throw std::invalid_argument(std::string(what) + " must be a JSON object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (std::string_view key : allowed) known = known || item.key() == key;
    if (!known)
      throw std::invalid_argument("unknown field '" + item.key() + "' in " + what);
  }
}

inline const nlohmann::json& field(const nlohmann::json& j, const char* key, const char* what) {
  auto it = j.find(key);
  if (it == j.end())
    throw std::invalid_argument(std::string(what) + " is missing field '" + key + "'");
  return *it;
}

inline std::string read_string(const nlohmann::json& j, const char* key, const char* what) {
  const nlohmann::json& v = field(j, key, what);
  if (!v.is_string())
    throw std::invalid_argument(std::string(what) + " field '" + key + "' must be a string");
  return v.get<std::string>();
}

inline int read_int(const nlohmann::json& j, const char* key, const char* what) {
  const nlohmann::json& v = field(j, key, what);
  if (!v.is_number_integer())
    throw std::invalid_argument(std::string(what) + " field '" + key + "' must be an integer");
  return v.get<int>();
}

inline bool read_bool(const nlohmann::json& j, const char* key, const char* what) {
  const nlohmann::json& v = field(j, key, what);
  if (!v.is_boolean())
    throw std::invalid_argument(std::string(what) + " field '" + key + "' must be a boolean");
  return v.get<bool>();
}

inline const nlohmann::json& read_array(const nlohmann::json& j, const char* key, const char* what) {
  const nlohmann::json& v = field(j, key, what);
  if (!v.is_array())
    throw std::invalid_argument(std::string(what) + " field '" + key + "' must be an array");
  return v;
}

inline Bound read_bound(const nlohmann::json& j, const char* what) {
  const std::string kind = read_string(j, "kind", what);
  if (kind == "min") {
    expect_keys(j, {"kind"}, what);
    return Bound::min();
  }
  if (kind == "max") {
    expect_keys(j, {"kind"}, what);
    return Bound::max();
  }
  if (kind == "number") {
    expect_keys(j, {"kind", "value"}, what);
    const nlohmann::json& v = field(j, "value", what);
    if (!v.is_number())
      throw std::invalid_argument(std::string(what) + " field 'value' must be a number");
    return Bound::num(v.get<double>());
  }
  if (kind == "reference") {
    expect_keys(j, {"kind", "name"}, what);
    return Bound::ref(read_string(j, "name", what));
  }
  throw std::invalid_argument(std::string(what) + " has unknown bound kind '" + kind + "'");
}

inline ValueRange read_range(const nlohmann::json& j, const char* what) {
  const std::string kind = read_string(j, "kind", what);
  if (kind == "opaque") {
    expect_keys(j, {"kind"}, what);
    return ValueRange::opaque();
  }
  if (kind == "boolean") {
    expect_keys(j, {"kind", "value"}, what);
    return ValueRange::boolean_literal(read_bool(j, "value", what));
  }
  if (kind == "singleton") {
    expect_keys(j, {"kind", "point"}, what);
    return ValueRange::singleton(read_bound(field(j, "point", what), "range point"));
  }
  if (kind == "interval") {
    expect_keys(j, {"kind", "lower", "lowerInclusive", "upper", "upperInclusive"}, what);
    return ValueRange::interval(read_bound(field(j, "lower", what), "interval lower bound"),
                                read_bool(j, "lowerInclusive", what),
                                read_bound(field(j, "upper", what), "interval upper bound"),
                                read_bool(j, "upperInclusive", what));
  }
  throw std::invalid_argument(std::string(what) + " has unknown range kind '" + kind + "'");
}

inline ValuationSet read_set(const nlohmann::json& arr, std::size_t universe, const char* what) {
  if (!arr.is_array()) throw std::invalid_argument(std::string(what) + " must be an array");
  ValuationSet set(universe);
  for (const nlohmann::json& v : arr) {
    if (!v.is_number_unsigned() || v.get<std::size_t>() >= universe)
      throw std::invalid_argument(std::string(what) + " holds an out-of-range valuation index");
    set.set(v.get<std::size_t>());
  }
  return set;
}

inline FormulaPtr read_formula(const nlohmann::json& j, const ValuationSpace& space,
                               const std::vector<std::string>& actions) {
  const char* what = "formula node";
  const std::string op = read_string(j, "op", what);
  if (op == "var") {
    expect_keys(j, {"op", "var", "val", "text"}, what);
    const int var = read_int(j, "var", what);
    const int val = read_int(j, "val", what);
    if (var < 0 || static_cast<std::size_t>(var) >= space.variable_count() || val < 0 ||
        val >= space.radix(static_cast<std::size_t>(var)))
      throw std::invalid_argument("formula node tests an unknown variable or value");
    return f_atom(static_cast<std::size_t>(var), val, read_string(j, "text", what));
  }
  if (op == "action") {
    expect_keys(j, {"op", "action"}, what);
    const std::string action = read_string(j, "action", what);
    if (std::find(actions.begin(), actions.end(), action) == actions.end())
      throw std::invalid_argument("formula node sends unknown action '" + action + "'");
    return f_action(action);
  }
  if (op == "not" || op == "next" || op == "finally" || op == "globally") {
    expect_keys(j, {"op", "arg"}, what);
    FormulaPtr arg = read_formula(field(j, "arg", what), space, actions);
    if (op == "not") return f_not(arg);
    if (op == "next") return f_next(arg);
    if (op == "finally") return f_finally(arg);
    return f_globally(arg);
  }
  if (op == "and" || op == "or" || op == "implies" || op == "until" || op == "release") {
    expect_keys(j, {"op", "lhs", "rhs"}, what);
    FormulaPtr lhs = read_formula(field(j, "lhs", what), space, actions);
    FormulaPtr rhs = read_formula(field(j, "rhs", what), space, actions);
    if (op == "and") return f_and(lhs, rhs);
    if (op == "or") return f_or(lhs, rhs);
    if (op == "implies") return f_implies(lhs, rhs);
    if (op == "until") return f_until(lhs, rhs);
    return f_release(lhs, rhs);
  }
  throw std::invalid_argument("formula node has unknown op '" + op + "'");
}

inline RuleShape read_shape(const std::string& label) {
  for (RuleShape s : {RuleShape::Forbidden, RuleShape::Demanded, RuleShape::DemandedAtOnce,
                      RuleShape::ForbiddenAtEntry, RuleShape::StopWithContext,
                      RuleShape::KeepWithContext})
    if (label == shape_label(s)) return s;
  throw std::invalid_argument("unknown rule shape '" + label + "'");
}

inline StateOrigin read_origin(const std::string& label) {
  for (StateOrigin o : {StateOrigin::Initial, StateOrigin::Base,
                        StateOrigin::SplitAppliedTooLong, StateOrigin::SplitStoppedTooSoon})
    if (label == origin_label(o)) return o;
  throw std::invalid_argument("unknown state origin '" + label + "'");
}

inline TransitionClass read_class(const std::string& label) {
  for (TransitionClass c : {TransitionClass::Demand, TransitionClass::SplitEntry,
                            TransitionClass::Forbid, TransitionClass::Escape})
    if (label == class_label(c)) return c;
  throw std::invalid_argument("unknown transition class '" + label + "'");
}

}  // namespace detail

/// Strict reader for emit_json output. Throws std::invalid_argument on
/// malformed JSON and on any schema violation.
inline Document parse_json(std::string_view text) {
  using namespace detail;
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("malformed JSON: ") + e.what());
  }
  expect_keys(doc, {"statechart", "formulas"}, "document");
  const nlohmann::json& chart = field(doc, "statechart", "document");
  expect_keys(chart, {"variables", "inputs", "actions", "initial", "states", "transitions"},
              "statechart");

  Document out;
  Statechart& sc = out.chart;
  for (const nlohmann::json& jv : read_array(chart, "variables", "statechart")) {
    expect_keys(jv, {"name", "values"}, "variable");
    ProcessModelVariable var;
    var.name = read_string(jv, "name", "variable");
    for (const nlohmann::json& jval : read_array(jv, "values", "variable")) {
      expect_keys(jval, {"name", "range"}, "abstract value");
      var.values.push_back({read_string(jval, "name", "abstract value"),
                            read_range(field(jval, "range", "abstract value"), "value range")});
    }
    if (var.values.empty()) throw std::invalid_argument("variable '" + var.name + "' has no values");
    sc.internals.push_back(std::move(var));
  }
  StpaModel shell;
  shell.variables = sc.internals;
  sc.space = ValuationSpace(shell);

  for (const nlohmann::json& ji : read_array(chart, "inputs", "statechart")) {
    if (!ji.is_string()) throw std::invalid_argument("statechart inputs must be strings");
    sc.inputs.push_back(ji.get<std::string>());
  }
  for (const nlohmann::json& ja : read_array(chart, "actions", "statechart")) {
    if (!ja.is_string()) throw std::invalid_argument("statechart actions must be strings");
    sc.actions.push_back(ja.get<std::string>());
  }

  for (const nlohmann::json& js : read_array(chart, "states", "statechart")) {
    expect_keys(js, {"id", "action", "origin", "splitContextId", "splitContext"}, "state");
    State s;
    s.id = read_string(js, "id", "state");
    s.action = read_string(js, "action", "state");
    s.origin = read_origin(read_string(js, "origin", "state"));
    s.split_context_id = read_string(js, "splitContextId", "state");
    s.split_context =
        read_set(field(js, "splitContext", "state"), sc.space.size(), "state split context");
    sc.states.push_back(std::move(s));
  }
  if (sc.states.empty()) throw std::invalid_argument("statechart has no states");

  const int nstates = static_cast<int>(sc.states.size());
  sc.initial = read_int(chart, "initial", "statechart");
  if (sc.initial < 0 || sc.initial >= nstates)
    throw std::invalid_argument("initial state index is out of range");

  for (const nlohmann::json& jt : read_array(chart, "transitions", "statechart")) {
    expect_keys(jt, {"source", "target", "guard", "class", "priority", "rank", "provenance"},
                "transition");
    Transition t;
    t.source = read_int(jt, "source", "transition");
    t.target = read_int(jt, "target", "transition");
    if (t.source < 0 || t.source >= nstates || t.target < 0 || t.target >= nstates)
      throw std::invalid_argument("transition endpoint is out of range");
    t.guard = read_set(field(jt, "guard", "transition"), sc.space.size(), "transition guard");
    t.kind = read_class(read_string(jt, "class", "transition"));
    t.priority = read_int(jt, "priority", "transition");
    t.rank = read_int(jt, "rank", "transition");
    for (const nlohmann::json& jp : read_array(jt, "provenance", "transition")) {
      if (!jp.is_string()) throw std::invalid_argument("transition provenance must be strings");
      t.provenance.push_back(jp.get<std::string>());
    }
    sc.transitions.push_back(std::move(t));
  }

  for (const nlohmann::json& jr : read_array(doc, "formulas", "document")) {
    expect_keys(jr,
                {"id", "ruleId", "contextId", "action", "shape", "context", "set",
                 "declarationIndex", "formula"},
                "formula entry");
    TranslatedRule rule;
    RuleInstance& inst = rule.instance;
    inst.id = read_string(jr, "id", "formula entry");
    inst.rule_id = read_string(jr, "ruleId", "formula entry");
    inst.context_id = read_string(jr, "contextId", "formula entry");
    inst.action = read_string(jr, "action", "formula entry");
    inst.shape = read_shape(read_string(jr, "shape", "formula entry"));
    const nlohmann::json& jc = field(jr, "context", "formula entry");
    expect_keys(jc, {"id", "assignments"}, "context");
    inst.context.id = read_string(jc, "id", "context");
    for (const nlohmann::json& jassign : read_array(jc, "assignments", "context")) {
      if (!jassign.is_array() || jassign.size() != 2 || !jassign[0].is_string() ||
          !jassign[1].is_string())
        throw std::invalid_argument("context assignments must be [variable, value] pairs");
      inst.context.assignments.emplace_back(jassign[0].get<std::string>(),
                                            jassign[1].get<std::string>());
    }
    inst.set = read_set(field(jr, "set", "formula entry"), sc.space.size(), "formula entry set");
    inst.declaration_index = read_int(jr, "declarationIndex", "formula entry");
    rule.formula = read_formula(field(jr, "formula", "formula entry"), sc.space, sc.actions);
    out.formulas.push_back(std::move(rule));
  }
  return out;
}

// ── DOT ─────────────────────────────────────────────────────────────────────

/// GraphViz rendering: one box per state (the initial one double-bordered),
/// one edge per transition labeled with its priority and guard.
inline std::string emit_dot(const Statechart& sc) {
  std::string out = "digraph statechart {\n  rankdir=LR;\n  node [shape=box];\n";
  for (std::size_t s = 0; s < sc.states.size(); ++s) {
    const State& state = sc.states[s];
    out += "  \"" + state.id + "\" [label=\"" + state.id + "\\n" +
           (state.action.empty() ? "none" : state.action) + "\"";
    if (static_cast<int>(s) == sc.initial) out += ", peripheries=2";
    out += "];\n";
  }
  for (const Transition& t : sc.transitions)
    out += "  \"" + sc.states[static_cast<std::size_t>(t.source)].id + "\" -> \"" +
           sc.states[static_cast<std::size_t>(t.target)].id + "\" [label=\"p" +
           std::to_string(t.priority) + ": " + guard_text(sc.internals, sc.space, t.guard) +
           "\"];\n";
  out += "}\n";
  return out;
}

}  // namespace sbm

#endif  // SBM_EMIT_HPP
