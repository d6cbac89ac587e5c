// ============================================================================
// stpa.hpp
//
// Core model of an STPA-style risk analysis: a controller with process-model
// variables over abstract values, control actions, and rules (UCAs/DCAs) that
// mark providing or not providing an action as unsafe in a context.
//
// Also provides the semantic ground everything else stands on: the valuation
// space spanned by the process-model variables, exact valuation sets (bitsets
// over that space), context expansion, and model validation.
// ============================================================================
#ifndef SBM_STPA_HPP
#define SBM_STPA_HPP

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sbm {

// ── Value ranges ────────────────────────────────────────────────────────────

/// Endpoint of a numeric range. MIN/MAX are the open ends of the number line;
/// a reference names an externally supplied parameter (e.g. desiredSpeed).
struct Bound {
  enum class Kind { Min, Max, Number, Reference };

  Kind kind = Kind::Number;
  double number = 0.0;
  std::string reference;

  static Bound min() { return {Kind::Min, 0.0, {}}; }
  static Bound max() { return {Kind::Max, 0.0, {}}; }
  static Bound num(double v) { return {Kind::Number, v, {}}; }
  static Bound ref(std::string name) { return {Kind::Reference, 0.0, std::move(name)}; }

  friend bool operator==(const Bound&, const Bound&) = default;
};

/// Compare two bounds if their order is knowable: both numeric, identical
/// references, or one side is MIN/MAX. Returns -1/0/1, or nullopt when the
/// order depends on an unknown parameter value.
namespace detail {

/// Shortest round-trippable decimal text for a number.
inline std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace detail

inline std::string to_text(const Bound& b) {
  switch (b.kind) {
    case Bound::Kind::Min: return "MIN";
    case Bound::Kind::Max: return "MAX";
    case Bound::Kind::Number: return detail::format_number(b.number);
    case Bound::Kind::Reference: return b.reference;
  }
  return "?";
}

inline std::optional<int> compare_bounds(const Bound& a, const Bound& b) {
  using K = Bound::Kind;
  if (a.kind == K::Min) return b.kind == K::Min ? 0 : -1;
  if (b.kind == K::Min) return 1;
  if (a.kind == K::Max) return b.kind == K::Max ? 0 : 1;
  if (b.kind == K::Max) return -1;
  if (a.kind == K::Number && b.kind == K::Number)
    return a.number < b.number ? -1 : (a.number > b.number ? 1 : 0);
  if (a.kind == K::Reference && b.kind == K::Reference && a.reference == b.reference) return 0;
  return std::nullopt;
}

/// Domain of one abstract value.
///   Opaque          - bare name, no numeric meaning (enum-like)
///   BooleanLiteral  - the value stands for true or false
///   Singleton       - exactly one number [v]
///   Interval        - numeric interval with per-end inclusivity
struct ValueRange {
  enum class Kind { Opaque, BooleanLiteral, Singleton, Interval };

  Kind kind = Kind::Opaque;
  bool boolean = false;                    // BooleanLiteral
  Bound point;                             // Singleton
  Bound lower, upper;                      // Interval
  bool lower_inclusive = false, upper_inclusive = false;

  static ValueRange opaque() { return {}; }
  static ValueRange boolean_literal(bool b) {
    ValueRange r; r.kind = Kind::BooleanLiteral; r.boolean = b; return r;
  }
  static ValueRange singleton(Bound b) {
    ValueRange r; r.kind = Kind::Singleton; r.point = std::move(b); return r;
  }
  static ValueRange interval(Bound lo, bool lo_incl, Bound hi, bool hi_incl) {
    ValueRange r; r.kind = Kind::Interval;
    r.lower = std::move(lo); r.lower_inclusive = lo_incl;
    r.upper = std::move(hi); r.upper_inclusive = hi_incl;
    return r;
  }

  bool is_numeric() const { return kind == Kind::Singleton || kind == Kind::Interval; }

  friend bool operator==(const ValueRange&, const ValueRange&) = default;
};

// ── Analysis model ──────────────────────────────────────────────────────────

struct AbstractValue {
  std::string name;
  ValueRange range;  // Opaque when the analysis gave no range

  friend bool operator==(const AbstractValue&, const AbstractValue&) = default;
};

struct ProcessModelVariable {
  std::string name;
  std::vector<AbstractValue> values;  // at least one; order is declaration order

  friend bool operator==(const ProcessModelVariable&, const ProcessModelVariable&) = default;
};

/// Partial assignment of process-model variables, in written order.
struct Context {
  std::string id;
  std::vector<std::pair<std::string, std::string>> assignments;  // (variable, value)

  friend bool operator==(const Context&, const Context&) = default;
};

enum class UcaKind { Provided, NotProvided, TooEarly, TooLate, AppliedTooLong, StoppedTooSoon };
enum class DcaKind { Provided, NotProvided };

inline const char* to_keyword(UcaKind k) {
  switch (k) {
    case UcaKind::Provided: return "provided";
    case UcaKind::NotProvided: return "notProvided";
    case UcaKind::TooEarly: return "tooEarly";
    case UcaKind::TooLate: return "tooLate";
    case UcaKind::AppliedTooLong: return "appliedTooLong";
    case UcaKind::StoppedTooSoon: return "stoppedTooSoon";
  }
  return "?";
}
inline const char* to_keyword(DcaKind k) {
  return k == DcaKind::Provided ? "provided" : "notProvided";
}

struct UcaRule {
  std::string id;
  std::string action;
  UcaKind kind = UcaKind::Provided;
  std::vector<Context> contexts;  // at least one

  friend bool operator==(const UcaRule&, const UcaRule&) = default;
};

struct DcaRule {
  std::string id;
  std::string action;
  DcaKind kind = DcaKind::Provided;
  std::vector<Context> contexts;

  friend bool operator==(const DcaRule&, const DcaRule&) = default;
};

struct StpaModel {
  std::string controller;
  std::vector<ProcessModelVariable> variables;
  std::vector<std::string> actions;
  std::vector<UcaRule> ucas;
  std::vector<DcaRule> dcas;

  const ProcessModelVariable* find_variable(const std::string& name) const {
    for (const auto& v : variables)
      if (v.name == name) return &v;
    return nullptr;
  }

  friend bool operator==(const StpaModel&, const StpaModel&) = default;
};

// ── Valuation space ─────────────────────────────────────────────────────────

/// Total assignment of every process-model variable, as value indices in
/// variable declaration order.
using Valuation = std::vector<int>;

/// Mixed-radix index structure over the full valuation space. The first
/// declared variable is the most significant digit.
class ValuationSpace {
 public:
  ValuationSpace() = default;

  explicit ValuationSpace(const StpaModel& model) {
    for (const auto& var : model.variables) {
      if (var.values.empty()) throw std::invalid_argument("variable without values: " + var.name);
      radix_.push_back(static_cast<int>(var.values.size()));
      names_.push_back(var.name);
      std::vector<std::string> vals;
      for (const auto& v : var.values) vals.push_back(v.name);
      value_names_.push_back(std::move(vals));
    }
    size_ = 1;
    for (int r : radix_) size_ *= static_cast<std::size_t>(r);
  }

  std::size_t variable_count() const { return radix_.size(); }
  std::size_t size() const { return size_; }
  int radix(std::size_t var) const { return radix_[var]; }
  const std::string& variable_name(std::size_t var) const { return names_[var]; }
  const std::string& value_name(std::size_t var, int val) const {
    return value_names_[var][static_cast<std::size_t>(val)];
  }

  std::optional<std::size_t> find_variable(const std::string& name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
      if (names_[i] == name) return i;
    return std::nullopt;
  }
  std::optional<int> find_value(std::size_t var, const std::string& value) const {
    const auto& vals = value_names_[var];
    for (std::size_t i = 0; i < vals.size(); ++i)
      if (vals[i] == value) return static_cast<int>(i);
    return std::nullopt;
  }

  std::size_t index_of(const Valuation& v) const {
    std::size_t idx = 0;
    for (std::size_t i = 0; i < radix_.size(); ++i)
      idx = idx * static_cast<std::size_t>(radix_[i]) + static_cast<std::size_t>(v[i]);
    return idx;
  }
  Valuation valuation_of(std::size_t index) const {
    Valuation v(radix_.size(), 0);
    for (std::size_t i = radix_.size(); i-- > 0;) {
      v[i] = static_cast<int>(index % static_cast<std::size_t>(radix_[i]));
      index /= static_cast<std::size_t>(radix_[i]);
    }
    return v;
  }

  friend bool operator==(const ValuationSpace&, const ValuationSpace&) = default;

 private:
  std::vector<int> radix_;
  std::vector<std::string> names_;
  std::vector<std::vector<std::string>> value_names_;
  std::size_t size_ = 1;
};

/// Exact set of valuations, as a bitset over valuation indices.
class ValuationSet {
 public:
  ValuationSet() = default;
  explicit ValuationSet(std::size_t universe, bool full = false)
      : universe_(universe), words_((universe + 63) / 64, full ? ~std::uint64_t{0} : 0) {
    trim();
  }

  std::size_t universe() const { return universe_; }

  bool test(std::size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1; }
  void set(std::size_t i) { words_[i >> 6] |= std::uint64_t{1} << (i & 63); }
  void reset(std::size_t i) { words_[i >> 6] &= ~(std::uint64_t{1} << (i & 63)); }

  bool any() const {
    for (auto w : words_)
      if (w) return true;
    return false;
  }
  bool none() const { return !any(); }
  std::size_t count() const {
    std::size_t n = 0;
    for (auto w : words_) n += static_cast<std::size_t>(__builtin_popcountll(w));
    return n;
  }

  ValuationSet& operator&=(const ValuationSet& o) {
    for (std::size_t i = 0; i < words_.size(); ++i) words_[i] &= o.words_[i];
    return *this;
  }
  ValuationSet& operator|=(const ValuationSet& o) {
    for (std::size_t i = 0; i < words_.size(); ++i) words_[i] |= o.words_[i];
    return *this;
  }
  /// Set difference: keep elements not in o.
  ValuationSet& operator-=(const ValuationSet& o) {
    for (std::size_t i = 0; i < words_.size(); ++i) words_[i] &= ~o.words_[i];
    return *this;
  }
  friend ValuationSet operator&(ValuationSet a, const ValuationSet& b) { return a &= b; }
  friend ValuationSet operator|(ValuationSet a, const ValuationSet& b) { return a |= b; }
  friend ValuationSet operator-(ValuationSet a, const ValuationSet& b) { return a -= b; }

  ValuationSet complement() const {
    ValuationSet r(universe_, true);
    return r -= *this;
  }

  bool intersects(const ValuationSet& o) const {
    for (std::size_t i = 0; i < words_.size(); ++i)
      if (words_[i] & o.words_[i]) return true;
    return false;
  }
  bool subset_of(const ValuationSet& o) const {
    for (std::size_t i = 0; i < words_.size(); ++i)
      if (words_[i] & ~o.words_[i]) return false;
    return true;
  }

  std::vector<std::size_t> indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < universe_; ++i)
      if (test(i)) out.push_back(i);
    return out;
  }

  friend bool operator==(const ValuationSet&, const ValuationSet&) = default;

 private:
  void trim() {
    if (universe_ % 64 != 0 && !words_.empty())
      words_.back() &= (std::uint64_t{1} << (universe_ % 64)) - 1;
  }

  std::size_t universe_ = 0;
  std::vector<std::uint64_t> words_;
};

/// All valuations whose var-th variable equals val.
inline ValuationSet valuations_where(const ValuationSpace& space, std::size_t var, int val) {
  ValuationSet out(space.size());
  std::size_t stride = 1;
  for (std::size_t i = space.variable_count(); i-- > var + 1;)
    stride *= static_cast<std::size_t>(space.radix(i));
  const std::size_t block = stride * static_cast<std::size_t>(space.radix(var));
  for (std::size_t base = 0; base < space.size(); base += block)
    for (std::size_t k = 0; k < stride; ++k)
      out.set(base + static_cast<std::size_t>(val) * stride + k);
  return out;
}

/// Expand a partial context to the exact set of total valuations that agree
/// with it. Throws on names that do not resolve; validate reports those first.
inline ValuationSet expand_context(const ValuationSpace& space, const Context& ctx) {
  ValuationSet out(space.size(), true);
  for (const auto& [var_name, val_name] : ctx.assignments) {
    auto var = space.find_variable(var_name);
    if (!var) throw std::invalid_argument("unknown variable in context: " + var_name);
    auto val = space.find_value(*var, val_name);
    if (!val) throw std::invalid_argument("unknown value in context: " + var_name + "=" + val_name);
    out &= valuations_where(space, *var, *val);
  }
  return out;
}

inline std::vector<Valuation> materialize(const ValuationSpace& space, const ValuationSet& set) {
  std::vector<Valuation> out;
  for (std::size_t i : set.indices()) out.push_back(space.valuation_of(i));
  return out;
}

// ── Rule instances ──────────────────────────────────────────────────────────

/// Behavioral shape of one (rule, context) pair. UCAs map kind-for-kind;
/// DCAs swap: a desired provision is a demand, a desired omission a ban.
enum class RuleShape {
  Forbidden,         // action must not fire while the context holds
  Demanded,          // action must fire during every context span
  DemandedAtOnce,    // action must fire at the first reaction of a span
  ForbiddenAtEntry,  // action must not fire at the reaction before a span starts
  StopWithContext,   // action must not continue once the context has ended
  KeepWithContext    // action must not stop while the context still holds
};

inline RuleShape shape_of(UcaKind k) {
  switch (k) {
    case UcaKind::Provided: return RuleShape::Forbidden;
    case UcaKind::NotProvided: return RuleShape::Demanded;
    case UcaKind::TooEarly: return RuleShape::ForbiddenAtEntry;
    case UcaKind::TooLate: return RuleShape::DemandedAtOnce;
    case UcaKind::AppliedTooLong: return RuleShape::StopWithContext;
    case UcaKind::StoppedTooSoon: return RuleShape::KeepWithContext;
  }
  throw std::logic_error("bad UcaKind");
}
inline RuleShape shape_of(DcaKind k) {
  return k == DcaKind::Provided ? RuleShape::Demanded : RuleShape::Forbidden;
}

inline bool is_demand(RuleShape s) {
  return s == RuleShape::Demanded || s == RuleShape::DemandedAtOnce;
}

inline const char* shape_label(RuleShape s) {
  switch (s) {
    case RuleShape::Forbidden: return "forbidden";
    case RuleShape::Demanded: return "demanded";
    case RuleShape::DemandedAtOnce: return "demandedAtOnce";
    case RuleShape::ForbiddenAtEntry: return "forbiddenAtEntry";
    case RuleShape::StopWithContext: return "stopWithContext";
    case RuleShape::KeepWithContext: return "keepWithContext";
  }
  return "?";
}

/// One (rule, context) pair with its expanded valuation set.
struct RuleInstance {
  std::string id;        // "<rule>.<context>"
  std::string rule_id;
  std::string context_id;
  std::string action;
  RuleShape shape = RuleShape::Forbidden;
  Context context;
  ValuationSet set;
  int declaration_index = 0;  // global order: ucas first, then dcas, contexts in row order

  friend bool operator==(const RuleInstance&, const RuleInstance&) = default;
};

/// Flatten all rules into per-context instances, in declaration order.
/// Requires resolvable cross-references (validate reports them gently first).
inline std::vector<RuleInstance> collect_instances(const StpaModel& model,
                                                   const ValuationSpace& space) {
  std::vector<RuleInstance> out;
  int decl = 0;
  auto add = [&](const std::string& rule_id, const std::string& action, RuleShape shape,
                 const std::vector<Context>& contexts) {
    for (const auto& ctx : contexts) {
      RuleInstance inst;
      inst.id = rule_id + "." + ctx.id;
      inst.rule_id = rule_id;
      inst.context_id = ctx.id;
      inst.action = action;
      inst.shape = shape;
      inst.context = ctx;
      inst.set = expand_context(space, ctx);
      inst.declaration_index = decl++;
      out.push_back(std::move(inst));
    }
  };
  for (const auto& r : model.ucas) add(r.id, r.action, shape_of(r.kind), r.contexts);
  for (const auto& r : model.dcas) add(r.id, r.action, shape_of(r.kind), r.contexts);
  return out;
}

// ── Concrete types ──────────────────────────────────────────────────────────

enum class ConcreteType { Boolean, Number, EnumLike };

/// Boolean if the values are the boolean literals, number if any value has a
/// numeric range, enum-like when all values are bare names.
inline ConcreteType infer_type(const ProcessModelVariable& var) {
  bool any_numeric = false;
  for (const auto& v : var.values) {
    if (v.range.kind == ValueRange::Kind::BooleanLiteral) return ConcreteType::Boolean;
    if (v.range.is_numeric()) any_numeric = true;
  }
  return any_numeric ? ConcreteType::Number : ConcreteType::EnumLike;
}

/// Names referenced by range endpoints, in first-appearance order. These are
/// the external inputs the synthesized statechart compares against.
inline std::vector<std::string> reference_inputs(const StpaModel& model) {
  std::vector<std::string> out;
  auto add = [&](const Bound& b) {
    if (b.kind == Bound::Kind::Reference &&
        std::find(out.begin(), out.end(), b.reference) == out.end())
      out.push_back(b.reference);
  };
  for (const auto& var : model.variables)
    for (const auto& v : var.values) {
      if (v.range.kind == ValueRange::Kind::Singleton) add(v.range.point);
      if (v.range.kind == ValueRange::Kind::Interval) {
        add(v.range.lower);
        add(v.range.upper);
      }
    }
  return out;
}

// ── Validation ──────────────────────────────────────────────────────────────

struct Diagnostic {
  enum class Severity { Error, Warning };
  Severity severity = Severity::Error;
  std::vector<std::string> rules;  // instance ids involved, sorted
  std::string message;

  friend bool operator==(const Diagnostic&, const Diagnostic&) = default;
};

namespace detail {

inline void add_diag(std::vector<Diagnostic>& out, Diagnostic::Severity sev,
                     std::vector<std::string> rules, std::string msg) {
  std::sort(rules.begin(), rules.end());
  out.push_back({sev, std::move(rules), std::move(msg)});
}

/// Closed-interval view of a numeric range for overlap/coverage checks.
struct NumInterval {
  Bound lo, hi;
  bool lo_incl = true, hi_incl = true;
  const AbstractValue* value = nullptr;
};

inline std::vector<NumInterval> numeric_intervals(const ProcessModelVariable& var) {
  std::vector<NumInterval> out;
  for (const auto& v : var.values) {
    if (v.range.kind == ValueRange::Kind::Singleton)
      out.push_back({v.range.point, v.range.point, true, true, &v});
    else if (v.range.kind == ValueRange::Kind::Interval)
      out.push_back({v.range.lower, v.range.upper, v.range.lower_inclusive,
                     v.range.upper_inclusive, &v});
  }
  return out;
}

/// Nonempty intersection; nullopt when parameter order is unknown.
inline std::optional<bool> intervals_overlap(const NumInterval& a, const NumInterval& b) {
  // lo = max of lower bounds, hi = min of upper bounds, then lo <=? hi.
  auto cl = compare_bounds(a.lo, b.lo);
  auto ch = compare_bounds(a.hi, b.hi);
  if (!cl || !ch) return std::nullopt;
  const NumInterval& L = *cl >= 0 ? a : b;          // larger lower bound
  bool lo_incl = *cl == 0 ? (a.lo_incl && b.lo_incl) : L.lo_incl;
  const NumInterval& H = *ch <= 0 ? a : b;          // smaller upper bound
  bool hi_incl = *ch == 0 ? (a.hi_incl && b.hi_incl) : H.hi_incl;
  auto c = compare_bounds(L.lo, H.hi);
  if (!c) return std::nullopt;
  if (*c < 0) return true;
  if (*c > 0) return false;
  return lo_incl && hi_incl;
}

}  // namespace detail

/// Check a model for structural problems, contradictory or unrealizable rule
/// combinations (errors) and questionable numeric ranges (warnings).
/// Deterministic: diagnostics are reported in a canonical order independent
/// of rule declaration order.
inline std::vector<Diagnostic> validate(const StpaModel& model) {
  using Sev = Diagnostic::Severity;
  std::vector<Diagnostic> out;
  bool structure_ok = true;

  // Structure: names, uniqueness, value domains.
  for (std::size_t i = 0; i < model.variables.size(); ++i) {
    const auto& var = model.variables[i];
    for (std::size_t j = i + 1; j < model.variables.size(); ++j)
      if (model.variables[j].name == var.name) {
        detail::add_diag(out, Sev::Error, {}, "duplicate variable '" + var.name + "'");
        structure_ok = false;
      }
    if (var.values.empty()) {
      detail::add_diag(out, Sev::Error, {}, "variable '" + var.name + "' has no values");
      structure_ok = false;
    }
    bool has_bool = false, has_true = false, has_false = false, has_ranged = false,
         has_opaque = false;
    for (std::size_t j = 0; j < var.values.size(); ++j) {
      const auto& val = var.values[j];
      for (std::size_t k = j + 1; k < var.values.size(); ++k)
        if (var.values[k].name == val.name) {
          detail::add_diag(out, Sev::Error, {},
                           "duplicate value '" + val.name + "' in variable '" + var.name + "'");
          structure_ok = false;
        }
      switch (val.range.kind) {
        case ValueRange::Kind::BooleanLiteral:
          has_bool = true;
          (val.range.boolean ? has_true : has_false) = true;
          break;
        case ValueRange::Kind::Opaque:
          has_opaque = true;
          break;
        case ValueRange::Kind::Singleton:
          has_ranged = true;
          if (val.range.point.kind == Bound::Kind::Min || val.range.point.kind == Bound::Kind::Max) {
            detail::add_diag(out, Sev::Error, {},
                             "value '" + var.name + "." + val.name + "' uses MIN/MAX as a point");
            structure_ok = false;
          }
          break;
        case ValueRange::Kind::Interval:
          has_ranged = true;
          if (val.range.lower.kind == Bound::Kind::Max || val.range.upper.kind == Bound::Kind::Min) {
            detail::add_diag(out, Sev::Error, {},
                             "value '" + var.name + "." + val.name + "' has an inverted range");
            structure_ok = false;
          }
          break;
      }
    }
    if (has_bool && !(var.values.size() == 2 && has_true && has_false)) {
      detail::add_diag(out, Sev::Error, {},
                       "variable '" + var.name + "' mixes boolean literals with other values");
      structure_ok = false;
    }
    if (has_ranged && has_opaque)
      detail::add_diag(out, Sev::Warning, {},
                       "variable '" + var.name + "' mixes ranged and unranged values");
  }
  for (std::size_t i = 0; i < model.actions.size(); ++i)
    for (std::size_t j = i + 1; j < model.actions.size(); ++j)
      if (model.actions[i] == model.actions[j]) {
        detail::add_diag(out, Sev::Error, {}, "duplicate control action '" + model.actions[i] + "'");
        structure_ok = false;
      }

  // Rule ids and cross-references.
  std::vector<std::string> rule_ids;
  auto check_rule = [&](const std::string& id, const std::string& action,
                        const std::vector<Context>& contexts) {
    if (std::find(rule_ids.begin(), rule_ids.end(), id) != rule_ids.end()) {
      detail::add_diag(out, Sev::Error, {id}, "duplicate rule id '" + id + "'");
      structure_ok = false;
    }
    rule_ids.push_back(id);
    if (std::find(model.actions.begin(), model.actions.end(), action) == model.actions.end()) {
      detail::add_diag(out, Sev::Error, {id}, "rule '" + id + "' names unknown action '" + action + "'");
      structure_ok = false;
    }
    if (contexts.empty()) {
      detail::add_diag(out, Sev::Error, {id}, "rule '" + id + "' has no contexts");
      structure_ok = false;
    }
    std::vector<std::string> ctx_ids;
    for (const auto& ctx : contexts) {
      if (std::find(ctx_ids.begin(), ctx_ids.end(), ctx.id) != ctx_ids.end()) {
        detail::add_diag(out, Sev::Error, {id}, "duplicate context id '" + ctx.id + "' in rule '" + id + "'");
        structure_ok = false;
      }
      ctx_ids.push_back(ctx.id);
      if (ctx.assignments.empty()) {
        detail::add_diag(out, Sev::Error, {id + "." + ctx.id}, "context '" + id + "." + ctx.id + "' is empty");
        structure_ok = false;
      }
      std::vector<std::string> seen;
      for (const auto& [var_name, val_name] : ctx.assignments) {
        if (std::find(seen.begin(), seen.end(), var_name) != seen.end()) {
          detail::add_diag(out, Sev::Error, {id + "." + ctx.id},
                           "context '" + id + "." + ctx.id + "' assigns '" + var_name + "' twice");
          structure_ok = false;
        }
        seen.push_back(var_name);
        const auto* var = model.find_variable(var_name);
        if (!var) {
          detail::add_diag(out, Sev::Error, {id + "." + ctx.id},
                           "context '" + id + "." + ctx.id + "' uses unknown variable '" + var_name + "'");
          structure_ok = false;
        } else {
          bool found = false;
          for (const auto& v : var->values) found |= v.name == val_name;
          if (!found) {
            detail::add_diag(out, Sev::Error, {id + "." + ctx.id},
                             "context '" + id + "." + ctx.id + "' uses unknown value '" + var_name +
                                 "=" + val_name + "'");
            structure_ok = false;
          }
        }
      }
    }
  };
  for (const auto& r : model.ucas) check_rule(r.id, r.action, r.contexts);
  for (const auto& r : model.dcas) check_rule(r.id, r.action, r.contexts);

  // Numeric range warnings, regardless of rule problems.
  for (const auto& var : model.variables) {
    auto ivs = detail::numeric_intervals(var);
    for (std::size_t i = 0; i < ivs.size(); ++i)
      for (std::size_t j = i + 1; j < ivs.size(); ++j) {
        auto ov = detail::intervals_overlap(ivs[i], ivs[j]);
        if (ov && *ov)
          detail::add_diag(out, Sev::Warning, {},
                           "ranges of '" + var.name + "." + ivs[i].value->name + "' and '" +
                               var.name + "." + ivs[j].value->name + "' overlap");
      }
    // Coverage of the whole number line, when every value is ranged and all
    // endpoints are mutually comparable.
    if (!ivs.empty() && ivs.size() == var.values.size()) {
      bool comparable = true;
      for (std::size_t i = 0; i < ivs.size() && comparable; ++i)
        for (std::size_t j = 0; j < ivs.size() && comparable; ++j) {
          comparable = compare_bounds(ivs[i].lo, ivs[j].lo).has_value() &&
                       compare_bounds(ivs[i].lo, ivs[j].hi).has_value() &&
                       compare_bounds(ivs[i].hi, ivs[j].hi).has_value();
        }
      if (comparable) {
        auto sorted = ivs;
        std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
          int c = *compare_bounds(a.lo, b.lo);
          if (c != 0) return c < 0;
          return a.lo_incl && !b.lo_incl;
        });
        bool gap = sorted.front().lo.kind != Bound::Kind::Min;
        Bound covered_hi = sorted.front().hi;
        bool covered_hi_incl = sorted.front().hi_incl;
        for (std::size_t i = 1; i < sorted.size() && !gap; ++i) {
          int c = *compare_bounds(sorted[i].lo, covered_hi);
          if (c > 0 || (c == 0 && !sorted[i].lo_incl && !covered_hi_incl)) gap = true;
          int ch = *compare_bounds(sorted[i].hi, covered_hi);
          if (ch > 0 || (ch == 0 && sorted[i].hi_incl)) {
            covered_hi = sorted[i].hi;
            covered_hi_incl = sorted[i].hi_incl;
          }
        }
        if (!gap) gap = covered_hi.kind != Bound::Kind::Max;
        if (gap)
          detail::add_diag(out, Sev::Warning, {},
                           "ranges of '" + var.name + "' do not cover the whole number line");
      }
    }
  }

  // Rule interplay needs a resolvable model.
  if (structure_ok) {
    ValuationSpace space(model);
    auto insts = collect_instances(model, space);
    // Union of forbidden contexts per action. A keep-while or stop-after
    // context lying entirely inside it can never see its action emitted, so
    // its rule is vacuous and cannot contradict anything.
    std::map<std::string, ValuationSet> banned;
    for (const auto& inst : insts)
      if (inst.shape == RuleShape::Forbidden) {
        auto [it, fresh] = banned.try_emplace(inst.action, inst.set);
        if (!fresh) it->second |= inst.set;
      }
    auto vacuous = [&](const RuleInstance& r) {
      auto it = banned.find(r.action);
      return it != banned.end() && r.set.subset_of(it->second);
    };
    auto pair_msg = [&](const RuleInstance& a, const RuleInstance& b, const std::string& what) {
      // Ids in name order so the text is independent of declaration order.
      const std::string& x = std::min(a.id, b.id);
      const std::string& y = std::max(a.id, b.id);
      detail::add_diag(out, Sev::Error, {a.id, b.id}, what + " ('" + x + "' vs '" + y + "')");
    };
    for (std::size_t i = 0; i < insts.size(); ++i) {
      for (std::size_t j = i + 1; j < insts.size(); ++j) {
        const auto& a = insts[i];
        const auto& b = insts[j];
        const bool overlap = a.set.intersects(b.set);
        if (!overlap) continue;
        const bool same_action = a.action == b.action;
        auto has = [&](RuleShape s) { return a.shape == s || b.shape == s; };
        auto pick = [&](RuleShape s) -> const RuleInstance& { return a.shape == s ? a : b; };
        auto other = [&](RuleShape s) -> const RuleInstance& { return a.shape == s ? b : a; };

        if (same_action && is_demand(a.shape) && b.shape == RuleShape::Forbidden)
          pair_msg(a, b, "action '" + a.action + "' is both demanded and forbidden in overlapping contexts");
        else if (same_action && is_demand(b.shape) && a.shape == RuleShape::Forbidden)
          pair_msg(a, b, "action '" + a.action + "' is both demanded and forbidden in overlapping contexts");
        else if (!same_action && is_demand(a.shape) && is_demand(b.shape))
          pair_msg(a, b, "actions '" + std::min(a.action, b.action) + "' and '" +
                             std::max(a.action, b.action) +
                             "' are both demanded in overlapping contexts (one action per reaction)");
        else if (same_action && has(RuleShape::KeepWithContext) && has(RuleShape::Forbidden)) {
          if (!vacuous(pick(RuleShape::KeepWithContext)))
            pair_msg(a, b, "action '" + a.action + "' must be kept inside a context where it is forbidden");
        } else if (!same_action && has(RuleShape::KeepWithContext) &&
                   is_demand(a.shape == RuleShape::KeepWithContext ? b.shape : a.shape)) {
          const auto& keep = pick(RuleShape::KeepWithContext);
          const auto& dem = other(RuleShape::KeepWithContext);
          if (!vacuous(keep))
            pair_msg(a, b, "keeping '" + keep.action + "' contradicts demanding '" + dem.action +
                               "' in overlapping contexts");
        } else if (same_action && has(RuleShape::KeepWithContext) && has(RuleShape::StopWithContext)) {
          if (pick(RuleShape::KeepWithContext).set != pick(RuleShape::StopWithContext).set &&
              !vacuous(a) && !vacuous(b))
            pair_msg(a, b, "keep-while and stop-after contexts for '" + a.action +
                               "' overlap without being identical");
        } else if (same_action && a.shape == RuleShape::StopWithContext &&
                   b.shape == RuleShape::StopWithContext) {
          if (a.set != b.set && !vacuous(a) && !vacuous(b))
            pair_msg(a, b, "stop-after contexts for '" + a.action +
                               "' overlap without being identical");
        } else if (same_action && has(RuleShape::StopWithContext) &&
                   is_demand(a.shape == RuleShape::StopWithContext ? b.shape : a.shape)) {
          const auto& stop = pick(RuleShape::StopWithContext);
          const auto& dem = other(RuleShape::StopWithContext);
          if (!dem.set.subset_of(stop.set) && !stop.set.subset_of(dem.set) && !vacuous(stop))
            pair_msg(a, b, "demand and stop-after contexts for '" + a.action +
                               "' overlap without one containing the other");
        }
      }
    }

    // Stop-after vs. fresh demand across a context boundary. If the action is
    // demanded somewhere inside a stop-after context, stepping from there to a
    // valuation outside it forces the action off — yet that same step can be
    // the entry of another demand context, which forces it on. No machine can
    // satisfy both, even though the two contexts never overlap.
    std::map<std::string, ValuationSet> demanded_union;
    for (const auto& inst : insts)
      if (is_demand(inst.shape)) {
        auto [it, fresh] = demanded_union.try_emplace(inst.action, inst.set);
        if (!fresh) it->second |= inst.set;
      }
    for (const auto& stop : insts) {
      if (stop.shape != RuleShape::StopWithContext) continue;
      auto forced = demanded_union.find(stop.action);
      if (forced == demanded_union.end()) continue;
      for (const auto& dem : insts) {
        if (!is_demand(dem.shape) || dem.action != stop.action) continue;
        if (((forced->second & stop.set) - dem.set).any() && (dem.set - stop.set).any())
          pair_msg(stop, dem, "action '" + stop.action +
                                  "' is forced to stop exactly where it is demanded afresh");
      }
    }
  }

  std::sort(out.begin(), out.end(), [](const Diagnostic& a, const Diagnostic& b) {
    if (a.severity != b.severity) return a.severity < b.severity;
    if (a.rules != b.rules) return a.rules < b.rules;
    return a.message < b.message;
  });
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

inline bool has_errors(const std::vector<Diagnostic>& diags) {
  for (const auto& d : diags)
    if (d.severity == Diagnostic::Severity::Error) return true;
  return false;
}

}  // namespace sbm

#endif  // SBM_STPA_HPP
