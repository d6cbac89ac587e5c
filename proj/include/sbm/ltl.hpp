// ============================================================================
// ltl.hpp
//
// LTL over reactions. A reaction carries a valuation of the process-model
// variables plus the control action sent (or none). Rules translate into one
// formula per (rule, context):
//
//   Forbidden          G (cv -> !ca)
//   Demanded           (cv -> ((ca R cv) & F ca))
//                        & G ((!cv & X cv) -> X ((ca R cv) & F ca))
//   DemandedAtOnce     (cv -> ca) & G (!cv -> X (cv -> ca))
//   ForbiddenAtEntry   G ((!cv & X cv) -> !ca)
//   StopWithContext    G ((cv & ca) -> X (!cv -> !ca))
//   KeepWithContext    G ((cv & ca) -> X (!ca -> !cv))
//
// where cv is the conjunction of the context's assignments in written order
// and ca means "this control action is sent".
//
// Formulas are evaluated exactly on lasso words (finite prefix + repeated
// loop) with standard semantics: U is a least fixpoint, R its dual. The
// evaluator is bit-parallel: one bit per trace position, fixpoints iterated
// |loop|+1 times over the loop (whose successor never leaves the loop), then
// resolved backward through the prefix.
// ============================================================================
#ifndef SBM_LTL_HPP
#define SBM_LTL_HPP

#include <cstdint>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "sbm/stpa.hpp"

namespace sbm {

// ── Formulas ────────────────────────────────────────────────────────────────

struct Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

struct Formula {
  enum class Kind {
    VarEq,      // process-model variable has a given abstract value
    ActionEq,   // the given control action is sent
    Not, And, Or, Implies,
    Next, Finally, Globally, Until, Release
  };

  Kind kind = Kind::VarEq;
  std::size_t var = 0;   // VarEq: variable index in the valuation space
  int val = 0;           // VarEq: value index
  std::string text;      // VarEq: rendered comparison; ActionEq: action name
  FormulaPtr lhs, rhs;   // operands; unary operators use lhs only

  friend bool operator==(const Formula& a, const Formula& b) {
    auto eq = [](const FormulaPtr& x, const FormulaPtr& y) {
      return x == y || (x && y && *x == *y);
    };
    return a.kind == b.kind && a.var == b.var && a.val == b.val && a.text == b.text &&
           eq(a.lhs, b.lhs) && eq(a.rhs, b.rhs);
  }
};

/// How a single (variable, abstract value) test reads in formulas and guards.
inline std::string atom_display(const ProcessModelVariable& var, const AbstractValue& val) {
  const auto& r = val.range;
  switch (r.kind) {
    case ValueRange::Kind::Opaque:
      return var.name + " == " + val.name;
    case ValueRange::Kind::BooleanLiteral:
      return var.name + (r.boolean ? " == true" : " == false");
    case ValueRange::Kind::Singleton:
      return var.name + " == " + to_text(r.point);
    case ValueRange::Kind::Interval: {
      const bool open_low = r.lower.kind == Bound::Kind::Min;
      const bool open_high = r.upper.kind == Bound::Kind::Max;
      std::string low = var.name + (r.lower_inclusive ? " >= " : " > ") + to_text(r.lower);
      std::string high = var.name + (r.upper_inclusive ? " <= " : " < ") + to_text(r.upper);
      if (open_low && open_high) return "true";
      if (open_low) return high;
      if (open_high) return low;
      return low + " & " + high;
    }
  }
  return var.name + " == " + val.name;
}

inline FormulaPtr f_atom(std::size_t var, int val, std::string display) {
  auto f = std::make_shared<Formula>();
  f->kind = Formula::Kind::VarEq;
  f->var = var;
  f->val = val;
  f->text = std::move(display);
  return f;
}

/// Atom for "<var> has abstract value <val>", with its display text derived
/// from the value's range.
inline FormulaPtr f_var_eq(const StpaModel& model, const ValuationSpace& space,
                           const std::string& var_name, const std::string& val_name) {
  auto var = space.find_variable(var_name);
  if (!var) throw std::invalid_argument("unknown variable '" + var_name + "'");
  auto val = space.find_value(*var, val_name);
  if (!val) throw std::invalid_argument("unknown value '" + var_name + "=" + val_name + "'");
  return f_atom(*var, *val,
                atom_display(model.variables[*var], model.variables[*var].values[*val]));
}

inline FormulaPtr f_action(std::string action) {
  auto f = std::make_shared<Formula>();
  f->kind = Formula::Kind::ActionEq;
  f->text = std::move(action);
  return f;
}

namespace detail {
inline FormulaPtr f_node(Formula::Kind kind, FormulaPtr lhs, FormulaPtr rhs = nullptr) {
  auto f = std::make_shared<Formula>();
  f->kind = kind;
  f->lhs = std::move(lhs);
  f->rhs = std::move(rhs);
  return f;
}
}  // namespace detail

inline FormulaPtr f_not(FormulaPtr a) { return detail::f_node(Formula::Kind::Not, std::move(a)); }
inline FormulaPtr f_and(FormulaPtr a, FormulaPtr b) {
  return detail::f_node(Formula::Kind::And, std::move(a), std::move(b));
}
inline FormulaPtr f_or(FormulaPtr a, FormulaPtr b) {
  return detail::f_node(Formula::Kind::Or, std::move(a), std::move(b));
}
inline FormulaPtr f_implies(FormulaPtr a, FormulaPtr b) {
  return detail::f_node(Formula::Kind::Implies, std::move(a), std::move(b));
}
inline FormulaPtr f_next(FormulaPtr a) { return detail::f_node(Formula::Kind::Next, std::move(a)); }
inline FormulaPtr f_finally(FormulaPtr a) {
  return detail::f_node(Formula::Kind::Finally, std::move(a));
}
inline FormulaPtr f_globally(FormulaPtr a) {
  return detail::f_node(Formula::Kind::Globally, std::move(a));
}
inline FormulaPtr f_until(FormulaPtr a, FormulaPtr b) {
  return detail::f_node(Formula::Kind::Until, std::move(a), std::move(b));
}
inline FormulaPtr f_release(FormulaPtr a, FormulaPtr b) {
  return detail::f_node(Formula::Kind::Release, std::move(a), std::move(b));
}

// ── Rendering ───────────────────────────────────────────────────────────────

inline std::string to_string(const Formula& f);

namespace detail {
/// Operand text: !, X, F, G delimit themselves; everything else gets parens.
inline std::string operand(const Formula& f) {
  switch (f.kind) {
    case Formula::Kind::Not:
    case Formula::Kind::Next:
    case Formula::Kind::Finally:
    case Formula::Kind::Globally:
      return to_string(f);
    default:
      return "(" + to_string(f) + ")";
  }
}
}  // namespace detail

inline std::string to_string(const Formula& f) {
  using K = Formula::Kind;
  switch (f.kind) {
    case K::VarEq: return f.text;
    case K::ActionEq: return "controlAction == " + f.text;
    case K::Not: return "!(" + to_string(*f.lhs) + ")";
    case K::Next: return "X (" + to_string(*f.lhs) + ")";
    case K::Finally: return "F (" + to_string(*f.lhs) + ")";
    case K::Globally: return "G (" + to_string(*f.lhs) + ")";
    case K::And: return detail::operand(*f.lhs) + " & " + detail::operand(*f.rhs);
    case K::Or: return detail::operand(*f.lhs) + " | " + detail::operand(*f.rhs);
    case K::Implies: return detail::operand(*f.lhs) + " -> " + detail::operand(*f.rhs);
    case K::Until: return detail::operand(*f.lhs) + " U " + detail::operand(*f.rhs);
    case K::Release: return detail::operand(*f.lhs) + " R " + detail::operand(*f.rhs);
  }
  return "?";
}

inline std::string to_string(const FormulaPtr& f) { return to_string(*f); }

// ── Translation ─────────────────────────────────────────────────────────────

/// Conjunction of the context's assignments, folded in written order.
inline FormulaPtr context_formula(const StpaModel& model, const ValuationSpace& space,
                                  const Context& ctx) {
  FormulaPtr cv;
  for (const auto& [var, val] : ctx.assignments) {
    FormulaPtr atom = f_var_eq(model, space, var, val);
    cv = cv ? f_and(std::move(cv), std::move(atom)) : std::move(atom);
  }
  if (!cv) throw std::invalid_argument("context '" + ctx.id + "' is empty");
  return cv;
}

/// The formula a single rule instance must enforce on every trace.
inline FormulaPtr translate(const StpaModel& model, const ValuationSpace& space,
                            const RuleInstance& inst) {
  FormulaPtr cv = context_formula(model, space, inst.context);
  FormulaPtr ca = f_action(inst.action);
  auto entry = [&] { return f_and(f_not(cv), f_next(cv)); };  // !cv & X cv
  switch (inst.shape) {
    case RuleShape::Forbidden:
      return f_globally(f_implies(cv, f_not(ca)));
    case RuleShape::Demanded: {
      FormulaPtr served = f_and(f_release(ca, cv), f_finally(ca));
      return f_and(f_implies(cv, served), f_globally(f_implies(entry(), f_next(served))));
    }
    case RuleShape::DemandedAtOnce:
      return f_and(f_implies(cv, ca),
                   f_globally(f_implies(f_not(cv), f_next(f_implies(cv, ca)))));
    case RuleShape::ForbiddenAtEntry:
      return f_globally(f_implies(entry(), f_not(ca)));
    case RuleShape::StopWithContext:
      return f_globally(f_implies(f_and(cv, ca), f_next(f_implies(f_not(cv), f_not(ca)))));
    case RuleShape::KeepWithContext:
      return f_globally(f_implies(f_and(cv, ca), f_next(f_implies(f_not(ca), f_not(cv)))));
  }
  throw std::logic_error("bad RuleShape");
}

struct TranslatedRule {
  RuleInstance instance;
  FormulaPtr formula;
};

/// All rule instances with their formulas, in declaration order.
inline std::vector<TranslatedRule> translate_all(const StpaModel& model,
                                                 const ValuationSpace& space) {
  std::vector<TranslatedRule> out;
  for (auto& inst : collect_instances(model, space)) {
    FormulaPtr f = translate(model, space, inst);
    out.push_back({std::move(inst), std::move(f)});
  }
  return out;
}

// ── Lasso words ─────────────────────────────────────────────────────────────

constexpr int kNoAction = -1;

/// One reaction: the observed valuation and the control action sent (index
/// into the model's action list, or kNoAction).
struct Reaction {
  Valuation values;
  int action = kNoAction;

  friend bool operator==(const Reaction&, const Reaction&) = default;
};

/// Finite word reactions[0..P) followed by reactions[P..N) repeated forever.
struct Lasso {
  std::vector<Reaction> reactions;
  std::size_t loop_start = 0;

  std::size_t size() const { return reactions.size(); }
  std::size_t loop_length() const { return reactions.size() - loop_start; }

  friend bool operator==(const Lasso&, const Lasso&) = default;
};

// ── Evaluation ──────────────────────────────────────────────────────────────

/// A formula flattened for repeated evaluation: nodes in dependency order,
/// shared subformulas evaluated once, one bit of scratch per trace position.
class CompiledFormula {
 public:
  CompiledFormula(const FormulaPtr& f, const std::vector<std::string>& actions) {
    if (!f) throw std::invalid_argument("null formula");
    std::map<const Formula*, int> seen;
    root_ = flatten(*f, actions, seen);
  }

  /// Value of the formula at position `start` of the infinite word.
  bool eval(const Lasso& lasso, std::size_t start) const {
    const std::size_t n = lasso.size();
    if (lasso.loop_start >= n) throw std::invalid_argument("lasso needs a nonempty loop");
    if (start >= n) throw std::out_of_range("start beyond the lasso");
    const std::size_t words = (n + 63) / 64;
    const std::size_t loop = lasso.loop_start;
    scratch_.assign(nodes_.size() * words, 0);

    auto row = [&](int idx) { return scratch_.data() + static_cast<std::size_t>(idx) * words; };
    auto get = [&](const std::uint64_t* bits, std::size_t j) -> bool {
      return (bits[j >> 6] >> (j & 63)) & 1;
    };
    auto put = [&](std::uint64_t* bits, std::size_t j, bool v) {
      if (v) bits[j >> 6] |= std::uint64_t{1} << (j & 63);
      else bits[j >> 6] &= ~(std::uint64_t{1} << (j & 63));
    };
    // dst[j] = src[successor of j]; the successor of the last position is the
    // loop head.
    auto shift_next = [&](std::uint64_t* dst, const std::uint64_t* src) {
      for (std::size_t w = 0; w < words; ++w) {
        dst[w] = src[w] >> 1;
        if (w + 1 < words) dst[w] |= src[w + 1] << 63;
      }
      put(dst, n - 1, get(src, loop));
    };
    const std::uint64_t tail_mask =
        (n & 63) ? ((std::uint64_t{1} << (n & 63)) - 1) : ~std::uint64_t{0};
    auto mask_tail = [&](std::uint64_t* bits) { bits[words - 1] &= tail_mask; };

    std::vector<std::uint64_t> tmp(words);
    for (std::size_t idx = 0; idx < nodes_.size(); ++idx) {
      const Node& nd = nodes_[idx];
      std::uint64_t* out = row(static_cast<int>(idx));
      const std::uint64_t* a = nd.a >= 0 ? row(nd.a) : nullptr;
      const std::uint64_t* b = nd.b >= 0 ? row(nd.b) : nullptr;
      using K = Formula::Kind;
      switch (nd.kind) {
        case K::VarEq:
          for (std::size_t j = 0; j < n; ++j)
            put(out, j, lasso.reactions[j].values[nd.var] == nd.val);
          break;
        case K::ActionEq:
          for (std::size_t j = 0; j < n; ++j) put(out, j, lasso.reactions[j].action == nd.action);
          break;
        case K::Not:
          for (std::size_t w = 0; w < words; ++w) out[w] = ~a[w];
          mask_tail(out);
          break;
        case K::And:
          for (std::size_t w = 0; w < words; ++w) out[w] = a[w] & b[w];
          break;
        case K::Or:
          for (std::size_t w = 0; w < words; ++w) out[w] = a[w] | b[w];
          break;
        case K::Implies:
          for (std::size_t w = 0; w < words; ++w) out[w] = ~a[w] | b[w];
          mask_tail(out);
          break;
        case K::Next:
          shift_next(out, a);
          break;
        case K::Finally:    // least fixpoint of  x = a | X x
        case K::Globally:   // greatest fixpoint of  x = a & X x
        case K::Until:      // least fixpoint of  x = b | (a & X x)
        case K::Release: {  // greatest fixpoint of  x = b & (a | X x)
          const bool least = nd.kind == K::Finally || nd.kind == K::Until;
          for (std::size_t w = 0; w < words; ++w) out[w] = least ? 0 : ~std::uint64_t{0};
          mask_tail(out);
          // Jacobi passes settle the loop: a loop position's successor stays
          // in the loop, so the still-unsettled prefix bits are never read.
          for (std::size_t pass = 0; pass <= n - loop; ++pass) {
            shift_next(tmp.data(), out);
            for (std::size_t w = 0; w < words; ++w) {
              switch (nd.kind) {
                case K::Finally: out[w] = a[w] | tmp[w]; break;
                case K::Globally: out[w] = a[w] & tmp[w]; break;
                case K::Until: out[w] = b[w] | (a[w] & tmp[w]); break;
                default: out[w] = b[w] & (a[w] | tmp[w]); break;
              }
            }
            mask_tail(out);
          }
          // The prefix resolves backward off the settled loop.
          for (std::size_t j = loop; j-- > 0;) {
            bool nx = get(out, j + 1);
            bool v = false;
            switch (nd.kind) {
              case K::Finally: v = get(a, j) || nx; break;
              case K::Globally: v = get(a, j) && nx; break;
              case K::Until: v = get(b, j) || (get(a, j) && nx); break;
              default: v = get(b, j) && (get(a, j) || nx); break;
            }
            put(out, j, v);
          }
          break;
        }
      }
    }
    return get(row(root_), start);
  }

 private:
  struct Node {
    Formula::Kind kind = Formula::Kind::VarEq;
    int a = -1, b = -1;     // child rows
    std::size_t var = 0;    // VarEq
    int val = 0;            // VarEq
    int action = kNoAction; // ActionEq, resolved against the action list
  };

  int flatten(const Formula& f, const std::vector<std::string>& actions,
              std::map<const Formula*, int>& seen) {
    if (auto it = seen.find(&f); it != seen.end()) return it->second;
    Node node;
    node.kind = f.kind;
    if (f.kind == Formula::Kind::VarEq) {
      node.var = f.var;
      node.val = f.val;
    } else if (f.kind == Formula::Kind::ActionEq) {
      auto it = std::find(actions.begin(), actions.end(), f.text);
      if (it == actions.end()) throw std::invalid_argument("unknown action '" + f.text + "'");
      node.action = static_cast<int>(it - actions.begin());
    } else {
      node.a = flatten(*f.lhs, actions, seen);
      if (f.rhs) node.b = flatten(*f.rhs, actions, seen);
    }
    nodes_.push_back(node);
    int idx = static_cast<int>(nodes_.size()) - 1;
    seen.emplace(&f, idx);
    return idx;
  }

  std::vector<Node> nodes_;
  int root_ = -1;
  mutable std::vector<std::uint64_t> scratch_;  // reused across eval calls
};

/// One-off evaluation; compile once and reuse when evaluating many lassos.
inline bool eval_lasso(const FormulaPtr& f, const std::vector<std::string>& actions,
                       const Lasso& lasso, std::size_t start) {
  return CompiledFormula(f, actions).eval(lasso, start);
}

}  // namespace sbm

#endif  // SBM_LTL_HPP
