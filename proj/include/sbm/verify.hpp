// Bounded exhaustive verification: run the machine on every ultimately
// periodic input word up to a length bound, evaluate every generated formula
// on the resulting trace, and report violations with replayable
// counterexamples. The guarantee under test: a synthesized machine satisfies
// every formula except (possibly) the look-ahead class, which transitions
// cannot realize and which is therefore reported on a separate channel.
#ifndef SBM_VERIFY_HPP
#define SBM_VERIFY_HPP

#include <algorithm>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "sbm/ltl.hpp"
#include "sbm/statechart.hpp"
#include "sbm/stpa.hpp"

namespace sbm {

// ── Input lassos ────────────────────────────────────────────────────────────

/// Ultimately periodic input word: valuation indices, prefix then loop.
struct InputLasso {
  std::vector<std::size_t> values;
  std::size_t loop_start = 0;

  std::size_t size() const { return values.size(); }
  std::size_t loop_length() const { return values.size() - loop_start; }

  friend bool operator==(const InputLasso&, const InputLasso&) = default;
};

namespace detail {

inline void check_enumeration_args(std::size_t alphabet, int bound) {
  if (bound < 1) throw std::invalid_argument("lasso bound must be at least 1");
  if (alphabet == 0) throw std::invalid_argument("empty input alphabet");
}

}  // namespace detail

/// Number of (prefix, loop) words with |prefix|+|loop| ≤ bound and a nonempty
/// loop: each word of total length n splits n ways, so Σ_{n=1..bound} n·|A|^n.
inline std::uint64_t count_input_lassos(std::size_t alphabet, int bound) {
  detail::check_enumeration_args(alphabet, bound);
  std::uint64_t total = 0, power = 1;
  for (int n = 1; n <= bound; ++n) {
    power *= alphabet;
    total += static_cast<std::uint64_t>(n) * power;
  }
  return total;
}

/// Visit every input lasso up to the bound: total length ascending, then the
/// underlying word in odometer order, then the loop start ascending. No
/// rotation deduplication — exactness over economy. `fn` returns false to
/// stop early.
template <typename Fn>
void for_each_input_lasso(std::size_t alphabet, int bound, Fn&& fn) {
  detail::check_enumeration_args(alphabet, bound);
  InputLasso lasso;
  for (int n = 1; n <= bound; ++n) {
    std::vector<std::size_t> word(static_cast<std::size_t>(n), 0);
    for (;;) {
      lasso.values = word;
      for (std::size_t p = 0; p < word.size(); ++p) {
        lasso.loop_start = p;
        if (!fn(static_cast<const InputLasso&>(lasso))) return;
      }
      std::size_t digit = word.size();
      while (digit > 0 && ++word[digit - 1] == alphabet) word[--digit] = 0;
      if (digit == 0) break;  // odometer wrapped: all words of length n done
    }
  }
}

inline std::vector<InputLasso> enumerate_input_lassos(std::size_t alphabet, int bound) {
  std::vector<InputLasso> out;
  for_each_input_lasso(alphabet, bound, [&](const InputLasso& l) {
    out.push_back(l);
    return true;
  });
  return out;
}

// ── Machine traces ──────────────────────────────────────────────────────────

/// One reaction of the machine: the valuation read, the state after the
/// reaction, and the action emitted (index into the action list, or none).
struct MachineReaction {
  std::size_t valuation = 0;
  int state = 0;
  int sent = kNoAction;

  friend bool operator==(const MachineReaction&, const MachineReaction&) = default;
};

struct MachineTrace {
  std::vector<MachineReaction> reactions;
  std::size_t loop_start = 0;

  std::size_t size() const { return reactions.size(); }

  friend bool operator==(const MachineTrace&, const MachineTrace&) = default;
};

/// Simulator with reusable scratch, for running one machine on many inputs.
class MachineRunner {
 public:
  explicit MachineRunner(const Statechart& sc) : sc_(&sc) {
    for (const State& s : sc.states) {
      int idx = kNoAction;
      for (std::size_t a = 0; a < sc.actions.size(); ++a)
        if (sc.actions[a] == s.action) idx = static_cast<int>(a);
      state_action_.push_back(idx);
    }
  }

  /// Reaction 0 is the setup reaction: the machine observes the first input
  /// valuation, sits in the initial state, and sends nothing. Reaction i ≥ 1
  /// reads the i-th input valuation (input position i-1), fires the
  /// highest-priority enabled transition (or stays), and emits the new
  /// state's action. The trace folds at the first recurrence of (state,
  /// input-loop offset), so the fold is reached within |states|·|loop| steps
  /// and the setup reaction always stays in the prefix.
  void run(const InputLasso& input, MachineTrace& out) {
    const std::size_t P = input.loop_start;
    const std::size_t L = input.size() - P;
    if (input.values.empty() || P >= input.size())
      throw std::invalid_argument("input lasso needs a nonempty loop");

    out.reactions.clear();
    out.loop_start = 0;
    int state = sc_->initial;
    out.reactions.push_back({input.values[0], state, kNoAction});

    seen_.assign(sc_->states.size() * L, -1);
    for (std::size_t i = 1;; ++i) {
      const std::size_t pos = i - 1;  // input position consumed by reaction i
      if (pos >= P) {
        std::size_t key = static_cast<std::size_t>(state) * L + (pos - P) % L;
        if (seen_[key] >= 0) {
          out.loop_start = static_cast<std::size_t>(seen_[key]);
          break;
        }
        seen_[key] = static_cast<int>(i);
      }
      std::size_t vidx = input.values[pos < P ? pos : P + (pos - P) % L];
      state = step(*sc_, state, vidx);
      out.reactions.push_back({vidx, state, state_action_[static_cast<std::size_t>(state)]});
    }
  }

 private:
  const Statechart* sc_;
  std::vector<int> state_action_;  // per state: action index or none
  std::vector<int> seen_;          // (state, loop offset) -> reaction index
};

inline MachineTrace run_machine(const Statechart& sc, const InputLasso& input) {
  MachineRunner runner(sc);
  MachineTrace out;
  runner.run(input, out);
  return out;
}

// ── Verdicts ────────────────────────────────────────────────────────────────

constexpr int kDefaultBound = 6;

struct FormulaVerdict {
  std::string id;  // rule instance the formula came from
  RuleShape shape = RuleShape::Forbidden;
  bool too_early = false;  // look-ahead class: reported, not guaranteed
  bool holds = true;       // no violating input found up to the bound
  std::optional<InputLasso> input;             // first violating input word
  std::optional<MachineTrace> counterexample;  // its machine trace
};

struct Verdict {
  int bound = 0;
  std::uint64_t lasso_count = 0;
  std::vector<FormulaVerdict> formulas;

  /// True when every formula the machine is supposed to guarantee holds.
  bool ok() const {
    for (const FormulaVerdict& f : formulas)
      if (!f.too_early && !f.holds) return false;
    return true;
  }
};

/// Evaluate every formula on every input lasso up to the bound. Formulas are
/// checked from reaction 1 (the setup reaction carries no obligation); the
/// first counterexample per formula is kept.
inline Verdict check(const Statechart& sc, const std::vector<TranslatedRule>& formulas,
                     int bound = kDefaultBound) {
  Verdict verdict;
  verdict.bound = bound;
  verdict.lasso_count = count_input_lassos(sc.space.size(), bound);

  std::vector<CompiledFormula> compiled;
  for (const TranslatedRule& rule : formulas) {
    compiled.emplace_back(rule.formula, sc.actions);
    verdict.formulas.push_back({rule.instance.id, rule.instance.shape,
                                rule.instance.shape == RuleShape::ForbiddenAtEntry, true,
                                std::nullopt, std::nullopt});
  }
  if (formulas.empty()) return verdict;

  std::vector<Valuation> valuations;
  for (std::size_t v = 0; v < sc.space.size(); ++v) valuations.push_back(sc.space.valuation_of(v));

  MachineRunner runner(sc);
  MachineTrace trace;
  Lasso word;
  std::size_t open = verdict.formulas.size();
  for_each_input_lasso(sc.space.size(), bound, [&](const InputLasso& input) {
    runner.run(input, trace);
    word.loop_start = trace.loop_start;
    word.reactions.resize(trace.size());
    for (std::size_t j = 0; j < trace.size(); ++j) {
      word.reactions[j].values = valuations[trace.reactions[j].valuation];
      word.reactions[j].action = trace.reactions[j].sent;
    }
    for (std::size_t i = 0; i < compiled.size(); ++i) {
      FormulaVerdict& f = verdict.formulas[i];
      if (!f.holds || compiled[i].eval(word, 1)) continue;
      f.holds = false;
      f.input = input;
      f.counterexample = trace;
      if (--open == 0) return false;  // every formula already has its witness
    }
    return true;
  });
  return verdict;
}

// ── Replay equivalence ──────────────────────────────────────────────────────

/// True when the two machines emit the same action sequence for every input
/// lasso up to the bound. Both must share one valuation space; traces are
/// compared as infinite words (fold points may legitimately differ).
inline bool replay_equivalent(const Statechart& a, const Statechart& b,
                              int bound = kDefaultBound) {
  if (a.space.size() != b.space.size())
    throw std::invalid_argument("machines disagree on the valuation space");

  MachineRunner run_a(a), run_b(b);
  MachineTrace ta, tb;
  bool equal = true;
  for_each_input_lasso(a.space.size(), bound, [&](const InputLasso& input) {
    run_a.run(input, ta);
    run_b.run(input, tb);
    // Compare unrolled far enough to cover both prefixes plus a full joint
    // period of both loops.
    std::size_t la = ta.size() - ta.loop_start, lb = tb.size() - tb.loop_start;
    std::size_t horizon = std::max(ta.loop_start, tb.loop_start) + la * lb;
    auto at = [](const MachineTrace& t, std::size_t i) -> const MachineReaction& {
      if (i < t.reactions.size()) return t.reactions[i];
      std::size_t loop = t.reactions.size() - t.loop_start;
      return t.reactions[t.loop_start + (i - t.loop_start) % loop];
    };
    for (std::size_t i = 0; i < horizon; ++i)
      if (at(ta, i).sent != at(tb, i).sent) {
        equal = false;
        return false;
      }
    return true;
  });
  return equal;
}

// ── Random models ───────────────────────────────────────────────────────────

struct GeneratorLimits {
  int max_actions = 3;
  int max_variables = 3;
  int max_values = 3;  // per variable
  int max_rules = 6;
};

/// A random analysis that passes validation with no errors: conflicting rules
/// are dropped until the rest is clean. Deterministic per seed; variable
/// shapes keep the valuation-space product at 9 or below so exhaustive
/// checking at the default bound stays fast.
inline StpaModel generate_random_model(std::uint32_t seed, const GeneratorLimits& limits = {}) {
  std::mt19937 rng(seed);
  auto pick = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };

  static const std::vector<std::vector<int>> kShapes = {
      {2}, {3}, {2, 2}, {2, 3}, {2, 2, 2}, {3, 3}};
  static const std::vector<int> kWeights = {3, 3, 3, 2, 1, 1};  // favor small spaces
  static const char* kVarNames[] = {"alpha", "beta", "gamma"};
  static const char* kRefNames[] = {"limitA", "limitB", "limitC"};
  static const char* kActionNames[] = {"A", "B", "C"};
  static const UcaKind kUcaKinds[] = {UcaKind::Provided,     UcaKind::NotProvided,
                                      UcaKind::TooEarly,     UcaKind::TooLate,
                                      UcaKind::AppliedTooLong, UcaKind::StoppedTooSoon};

  for (;;) {
    StpaModel m;
    m.controller = "Random" + std::to_string(seed);

    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < kShapes.size(); ++i) {
      const auto& shape = kShapes[i];
      int max_radix = *std::max_element(shape.begin(), shape.end());
      if (static_cast<int>(shape.size()) <= limits.max_variables &&
          max_radix <= limits.max_values)
        for (int w = 0; w < kWeights[i]; ++w) eligible.push_back(i);
    }
    const auto& shape = kShapes[eligible[pick(eligible.size())]];

    for (std::size_t v = 0; v < shape.size(); ++v) {
      ProcessModelVariable var{kVarNames[v], {}};
      std::size_t style = pick(3);  // boolean / enum / ranged
      if (shape[v] == 2 && style == 0) {
        var.values.push_back({"true", ValueRange::boolean_literal(true)});
        var.values.push_back({"false", ValueRange::boolean_literal(false)});
      } else if (style == 2) {
        const std::string ref = kRefNames[v];
        var.values.push_back(
            {"below", ValueRange::interval(Bound::min(), true, Bound::ref(ref), false)});
        if (shape[v] == 2) {
          var.values.push_back(
              {"atLeast", ValueRange::interval(Bound::ref(ref), true, Bound::max(), true)});
        } else {
          var.values.push_back({"at", ValueRange::singleton(Bound::ref(ref))});
          var.values.push_back(
              {"above", ValueRange::interval(Bound::ref(ref), false, Bound::max(), true)});
        }
      } else {
        static const char* kLevels[] = {"low", "mid", "high"};
        for (int k = 0; k < shape[v]; ++k)
          var.values.push_back({kLevels[k], ValueRange::opaque()});
      }
      m.variables.push_back(std::move(var));
    }

    std::size_t action_count = 1 + pick(static_cast<std::size_t>(limits.max_actions));
    for (std::size_t a = 0; a < action_count; ++a) m.actions.push_back(kActionNames[a]);

    std::size_t rule_count = 1 + pick(static_cast<std::size_t>(limits.max_rules));
    for (std::size_t r = 0; r < rule_count; ++r) {
      std::vector<Context> contexts;
      std::size_t context_count = 1 + pick(2);
      for (std::size_t c = 0; c < context_count; ++c) {
        Context ctx{"C" + std::to_string(c + 1), {}};
        for (std::size_t v = 0; v < m.variables.size(); ++v)
          if (pick(3) < 2)  // each variable constrained with probability 2/3
            ctx.assignments.emplace_back(
                m.variables[v].name,
                m.variables[v].values[pick(m.variables[v].values.size())].name);
        if (ctx.assignments.empty()) {
          std::size_t v = pick(m.variables.size());
          ctx.assignments.emplace_back(
              m.variables[v].name,
              m.variables[v].values[pick(m.variables[v].values.size())].name);
        }
        contexts.push_back(std::move(ctx));
      }
      const std::string action = m.actions[pick(m.actions.size())];
      if (pick(4) == 0) {
        m.dcas.push_back({"D" + std::to_string(m.dcas.size() + 1), action,
                          pick(2) ? DcaKind::Provided : DcaKind::NotProvided,
                          std::move(contexts)});
      } else {
        m.ucas.push_back({"U" + std::to_string(m.ucas.size() + 1), action,
                          kUcaKinds[pick(6)], std::move(contexts)});
      }
    }

    // Drop rules until no conflict remains; structure is clean by
    // construction, so every error names at least one rule instance.
    for (;;) {
      const std::vector<Diagnostic> diags = validate(m);
      const Diagnostic* error = nullptr;
      for (const Diagnostic& d : diags)
        if (d.severity == Diagnostic::Severity::Error) {
          error = &d;
          break;
        }
      if (!error) return m;
      if (error->rules.empty()) break;  // unexpected: regenerate from scratch
      std::string rule = error->rules.front().substr(0, error->rules.front().find('.'));
      auto dropped = false;
      for (auto it = m.ucas.begin(); it != m.ucas.end(); ++it)
        if (it->id == rule) {
          m.ucas.erase(it);
          dropped = true;
          break;
        }
      if (!dropped)
        for (auto it = m.dcas.begin(); it != m.dcas.end(); ++it)
          if (it->id == rule) {
            m.dcas.erase(it);
            dropped = true;
            break;
          }
      if (!dropped) break;  // unexpected: regenerate from scratch
    }
  }
}

// ── JSON report ─────────────────────────────────────────────────────────────

/// Machine-readable report: per-formula status, with the violating input and
/// trace (valuation, state, sent) when one was found.
inline nlohmann::json verdict_json(const Statechart& sc, const Verdict& v) {
  nlohmann::json j;
  j["bound"] = v.bound;
  j["lassoCount"] = v.lasso_count;
  j["ok"] = v.ok();
  j["formulas"] = nlohmann::json::array();
  for (const FormulaVerdict& f : v.formulas) {
    nlohmann::json jf;
    jf["id"] = f.id;
    jf["shape"] = shape_label(f.shape);
    if (f.too_early) {
      jf["status"] = "not-guaranteed";
      jf["result"] = f.holds ? "holds" : "violated";
    } else {
      jf["status"] = f.holds ? "holds" : "violated";
    }
    if (f.input) {
      jf["input"] = {{"values", f.input->values}, {"loopStart", f.input->loop_start}};
    }
    if (f.counterexample) {
      nlohmann::json reactions = nlohmann::json::array();
      for (const MachineReaction& r : f.counterexample->reactions) {
        nlohmann::json valuation;
        Valuation val = sc.space.valuation_of(r.valuation);
        for (std::size_t var = 0; var < val.size(); ++var)
          valuation[sc.space.variable_name(var)] = sc.space.value_name(var, val[var]);
        reactions.push_back(
            {{"valuation", std::move(valuation)},
             {"state", sc.states[static_cast<std::size_t>(r.state)].id},
             {"sent", r.sent == kNoAction ? "none" : sc.actions[static_cast<std::size_t>(r.sent)]}});
      }
      jf["counterexample"] = {{"loopStart", f.counterexample->loop_start},
                              {"reactions", std::move(reactions)}};
    }
    j["formulas"].push_back(std::move(jf));
  }
  return j;
}

}  // namespace sbm

#endif  // SBM_VERIFY_HPP
