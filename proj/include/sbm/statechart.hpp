// Flat deterministic statechart: one state per control action plus an
// initial idle state, transitions guarded by valuation sets, Moore-style
// output (each state emits its action every reaction it is occupied).
//
// The guard stored on a transition is its *effective* trigger: after
// priority refinement the guards leaving one state are pairwise disjoint,
// so "highest-priority enabled" and "the unique enabled" coincide.
#ifndef SBM_STATECHART_HPP
#define SBM_STATECHART_HPP

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sbm/ltl.hpp"
#include "sbm/stpa.hpp"

namespace sbm {

// ── States and transitions ──────────────────────────────────────────────────

enum class StateOrigin {
  Initial,              // s0, emits nothing
  Base,                 // s_<action>, one per control action
  SplitAppliedTooLong,  // duplicate tracking "context held while emitting"
  SplitStoppedTooSoon   // duplicate pinning the action while the context holds
};

struct State {
  std::string id;
  std::string action;  // emitted control action; empty for the initial state
  StateOrigin origin = StateOrigin::Base;
  std::string split_context_id;  // context the state was split on (splits only)
  ValuationSet split_context;

  bool is_split() const {
    return origin == StateOrigin::SplitAppliedTooLong ||
           origin == StateOrigin::SplitStoppedTooSoon;
  }
  friend bool operator==(const State&, const State&) = default;
};

/// Priority buckets per source state: demands fire first, then entries into
/// split states, then bans and escapes back to the initial state.
enum class TransitionClass { Demand, SplitEntry, Forbid, Escape };

inline int class_order(TransitionClass c) {
  switch (c) {
    case TransitionClass::Demand: return 0;
    case TransitionClass::SplitEntry: return 1;
    case TransitionClass::Forbid:
    case TransitionClass::Escape: return 2;
  }
  return 3;
}

struct Transition {
  int source = 0;
  int target = 0;
  ValuationSet guard;  // semantic trigger; effective (disjoint) once prioritized
  TransitionClass kind = TransitionClass::Demand;
  int priority = 0;  // 1-based per source, lower fires first; 0 = unassigned
  int rank = 0;      // creation order within the class (rule declaration index)
  std::vector<std::string> provenance;  // rule instances that created/modified it

  friend bool operator==(const Transition&, const Transition&) = default;
};

/// Record a rule instance on a transition, keeping the list sorted and unique.
inline void add_provenance(Transition& t, const std::string& rule_id) {
  auto it = std::lower_bound(t.provenance.begin(), t.provenance.end(), rule_id);
  if (it == t.provenance.end() || *it != rule_id) t.provenance.insert(it, rule_id);
}

// ── The machine ─────────────────────────────────────────────────────────────

struct Statechart {
  // Self-contained declaration context: everything emission and verification
  // need to interpret guards and type the interface variables.
  ValuationSpace space;
  std::vector<ProcessModelVariable> internals;  // process-model variables
  std::vector<std::string> inputs;              // reference parameters
  std::vector<std::string> actions;             // control actions, declared order

  std::vector<State> states;  // states[initial] is the initial state
  std::vector<Transition> transitions;
  int initial = 0;

  std::optional<int> find_state(const std::string& id) const {
    for (std::size_t i = 0; i < states.size(); ++i)
      if (states[i].id == id) return static_cast<int>(i);
    return std::nullopt;
  }

  /// Split state of `action` keyed by its semantic context set, if any.
  std::optional<int> find_split(const std::string& action, const ValuationSet& ctx) const {
    for (std::size_t i = 0; i < states.size(); ++i)
      if (states[i].is_split() && states[i].action == action && states[i].split_context == ctx)
        return static_cast<int>(i);
    return std::nullopt;
  }

  /// Indices of transitions leaving `state`, in stored order.
  std::vector<int> outgoing(int state) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < transitions.size(); ++i)
      if (transitions[i].source == state) out.push_back(static_cast<int>(i));
    return out;
  }

  std::vector<int> incoming(int state) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < transitions.size(); ++i)
      if (transitions[i].target == state) out.push_back(static_cast<int>(i));
    return out;
  }

  friend bool operator==(const Statechart&, const Statechart&) = default;
};

// ── Execution ───────────────────────────────────────────────────────────────

/// Transition fired from `state` on `valuation`: the enabled one with the
/// lowest priority number (ties by storage order), or -1 when none is enabled
/// and the machine stays put.
inline int fire(const Statechart& sc, int state, std::size_t valuation) {
  int best = -1;
  for (std::size_t i = 0; i < sc.transitions.size(); ++i) {
    const Transition& t = sc.transitions[i];
    if (t.source != state || !t.guard.test(valuation)) continue;
    if (best < 0 || t.priority < sc.transitions[best].priority) best = static_cast<int>(i);
  }
  return best;
}

/// State after one reaction from `state` reading `valuation`.
inline int step(const Statechart& sc, int state, std::size_t valuation) {
  int t = fire(sc, state, valuation);
  return t < 0 ? state : sc.transitions[t].target;
}

// ── Guard display ───────────────────────────────────────────────────────────

/// Conjunctive cube over the valuation space: one value index per variable,
/// -1 meaning the variable is unconstrained.
using Cube = std::vector<int>;

/// Exact disjunctive cover of `set`, minimized by repeatedly collapsing any
/// group of cubes that agree everywhere except one variable and jointly list
/// all of its values. Cubes stay pairwise disjoint; ties resolve in variable
/// declaration order, so the cover is deterministic.
inline std::vector<Cube> merge_cubes(const ValuationSpace& space, const ValuationSet& set) {
  std::vector<Cube> cubes;
  for (std::size_t idx : set.indices()) {
    Valuation v = space.valuation_of(idx);
    cubes.emplace_back(v.begin(), v.end());
  }
  const std::size_t nvars = space.variable_count();
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t var = 0; var < nvars; ++var) {
      std::map<Cube, std::vector<std::size_t>> groups;
      for (std::size_t i = 0; i < cubes.size(); ++i) {
        if (cubes[i][var] < 0) continue;
        Cube key = cubes[i];
        key[var] = -1;
        groups[std::move(key)].push_back(i);
      }
      std::vector<bool> drop(cubes.size(), false);
      for (const auto& [key, members] : groups) {
        if (members.size() != static_cast<std::size_t>(space.radix(var))) continue;
        cubes[members.front()][var] = -1;  // covers every value of var
        for (std::size_t k = 1; k < members.size(); ++k) drop[members[k]] = true;
        changed = true;
      }
      if (changed) {
        std::vector<Cube> kept;
        for (std::size_t i = 0; i < cubes.size(); ++i)
          if (!drop[i]) kept.push_back(std::move(cubes[i]));
        cubes = std::move(kept);
      }
    }
  }
  return cubes;
}

/// Human-readable trigger for a semantic guard: cubes joined with " | ",
/// atoms within a cube with " & ". The full set prints "true", the empty
/// set "false"; ranged values render as comparisons against their bounds.
inline std::string guard_text(const std::vector<ProcessModelVariable>& vars,
                              const ValuationSpace& space, const ValuationSet& set) {
  if (set.none()) return "false";
  std::string out;
  bool first_cube = true;
  for (const Cube& cube : merge_cubes(space, set)) {
    std::string conj;
    for (std::size_t var = 0; var < cube.size(); ++var) {
      if (cube[var] < 0) continue;
      if (!conj.empty()) conj += " & ";
      conj += atom_display(vars[var], vars[var].values[static_cast<std::size_t>(cube[var])]);
    }
    if (conj.empty()) conj = "true";
    if (!first_cube) out += " | ";
    out += conj;
    first_cube = false;
  }
  return out;
}

}  // namespace sbm

#endif  // SBM_STATECHART_HPP
