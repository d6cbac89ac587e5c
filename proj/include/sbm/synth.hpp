// Construction of the safe behavior model from rule instances.
//
// Pipeline (synthesize): start from one state per control action plus the
// initial state, then realize every rule shape as transition structure:
//   demands   — from every other state into the action's state;
//   bans      — out of the action's state back to the initial state;
//   stop-with — split the action's state so occupancy implies the context
//               held, and escape to the initial state when it ends;
//   keep-with — split likewise, then pin the duplicate's exits to valuations
//               outside the context so the action cannot stop inside it.
// Entry bans (the look-ahead shape) produce a note instead of structure.
// Priorities order demands before split entries before bans/escapes; guard
// refinement then makes the machine deterministic, and optimization removes
// dead triggers and unreachable states.
#ifndef SBM_SYNTH_HPP
#define SBM_SYNTH_HPP

#include <algorithm>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sbm/ltl.hpp"
#include "sbm/statechart.hpp"
#include "sbm/stpa.hpp"

namespace sbm {

// ── Notes ───────────────────────────────────────────────────────────────────

/// Side reports from synthesis: rules that cannot be realized and degenerate
/// shapes worth flagging. Notes never change the machine.
struct Note {
  enum class Kind { TooEarly, Warning };
  Kind kind = Kind::Warning;
  std::string rule_id;  // instance that triggered the note, if any
  std::string message;

  friend bool operator==(const Note&, const Note&) = default;
};

namespace detail {

inline int base_state(const Statechart& sc, const std::string& action) {
  for (std::size_t i = 0; i < sc.states.size(); ++i)
    if (sc.states[i].origin == StateOrigin::Base && sc.states[i].action == action)
      return static_cast<int>(i);
  throw std::invalid_argument("no state for control action '" + action + "'");
}

inline std::string unique_state_id(const Statechart& sc, std::string id) {
  if (!sc.find_state(id)) return id;
  for (int n = 2;; ++n) {
    std::string candidate = id + "_" + std::to_string(n);
    if (!sc.find_state(candidate)) return candidate;
  }
}

/// Union of the guards on `state`'s outgoing transitions.
inline ValuationSet outgoing_union(const Statechart& sc, int state) {
  ValuationSet u(sc.space.size());
  for (int t : sc.outgoing(state)) u |= sc.transitions[t].guard;
  return u;
}

/// Redirect the `ctx` part of every transition into `from` towards `to`,
/// leaving the rest in place. Classes, ranks, and provenance survive the
/// split; `rule_id` is recorded on everything touched.
inline void reroute_incoming(Statechart& sc, int from, int to, const ValuationSet& ctx,
                             const std::string& rule_id) {
  std::vector<Transition> moved;
  for (Transition& t : sc.transitions) {
    if (t.target != from) continue;
    ValuationSet inside = t.guard & ctx;
    if (inside.none()) continue;
    ValuationSet outside = t.guard - ctx;
    add_provenance(t, rule_id);
    if (outside.none()) {
      t.target = to;  // wholly inside: retarget
      continue;
    }
    Transition dup = t;
    dup.target = to;
    dup.guard = inside;
    t.guard = outside;
    moved.push_back(std::move(dup));
  }
  for (Transition& t : moved) sc.transitions.push_back(std::move(t));
}

}  // namespace detail

// ── Pipeline stages ─────────────────────────────────────────────────────────

/// The starting machine: an initial state plus one state per control action,
/// no transitions, declarations copied from the analysis.
inline Statechart init_statechart(const StpaModel& model, const ValuationSpace& space) {
  Statechart sc;
  sc.space = space;
  sc.internals = model.variables;
  sc.inputs = reference_inputs(model);
  sc.actions = model.actions;
  sc.states.push_back({"s0", "", StateOrigin::Initial, "", ValuationSet(space.size())});
  for (const std::string& action : model.actions)
    sc.states.push_back({"s_" + action, action, StateOrigin::Base, "", ValuationSet(space.size())});
  sc.initial = 0;
  return sc;
}

/// Demand `action` whenever `ctx` holds: a transition into its state from
/// every state that does not already emit it. Repeated demands on the same
/// pair merge into one guard.
inline void apply_demand(Statechart& sc, const std::string& action, const ValuationSet& ctx,
                         const std::string& rule_id, int rank = 0) {
  int target = detail::base_state(sc, action);
  for (std::size_t s = 0; s < sc.states.size(); ++s) {
    if (sc.states[s].action == action) continue;  // the state itself and its splits
    Transition* existing = nullptr;
    for (int t : sc.outgoing(static_cast<int>(s))) {
      Transition& tr = sc.transitions[t];
      if (tr.target == target && tr.kind == TransitionClass::Demand) { existing = &tr; break; }
    }
    if (existing) {
      existing->guard |= ctx;
      existing->rank = std::min(existing->rank, rank);
      add_provenance(*existing, rule_id);
    } else {
      Transition t{static_cast<int>(s), target, ctx, TransitionClass::Demand, 0, rank, {rule_id}};
      sc.transitions.push_back(std::move(t));
    }
  }
}

/// Ban `action` whenever `ctx` holds: a transition from its state back to the
/// initial state, minus any valuation a demand already routes elsewhere.
/// Returns false when the demands cover all of `ctx` and nothing is added.
inline bool apply_forbid(Statechart& sc, const std::string& action, const ValuationSet& ctx,
                         const std::string& rule_id, int rank = 0) {
  int source = detail::base_state(sc, action);
  ValuationSet remainder = ctx;
  for (int t : sc.outgoing(source))
    if (sc.transitions[t].kind == TransitionClass::Demand) remainder -= sc.transitions[t].guard;
  if (remainder.none()) return false;
  for (int t : sc.outgoing(source)) {
    Transition& tr = sc.transitions[t];
    if (tr.target == sc.initial && tr.kind == TransitionClass::Forbid) {
      tr.guard |= remainder;
      tr.rank = std::min(tr.rank, rank);
      add_provenance(tr, rule_id);
      return true;
    }
  }
  sc.transitions.push_back(
      {source, sc.initial, remainder, TransitionClass::Forbid, 0, rank, {rule_id}});
  return true;
}

/// Stop `action` once `ctx` has ended: split its state so the duplicate is
/// only occupied while `ctx` holds, and escape to the initial state when it
/// stops. Returns the split state's index, or -1 when the existing exits
/// already cover every valuation outside `ctx` and the machine is unchanged.
inline int apply_applied_too_long(Statechart& sc, const std::string& action,
                                  const ValuationSet& ctx, const std::string& ctx_id,
                                  const std::string& rule_id, int rank = 0) {
  int base = detail::base_state(sc, action);
  if (ctx.complement().subset_of(detail::outgoing_union(sc, base))) return -1;

  std::optional<int> found = sc.find_split(action, ctx);
  int split;
  if (found) {
    split = *found;
  } else {
    split = static_cast<int>(sc.states.size());
    sc.states.push_back({detail::unique_state_id(sc, "s_" + action + "_" + ctx_id), action,
                         StateOrigin::SplitAppliedTooLong, ctx_id, ctx});
  }

  detail::reroute_incoming(sc, base, split, ctx, rule_id);

  if (!found) {
    // Duplicate the exits, except entries into the action's other duplicates.
    for (int t : sc.outgoing(base)) {
      Transition copy = sc.transitions[t];
      const State& target = sc.states[copy.target];
      if (target.is_split() && target.action == action) continue;
      copy.source = split;
      add_provenance(copy, rule_id);
      sc.transitions.push_back(std::move(copy));
    }
  }

  // Enter the duplicate from the base state on ctx, wherever no exit of the
  // base state already fires; a broader entry would override the bans. The
  // entry is confined to valuations where the action is demanded: continuing
  // it gratuitously would pin the machine to the stop obligation and make a
  // later demand entry unsatisfiable. Elsewhere in ctx the action ends now.
  ValuationSet demanded(sc.space.size());
  for (const Transition& tr : sc.transitions)
    if (tr.kind == TransitionClass::Demand && sc.states[tr.target].action == action)
      demanded |= tr.guard;
  ValuationSet avail = ctx - detail::outgoing_union(sc, base);
  ValuationSet entry = avail & demanded;
  ValuationSet drop = avail - demanded;
  if (entry.any()) {
    Transition* existing = nullptr;
    for (int t : sc.outgoing(base)) {
      Transition& tr = sc.transitions[t];
      if (tr.target == split && tr.kind == TransitionClass::SplitEntry) { existing = &tr; break; }
    }
    if (existing) {
      existing->guard |= entry;
      add_provenance(*existing, rule_id);
    } else {
      sc.transitions.push_back({base, split, entry, TransitionClass::SplitEntry, 0, rank, {rule_id}});
    }
  }
  if (drop.any()) {
    Transition* existing = nullptr;
    for (int t : sc.outgoing(base)) {
      Transition& tr = sc.transitions[t];
      if (tr.target == sc.initial && tr.kind == TransitionClass::Escape) { existing = &tr; break; }
    }
    if (existing) {
      existing->guard |= drop;
      existing->rank = std::min(existing->rank, rank);
      add_provenance(*existing, rule_id);
    } else {
      sc.transitions.push_back({base, sc.initial, drop, TransitionClass::Escape, 0, rank, {rule_id}});
    }
  }

  if (!found) {
    // Leave for the initial state when ctx ends and nothing else fires.
    ValuationSet escape = ctx.complement() - detail::outgoing_union(sc, split);
    if (escape.any())
      sc.transitions.push_back({split, sc.initial, escape, TransitionClass::Escape, 0, rank, {rule_id}});
  }
  return split;
}

/// Keep `action` going while `ctx` holds: split its state (reusing a split
/// with the same context) and restrict every exit of the duplicate to
/// valuations outside `ctx`. Returns the split state's index, or -1 when no
/// exit of the base state fires inside `ctx` and the machine is unchanged.
inline int apply_stopped_too_soon(Statechart& sc, const std::string& action,
                                  const ValuationSet& ctx, const std::string& ctx_id,
                                  const std::string& rule_id, int rank = 0) {
  int base = detail::base_state(sc, action);
  if (!detail::outgoing_union(sc, base).intersects(ctx)) return -1;

  std::optional<int> found = sc.find_split(action, ctx);
  int split;
  if (found) {
    split = *found;
  } else {
    split = static_cast<int>(sc.states.size());
    sc.states.push_back({detail::unique_state_id(sc, "s_" + action + "_" + ctx_id), action,
                         StateOrigin::SplitStoppedTooSoon, ctx_id, ctx});
  }

  detail::reroute_incoming(sc, base, split, ctx, rule_id);

  if (!found) {
    // A fresh duplicate copies every exit, entries into other duplicates
    // included; a reused one already has its own.
    for (int t : sc.outgoing(base)) {
      Transition copy = sc.transitions[t];
      copy.source = split;
      add_provenance(copy, rule_id);
      sc.transitions.push_back(std::move(copy));
    }
  }

  ValuationSet entry = ctx - detail::outgoing_union(sc, base);
  if (entry.any()) {
    Transition* existing = nullptr;
    for (int t : sc.outgoing(base)) {
      Transition& tr = sc.transitions[t];
      if (tr.target == split && tr.kind == TransitionClass::SplitEntry) { existing = &tr; break; }
    }
    if (existing) {
      existing->guard |= entry;
      add_provenance(*existing, rule_id);
    } else {
      sc.transitions.push_back({base, split, entry, TransitionClass::SplitEntry, 0, rank, {rule_id}});
    }
  }

  // The duplicate may only be left once the context no longer holds.
  const ValuationSet outside = ctx.complement();
  std::vector<Transition> kept;
  kept.reserve(sc.transitions.size());
  for (Transition& t : sc.transitions) {
    if (t.source == split) {
      t.guard &= outside;
      if (t.guard.none()) continue;
      add_provenance(t, rule_id);
    }
    kept.push_back(std::move(t));
  }
  sc.transitions = std::move(kept);
  return split;
}

/// Order every state's exits — demands by rule declaration, then split
/// entries, then bans and escapes — and shrink each guard by everything that
/// fires before it. The surviving guards are pairwise disjoint, priorities
/// count from 1 per state, and duplicate transitions merge.
inline void assign_priorities(Statechart& sc) {
  // Merge transitions that became identical (same endpoints, class, guard).
  std::vector<Transition> merged;
  for (Transition& t : sc.transitions) {
    bool absorbed = false;
    for (Transition& m : merged) {
      if (m.source == t.source && m.target == t.target && m.kind == t.kind && m.guard == t.guard) {
        m.rank = std::min(m.rank, t.rank);
        for (const std::string& id : t.provenance) add_provenance(m, id);
        absorbed = true;
        break;
      }
    }
    if (!absorbed) merged.push_back(std::move(t));
  }
  sc.transitions = std::move(merged);

  std::stable_sort(sc.transitions.begin(), sc.transitions.end(),
                   [&](const Transition& a, const Transition& b) {
                     if (a.source != b.source) return a.source < b.source;
                     if (class_order(a.kind) != class_order(b.kind))
                       return class_order(a.kind) < class_order(b.kind);
                     if (a.rank != b.rank) return a.rank < b.rank;
                     return sc.states[a.target].id < sc.states[b.target].id;
                   });

  std::vector<Transition> kept;
  kept.reserve(sc.transitions.size());
  int current_source = -1;
  ValuationSet taken;
  int next_priority = 1;
  for (Transition& t : sc.transitions) {
    if (t.source != current_source) {
      current_source = t.source;
      taken = ValuationSet(sc.space.size());
      next_priority = 1;
    }
    t.guard -= taken;
    if (t.guard.none()) continue;  // shadowed entirely by earlier exits
    taken |= t.guard;
    t.priority = next_priority++;
    kept.push_back(std::move(t));
  }
  sc.transitions = std::move(kept);
}

/// Drop transitions whose trigger can never fire and states the initial state
/// cannot reach, repeating until stable; priorities are renumbered to stay
/// contiguous. Running it twice changes nothing.
inline void optimize(Statechart& sc) {
  bool changed = true;
  while (changed) {
    changed = false;

    std::vector<Transition> live;
    live.reserve(sc.transitions.size());
    for (Transition& t : sc.transitions) {
      if (t.guard.none()) { changed = true; continue; }
      live.push_back(std::move(t));
    }
    sc.transitions = std::move(live);

    std::vector<bool> reachable(sc.states.size(), false);
    std::vector<int> queue{sc.initial};
    reachable[static_cast<std::size_t>(sc.initial)] = true;
    while (!queue.empty()) {
      int s = queue.back();
      queue.pop_back();
      for (const Transition& t : sc.transitions)
        if (t.source == s && !reachable[static_cast<std::size_t>(t.target)]) {
          reachable[static_cast<std::size_t>(t.target)] = true;
          queue.push_back(t.target);
        }
    }
    if (std::find(reachable.begin(), reachable.end(), false) == reachable.end()) continue;

    changed = true;
    std::vector<int> remap(sc.states.size(), -1);
    std::vector<State> states;
    for (std::size_t i = 0; i < sc.states.size(); ++i)
      if (reachable[i]) {
        remap[i] = static_cast<int>(states.size());
        states.push_back(std::move(sc.states[i]));
      }
    std::vector<Transition> trans;
    for (Transition& t : sc.transitions) {
      if (remap[static_cast<std::size_t>(t.source)] < 0 ||
          remap[static_cast<std::size_t>(t.target)] < 0)
        continue;
      t.source = remap[static_cast<std::size_t>(t.source)];
      t.target = remap[static_cast<std::size_t>(t.target)];
      trans.push_back(std::move(t));
    }
    sc.states = std::move(states);
    sc.transitions = std::move(trans);
    sc.initial = remap[static_cast<std::size_t>(sc.initial)];
  }

  // Renumber per source, preserving the refined order.
  std::stable_sort(sc.transitions.begin(), sc.transitions.end(),
                   [](const Transition& a, const Transition& b) {
                     return a.source != b.source ? a.source < b.source : a.priority < b.priority;
                   });
  int current_source = -1;
  int next_priority = 1;
  for (Transition& t : sc.transitions) {
    if (t.source != current_source) {
      current_source = t.source;
      next_priority = 1;
    }
    t.priority = next_priority++;
  }
}

// ── Full synthesis ──────────────────────────────────────────────────────────

struct SynthResult {
  Statechart chart;
  std::vector<TranslatedRule> formulas;  // every generated formula, by instance
  std::vector<Note> notes;
};

/// Build the machine from a validated model. Throws std::invalid_argument on
/// validation errors; warnings do not block synthesis.
inline SynthResult synthesize(const StpaModel& model) {
  auto diags = validate(model);
  for (const Diagnostic& d : diags)
    if (d.severity == Diagnostic::Severity::Error)
      throw std::invalid_argument("model does not validate: " + d.message);

  ValuationSpace space(model);
  auto instances = collect_instances(model, space);

  SynthResult result;
  result.chart = init_statechart(model, space);
  result.formulas = translate_all(model, space);
  if (model.actions.empty())
    result.notes.push_back({Note::Kind::Warning, "",
                            "the controller declares no control actions; "
                            "the machine is the bare initial state"});

  for (const RuleInstance& inst : instances)
    if (is_demand(inst.shape))
      apply_demand(result.chart, inst.action, inst.set, inst.id, inst.declaration_index);
  for (const RuleInstance& inst : instances)
    if (inst.shape == RuleShape::Forbidden)
      apply_forbid(result.chart, inst.action, inst.set, inst.id, inst.declaration_index);
  for (const RuleInstance& inst : instances)
    if (inst.shape == RuleShape::StopWithContext)
      apply_applied_too_long(result.chart, inst.action, inst.set, inst.context_id, inst.id,
                             inst.declaration_index);
  for (const RuleInstance& inst : instances)
    if (inst.shape == RuleShape::KeepWithContext) {
      int split = apply_stopped_too_soon(result.chart, inst.action, inst.set, inst.context_id,
                                         inst.id, inst.declaration_index);
      if (split >= 0 && result.chart.outgoing(split).empty())
        result.notes.push_back({Note::Kind::Warning, inst.id,
                                "the context of '" + inst.id +
                                    "' covers every valuation, so the state '" +
                                    result.chart.states[static_cast<std::size_t>(split)].id +
                                    "' can never be left"});
    }
  for (const RuleInstance& inst : instances)
    if (inst.shape == RuleShape::ForbiddenAtEntry)
      result.notes.push_back({Note::Kind::TooEarly, inst.id,
                              "'" + inst.id +
                                  "' restricts the action one reaction before its context "
                                  "starts; transitions cannot look ahead, so the formula is "
                                  "generated but not enforced by the machine"});

  assign_priorities(result.chart);
  optimize(result.chart);
  return result;
}

}  // namespace sbm

#endif  // SBM_SYNTH_HPP
