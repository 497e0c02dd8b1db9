#pragma once

#include <atomic>
#include <cassert>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "cfrd/game.hpp"

namespace cfrd {

// ---------------------------------------------------------------------------
// Regret matching: proportional to positive parts, uniform when none.

inline void regret_matching(std::span<const double> regrets, std::span<double> out) {
  assert(!regrets.empty() && regrets.size() == out.size());
  double sum = 0;
  for (size_t a = 0; a < regrets.size(); ++a) {
    out[a] = regrets[a] > 0 ? regrets[a] : 0.0;
    sum += out[a];
  }
  if (sum > 0) {
    for (auto& v : out) v /= sum;
  } else {
    for (auto& v : out) v = 1.0 / out.size();
  }
}

inline std::vector<double> regret_matching(const std::vector<double>& regrets) {
  std::vector<double> out(regrets.size());
  regret_matching(regrets, out);
  return out;
}

// ---------------------------------------------------------------------------
// Accumulator storage. A table may cover only a subset of the information
// sets (the trunk, one subgame); entries for excluded sets simply do not
// exist. Every live table reports its entry count to a process-wide registry
// so decomposition's memory claim is checkable.

class TableRegistry {
 public:
  static TableRegistry& instance() {
    static TableRegistry r;
    return r;
  }
  void add(long long n) {
    long long cur = current_.fetch_add(n) + n;
    long long p = peak_.load();
    while (cur > p && !peak_.compare_exchange_weak(p, cur)) {
    }
  }
  void remove(long long n) { current_.fetch_sub(n); }
  long long current() const { return current_.load(); }
  long long peak() const { return peak_.load(); }
  void reset_peak() { peak_.store(current_.load()); }

 private:
  std::atomic<long long> current_{0};
  std::atomic<long long> peak_{0};
};

struct InfosetSubset {
  std::vector<int32_t> slot;      // per infoset: local action offset, -1 if excluded
  std::vector<int32_t> included;  // infoset ids with entries
  int total = 0;                  // local action count
};

inline InfosetSubset subset_all(const GameDefinition& g) {
  InfosetSubset s;
  s.slot.resize(g.infosets.size());
  s.included.resize(g.infosets.size());
  for (size_t i = 0; i < g.infosets.size(); ++i) {
    s.slot[i] = g.infosets[i].action_offset;
    s.included[i] = static_cast<int32_t>(i);
  }
  s.total = g.total_actions;
  return s;
}

inline InfosetSubset subset_where(const GameDefinition& g,
                                  const std::function<bool(int)>& include) {
  InfosetSubset s;
  s.slot.assign(g.infosets.size(), -1);
  for (size_t i = 0; i < g.infosets.size(); ++i) {
    if (!include(static_cast<int>(i))) continue;
    s.slot[i] = s.total;
    s.included.push_back(static_cast<int32_t>(i));
    s.total += g.infosets[i].num_actions;
  }
  return s;
}

// Cumulative regrets and reach-weighted strategy sums per (infoset, action).
class AccumulatorTable {
 public:
  AccumulatorTable(const GameDefinition& g, InfosetSubset scope)
      : game_(&g), scope_(std::move(scope)) {
    regret.assign(scope_.total, 0.0);
    strategy_sum.assign(scope_.total, 0.0);
    TableRegistry::instance().add(entries());
  }
  explicit AccumulatorTable(const GameDefinition& g) : AccumulatorTable(g, subset_all(g)) {}

  AccumulatorTable(AccumulatorTable&& o) noexcept
      : game_(o.game_),
        scope_(std::move(o.scope_)),
        regret(std::move(o.regret)),
        strategy_sum(std::move(o.strategy_sum)) {
    o.registered_ = 0;
    registered_ = entries();
  }
  AccumulatorTable& operator=(AccumulatorTable&&) = delete;
  AccumulatorTable(const AccumulatorTable&) = delete;

  ~AccumulatorTable() { TableRegistry::instance().remove(registered_); }

  long long entries() const { return scope_.total; }
  const InfosetSubset& scope() const { return scope_; }
  const GameDefinition& game() const { return *game_; }
  int slot(int infoset) const { return scope_.slot[infoset]; }

  void reset() {
    std::fill(regret.begin(), regret.end(), 0.0);
    std::fill(strategy_sum.begin(), strategy_sum.end(), 0.0);
  }

  // Normalized average strategy; uniform where no weight accumulated.
  // Information sets outside the table's scope are also uniform.
  StrategyProfile average_strategy() const {
    StrategyProfile avg = uniform_profile(*game_);
    for (int id : scope_.included) {
      const auto& I = game_->infosets[id];
      int s = scope_.slot[id];
      double sum = 0;
      for (int a = 0; a < I.num_actions; ++a) sum += strategy_sum[s + a];
      if (sum <= 0) continue;
      for (int a = 0; a < I.num_actions; ++a)
        avg[I.action_offset + a] = strategy_sum[s + a] / sum;
    }
    return avg;
  }

  // σ^t snapshot over local slots, regret-matched per information set.
  void snapshot_policy(std::vector<double>& policy) const {
    policy.resize(scope_.total);
    for (int id : scope_.included) {
      int n = game_->infosets[id].num_actions;
      int s = scope_.slot[id];
      regret_matching({regret.data() + s, static_cast<size_t>(n)},
                      {policy.data() + s, static_cast<size_t>(n)});
    }
  }

  std::vector<double> regret;
  std::vector<double> strategy_sum;

 private:
  const GameDefinition* game_;
  InfosetSubset scope_;
  long long registered_ = scope_.total;
};

// ---------------------------------------------------------------------------
// One simultaneous-update CFR iteration over a (possibly truncated) tree.
// `policy` is the per-iteration snapshot over the table's local slots.
// Nodes flagged in `stop_mask` are treated as terminals worth
// `stop_values[node]` to p1: that is how the trunk pass consumes subgame
// solutions. Information sets without a slot play uniformly and accumulate
// nothing (the optional information-set filter of the solver).

struct CfrPassContext {
  const GameDefinition* g;
  const int32_t* slot;        // per infoset
  const double* policy;       // local slots
  double* regret;             // local slots
  double* strategy_sum;       // local slots
  const uint8_t* stop_mask = nullptr;
  const double* stop_values = nullptr;
};

inline double cfr_pass(const CfrPassContext& c, int node, double pi1, double pi2, double pic) {
  if (c.stop_mask && c.stop_mask[node]) return c.stop_values[node];
  const GameDefinition& g = *c.g;
  if (g.is_leaf(node)) return g.utility1[node];

  int n = g.num_actions[node];
  if (g.actor[node] == kChance) {
    double v = 0;
    for (int a = 0; a < n; ++a) {
      int ch = g.child(node, a);
      double p = g.chance_prob[ch];
      if (p != 0) v += p * cfr_pass(c, ch, pi1, pi2, pic * p);
    }
    return v;
  }

  const int player = g.actor[node];
  const int slot = c.slot[g.infoset[node]];
  const double counterfactual = (player == kP1 ? pi2 : pi1) * pic;
  const double own = player == kP1 ? pi1 : pi2;

  double uniform = 1.0 / n;
  double vals[16];
  assert(n <= 16);
  double v = 0;
  for (int a = 0; a < n; ++a) {
    double sigma = slot >= 0 ? c.policy[slot + a] : uniform;
    if (sigma == 0 && counterfactual == 0) {
      vals[a] = 0;
      continue;
    }
    int ch = g.child(node, a);
    vals[a] = player == kP1 ? cfr_pass(c, ch, pi1 * sigma, pi2, pic)
                            : cfr_pass(c, ch, pi1, pi2 * sigma, pic);
    v += sigma * vals[a];
  }
  if (slot >= 0) {
    if (player == kP1) {
      for (int a = 0; a < n; ++a) {
        c.regret[slot + a] += counterfactual * (vals[a] - v);
        c.strategy_sum[slot + a] += own * c.policy[slot + a];
      }
    } else {
      for (int a = 0; a < n; ++a) {
        c.regret[slot + a] -= counterfactual * (vals[a] - v);  // p2 value is -v1
        c.strategy_sum[slot + a] += own * c.policy[slot + a];
      }
    }
  }
  return v;
}

// ---------------------------------------------------------------------------
// Counterfactual values v_p(I) and v_p(I, a) under a fixed profile.

struct CfvVector {
  std::vector<double> action_value;   // indexed by global action offset
  std::vector<double> infoset_value;  // indexed by infoset id
};

namespace detail {
inline double cfv_rec(const GameDefinition& g, const StrategyProfile& s, int p, int node,
                      double reach_excl, CfvVector& out) {
  if (g.is_leaf(node)) return g.utility(node, p);
  int n = g.num_actions[node];
  if (g.actor[node] == kChance) {
    double v = 0;
    for (int a = 0; a < n; ++a) {
      int ch = g.child(node, a);
      double w = g.chance_prob[ch];
      if (w != 0) v += w * cfv_rec(g, s, p, ch, reach_excl * w, out);
    }
    return v;
  }
  const auto& I = g.infosets[g.infoset[node]];
  double v = 0;
  if (g.actor[node] == p) {
    for (int a = 0; a < n; ++a) {
      double va = cfv_rec(g, s, p, g.child(node, a), reach_excl, out);
      out.action_value[I.action_offset + a] += reach_excl * va;
      v += s[I.action_offset + a] * va;
    }
    out.infoset_value[g.infoset[node]] += reach_excl * v;
  } else {
    for (int a = 0; a < n; ++a) {
      double w = s[I.action_offset + a];
      // Zero-probability branches cannot carry opponent reach, but still
      // recurse so deeper values for p stay defined when reach_excl > 0.
      v += w * cfv_rec(g, s, p, g.child(node, a), reach_excl * w, out);
    }
  }
  return v;
}
}  // namespace detail

inline CfvVector counterfactual_values(const GameDefinition& g, const StrategyProfile& s,
                                       int p) {
  CfvVector out;
  out.action_value.assign(g.total_actions, 0.0);
  out.infoset_value.assign(g.infosets.size(), 0.0);
  detail::cfv_rec(g, s, p, 0, 1.0, out);
  return out;
}

// π_{-p}(h) for every node, chance included.
inline std::vector<double> reach_excluding(const GameDefinition& g, const StrategyProfile& s,
                                           int p) {
  std::vector<double> r(g.num_nodes());
  r[0] = 1.0;
  for (int i = 1; i < g.num_nodes(); ++i) {
    int par = g.parent[i];
    double w = 1.0;
    if (g.actor[par] == kChance)
      w = g.chance_prob[i];
    else if (g.actor[par] != p)
      w = s[g.infosets[g.infoset[par]].action_offset + g.action_index[i]];
    r[i] = r[par] * w;
  }
  return r;
}

// Counterfactual value of player p at one of its augmented information sets:
// sum over member histories of π_{-p}(h) times the expected value below h.
// On own-turn sets this agrees with CfvVector's infoset value.
inline double augmented_cfv(const GameDefinition& g, const StrategyProfile& s, int p,
                            const AugSetDef& aug, const std::vector<double>& excl_reach) {
  double v = 0;
  for (int m : aug.members) v += excl_reach[m] * value_below(g, s, m, p);
  return v;
}

inline double augmented_cfv(const GameDefinition& g, const StrategyProfile& s, int p,
                            const AugSetDef& aug) {
  return augmented_cfv(g, s, p, aug, reach_excluding(g, s, p));
}

// ---------------------------------------------------------------------------
// Counterfactual best response: maximizes v_p(I) at every information set of
// p, reachable or not, ties broken by lowest action index. Processed by
// decreasing own-decision depth so each choice sees the final deeper policy.

struct CbrResult {
  int player = 0;
  std::vector<int8_t> chosen;        // per infoset; -1 for the opponent's sets
  std::vector<double> node_value;    // value to `player` below each node
  std::vector<double> reach_excl;    // π_{-p}(h), chance included
  double root_value = 0;
};

namespace detail {

struct CbrWork {
  const GameDefinition* g;
  const StrategyProfile* s;
  int p;
  std::vector<int8_t>* chosen;
  std::vector<double>* value;
  std::vector<uint8_t>* known;
};

inline double cbr_value(const CbrWork& w, int node) {
  if ((*w.known)[node]) return (*w.value)[node];
  const GameDefinition& g = *w.g;
  double v;
  if (g.is_leaf(node)) {
    v = g.utility(node, w.p);
  } else if (g.actor[node] == w.p) {
    int a = (*w.chosen)[g.infoset[node]];
    assert(a >= 0);
    v = cbr_value(w, g.child(node, a));
  } else {
    v = 0;
    for (int a = 0; a < g.num_actions[node]; ++a) {
      int ch = g.child(node, a);
      double prob = g.actor[node] == kChance
                        ? g.chance_prob[ch]
                        : (*w.s)[g.infosets[g.infoset[node]].action_offset + a];
      if (prob != 0) v += prob * cbr_value(w, ch);
    }
  }
  (*w.value)[node] = v;
  (*w.known)[node] = 1;
  return v;
}

}  // namespace detail

inline CbrResult counterfactual_best_response_values(const GameDefinition& g,
                                                     const StrategyProfile& s, int p) {
  CbrResult r;
  r.player = p;
  r.chosen.assign(g.infosets.size(), -1);
  r.node_value.assign(g.num_nodes(), 0.0);
  std::vector<uint8_t> known(g.num_nodes(), 0);

  std::vector<int> order;
  for (size_t i = 0; i < g.infosets.size(); ++i)
    if (g.infosets[i].player == p) order.push_back(static_cast<int>(i));
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return g.infosets[a].own_level > g.infosets[b].own_level;
  });

  r.reach_excl = reach_excluding(g, s, p);
  detail::CbrWork w{&g, &s, p, &r.chosen, &r.node_value, &known};
  for (int id : order) {
    const auto& I = g.infosets[id];
    int best = 0;
    double best_v = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < I.num_actions; ++a) {
      double va = 0;
      for (int m : I.members) va += r.reach_excl[m] * detail::cbr_value(w, g.child(m, a));
      if (va > best_v) {
        best_v = va;
        best = a;
      }
    }
    r.chosen[id] = static_cast<int8_t>(best);
    for (int m : I.members) {
      r.node_value[m] = detail::cbr_value(w, g.child(m, best));
      known[m] = 1;
    }
  }
  r.root_value = detail::cbr_value(w, 0);
  for (int i = 0; i < g.num_nodes(); ++i) detail::cbr_value(w, i);
  return r;
}

// Profile equal to `s` with p's information sets replaced by the pure
// counterfactual best response.
inline StrategyProfile counterfactual_best_response(const GameDefinition& g,
                                                    const StrategyProfile& s, int p) {
  CbrResult r = counterfactual_best_response_values(g, s, p);
  StrategyProfile out = s;
  for (size_t i = 0; i < g.infosets.size(); ++i) {
    if (g.infosets[i].player != p) continue;
    const auto& I = g.infosets[i];
    for (int a = 0; a < I.num_actions; ++a) out[I.action_offset + a] = 0.0;
    out[I.action_offset + r.chosen[i]] = 1.0;
  }
  return out;
}

// Average best-response gain in chips per hand; zero exactly at a Nash
// equilibrium of a zero-sum game.
inline double exploitability(const GameDefinition& g, const StrategyProfile& s) {
  CbrResult b1 = counterfactual_best_response_values(g, s, kP1);
  CbrResult b2 = counterfactual_best_response_values(g, s, kP2);
  return (b1.root_value + b2.root_value) / 2.0;
}

// ---------------------------------------------------------------------------
// Vanilla CFR: deterministic full-tree self play with simultaneous updates.

struct TraceRow {
  long long iteration = 0;
  double exploitability_chips = 0;
  double elapsed_seconds = 0;
};

struct SolveOptions {
  // Optional information-set filter: sets failing it accumulate nothing and
  // play uniformly throughout.
  std::function<bool(int)> filter;
  bool trace = false;    // exploitability at powers-of-two checkpoints
  int eval_every = 0;    // fixed cadence instead, when > 0
  std::function<void(const TraceRow&)> on_trace;
};

struct SolveResult {
  StrategyProfile average;
  AccumulatorTable table;
  std::vector<TraceRow> trace;
};

inline SolveResult cfr_solve(const GameDefinition& g, long long iterations,
                             SolveOptions opts = {}) {
  if (iterations < 1) throw ConfigError("cfr_solve: iterations must be >= 1");
  InfosetSubset scope = opts.filter ? subset_where(g, opts.filter) : subset_all(g);
  AccumulatorTable table(g, std::move(scope));
  std::vector<double> policy;
  std::vector<TraceRow> trace;
  auto start = std::chrono::steady_clock::now();
  long long next_trace = 1;

  for (long long t = 1; t <= iterations; ++t) {
    table.snapshot_policy(policy);
    CfrPassContext ctx{&g,
                       table.scope().slot.data(),
                       policy.data(),
                       table.regret.data(),
                       table.strategy_sum.data()};
    cfr_pass(ctx, 0, 1.0, 1.0, 1.0);

    bool want = (opts.trace && t == next_trace) ||
                (opts.eval_every > 0 && t % opts.eval_every == 0) || t == iterations;
    if ((opts.trace || opts.eval_every > 0) && want) {
      if (t >= next_trace) next_trace *= 2;
      double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      TraceRow row{t, exploitability(g, table.average_strategy()), secs};
      trace.push_back(row);
      if (opts.on_trace) opts.on_trace(row);
    }
  }
  return {table.average_strategy(), std::move(table), std::move(trace)};
}

// ---------------------------------------------------------------------------
// Near-exact equilibrium refinement: regret matching with flooring,
// alternating updates, linearly weighted averaging. Not part of the solver
// contract above; used to manufacture high-precision starting profiles for
// the recovery experiments, which need exploitabilities far below what the
// vanilla O(1/sqrt(T)) rate reaches in reasonable time.

namespace detail {

struct PlusWork {
  const GameDefinition* g;
  const double* policy;    // snapshot, regret-matched from floored regrets
  double* regret_delta;    // per-iteration counterfactual regret increments
  double* strategy_sum;
  int update_player;
  double weight;  // linear averaging weight, = t
};

inline double plus_pass(const PlusWork& w, int node, double pi_own, double pi_opp) {
  const GameDefinition& g = *w.g;
  if (g.is_leaf(node)) return g.utility(node, w.update_player);
  int n = g.num_actions[node];
  if (g.actor[node] == kChance) {
    double v = 0;
    for (int a = 0; a < n; ++a) {
      int ch = g.child(node, a);
      double p = g.chance_prob[ch];
      if (p != 0) v += p * plus_pass(w, ch, pi_own, pi_opp * p);
    }
    return v;
  }
  const int off = g.infosets[g.infoset[node]].action_offset;
  double v = 0;
  if (g.actor[node] == w.update_player) {
    double vals[16];
    for (int a = 0; a < n; ++a) {
      vals[a] = plus_pass(w, g.child(node, a), pi_own * w.policy[off + a], pi_opp);
      v += w.policy[off + a] * vals[a];
    }
    for (int a = 0; a < n; ++a) {
      w.regret_delta[off + a] += pi_opp * (vals[a] - v);
      w.strategy_sum[off + a] += w.weight * pi_own * w.policy[off + a];
    }
  } else {
    for (int a = 0; a < n; ++a) {
      double sigma = w.policy[off + a];
      // Keep covering branches the opponent currently avoids while the
      // updating player can still reach them.
      if (sigma == 0 && pi_own == 0) continue;
      v += sigma * plus_pass(w, g.child(node, a), pi_own, pi_opp * sigma);
    }
  }
  return v;
}

}  // namespace detail

inline StrategyProfile solve_refined(const GameDefinition& g, long long iterations) {
  // One global table serves both players: action offsets are disjoint, and a
  // pass only writes at the updating player's sets.
  std::vector<double> regret(g.total_actions, 0.0);
  std::vector<double> delta(g.total_actions, 0.0);
  std::vector<double> strategy_sum(g.total_actions, 0.0);
  std::vector<double> policy(g.total_actions, 0.0);

  auto snapshot = [&] {
    for (const auto& I : g.infosets) {
      size_t n = I.num_actions;
      regret_matching({regret.data() + I.action_offset, n},
                      {policy.data() + I.action_offset, n});
    }
  };

  for (long long t = 1; t <= iterations; ++t) {
    for (int p = kP1; p <= kP2; ++p) {
      snapshot();
      detail::PlusWork w{&g,       policy.data(), delta.data(), strategy_sum.data(),
                         p,        static_cast<double>(t)};
      detail::plus_pass(w, 0, 1.0, 1.0);
      // One floor per iteration, applied to the accumulated deltas.
      for (const auto& I : g.infosets) {
        if (I.player != p) continue;
        for (int a = 0; a < I.num_actions; ++a) {
          int i = I.action_offset + a;
          regret[i] = std::max(0.0, regret[i] + delta[i]);
          delta[i] = 0.0;
        }
      }
    }
  }

  StrategyProfile avg = uniform_profile(g);
  for (const auto& I : g.infosets) {
    double sum = 0;
    for (int a = 0; a < I.num_actions; ++a) sum += strategy_sum[I.action_offset + a];
    if (sum <= 0) continue;
    for (int a = 0; a < I.num_actions; ++a)
      avg[I.action_offset + a] = strategy_sum[I.action_offset + a] / sum;
  }
  return avg;
}

}  // namespace cfrd
