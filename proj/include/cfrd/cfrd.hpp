#pragma once

#include <memory>
#include <mutex>
#include <thread>

#include "cfrd/cfr.hpp"
#include "cfrd/decomposition.hpp"
#include "cfrd/game.hpp"

namespace cfrd {

// ---------------------------------------------------------------------------
// Small deterministic task runner: results must not depend on worker count,
// so tasks write to their own slots and the caller merges in index order.

inline void run_tasks(int num_tasks, int workers, const std::function<void(int)>& fn) {
  workers = std::max(1, std::min(workers, num_tasks));
  if (workers == 1) {
    for (int i = 0; i < num_tasks; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::exception_ptr error;
  std::mutex error_mu;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < num_tasks; i = next.fetch_add(1)) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lk(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// Solving one subgame to a mutual counterfactual best response with CFR.
//
// The subgame is solved under trunk-induced reach weights. Regret updates use
// the true counterfactual weights (opponent trunk reach included), while
// strategy averaging uses within-subgame own reach only: own trunk reach is
// constant across an information set, so this changes nothing where it is
// positive and keeps the average a counterfactual best response where it is
// zero (the zero-reach pathology).

struct SubgameSolveResult {
  RootCfvs cfvs;                    // both players, aligned with root_groups
  std::vector<double> root_value1;  // E_1(r) per root under the combined profile
};

struct RootWeights {
  // Per root, aligned with Subgame::roots.
  std::vector<double> own1, own2, chance;  // trunk reach components
  std::vector<double> mult1, mult2;        // counterfactual multipliers t2*tc, t1*tc
};

inline RootWeights root_weights(const GameDefinition& g, const Subgame& sub,
                                const StrategyProfile& trunk_profile) {
  RootWeights w;
  size_t n = sub.roots.size();
  w.own1.resize(n);
  w.own2.resize(n);
  w.chance.resize(n);
  w.mult1.resize(n);
  w.mult2.resize(n);
  for (size_t i = 0; i < n; ++i) {
    ReachProbabilities r = reach(g, trunk_profile, sub.roots[i]);
    w.own1[i] = r.pi1;
    w.own2[i] = r.pi2;
    w.chance[i] = r.pic;
    w.mult1[i] = r.pi2 * r.pic;
    w.mult2[i] = r.pi1 * r.pic;
  }
  return w;
}

class SubgameSolver {
 public:
  virtual ~SubgameSolver() = default;
  virtual SubgameSolveResult solve(const StrategyProfile& trunk_profile,
                                   long long iterations) = 0;
  // Max per-root-set counterfactual regret of the last solution (for bound
  // measurements); computed only when requested.
  virtual double measure_root_regret(const StrategyProfile& trunk_profile) = 0;
};

namespace detail {

struct SubgamePassCtx {
  const GameDefinition* g;
  const int32_t* slot;
  const double* policy;
  double* regret;
  double* strategy_sum;
  double m1, m2;  // per-root counterfactual multipliers
};

inline double subgame_pass(const SubgamePassCtx& c, int node, double s1, double s2,
                           double pcs) {
  const GameDefinition& g = *c.g;
  if (g.is_leaf(node)) return g.utility1[node];
  int n = g.num_actions[node];
  if (g.actor[node] == kChance) {
    double v = 0;
    for (int a = 0; a < n; ++a) {
      int ch = g.child(node, a);
      double p = g.chance_prob[ch];
      if (p != 0) v += p * subgame_pass(c, ch, s1, s2, pcs * p);
    }
    return v;
  }
  const int player = g.actor[node];
  const int slot = c.slot[g.infoset[node]];
  assert(slot >= 0 && n <= 16);
  const double counterfactual =
      player == kP1 ? c.m1 * s2 * pcs : c.m2 * s1 * pcs;
  const double own = player == kP1 ? s1 : s2;
  double vals[16];
  double v = 0;
  for (int a = 0; a < n; ++a) {
    double sigma = c.policy[slot + a];
    if (sigma == 0 && counterfactual == 0) {
      vals[a] = 0;
      continue;
    }
    int ch = g.child(node, a);
    vals[a] = player == kP1 ? subgame_pass(c, ch, s1 * sigma, s2, pcs)
                            : subgame_pass(c, ch, s1, s2 * sigma, pcs);
    v += sigma * vals[a];
  }
  if (player == kP1) {
    for (int a = 0; a < n; ++a) {
      c.regret[slot + a] += counterfactual * (vals[a] - v);
      c.strategy_sum[slot + a] += own * c.policy[slot + a];
    }
  } else {
    for (int a = 0; a < n; ++a) {
      c.regret[slot + a] -= counterfactual * (vals[a] - v);
      c.strategy_sum[slot + a] += own * c.policy[slot + a];
    }
  }
  return v;
}

inline size_t subgame_root_index(const Subgame& sub, int root) {
  auto it = std::lower_bound(sub.roots.begin(), sub.roots.end(), root);
  return static_cast<size_t>(it - sub.roots.begin());
}

// Per-root-group value of a counterfactual best response of p inside the
// subgame against a fixed profile, weighted by the true counterfactual root
// multipliers.
inline std::vector<double> subgame_cbr_root_values(const GameDefinition& g, const Subgame& sub,
                                                   const RootWeights& w,
                                                   const StrategyProfile& avg, int p) {
  std::vector<double> excl(g.num_nodes(), 0.0);
  std::vector<double> value(g.num_nodes(), 0.0);
  std::vector<uint8_t> known(g.num_nodes(), 0);
  std::vector<int8_t> chosen(g.infosets.size(), -1);

  for (size_t i = 0; i < sub.roots.size(); ++i) {
    int r = sub.roots[i];
    excl[r] = p == kP1 ? w.mult1[i] : w.mult2[i];
    for (int n = r + 1; n < r + g.subtree_size[r]; ++n) {
      int par = g.parent[n];
      double f = 1.0;
      if (g.actor[par] == kChance)
        f = g.chance_prob[n];
      else if (g.actor[par] != p)
        f = avg[g.infosets[g.infoset[par]].action_offset + g.action_index[n]];
      excl[n] = excl[par] * f;
    }
  }

  std::function<double(int)> val = [&](int node) -> double {
    if (known[node]) return value[node];
    double v;
    if (g.is_leaf(node)) {
      v = g.utility(node, p);
    } else if (g.actor[node] == p) {
      v = val(g.child(node, chosen[g.infoset[node]]));
    } else {
      v = 0;
      for (int a = 0; a < g.num_actions[node]; ++a) {
        int ch = g.child(node, a);
        double prob = g.actor[node] == kChance
                          ? g.chance_prob[ch]
                          : avg[g.infosets[g.infoset[node]].action_offset + a];
        if (prob != 0) v += prob * val(ch);
      }
    }
    known[node] = 1;
    value[node] = v;
    return v;
  };

  std::vector<int> order;
  for (int id : sub.infosets)
    if (g.infosets[id].player == p) order.push_back(id);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return g.infosets[a].own_level > g.infosets[b].own_level;
  });
  for (int id : order) {
    const auto& I = g.infosets[id];
    int best = 0;
    double best_v = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < I.num_actions; ++a) {
      double va = 0;
      for (int m : I.members) va += excl[m] * val(g.child(m, a));
      if (va > best_v) {
        best_v = va;
        best = a;
      }
    }
    chosen[id] = static_cast<int8_t>(best);
    for (int m : I.members) {
      value[m] = val(g.child(m, best));
      known[m] = 1;
    }
  }

  const auto& groups = sub.root_groups[p - 1];
  std::vector<double> out(groups.size(), 0.0);
  for (size_t gi = 0; gi < groups.size(); ++gi)
    for (int r : groups[gi].roots) out[gi] += excl[r] * val(r);
  return out;
}

inline std::vector<double> subgame_achieved_root_values(const GameDefinition& g,
                                                        const Subgame& sub,
                                                        const RootWeights& w,
                                                        const StrategyProfile& avg, int p) {
  const auto& groups = sub.root_groups[p - 1];
  std::vector<double> out(groups.size(), 0.0);
  for (size_t gi = 0; gi < groups.size(); ++gi)
    for (int r : groups[gi].roots) {
      size_t idx = subgame_root_index(sub, r);
      out[gi] += (p == kP1 ? w.mult1[idx] : w.mult2[idx]) * value_below(g, avg, r, p);
    }
  return out;
}

// Max over players and root sets of how much a counterfactual best response
// gains over the solved subgame strategy.
inline double measure_subgame_root_regret(const GameDefinition& g, const Subgame& sub,
                                          const RootWeights& w, const StrategyProfile& avg) {
  double worst = 0;
  for (int p : {kP1, kP2}) {
    auto cbr = subgame_cbr_root_values(g, sub, w, avg, p);
    auto achieved = subgame_achieved_root_values(g, sub, w, avg, p);
    for (size_t i = 0; i < cbr.size(); ++i) worst = std::max(worst, cbr[i] - achieved[i]);
  }
  return worst;
}

// Shared epilogue: expected values below each root under the solved profile
// and the root-set counterfactual values for both players.
inline SubgameSolveResult subgame_solve_epilogue(const GameDefinition& g, const Subgame& sub,
                                                 const RootWeights& w,
                                                 const StrategyProfile& avg) {
  SubgameSolveResult out;
  out.root_value1.resize(sub.roots.size());
  for (size_t i = 0; i < sub.roots.size(); ++i)
    out.root_value1[i] = value_below(g, avg, sub.roots[i], kP1);
  for (int p : {kP1, kP2}) {
    const auto& groups = sub.root_groups[p - 1];
    auto& vals = out.cfvs.value[p - 1];
    vals.assign(groups.size(), 0.0);
    for (size_t gi = 0; gi < groups.size(); ++gi)
      for (int r : groups[gi].roots) {
        size_t idx = subgame_root_index(sub, r);
        double mult = p == kP1 ? w.mult1[idx] : w.mult2[idx];
        double e = p == kP1 ? out.root_value1[idx] : -out.root_value1[idx];
        vals[gi] += mult * e;
      }
  }
  return out;
}

}  // namespace detail

class ScalarSubgameSolver : public SubgameSolver {
 public:
  ScalarSubgameSolver(const GameDefinition& g, const SubgamePartition& part, int s)
      : g_(&g), sub_(&part.subgames[s]) {
    std::vector<char> in(g.infosets.size(), 0);
    for (int id : sub_->infosets) in[id] = 1;
    scope_ = subset_where(g, [&](int i) { return in[i] != 0; });
  }

  SubgameSolveResult solve(const StrategyProfile& trunk_profile,
                           long long iterations) override {
    AccumulatorTable table(*g_, scope_);
    RootWeights w = root_weights(*g_, *sub_, trunk_profile);
    std::vector<double> policy;
    for (long long t = 1; t <= iterations; ++t) {
      table.snapshot_policy(policy);
      for (size_t i = 0; i < sub_->roots.size(); ++i) {
        detail::SubgamePassCtx ctx{g_,
                                   table.scope().slot.data(),
                                   policy.data(),
                                   table.regret.data(),
                                   table.strategy_sum.data(),
                                   w.mult1[i],
                                   w.mult2[i]};
        detail::subgame_pass(ctx, sub_->roots[i], 1.0, 1.0, 1.0);
      }
    }
    last_average_ = table.average_strategy();
    return detail::subgame_solve_epilogue(*g_, *sub_, w, last_average_);
  }

  double measure_root_regret(const StrategyProfile& trunk_profile) override {
    RootWeights w = root_weights(*g_, *sub_, trunk_profile);
    return detail::measure_subgame_root_regret(*g_, *sub_, w, last_average_);
  }

 private:
  const GameDefinition* g_;
  const Subgame* sub_;
  InfosetSubset scope_;
  StrategyProfile last_average_;
};

// Defined in range_solver.hpp; returns nullptr when the subgame does not fit
// the vectorized public-tree form.
std::unique_ptr<SubgameSolver> make_range_solver(const GameDefinition& g,
                                                 const SubgamePartition& part, int s);

enum class SubgameEngine { automatic, scalar };

inline std::unique_ptr<SubgameSolver> make_subgame_solver(const GameDefinition& g,
                                                          const SubgamePartition& part, int s,
                                                          SubgameEngine engine) {
  if (engine == SubgameEngine::automatic) {
    if (auto solver = make_range_solver(g, part, s)) return solver;
  }
  return std::make_unique<ScalarSubgameSolver>(g, part, s);
}

inline SubgameSolveResult solve_subgame_mutual_cbr(const GameDefinition& g,
                                                   const SubgamePartition& part, int s,
                                                   const StrategyProfile& trunk_profile,
                                                   long long iterations,
                                                   SubgameEngine engine = SubgameEngine::automatic) {
  if (iterations < 1) throw ConfigError("solve_subgame_mutual_cbr: iterations must be >= 1");
  return make_subgame_solver(g, part, s, engine)->solve(trunk_profile, iterations);
}

// ---------------------------------------------------------------------------
// CFR-D: trunk-only accumulators, per-iteration subgame solves, running-mean
// counterfactual values at the subgame roots.

struct RegretBoundReport {
  int trunk_infosets = 0;
  int root_infosets = 0;
  int max_trunk_actions = 0;
  long long iterations = 0;
  double eps_s = 0;           // per-iteration subgame counterfactual-regret bound

  double bound() const {
    if (iterations == 0) return 0;
    return trunk_infosets *
               std::sqrt(static_cast<double>(max_trunk_actions) * iterations) / iterations +
           root_infosets * eps_s;
  }
};

struct TrunkState {
  AccumulatorTable table;                // trunk information sets only
  std::vector<RootCfvs> cfv_sum;         // per subgame, cumulative
  long long iterations = 0;

  TrunkState(const GameDefinition& g, InfosetSubset scope) : table(g, std::move(scope)) {}

  std::vector<RootCfvs> average_cfvs() const {
    std::vector<RootCfvs> avg = cfv_sum;
    for (auto& rc : avg)
      for (auto& vals : rc.value)
        for (auto& v : vals) v /= static_cast<double>(iterations);
    return avg;
  }
};

struct CfrdOptions {
  int workers = 1;
  SubgameEngine engine = SubgameEngine::automatic;
  bool measure_eps_s = false;  // extra best-response pass per subgame solve
  // Called after each trunk iteration with that iteration's subgame cfvs.
  std::function<void(long long t, const std::vector<RootCfvs>&)> on_iteration;
  // Called at power-of-two trunk iterations with the running averages.
  std::function<void(long long t, const StrategyProfile& trunk_avg,
                     const std::vector<RootCfvs>& avg_cfvs)>
      on_checkpoint;
};

struct CfrdResult {
  StrategyProfile trunk_average;   // uniform at subgame-interior sets
  std::vector<RootCfvs> avg_cfvs;  // per subgame
  RegretBoundReport report;
  std::shared_ptr<TrunkState> state;
};

inline CfrdResult cfr_d(const GameDefinition& g, const SubgamePartition& part,
                        long long trunk_iterations, long long subgame_iterations,
                        CfrdOptions opts = {}) {
  if (trunk_iterations < 1 || (subgame_iterations < 1 && !part.subgames.empty()))
    throw ConfigError("cfr_d: iteration counts must be >= 1");

  std::vector<char> in_trunk(g.infosets.size(), 0);
  for (int id : part.trunk_infosets) in_trunk[id] = 1;
  auto state = std::make_shared<TrunkState>(
      g, subset_where(g, [&](int i) { return in_trunk[i] != 0; }));
  state->cfv_sum.resize(part.subgames.size());
  for (size_t s = 0; s < part.subgames.size(); ++s) {
    for (int p = 0; p < 2; ++p)
      state->cfv_sum[s].value[p].assign(part.subgames[s].root_groups[p].size(), 0.0);
  }

  const int num_subgames = static_cast<int>(part.subgames.size());
  std::vector<std::unique_ptr<SubgameSolver>> solvers;
  solvers.reserve(num_subgames);
  for (int s = 0; s < num_subgames; ++s)
    solvers.push_back(make_subgame_solver(g, part, s, opts.engine));

  std::vector<uint8_t> stop_mask(g.num_nodes(), 0);
  std::vector<double> stop_values(g.num_nodes(), 0.0);
  for (const auto& sub : part.subgames)
    for (int r : sub.roots) stop_mask[r] = 1;

  StrategyProfile trunk_profile = uniform_profile(g);
  std::vector<double> policy;
  std::vector<SubgameSolveResult> results(num_subgames);
  double eps_s = 0;
  long long next_checkpoint = 1;

  for (long long t = 1; t <= trunk_iterations; ++t) {
    state->table.snapshot_policy(policy);
    // Materialize the trunk policy at global offsets for reach computations.
    for (int id : part.trunk_infosets) {
      const auto& I = g.infosets[id];
      int s = state->table.slot(id);
      for (int a = 0; a < I.num_actions; ++a)
        trunk_profile[I.action_offset + a] = policy[s + a];
    }

    run_tasks(num_subgames, opts.workers, [&](int s) {
      results[s] = solvers[s]->solve(trunk_profile, subgame_iterations);
    });
    if (opts.measure_eps_s)
      for (int s = 0; s < num_subgames; ++s)
        eps_s = std::max(eps_s, solvers[s]->measure_root_regret(trunk_profile));

    for (int s = 0; s < num_subgames; ++s) {
      const Subgame& sub = part.subgames[s];
      for (size_t i = 0; i < sub.roots.size(); ++i)
        stop_values[sub.roots[i]] = results[s].root_value1[i];
      for (int p = 0; p < 2; ++p)
        for (size_t gi = 0; gi < results[s].cfvs.value[p].size(); ++gi)
          state->cfv_sum[s].value[p][gi] += results[s].cfvs.value[p][gi];
    }
    if (opts.on_iteration) {
      std::vector<RootCfvs> this_iter(num_subgames);
      for (int s = 0; s < num_subgames; ++s) this_iter[s] = results[s].cfvs;
      opts.on_iteration(t, this_iter);
    }

    CfrPassContext ctx{&g,
                       state->table.scope().slot.data(),
                       policy.data(),
                       state->table.regret.data(),
                       state->table.strategy_sum.data(),
                       num_subgames ? stop_mask.data() : nullptr,
                       num_subgames ? stop_values.data() : nullptr};
    cfr_pass(ctx, 0, 1.0, 1.0, 1.0);
    state->iterations = t;

    if (opts.on_checkpoint && (t == next_checkpoint || t == trunk_iterations)) {
      while (t >= next_checkpoint) next_checkpoint *= 2;
      opts.on_checkpoint(t, state->table.average_strategy(), state->average_cfvs());
    }
  }

  CfrdResult out;
  out.trunk_average = state->table.average_strategy();
  out.avg_cfvs = state->average_cfvs();
  out.report.trunk_infosets = part.trunk_infoset_count();
  out.report.root_infosets = part.root_infoset_count();
  out.report.iterations = trunk_iterations;
  out.report.eps_s = eps_s;
  for (int id : part.trunk_infosets)
    out.report.max_trunk_actions =
        std::max(out.report.max_trunk_actions, g.infosets[id].num_actions);
  out.state = std::move(state);
  return out;
}

// ---------------------------------------------------------------------------
// Full-strategy recovery: per subgame and per player, build the gadget from
// the trunk strategy and stored cfvs, solve it, and stitch the fragment in.

struct RecoverOptions {
  int workers = 1;
  // Unreachable subgames (k = 0) keep a uniform strategy and emit a warning.
  std::function<void(int subgame, int player)> on_unreachable;
};

inline StrategyProfile recover_full(const GameDefinition& g, const SubgamePartition& part,
                                    const StrategyProfile& trunk_profile,
                                    const std::vector<RootCfvs>& cfvs,
                                    long long recovery_iterations, RecoverOptions opts = {}) {
  if (recovery_iterations < 1) throw ConfigError("recover_full: iterations must be >= 1");
  if (cfvs.size() != part.subgames.size())
    throw ConfigError("recover_full: cfvs must cover every subgame");

  const int num_subgames = static_cast<int>(part.subgames.size());
  const int num_tasks = 2 * num_subgames;
  std::vector<StrategyFragment> fragments(num_tasks);
  std::vector<int8_t> unreachable(num_tasks, 0);

  run_tasks(num_tasks, opts.workers, [&](int task) {
    int s = task / 2;
    int p = task % 2 == 0 ? kP1 : kP2;
    int chooser = other_player(p);
    try {
      RecoveryGame rec =
          build_recovery_game(g, part, s, trunk_profile, p, cfvs[s].value[chooser - 1]);
      fragments[task] = resolve_subgame(rec, recovery_iterations);
    } catch (const UnreachableSubgameError&) {
      unreachable[task] = 1;
      StrategyFragment frag;
      frag.player = p;
      for (int id : part.subgames[s].infosets) {
        if (g.infosets[id].player != p) continue;
        const auto& I = g.infosets[id];
        frag.entries.emplace_back(id,
                                  std::vector<double>(I.num_actions, 1.0 / I.num_actions));
      }
      fragments[task] = std::move(frag);
    }
  });

  StrategyProfile out = trunk_profile;
  for (int task = 0; task < num_tasks; ++task) {
    int s = task / 2;
    if (unreachable[task]) {
      log(1, "recover_full: subgame %d unreachable for player %d, using uniform", s,
          task % 2 == 0 ? kP1 : kP2);
      if (opts.on_unreachable) opts.on_unreachable(s, task % 2 == 0 ? kP1 : kP2);
    }
    out = stitch(g, out, part, s, fragments[task]);
  }
  return out;
}

}  // namespace cfrd

// The vectorized public-tree engine completes make_range_solver; the mutual
// include is guarded so either header may be included first.
#include "cfrd/range_solver.hpp"
