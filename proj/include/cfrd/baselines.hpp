#pragma once

#include <string>
#include <vector>

#include "cfrd/cfrd.hpp"
#include "cfrd/decomposition.hpp"
#include "cfrd/games.hpp"

namespace cfrd {

// ---------------------------------------------------------------------------
// Abstraction: the coarse Leduc game where round-two board observations are
// merged for Jack and King holders. The abstract tree is structurally
// identical to the real one; only information-set keys coarsen.

struct Abstraction {
  GameDefinition game;            // the abstract game
  std::vector<int32_t> map;       // real infoset id -> abstract infoset id
};

inline Abstraction build_abstraction(const GameDefinition& real) {
  if (real.name != "leduc")
    throw ConfigError("build_abstraction: only leduc is supported, got " + real.name);
  Abstraction out;
  out.game = build_leduc(true);
  if (out.game.num_nodes() != real.num_nodes())
    throw ValidationError("abstraction: tree shape mismatch");
  out.map.assign(real.infosets.size(), -1);
  for (int n = 0; n < real.num_nodes(); ++n) {
    if (real.actor[n] != out.game.actor[n] || real.num_actions[n] != out.game.num_actions[n])
      throw ValidationError("abstraction: node mismatch at " + real.history_string(n));
    if (real.infoset[n] < 0) continue;
    int32_t& slot = out.map[real.infoset[n]];
    if (slot >= 0 && slot != out.game.infoset[n])
      throw ValidationError("abstraction: inconsistent bucket at " + real.infoset_key(n));
    slot = out.game.infoset[n];
  }
  for (size_t i = 0; i < real.infosets.size(); ++i) {
    if (out.map[i] < 0) throw ValidationError("abstraction: unmapped information set");
    const auto& r = real.infosets[i];
    const auto& a = out.game.infosets[out.map[i]];
    if (r.player != a.player || r.action_names != a.action_names)
      throw ValidationError("abstraction: action list mismatch at " + r.key);
  }
  return out;
}

// Copy each abstract distribution to every real information set in its bucket.
inline StrategyProfile lift(const GameDefinition& real, const Abstraction& abs,
                            const StrategyProfile& abstract_profile) {
  StrategyProfile out(real.total_actions);
  for (size_t i = 0; i < real.infosets.size(); ++i) {
    const auto& r = real.infosets[i];
    const auto& a = abs.game.infosets[abs.map[i]];
    for (int k = 0; k < r.num_actions; ++k)
      out[r.action_offset + k] = abstract_profile[a.action_offset + k];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Unsafe re-solving: fix both players' trunk reach as chance over the subgame
// roots and re-solve the subgame in isolation. No exploitability guarantee;
// this is the baseline the recovery gadget is compared against.

struct UnsafeResolveResult {
  StrategyFragment fragment1, fragment2;
};

inline UnsafeResolveResult unsafe_resolve(const GameDefinition& g, const SubgamePartition& part,
                                          int s, const StrategyProfile& profile,
                                          long long iterations) {
  if (iterations < 1) throw ConfigError("unsafe_resolve: iterations must be >= 1");
  const Subgame& sub = part.subgames[s];
  double total = 0;
  std::vector<double> weight(sub.roots.size());
  for (size_t i = 0; i < sub.roots.size(); ++i) {
    weight[i] = reach(g, profile, sub.roots[i]).joint();
    total += weight[i];
  }
  if (total <= 0)
    throw UnreachableSubgameError("unsafe_resolve: subgame " + std::to_string(s) +
                                  " has zero joint trunk reach");

  GameBuilder b(g.name + "-unsafe");
  b.set_chance(b.root());
  std::vector<std::pair<int, int>> node_map;
  for (size_t i = 0; i < sub.roots.size(); ++i)
    detail::copy_subtree(g, b, b.root(), sub.roots[i], "g" + std::to_string(sub.roots[i]),
                         weight[i] / total, 1.0, node_map);
  GameDefinition solo = b.finalize();

  std::unordered_map<std::string, int> orig_key[2];
  for (size_t i = 0; i < g.infosets.size(); ++i)
    orig_key[g.infosets[i].player - 1][g.infosets[i].key] = static_cast<int>(i);

  SolveResult res = cfr_solve(solo, iterations);
  UnsafeResolveResult out;
  out.fragment1.player = kP1;
  out.fragment2.player = kP2;
  for (size_t i = 0; i < solo.infosets.size(); ++i) {
    const auto& I = solo.infosets[i];
    auto it = orig_key[I.player - 1].find(I.key);
    if (it == orig_key[I.player - 1].end())
      throw ValidationError("unsafe_resolve: unmapped information set " + I.key);
    std::vector<double> probs(I.num_actions);
    for (int a = 0; a < I.num_actions; ++a) probs[a] = res.average[I.action_offset + a];
    (I.player == kP1 ? out.fragment1 : out.fragment2)
        .entries.emplace_back(it->second, std::move(probs));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Counterfactual values from a best-response pass: for each player, the
// opponent of the recovery plays a counterfactual best response against the
// profile, and the root values are read off that pass. These feed safe
// re-solving of an existing, possibly suboptimal, strategy.

inline RootCfvs cfvs_from_best_response(const GameDefinition& g, const SubgamePartition& part,
                                        int s, const StrategyProfile& profile) {
  RootCfvs out;
  for (int q : {kP1, kP2}) {
    CbrResult cbr = counterfactual_best_response_values(g, profile, q);
    const auto& groups = part.subgames[s].root_groups[q - 1];
    out.value[q - 1].resize(groups.size());
    for (size_t gi = 0; gi < groups.size(); ++gi) {
      double v = 0;
      for (int r : groups[gi].roots) v += cbr.reach_excl[r] * cbr.node_value[r];
      out.value[q - 1][gi] = v;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Whole-game re-solving passes used by the comparison experiment: re-solve
// every subgame for both players and stitch.

inline StrategyProfile safe_resolve_all(const GameDefinition& g, const SubgamePartition& part,
                                        const StrategyProfile& profile, long long iterations,
                                        int workers = 1) {
  std::vector<RootCfvs> cfvs(part.subgames.size());
  run_tasks(static_cast<int>(part.subgames.size()), workers, [&](int s) {
    cfvs[s] = cfvs_from_best_response(g, part, s, profile);
  });
  return recover_full(g, part, profile, cfvs, iterations, RecoverOptions{.workers = workers});
}

inline StrategyProfile unsafe_resolve_all(const GameDefinition& g, const SubgamePartition& part,
                                          const StrategyProfile& profile, long long iterations,
                                          int workers = 1) {
  const int n = static_cast<int>(part.subgames.size());
  std::vector<UnsafeResolveResult> results(n);
  run_tasks(n, workers, [&](int s) {
    results[s] = unsafe_resolve(g, part, s, profile, iterations);
  });
  StrategyProfile out = profile;
  for (int s = 0; s < n; ++s) {
    out = stitch(g, out, part, s, results[s].fragment1);
    out = stitch(g, out, part, s, results[s].fragment2);
  }
  return out;
}

// Average value of the re-solved profile playing each seat against the
// original, the quantity the unsafe method optimizes.
inline double value_vs_original(const GameDefinition& g, const StrategyProfile& resolved,
                                const StrategyProfile& original) {
  StrategyProfile seat1 = original;
  StrategyProfile seat2 = original;
  for (const auto& I : g.infosets) {
    StrategyProfile& dst = I.player == kP1 ? seat1 : seat2;
    for (int a = 0; a < I.num_actions; ++a)
      dst[I.action_offset + a] = resolved[I.action_offset + a];
  }
  return (expected_value(g, seat1)[0] + expected_value(g, seat2)[1]) / 2.0;
}

}  // namespace cfrd
