#pragma once

#include <functional>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

#include "cfrd/cfr.hpp"
#include "cfrd/game.hpp"
#include "cfrd/io.hpp"

namespace cfrd {

using FrontierPredicate = std::function<bool(const GameDefinition&, int)>;

struct PartitionError : ValidationError {
  using ValidationError::ValidationError;
};

// Subgame unreachable through the given trunk strategy (k = 0).
struct UnreachableSubgameError : ValidationError {
  using ValidationError::ValidationError;
};

// One augmented information set at a subgame's root.
struct RootInfosetGroup {
  int aug_id = -1;       // into game.aug_sets[player-1]
  std::string key;
  std::vector<int32_t> roots;
};

struct Subgame {
  std::vector<int32_t> roots;     // ascending node ids, an antichain
  std::vector<int32_t> infosets;  // standard infosets contained in the subgame
  std::array<std::vector<RootInfosetGroup>, 2> root_groups;  // per player
};

struct SubgamePartition {
  const GameDefinition* game = nullptr;
  std::vector<int32_t> region;  // per node: -1 trunk, else subgame index
  std::vector<Subgame> subgames;
  std::vector<int32_t> trunk_infosets;

  bool in_trunk(int node) const { return region[node] < 0; }
  int trunk_infoset_count() const { return static_cast<int>(trunk_infosets.size()); }
  int root_infoset_count() const {
    int n = 0;
    for (const auto& s : subgames)
      n += static_cast<int>(s.root_groups[0].size() + s.root_groups[1].size());
    return n;
  }
};

// ---------------------------------------------------------------------------
// partition_game: cluster the frontier into maximal grouped sets (transitive
// closure over shared augmented information sets of either player), attach
// all descendants, and verify that no information set crosses a region
// boundary.

namespace detail {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); }
  void merge(int a, int b) { parent[find(a)] = find(b); }
};

}  // namespace detail

inline SubgamePartition partition_game(const GameDefinition& g,
                                       const FrontierPredicate& frontier) {
  std::vector<int32_t> roots;
  for (int n = 0; n < g.num_nodes(); ++n)
    if (frontier(g, n)) roots.push_back(n);

  // Precondition: no root is an ancestor of another.
  for (size_t i = 0; i + 1 < roots.size(); ++i) {
    if (roots[i + 1] < roots[i] + g.subtree_size[roots[i]])
      throw PartitionError("frontier history '" + g.history_string(roots[i]) +
                           "' is an ancestor of '" + g.history_string(roots[i + 1]) + "'");
  }

  // Grouped closure over the frontier.
  detail::UnionFind uf(static_cast<int>(roots.size()));
  for (int p = kP1; p <= kP2; ++p) {
    std::unordered_map<int, int> first_with_key;
    for (size_t i = 0; i < roots.size(); ++i) {
      int key = g.augmented_id(roots[i], p);
      auto [it, inserted] = first_with_key.try_emplace(key, static_cast<int>(i));
      if (!inserted) uf.merge(static_cast<int>(i), it->second);
    }
  }

  SubgamePartition part;
  part.game = &g;
  part.region.assign(g.num_nodes(), -1);
  std::unordered_map<int, int> cluster_index;
  for (size_t i = 0; i < roots.size(); ++i) {
    int c = uf.find(static_cast<int>(i));
    auto [it, inserted] = cluster_index.try_emplace(c, static_cast<int>(part.subgames.size()));
    if (inserted) part.subgames.push_back({});
    Subgame& s = part.subgames[it->second];
    s.roots.push_back(roots[i]);
    for (int n = roots[i]; n < roots[i] + g.subtree_size[roots[i]]; ++n)
      part.region[n] = it->second;
  }

  for (size_t i = 0; i < g.infosets.size(); ++i) {
    const auto& I = g.infosets[i];
    int r = part.region[I.members.front()];
    for (int m : I.members) {
      if (part.region[m] != r)
        throw PartitionError("information set " + I.key + " crosses the frontier: '" +
                             g.history_string(I.members.front()) + "' vs '" +
                             g.history_string(m) + "'");
    }
    if (r < 0)
      part.trunk_infosets.push_back(static_cast<int>(i));
    else
      part.subgames[r].infosets.push_back(static_cast<int>(i));
  }

  // Augmented sets touching a subgame's roots may not reach outside it,
  // except through plain ancestors (the observation sequence is unchanged
  // along opponent and chance moves).
  for (auto& s : part.subgames) {
    int region_id = part.region[s.roots.front()];
    for (int p = kP1; p <= kP2; ++p) {
      std::unordered_map<int, RootInfosetGroup> groups;
      for (int r : s.roots) {
        auto& grp = groups[g.augmented_id(r, p)];
        grp.aug_id = g.augmented_id(r, p);
        grp.key = g.augmented_key(r, p);
        grp.roots.push_back(r);
      }
      for (auto& [aug, grp] : groups) {
        for (int m : g.aug_sets[p - 1][aug].members) {
          if (part.region[m] == region_id) continue;
          bool is_ancestor_of_root = false;
          for (int r : s.roots)
            if (m <= r && r < m + g.subtree_size[m]) is_ancestor_of_root = true;
          if (!is_ancestor_of_root)
            throw PartitionError("augmented information set " + grp.key +
                                 " crosses the frontier near '" + g.history_string(m) + "'");
        }
      }
      s.root_groups[p - 1].reserve(groups.size());
      for (int r : s.roots) {
        int aug = g.augmented_id(r, p);
        auto it = groups.find(aug);
        if (it != groups.end()) {
          s.root_groups[p - 1].push_back(std::move(it->second));
          groups.erase(it);
        }
      }
    }
  }
  return part;
}

// ---------------------------------------------------------------------------
// Root counterfactual values under a full profile, one per root group.

struct RootCfvs {
  std::array<std::vector<double>, 2> value;  // aligned with Subgame::root_groups
};

inline RootCfvs root_cfvs(const GameDefinition& g, const SubgamePartition& part, int s,
                          const StrategyProfile& profile) {
  RootCfvs out;
  for (int p = kP1; p <= kP2; ++p) {
    auto excl = reach_excluding(g, profile, p);
    const auto& groups = part.subgames[s].root_groups[p - 1];
    out.value[p - 1].resize(groups.size());
    for (size_t i = 0; i < groups.size(); ++i) {
      double v = 0;
      for (int r : groups[i].roots) v += excl[r] * value_below(g, profile, r, p);
      out.value[p - 1][i] = v;
    }
  }
  return out;
}

inline std::vector<CfvLine> cfvs_to_lines(const SubgamePartition& part,
                                          const std::vector<RootCfvs>& all) {
  std::vector<CfvLine> lines;
  for (size_t s = 0; s < part.subgames.size(); ++s)
    for (int p = kP1; p <= kP2; ++p) {
      const auto& groups = part.subgames[s].root_groups[p - 1];
      for (size_t i = 0; i < groups.size(); ++i)
        lines.push_back({p, groups[i].key, all[s].value[p - 1][i]});
    }
  return lines;
}

inline std::vector<RootCfvs> cfvs_from_lines(const SubgamePartition& part,
                                             const std::vector<CfvLine>& lines) {
  std::array<std::unordered_map<std::string, double>, 2> by_key;
  for (const auto& l : lines) {
    if (l.player != kP1 && l.player != kP2)
      throw ValidationError("cfv line with bad player " + std::to_string(l.player));
    by_key[l.player - 1][l.key] = l.value;
  }
  std::vector<RootCfvs> all(part.subgames.size());
  for (size_t s = 0; s < part.subgames.size(); ++s)
    for (int p = kP1; p <= kP2; ++p) {
      const auto& groups = part.subgames[s].root_groups[p - 1];
      all[s].value[p - 1].resize(groups.size());
      for (size_t i = 0; i < groups.size(); ++i) {
        auto it = by_key[p - 1].find(groups[i].key);
        if (it == by_key[p - 1].end())
          throw ValidationError("cfv file missing root information set " + groups[i].key);
        all[s].value[p - 1][i] = it->second;
      }
    }
  return all;
}

// ---------------------------------------------------------------------------
// Recovery gadget game. The chooser (the opponent of the player whose
// strategy is recovered) picks T for the stored counterfactual value or F to
// play the copied subgame. Chance weights exclude the chooser's own reach and
// leaf utilities are scaled back up by k, per the construction.

struct RecoveryGame {
  GameDefinition game;
  int recover_for = 0;
  int chooser = 0;
  double k = 0;
  std::vector<int32_t> to_original;          // gadget node -> original node, -1 if gadget-only
  std::vector<int32_t> infoset_to_original;  // gadget infoset -> original infoset, -1
  std::vector<std::vector<int32_t>> chooser_groups;  // gadget chooser nodes per root group
};

namespace detail {

inline int copy_subtree(const GameDefinition& g, GameBuilder& b, int b_parent, int orig,
                        const std::string& edge, double chance_prob, double scale,
                        std::vector<std::pair<int, int>>& node_map) {
  int bn = b.add_child(b_parent, edge, chance_prob);
  node_map.emplace_back(bn, orig);
  if (g.is_leaf(orig)) {
    b.set_leaf(bn, scale * g.utility1[orig], scale * g.utility2[orig]);
    return bn;
  }
  if (g.actor[orig] == kChance)
    b.set_chance(bn);
  else
    b.set_decision(bn, g.actor[orig], g.infoset_key(orig));
  for (int a = 0; a < g.num_actions[orig]; ++a) {
    int c = g.child(orig, a);
    copy_subtree(g, b, bn, c, g.edge_name[c], g.chance_prob[c], scale, node_map);
  }
  return bn;
}

}  // namespace detail

inline RecoveryGame build_recovery_game(const GameDefinition& g, const SubgamePartition& part,
                                        int s, const StrategyProfile& profile, int recover_for,
                                        const std::vector<double>& chooser_cfvs) {
  const Subgame& sub = part.subgames[s];
  const int chooser = other_player(recover_for);
  const auto& groups = sub.root_groups[chooser - 1];
  if (chooser_cfvs.size() != groups.size())
    throw ValidationError("build_recovery_game: need one cfv per chooser root set");

  // pi_{-chooser}(r): the recovered player's reach times chance.
  std::unordered_map<int, double> weight;
  double k = 0;
  for (int r : sub.roots) {
    ReachProbabilities rp = reach(g, profile, r);
    double w = rp.own(recover_for) * rp.pic;
    weight[r] = w;
    k += w;
  }
  if (k <= 0)
    throw UnreachableSubgameError(
        "subgame " + std::to_string(s) +
        " is unreachable through the trunk for recovering player " +
        std::to_string(recover_for));

  GameBuilder b(g.name + "-recovery");
  b.set_chance(b.root());
  std::vector<std::pair<int, int>> node_map;  // builder node -> original node
  std::vector<std::vector<int32_t>> chooser_builder_nodes(groups.size());

  for (size_t gi = 0; gi < groups.size(); ++gi) {
    const auto& grp = groups[gi];
    double denom = 0;
    for (int r : grp.roots) denom += weight[r];
    // Opponent-unreachable root set: any finite T value keeps the guarantee;
    // use 0 to avoid the division.
    double t_value = denom > 0 ? k * chooser_cfvs[gi] / denom : 0.0;

    for (int r : grp.roots) {
      int chooser_node = b.add_child(b.root(), "g" + std::to_string(r), weight[r] / k);
      b.set_decision(chooser_node, chooser, "gadget|" + grp.key);
      chooser_builder_nodes[gi].push_back(chooser_node);
      detail::copy_subtree(g, b, chooser_node, r, "F", 1.0, k, node_map);
      int t_leaf = b.add_child(chooser_node, "T");
      b.set_leaf(t_leaf, chooser == kP1 ? t_value : -t_value,
                 chooser == kP1 ? -t_value : t_value);
    }
  }

  RecoveryGame rec;
  std::vector<int> to_final;
  rec.game = b.finalize(&to_final);
  rec.recover_for = recover_for;
  rec.chooser = chooser;
  rec.k = k;
  rec.to_original.assign(rec.game.num_nodes(), -1);
  for (auto [bn, orig] : node_map) rec.to_original[to_final[bn]] = orig;
  rec.chooser_groups.resize(groups.size());
  for (size_t gi = 0; gi < groups.size(); ++gi)
    for (int bn : chooser_builder_nodes[gi]) rec.chooser_groups[gi].push_back(to_final[bn]);

  std::unordered_map<std::string, int> orig_key[2];
  for (size_t i = 0; i < g.infosets.size(); ++i)
    orig_key[g.infosets[i].player - 1][g.infosets[i].key] = static_cast<int>(i);
  rec.infoset_to_original.assign(rec.game.infosets.size(), -1);
  for (size_t i = 0; i < rec.game.infosets.size(); ++i) {
    const auto& I = rec.game.infosets[i];
    auto it = orig_key[I.player - 1].find(I.key);
    if (it != orig_key[I.player - 1].end()) rec.infoset_to_original[i] = it->second;
  }
  return rec;
}

// Chooser's utility at one of its gadget root information sets under a gadget
// profile: its own reach there is 1, so this is the counterfactual value.
inline double gadget_root_utility(const RecoveryGame& rec, const StrategyProfile& gadget_profile,
                                  int group) {
  double v = 0;
  for (int node : rec.chooser_groups[group])
    v += rec.game.chance_prob[node] *
         value_below(rec.game, gadget_profile, node, rec.chooser);
  return v;
}

// ---------------------------------------------------------------------------
// Solving the gadget and mapping the recovered strategy back.

struct StrategyFragment {
  int player = 0;
  std::vector<std::pair<int32_t, std::vector<double>>> entries;  // original infoset, probs
};

inline StrategyFragment extract_fragment(const RecoveryGame& rec,
                                         const StrategyProfile& gadget_avg) {
  StrategyFragment frag;
  frag.player = rec.recover_for;
  for (size_t i = 0; i < rec.game.infosets.size(); ++i) {
    const auto& I = rec.game.infosets[i];
    if (I.player != rec.recover_for || rec.infoset_to_original[i] < 0) continue;
    std::vector<double> probs(I.num_actions);
    for (int a = 0; a < I.num_actions; ++a) probs[a] = gadget_avg[I.action_offset + a];
    frag.entries.emplace_back(rec.infoset_to_original[i], std::move(probs));
  }
  return frag;
}

inline StrategyFragment resolve_subgame(const RecoveryGame& rec, long long iterations) {
  if (iterations < 1) throw ConfigError("resolve_subgame: iterations must be >= 1");
  SolveResult res = cfr_solve(rec.game, iterations);
  return extract_fragment(rec, res.average);
}

inline StrategyProfile stitch(const GameDefinition& g, const StrategyProfile& profile,
                              const SubgamePartition& part, int s,
                              const StrategyFragment& frag) {
  const Subgame& sub = part.subgames[s];
  size_t expected = 0;
  for (int id : sub.infosets)
    if (g.infosets[id].player == frag.player) ++expected;
  if (frag.entries.size() != expected)
    throw ValidationError("stitch: fragment covers " + std::to_string(frag.entries.size()) +
                          " information sets, subgame has " + std::to_string(expected));
  StrategyProfile out = profile;
  for (const auto& [id, probs] : frag.entries) {
    if (id < 0 || id >= static_cast<int>(g.infosets.size()) ||
        part.region[g.infosets[id].members.front()] != s ||
        g.infosets[id].player != frag.player)
      throw ValidationError("stitch: fragment key mismatch at infoset " + std::to_string(id));
    const auto& I = g.infosets[id];
    if (static_cast<int>(probs.size()) != I.num_actions)
      throw ValidationError("stitch: fragment action count mismatch at " + I.key);
    for (int a = 0; a < I.num_actions; ++a) out[I.action_offset + a] = probs[a];
  }
  return out;
}

}  // namespace cfrd
