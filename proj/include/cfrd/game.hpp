#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "cfrd/util.hpp"

namespace cfrd {

// Players. Non-chance players are 1 and 2; utilities are stored per leaf for
// both so that zero-sum is a checkable property rather than a representation
// artifact.
constexpr int kChance = 0;
constexpr int kP1 = 1;
constexpr int kP2 = 2;
constexpr int kLeafActor = -1;

inline int other_player(int p) { return p == kP1 ? kP2 : kP1; }

struct InfosetDef {
  std::string key;                        // canonical key, no whitespace
  int player = 0;                         // kP1 or kP2
  int num_actions = 0;
  int action_offset = 0;                  // into the global action space
  int own_level = 0;                      // number of own prior (infoset, action) pairs
  std::string obs_prefix;                 // owner's observation sequence before acting
  std::vector<std::string> action_names;  // from the first member added
  std::vector<int32_t> members;           // node ids, preorder
};

// Augmented information set for one player: partitions every non-leaf history
// by that player's observation sequence. On the player's own turn this
// coincides with the standard information set.
struct AugSetDef {
  std::string key;
  std::vector<int32_t> members;
  int infoset = -1;  // standard infoset id when the player acts here, else -1
};

struct Diagnostics {
  bool ok = true;
  std::string message;
};

// Immutable extensive-form game tree in preorder: a node's descendants are the
// contiguous range [n, n + subtree_size[n]). Children are indexed through
// child_list since preorder keeps subtrees, not siblings, contiguous.
struct GameDefinition {
  std::string name;

  std::vector<int8_t> actor;            // kChance / kP1 / kP2 / kLeafActor
  std::vector<int32_t> child_base;      // offset into child_list
  std::vector<int32_t> child_list;
  std::vector<int16_t> num_actions;     // 0 at leaves
  std::vector<int32_t> parent;          // -1 at root
  std::vector<int16_t> action_index;    // index of this node among parent's children
  std::vector<int32_t> subtree_size;
  std::vector<int32_t> infoset;         // -1 for chance/leaf
  std::vector<double> chance_prob;      // edge prob when parent is chance, else 1
  std::vector<double> utility1;         // leaf payoff to p1 (chips)
  std::vector<double> utility2;         // leaf payoff to p2
  std::vector<std::string> edge_name;   // action label of the edge from parent

  std::vector<InfosetDef> infosets;
  int total_actions = 0;

  // aug_id[p-1][node] indexes aug_sets[p-1]; defined for all non-leaf nodes.
  std::array<std::vector<int32_t>, 2> aug_id;
  std::array<std::vector<AugSetDef>, 2> aug_sets;

  int num_nodes() const { return static_cast<int>(actor.size()); }
  bool is_leaf(int n) const { return actor[n] == kLeafActor; }
  int child(int n, int a) const { return child_list[child_base[n] + a]; }
  double utility(int n, int p) const { return p == kP1 ? utility1[n] : utility2[n]; }

  const std::string& infoset_key(int node) const { return infosets[infoset[node]].key; }

  // Standard-or-augmented key for (history, player), per the grouped-subgame
  // construction: own turn gives the standard key.
  const std::string& augmented_key(int node, int p) const {
    return aug_sets[p - 1][aug_id[p - 1][node]].key;
  }
  int augmented_id(int node, int p) const { return aug_id[p - 1][node]; }

  std::string history_string(int node) const {
    std::vector<const std::string*> parts;
    for (int n = node; parent[n] >= 0; n = parent[n]) parts.push_back(&edge_name[n]);
    std::string out;
    for (auto it = parts.rbegin(); it != parts.rend(); ++it) {
      if (!out.empty()) out += ' ';
      out += **it;
    }
    return out.empty() ? "(root)" : out;
  }
};

// ---------------------------------------------------------------------------
// Builder

class GameBuilder {
 public:
  explicit GameBuilder(std::string game_name) : name_(std::move(game_name)) {
    nodes_.push_back({});  // root
  }

  int root() const { return 0; }

  int add_child(int parent, std::string action, double chance_prob = 1.0) {
    int id = static_cast<int>(nodes_.size());
    nodes_.push_back({});
    nodes_[id].parent = parent;
    nodes_[id].edge = std::move(action);
    nodes_[id].chance_prob = chance_prob;
    nodes_[parent].children.push_back(id);
    return id;
  }

  void set_chance(int node) { nodes_[node].kind = Kind::chance; }

  void set_decision(int node, int player, std::string infoset_key) {
    nodes_[node].kind = Kind::decision;
    nodes_[node].player = player;
    nodes_[node].key = std::move(infoset_key);
  }

  void set_leaf(int node, double u1, double u2) {
    nodes_[node].kind = Kind::leaf;
    nodes_[node].u1 = u1;
    nodes_[node].u2 = u2;
  }

  void set_leaf(int node, double u1) { set_leaf(node, u1, -u1); }

  // `builder_to_final`, when given, receives the builder-id to final-id map.
  GameDefinition finalize(std::vector<int>* builder_to_final = nullptr) const;

 private:
  enum class Kind { unset, chance, decision, leaf };
  struct Raw {
    Kind kind = Kind::unset;
    int parent = -1;
    int player = 0;
    double chance_prob = 1.0;
    double u1 = 0, u2 = 0;
    std::string edge;
    std::string key;
    std::vector<int> children;
  };
  std::string name_;
  std::vector<Raw> nodes_;
};

inline GameDefinition GameBuilder::finalize(std::vector<int>* builder_to_final) const {
  GameDefinition g;
  g.name = name_;
  int n = static_cast<int>(nodes_.size());

  // Preorder renumbering so descendants form contiguous ranges.
  std::vector<int> order, new_id(n, -1);
  order.reserve(n);
  {
    std::vector<int> stack = {0};
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      new_id[u] = static_cast<int>(order.size());
      order.push_back(u);
      const auto& ch = nodes_[u].children;
      for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back(*it);
    }
  }
  if (static_cast<int>(order.size()) != n)
    throw ValidationError(name_ + ": unreachable nodes in builder");
  if (builder_to_final) *builder_to_final = new_id;

  g.actor.resize(n);
  g.child_base.assign(n, 0);
  g.num_actions.resize(n);
  g.parent.resize(n);
  g.action_index.resize(n);
  g.subtree_size.assign(n, 1);
  g.infoset.assign(n, -1);
  g.chance_prob.resize(n);
  g.utility1.assign(n, 0.0);
  g.utility2.assign(n, 0.0);
  g.edge_name.resize(n);
  g.child_list.reserve(n - 1);

  std::unordered_map<std::string, int> infoset_of_key[3];

  for (int i = 0; i < n; ++i) {
    const Raw& r = nodes_[order[i]];
    if (r.kind == Kind::unset)
      throw ValidationError(name_ + ": node left untyped in builder");
    if (r.kind != Kind::leaf && r.children.empty())
      throw ValidationError(name_ + ": interior node has no children");
    if (r.kind == Kind::leaf && !r.children.empty())
      throw ValidationError(name_ + ": leaf node has children");

    g.actor[i] = r.kind == Kind::leaf     ? kLeafActor
                 : r.kind == Kind::chance ? kChance
                                          : static_cast<int8_t>(r.player);
    g.parent[i] = r.parent < 0 ? -1 : new_id[r.parent];
    g.edge_name[i] = r.edge;
    g.chance_prob[i] = r.chance_prob;
    g.num_actions[i] = static_cast<int16_t>(r.children.size());
    g.utility1[i] = r.u1;
    g.utility2[i] = r.u2;
    g.child_base[i] = static_cast<int>(g.child_list.size());
    for (size_t a = 0; a < r.children.size(); ++a) {
      g.child_list.push_back(new_id[r.children[a]]);
      g.action_index[new_id[r.children[a]]] = static_cast<int16_t>(a);
    }

    if (r.kind == Kind::decision) {
      if (r.player != kP1 && r.player != kP2)
        throw ValidationError(name_ + ": decision node with bad player");
      auto& m = infoset_of_key[r.player];
      auto it = m.find(r.key);
      int id;
      if (it == m.end()) {
        id = static_cast<int>(g.infosets.size());
        m.emplace(r.key, id);
        InfosetDef def;
        def.key = r.key;
        def.player = r.player;
        def.num_actions = static_cast<int>(r.children.size());
        for (int c : r.children) def.action_names.push_back(nodes_[c].edge);
        g.infosets.push_back(std::move(def));
      } else {
        id = it->second;
      }
      g.infoset[i] = id;
      g.infosets[id].members.push_back(i);
    }
  }

  for (int i = n - 1; i > 0; --i) g.subtree_size[g.parent[i]] += g.subtree_size[i];

  g.total_actions = 0;
  for (auto& I : g.infosets) {
    I.action_offset = g.total_actions;
    g.total_actions += I.num_actions;
  }

  // Observation sequences: obs[p][node] is the string of "<infoset>:<action>"
  // segments for player p's own moves strictly before the node.
  std::array<std::vector<std::string>, 2> obs;
  obs[0].resize(n);
  obs[1].resize(n);
  for (int i = 1; i < n; ++i) {
    int par = g.parent[i];
    for (int p = kP1; p <= kP2; ++p) {
      if (g.actor[par] == p) {
        std::string seg = g.infosets[g.infoset[par]].key + ":" + g.edge_name[i];
        obs[p - 1][i] = obs[p - 1][par].empty() ? seg : obs[p - 1][par] + "|" + seg;
      } else {
        obs[p - 1][i] = obs[p - 1][par];
      }
    }
  }

  for (auto& I : g.infosets) {
    I.obs_prefix = obs[I.player - 1][I.members.front()];
    I.own_level = static_cast<int>(std::count(I.obs_prefix.begin(), I.obs_prefix.end(), '|')) +
                  (I.obs_prefix.empty() ? 0 : 1);
  }

  for (int p = kP1; p <= kP2; ++p) {
    auto& ids = g.aug_id[p - 1];
    auto& sets = g.aug_sets[p - 1];
    ids.assign(n, -1);
    std::unordered_map<std::string, int> intern;
    for (int i = 0; i < n; ++i) {
      if (g.is_leaf(i)) continue;
      const std::string& key = g.actor[i] == p ? g.infosets[g.infoset[i]].key : obs[p - 1][i];
      auto it = intern.find(key);
      int id;
      if (it == intern.end()) {
        id = static_cast<int>(sets.size());
        intern.emplace(key, id);
        sets.push_back({key, {}, g.actor[i] == p ? g.infoset[i] : -1});
      } else {
        id = it->second;
      }
      ids[i] = id;
      sets[id].members.push_back(i);
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Strategy profiles

// Dense action probabilities for both players, indexed by infoset
// action_offset. Keys appear only at the file-format boundary.
using StrategyProfile = std::vector<double>;

inline StrategyProfile uniform_profile(const GameDefinition& g) {
  StrategyProfile s(g.total_actions);
  for (const auto& I : g.infosets)
    for (int a = 0; a < I.num_actions; ++a) s[I.action_offset + a] = 1.0 / I.num_actions;
  return s;
}

inline std::span<const double> actions_of(const GameDefinition& g, const StrategyProfile& s,
                                          int infoset) {
  const auto& I = g.infosets[infoset];
  return {s.data() + I.action_offset, static_cast<size_t>(I.num_actions)};
}

inline bool is_valid_profile(const GameDefinition& g, const StrategyProfile& s,
                             double tol = 1e-9) {
  if (s.size() != static_cast<size_t>(g.total_actions)) return false;
  for (const auto& I : g.infosets) {
    double sum = 0;
    for (int a = 0; a < I.num_actions; ++a) {
      double v = s[I.action_offset + a];
      if (v < -tol || !std::isfinite(v)) return false;
      sum += v;
    }
    if (std::fabs(sum - 1.0) > tol) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Reach probabilities and expected value

struct ReachProbabilities {
  double pi1 = 1, pi2 = 1, pic = 1;
  double joint() const { return pi1 * pi2 * pic; }
  double excluding(int p) const { return (p == kP1 ? pi2 : pi1) * pic; }
  double own(int p) const { return p == kP1 ? pi1 : pi2; }
};

inline ReachProbabilities reach(const GameDefinition& g, const StrategyProfile& s, int node) {
  ReachProbabilities r;
  for (int v = node; g.parent[v] >= 0; v = g.parent[v]) {
    int par = g.parent[v];
    switch (g.actor[par]) {
      case kChance: r.pic *= g.chance_prob[v]; break;
      case kP1: r.pi1 *= s[g.infosets[g.infoset[par]].action_offset + g.action_index[v]]; break;
      case kP2: r.pi2 *= s[g.infosets[g.infoset[par]].action_offset + g.action_index[v]]; break;
      default: throw ValidationError("leaf with a child");
    }
  }
  return r;
}

namespace detail {
inline double value_below_rec(const GameDefinition& g, const StrategyProfile& s, int node,
                              int p) {
  if (g.is_leaf(node)) return g.utility(node, p);
  double v = 0;
  for (int a = 0; a < g.num_actions[node]; ++a) {
    int c = g.child(node, a);
    double w = g.actor[node] == kChance ? g.chance_prob[c]
                                        : s[g.infosets[g.infoset[node]].action_offset + a];
    if (w != 0) v += w * value_below_rec(g, s, c, p);
  }
  return v;
}
}  // namespace detail

// Expected utility to player p of the subtree under `node`, treating its
// reach as 1.
inline double value_below(const GameDefinition& g, const StrategyProfile& s, int node,
                          int p = kP1) {
  return detail::value_below_rec(g, s, node, p);
}

// Exact expected utility per player; the second component is independent of
// the zero-sum assumption.
inline std::array<double, 2> expected_value(const GameDefinition& g, const StrategyProfile& s) {
  std::array<double, 2> out = {0, 0};
  std::vector<double> joint(g.num_nodes(), 0.0);
  joint[0] = 1.0;
  for (int i = 0; i < g.num_nodes(); ++i) {
    if (joint[i] == 0) continue;
    if (g.is_leaf(i)) {
      out[0] += joint[i] * g.utility1[i];
      out[1] += joint[i] * g.utility2[i];
      continue;
    }
    for (int a = 0; a < g.num_actions[i]; ++a) {
      int c = g.child(i, a);
      double w = g.actor[i] == kChance ? g.chance_prob[c]
                                       : s[g.infosets[g.infoset[i]].action_offset + a];
      joint[c] = joint[i] * w;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Structural validation: zero-sum leaves, chance distributions, perfect recall.

inline Diagnostics validate(const GameDefinition& g) {
  for (int i = 0; i < g.num_nodes(); ++i) {
    if (g.is_leaf(i)) {
      if (std::fabs(g.utility1[i] + g.utility2[i]) > 1e-9)
        return {false, "zero-sum violation at leaf " + g.history_string(i) + ": u1+u2=" +
                           format_double(g.utility1[i] + g.utility2[i])};
      continue;
    }
    if (g.actor[i] == kChance) {
      double sum = 0;
      for (int a = 0; a < g.num_actions[i]; ++a) sum += g.chance_prob[g.child(i, a)];
      if (std::fabs(sum - 1.0) > 1e-9)
        return {false, "chance probabilities sum to " + format_double(sum) + " at " +
                           g.history_string(i)};
    } else {
      const auto& I = g.infosets[g.infoset[i]];
      if (I.num_actions != g.num_actions[i])
        return {false, "information set " + I.key + " has inconsistent action counts"};
      for (int a = 0; a < I.num_actions; ++a)
        if (g.edge_name[g.child(i, a)] != I.action_names[a])
          return {false, "information set " + I.key + " has inconsistent action names"};
    }
  }
  // Perfect recall: members of an information set share the owner's
  // observation sequence (their augmented key prefix by construction).
  for (const auto& I : g.infosets) {
    const int p = I.player;
    auto own_seq = [&](int node) {
      std::vector<std::pair<int, int>> seq;
      for (int v = node; g.parent[v] >= 0; v = g.parent[v]) {
        int par = g.parent[v];
        if (g.actor[par] == p) seq.emplace_back(g.infoset[par], g.action_index[v]);
      }
      std::reverse(seq.begin(), seq.end());
      return seq;
    };
    auto ref = own_seq(I.members.front());
    for (size_t m = 1; m < I.members.size(); ++m) {
      if (own_seq(I.members[m]) != ref)
        return {false, "perfect recall violation in " + I.key + ": histories '" +
                           g.history_string(I.members.front()) + "' and '" +
                           g.history_string(I.members[m]) +
                           "' disagree on the owner's past actions"};
    }
  }
  return {true, ""};
}

}  // namespace cfrd
