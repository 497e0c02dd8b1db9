#pragma once

// Vectorized CFR over the public tree of a subgame. Histories that share the
// same public state are processed together, carrying per-hand reach ranges
// indexed by the root augmented sets. This only applies when the subgame has
// public chance events and utilities that factor through (public state, hand
// pair); make_range_solver returns nullptr otherwise and callers fall back to
// the scalar per-history solver, which is definitionally correct.

#include <cstring>
#include <map>
#include <memory>
#include <set>

#include "cfrd/cfrd.hpp"

namespace cfrd {

namespace range_detail {

constexpr int kMaxHands = 8;
constexpr int kMaxDecisionActions = 4;

struct Member {
  int32_t node;
  int16_t h1, h2;
};

struct Class {
  int8_t kind = 0;  // 0 decision, 1 chance, 2 leaf
  int8_t actor = 0;
  int16_t num_children = 0;
  int32_t child_base = 0;  // into child_ids
  int32_t live_base = 0;   // into live_hand / live_slot (decision classes)
  int32_t live_count = 0;
  int32_t mat_base = -1;  // into u1 / w1 / w2 storage (leaf classes)
  double pc = 1.0;        // within-subgame public chance product
};

struct Compiled {
  int h1_count = 0, h2_count = 0;
  std::vector<Class> classes;
  std::vector<int32_t> child_ids;
  std::vector<int16_t> live_hand;
  std::vector<int32_t> live_slot;
  std::vector<double> u1;  // per leaf class: h1_count * h2_count, 0 at blocked pairs
  std::vector<std::pair<int16_t, int16_t>> root_hands;  // per root, aligned with sub.roots
};

}  // namespace range_detail

class RangeSubgameSolver final : public SubgameSolver {
 public:
  RangeSubgameSolver(const GameDefinition& g, const SubgamePartition& part, int s)
      : g_(&g), sub_(&part.subgames[s]) {
    std::vector<char> in(g.infosets.size(), 0);
    for (int id : sub_->infosets) in[id] = 1;
    scope_ = subset_where(g, [&](int i) { return in[i] != 0; });
    ok_ = compile();
  }

  bool ok() const { return ok_; }

  SubgameSolveResult solve(const StrategyProfile& trunk_profile,
                           long long iterations) override {
    RootWeights w = root_weights(*g_, *sub_, trunk_profile);
    build_leaf_weights(w);

    AccumulatorTable table(*g_, scope_);
    const int h1n = c_.h1_count, h2n = c_.h2_count;
    double r1[range_detail::kMaxHands], r2[range_detail::kMaxHands];
    double v1[range_detail::kMaxHands], v2[range_detail::kMaxHands];
    for (int h = 0; h < h1n; ++h) r1[h] = 1.0;
    for (int h = 0; h < h2n; ++h) r2[h] = 1.0;

    // Each information set is touched by exactly one class visit, so regret
    // matching can run inline against start-of-iteration regrets; no snapshot
    // is needed to keep the simultaneous-update semantics.
    PassCtx ctx{table.regret.data(), table.strategy_sum.data()};
    for (long long t = 1; t <= iterations; ++t) pass(ctx, 0, r1, r2, v1, v2);
    last_average_ = table.average_strategy();
    return detail::subgame_solve_epilogue(*g_, *sub_, w, last_average_);
  }

  double measure_root_regret(const StrategyProfile& trunk_profile) override {
    RootWeights w = root_weights(*g_, *sub_, trunk_profile);
    return detail::measure_subgame_root_regret(*g_, *sub_, w, last_average_);
  }

 private:
  struct PassCtx {
    double* regret;
    double* strategy_sum;
  };

  void build_leaf_weights(const RootWeights& w) {
    const int h1n = c_.h1_count, h2n = c_.h2_count;
    std::vector<double> cf1(h1n * h2n, 0.0), cf2(h1n * h2n, 0.0);
    for (size_t i = 0; i < sub_->roots.size(); ++i) {
      auto [h1, h2] = c_.root_hands[i];
      cf1[h1 * h2n + h2] = w.mult1[i];
      cf2[h1 * h2n + h2] = w.mult2[i];
    }
    w1_.assign(c_.u1.size(), 0.0);
    w2_.assign(c_.u1.size(), 0.0);
    for (const auto& cl : c_.classes) {
      if (cl.kind != 2) continue;
      for (int h1 = 0; h1 < h1n; ++h1)
        for (int h2 = 0; h2 < h2n; ++h2) {
          int m = h1 * h2n + h2;
          double u = c_.u1[cl.mat_base + m];
          w1_[cl.mat_base + m] = u * cf1[m] * cl.pc;
          // transposed for the h2-major accumulation
          w2_[cl.mat_base + h2 * h1n + h1] = -u * cf2[m] * cl.pc;
        }
    }
  }

  void pass(const PassCtx& ctx, int ci, const double* r1, const double* r2, double* v1,
            double* v2) {
    using namespace range_detail;
    const Class& cl = c_.classes[ci];
    const int h1n = c_.h1_count, h2n = c_.h2_count;

    if (cl.kind == 2) {  // leaf
      const double* w1 = w1_.data() + cl.mat_base;
      const double* w2 = w2_.data() + cl.mat_base;
      for (int h1 = 0; h1 < h1n; ++h1) {
        double acc = 0;
        const double* row = w1 + h1 * h2n;
        for (int h2 = 0; h2 < h2n; ++h2) acc += row[h2] * r2[h2];
        v1[h1] = acc;
      }
      for (int h2 = 0; h2 < h2n; ++h2) {
        double acc = 0;
        const double* row = w2 + h2 * h1n;
        for (int h1 = 0; h1 < h1n; ++h1) acc += row[h1] * r1[h1];
        v2[h2] = acc;
      }
      return;
    }

    if (cl.kind == 1) {  // chance: probabilities are folded into leaf weights
      double cv1[kMaxHands], cv2[kMaxHands];
      std::memset(v1, 0, sizeof(double) * h1n);
      std::memset(v2, 0, sizeof(double) * h2n);
      for (int e = 0; e < cl.num_children; ++e) {
        pass(ctx, c_.child_ids[cl.child_base + e], r1, r2, cv1, cv2);
        for (int h = 0; h < h1n; ++h) v1[h] += cv1[h];
        for (int h = 0; h < h2n; ++h) v2[h] += cv2[h];
      }
      return;
    }

    const int n = cl.num_children;
    const int own_n = cl.actor == kP1 ? h1n : h2n;
    const int opp_n = cl.actor == kP1 ? h2n : h1n;
    const double* own_r = cl.actor == kP1 ? r1 : r2;
    double sigma[kMaxDecisionActions][kMaxHands];
    double child_own[kMaxHands];
    double vals[kMaxDecisionActions][kMaxHands];
    double opp_acc[kMaxHands];
    double own_v[kMaxHands];
    std::memset(opp_acc, 0, sizeof(double) * opp_n);
    std::memset(own_v, 0, sizeof(double) * own_n);

    for (int li = 0; li < cl.live_count; ++li) {
      int h = c_.live_hand[cl.live_base + li];
      const double* reg = ctx.regret + c_.live_slot[cl.live_base + li];
      double pos = 0;
      for (int a = 0; a < n; ++a) pos += reg[a] > 0 ? reg[a] : 0.0;
      if (pos > 0) {
        for (int a = 0; a < n; ++a) sigma[a][h] = reg[a] > 0 ? reg[a] / pos : 0.0;
      } else {
        for (int a = 0; a < n; ++a) sigma[a][h] = 1.0 / n;
      }
    }

    std::memset(child_own, 0, sizeof(double) * own_n);
    for (int a = 0; a < n; ++a) {
      for (int li = 0; li < cl.live_count; ++li) {
        int h = c_.live_hand[cl.live_base + li];
        child_own[h] = own_r[h] * sigma[a][h];
      }
      double cv1[kMaxHands], cv2[kMaxHands];
      if (cl.actor == kP1)
        pass(ctx, c_.child_ids[cl.child_base + a], child_own, r2, vals[a], cv2);
      else
        pass(ctx, c_.child_ids[cl.child_base + a], r1, child_own, cv1, vals[a]);
      const double* opp_vals = cl.actor == kP1 ? cv2 : cv1;
      for (int h = 0; h < opp_n; ++h) opp_acc[h] += opp_vals[h];
      for (int li = 0; li < cl.live_count; ++li) {
        int h = c_.live_hand[cl.live_base + li];
        own_v[h] += sigma[a][h] * vals[a][h];
      }
    }

    // vals are already in the acting player's perspective (w2 carries the
    // sign flip), so the update is the same for both players.
    for (int li = 0; li < cl.live_count; ++li) {
      int h = c_.live_hand[cl.live_base + li];
      double* reg = ctx.regret + c_.live_slot[cl.live_base + li];
      double* sum = ctx.strategy_sum + c_.live_slot[cl.live_base + li];
      double own_reach = own_r[h];
      for (int a = 0; a < n; ++a) {
        reg[a] += vals[a][h] - own_v[h];
        sum[a] += own_reach * sigma[a][h];
      }
    }

    double* own_out = cl.actor == kP1 ? v1 : v2;
    double* opp_out = cl.actor == kP1 ? v2 : v1;
    std::memcpy(own_out, own_v, sizeof(double) * own_n);
    std::memcpy(opp_out, opp_acc, sizeof(double) * opp_n);
  }

  bool compile() {
    using namespace range_detail;
    const GameDefinition& g = *g_;
    c_.h1_count = static_cast<int>(sub_->root_groups[0].size());
    c_.h2_count = static_cast<int>(sub_->root_groups[1].size());
    if (c_.h1_count > kMaxHands || c_.h2_count > kMaxHands) return false;

    std::unordered_map<int, std::pair<int16_t, int16_t>> hands_of_root;
    for (size_t gi = 0; gi < sub_->root_groups[0].size(); ++gi)
      for (int r : sub_->root_groups[0][gi].roots)
        hands_of_root[r].first = static_cast<int16_t>(gi);
    for (size_t gi = 0; gi < sub_->root_groups[1].size(); ++gi)
      for (int r : sub_->root_groups[1][gi].roots)
        hands_of_root[r].second = static_cast<int16_t>(gi);
    c_.root_hands.resize(sub_->roots.size());
    std::vector<Member> root_members;
    for (size_t i = 0; i < sub_->roots.size(); ++i) {
      auto [h1, h2] = hands_of_root[sub_->roots[i]];
      c_.root_hands[i] = {h1, h2};
      root_members.push_back({sub_->roots[i], h1, h2});
    }

    std::vector<std::vector<Member>> pending;
    pending.push_back(std::move(root_members));
    std::vector<double> pcs = {1.0};

    for (size_t ci = 0; ci < pending.size(); ++ci) {
      const std::vector<Member> members = std::move(pending[ci]);
      Class cl;
      cl.pc = pcs[ci];
      int8_t actor = g.actor[members.front().node];
      for (const auto& m : members)
        if (g.actor[m.node] != actor) return false;

      // (h1, h2) must identify the member.
      {
        std::set<std::pair<int16_t, int16_t>> seen;
        for (const auto& m : members)
          if (!seen.insert({m.h1, m.h2}).second) return false;
      }

      if (actor == kLeafActor) {
        cl.kind = 2;
        cl.mat_base = static_cast<int32_t>(c_.u1.size());
        c_.u1.resize(c_.u1.size() + c_.h1_count * c_.h2_count, 0.0);
        for (const auto& m : members)
          c_.u1[cl.mat_base + m.h1 * c_.h2_count + m.h2] = g.utility1[m.node];
        c_.classes.push_back(cl);
        continue;
      }

      if (actor == kChance) {
        cl.kind = 1;
        // Children keyed by edge name; probabilities must agree across members.
        std::map<std::string, std::pair<std::vector<Member>, double>> by_edge;
        for (const auto& m : members) {
          for (int a = 0; a < g.num_actions[m.node]; ++a) {
            int ch = g.child(m.node, a);
            auto& slot = by_edge[g.edge_name[ch]];
            if (!slot.first.empty() && slot.second != g.chance_prob[ch]) return false;
            slot.second = g.chance_prob[ch];
            slot.first.push_back({ch, m.h1, m.h2});
          }
        }
        cl.child_base = static_cast<int32_t>(c_.child_ids.size());
        cl.num_children = static_cast<int16_t>(by_edge.size());
        // Class ids equal pending indices: classes are emitted in pending order.
        for (auto& [edge, slot] : by_edge) {
          c_.child_ids.push_back(static_cast<int32_t>(pending.size()));
          pending.push_back(std::move(slot.first));
          pcs.push_back(cl.pc * slot.second);
        }
        c_.classes.push_back(cl);
        continue;
      }

      // Decision class.
      cl.kind = 0;
      cl.actor = actor;
      int n = g.num_actions[members.front().node];
      if (n > kMaxDecisionActions) return false;
      for (const auto& m : members) {
        if (g.num_actions[m.node] != n) return false;
        for (int a = 0; a < n; ++a)
          if (g.edge_name[g.child(m.node, a)] != g.edge_name[g.child(members.front().node, a)])
            return false;
      }
      // One information set per live hand of the actor.
      std::map<int16_t, int> infoset_of_hand;
      for (const auto& m : members) {
        int16_t h = actor == kP1 ? m.h1 : m.h2;
        auto [it, inserted] = infoset_of_hand.try_emplace(h, g.infoset[m.node]);
        if (!inserted && it->second != g.infoset[m.node]) return false;
      }
      cl.live_base = static_cast<int32_t>(c_.live_hand.size());
      cl.live_count = static_cast<int32_t>(infoset_of_hand.size());
      for (auto [h, infoset] : infoset_of_hand) {
        int slot = scope_.slot[infoset];
        if (slot < 0) return false;
        c_.live_hand.push_back(h);
        c_.live_slot.push_back(slot);
      }
      cl.num_children = static_cast<int16_t>(n);
      cl.child_base = static_cast<int32_t>(c_.child_ids.size());
      for (int a = 0; a < n; ++a) {
        std::vector<Member> child_members;
        child_members.reserve(members.size());
        for (const auto& m : members)
          child_members.push_back({g.child(m.node, a), m.h1, m.h2});
        c_.child_ids.push_back(static_cast<int32_t>(pending.size()));
        pending.push_back(std::move(child_members));
        pcs.push_back(cl.pc);
      }
      c_.classes.push_back(cl);
    }
    return true;
  }

  const GameDefinition* g_;
  const Subgame* sub_;
  InfosetSubset scope_;
  range_detail::Compiled c_;
  std::vector<double> w1_, w2_;
  StrategyProfile last_average_;
  bool ok_ = false;
};

inline std::unique_ptr<SubgameSolver> make_range_solver(const GameDefinition& g,
                                                        const SubgamePartition& part, int s) {
  auto solver = std::make_unique<RangeSubgameSolver>(g, part, s);
  if (!solver->ok()) return nullptr;
  return solver;
}

}  // namespace cfrd
