#include <random>
#include <set>

#include "cfrd/decomposition.hpp"
#include "cfrd/games.hpp"
#include "doctest.h"
#include "support/oracle.hpp"

using namespace cfrd;

namespace {

int depth_of(const GameDefinition& g, int n) {
  int d = 0;
  for (int v = n; g.parent[v] >= 0; v = g.parent[v]) ++d;
  return d;
}

void check_partition_invariants(const GameDefinition& g, const SubgamePartition& part) {
  // Trunk and subgames are disjoint and cover all histories.
  for (int n = 0; n < g.num_nodes(); ++n) {
    int r = part.region[n];
    REQUIRE(r >= -1);
    REQUIRE(r < static_cast<int>(part.subgames.size()));
    if (r >= 0) {
      // Every descendant of a subgame node is in that subgame.
      for (int a = 0; a < g.num_actions[n]; ++a) CHECK(part.region[g.child(n, a)] == r);
    }
  }
  // Standard information sets never span regions.
  for (const auto& I : g.infosets) {
    int r = part.region[I.members.front()];
    for (int m : I.members) CHECK(part.region[m] == r);
  }
  // Roots are grouped-closed: sharing an augmented set forces one subgame.
  for (size_t s = 0; s < part.subgames.size(); ++s) {
    for (int p : {kP1, kP2}) {
      for (const auto& grp : part.subgames[s].root_groups[p - 1]) {
        for (int other_s = 0; other_s < static_cast<int>(part.subgames.size()); ++other_s) {
          if (other_s == static_cast<int>(s)) continue;
          for (const auto& og : part.subgames[other_s].root_groups[p - 1])
            CHECK(og.aug_id != grp.aug_id);
        }
      }
    }
  }
}

}  // namespace

TEST_CASE("rps partitions into a trunk and one subgame") {
  GameDefinition g = build_rps();
  SubgamePartition part = partition_game(g, make_frontier(g, "main"));
  CHECK(part.subgames.size() == 1);
  CHECK(part.region[0] == -1);
  CHECK(part.subgames[0].roots.size() == 3);
  CHECK(part.trunk_infosets.size() == 1);
  // One p2 root set {R,P,S}; three singleton p1 sets.
  CHECK(part.subgames[0].root_groups[0].size() == 3);
  CHECK(part.subgames[0].root_groups[1].size() == 1);
  check_partition_invariants(g, part);
}

TEST_CASE("leduc splits into five subgames at the end of round one") {
  GameDefinition g = build_leduc();
  SubgamePartition part = partition_game(g, make_frontier(g, "round2"));
  CHECK(part.subgames.size() == 5);
  for (const auto& s : part.subgames) {
    CHECK(s.roots.size() == 30);
    CHECK(s.root_groups[0].size() == 6);
    CHECK(s.root_groups[1].size() == 6);
    for (const auto& grp : s.root_groups[0]) CHECK(grp.roots.size() == 5);
  }
  CHECK(part.trunk_infosets.size() == 36);
  check_partition_invariants(g, part);

  // Root information sets total 60: one value per hand, per player, per
  // subgame, which is exactly what the cfv file stores.
  CHECK(part.root_infoset_count() == 60);
}

TEST_CASE("kuhn splits into two subgames after the first action") {
  GameDefinition g = build_kuhn();
  SubgamePartition part = partition_game(g, make_frontier(g, "after-first"));
  CHECK(part.subgames.size() == 2);
  for (const auto& s : part.subgames) {
    CHECK(s.roots.size() == 6);
    CHECK(s.root_groups[0].size() == 3);
    CHECK(s.root_groups[1].size() == 3);
  }
  check_partition_invariants(g, part);
}

TEST_CASE("partition invariants hold over random depth frontiers") {
  std::mt19937 rng(4242);
  for (const char* name : {"kuhn", "leduc"}) {
    GameDefinition g = build_game(name);
    int max_depth = 0;
    for (int n = 0; n < g.num_nodes(); ++n) max_depth = std::max(max_depth, depth_of(g, n));
    std::vector<int> depth(g.num_nodes());
    for (int n = 0; n < g.num_nodes(); ++n) depth[n] = depth_of(g, n);

    for (int trial = 0; trial < 12; ++trial) {
      int d = 1 + static_cast<int>(rng() % max_depth);
      auto frontier = [&, d](const GameDefinition&, int n) {
        return depth[n] == d && !g.is_leaf(n);
      };
      bool any = false;
      for (int n = 0; n < g.num_nodes(); ++n) any |= frontier(g, n);
      if (!any) continue;
      SubgamePartition part = partition_game(g, frontier);
      check_partition_invariants(g, part);
    }
  }
}

TEST_CASE("partition errors") {
  GameDefinition g = build_kuhn();
  // A frontier containing ancestor pairs violates the precondition.
  auto bad = [](const GameDefinition& gd, int n) {
    return n != 0 && !gd.is_leaf(n) && depth_of(gd, n) <= 2;
  };
  CHECK_THROWS_AS(partition_game(g, bad), PartitionError);

  // A frontier that cuts through an information set is reported.
  GameDefinition leduc = build_leduc();
  auto inconsistent = [](const GameDefinition& gd, int n) {
    // Public-card nodes, but only below the very first deal branch.
    return gd.actor[n] == kChance && gd.parent[n] >= 0 &&
           (gd.actor[gd.parent[n]] == kP1 || gd.actor[gd.parent[n]] == kP2) &&
           gd.history_string(n).substr(0, 2) == "Js";
  };
  CHECK_THROWS_AS(partition_game(leduc, inconsistent), PartitionError);
}

TEST_CASE("recovery game construction on rps") {
  GameDefinition g = build_rps();
  SubgamePartition part = partition_game(g, make_frontier(g, "main"));
  StrategyProfile uni = uniform_profile(g);

  // Recovering player one, exactly as in the construction: the chooser is
  // player two with a single root set and counterfactual value zero.
  std::vector<double> cfvs = {0.0};
  RecoveryGame rec = build_recovery_game(g, part, 0, uni, kP1, cfvs);
  CHECK(rec.k == doctest::Approx(1.0));
  CHECK(validate(rec.game).ok);
  int root_children = rec.game.num_actions[0];
  CHECK(root_children == 3);
  for (int a = 0; a < root_children; ++a)
    CHECK(rec.game.chance_prob[rec.game.child(0, a)] == doctest::Approx(1.0 / 3));
  for (int n = 0; n < rec.game.num_nodes(); ++n)
    if (rec.game.is_leaf(n) && rec.game.edge_name[n] == "T")
      CHECK(rec.game.utility(n, rec.chooser) == doctest::Approx(0.0));

  // Every copied leaf carries k times the original utility.
  for (int n = 0; n < rec.game.num_nodes(); ++n) {
    if (!rec.game.is_leaf(n) || rec.to_original[n] < 0) continue;
    CHECK(rec.game.utility1[n] ==
          doctest::Approx(rec.k * g.utility1[rec.to_original[n]]));
  }

  // The F-subtrees are structurally isomorphic to the original subgame.
  int copied = 0;
  std::set<int> originals;
  for (int n = 0; n < rec.game.num_nodes(); ++n)
    if (rec.to_original[n] >= 0) {
      ++copied;
      originals.insert(rec.to_original[n]);
      int orig = rec.to_original[n];
      CHECK(rec.game.actor[n] == g.actor[orig]);
      CHECK(rec.game.num_actions[n] == g.num_actions[orig]);
    }
  int subgame_nodes = 0;
  for (int n = 0; n < g.num_nodes(); ++n)
    if (part.region[n] == 0) ++subgame_nodes;
  CHECK(copied == subgame_nodes);
  CHECK(static_cast<int>(originals.size()) == subgame_nodes);
}

TEST_CASE("t-values aggregate to the supplied counterfactual values") {
  GameDefinition g = build_leduc();
  SubgamePartition part = partition_game(g, make_frontier(g, "round2"));
  std::mt19937 rng(17);
  StrategyProfile s = oracle::random_profile(g, rng);
  std::uniform_real_distribution<double> u(-3.0, 3.0);

  for (int p : {kP1, kP2}) {
    int chooser = other_player(p);
    const auto& groups = part.subgames[2].root_groups[chooser - 1];
    std::vector<double> cfvs(groups.size());
    for (auto& v : cfvs) v = u(rng);
    RecoveryGame rec = build_recovery_game(g, part, 2, s, p, cfvs);
    CHECK(validate(rec.game).ok);

    // Force T everywhere: each chooser root set is worth exactly its cfv.
    StrategyProfile always_t = uniform_profile(rec.game);
    for (size_t i = 0; i < rec.game.infosets.size(); ++i) {
      const auto& I = rec.game.infosets[i];
      if (I.player != chooser || rec.infoset_to_original[i] >= 0) continue;
      REQUIRE(I.num_actions == 2);
      REQUIRE(I.action_names[1] == "T");
      always_t[I.action_offset] = 0.0;
      always_t[I.action_offset + 1] = 1.0;
    }
    for (size_t gi = 0; gi < groups.size(); ++gi)
      CHECK(gadget_root_utility(rec, always_t, static_cast<int>(gi)) ==
            doctest::Approx(cfvs[gi]).epsilon(1e-12));
  }
}

TEST_CASE("unreachable subgames and unreachable chooser sets") {
  GameDefinition g = build_kuhn();
  SubgamePartition part = partition_game(g, make_frontier(g, "after-first"));
  // p1 always checks: the bet subgame has k = 0 when recovering p1.
  StrategyProfile s = uniform_profile(g);
  for (const auto& I : g.infosets) {
    if (I.player != kP1 || I.own_level != 0) continue;
    s[I.action_offset] = 1.0;      // k
    s[I.action_offset + 1] = 0.0;  // b
  }
  int bet_subgame = -1;
  for (size_t i = 0; i < part.subgames.size(); ++i)
    if (g.edge_name[part.subgames[i].roots.front()] == "b")
      bet_subgame = static_cast<int>(i);
  REQUIRE(bet_subgame >= 0);
  std::vector<double> cfvs(part.subgames[bet_subgame].root_groups[kP2 - 1].size(), 0.0);
  CHECK_THROWS_AS(build_recovery_game(g, part, bet_subgame, s, kP1, cfvs),
                  UnreachableSubgameError);

  // Leduc: p1 reaches "k k" only holding Js, so the chooser set where p2
  // holds Js is opponent-unreachable while k > 0; its T value is defined as 0.
  GameDefinition leduc = build_leduc();
  SubgamePartition lpart = partition_game(leduc, make_frontier(leduc, "round2"));
  StrategyProfile ls = uniform_profile(leduc);
  for (const auto& I : leduc.infosets) {
    if (I.player != kP1 || I.own_level != 0 || I.key.find('/') != std::string::npos) continue;
    bool holds_js = I.key.substr(0, 2) == "Js";
    ls[I.action_offset] = holds_js ? 1.0 : 0.0;      // k
    ls[I.action_offset + 1] = holds_js ? 0.0 : 1.0;  // b
  }
  int kk = -1;
  for (size_t i = 0; i < lpart.subgames.size(); ++i) {
    int r = lpart.subgames[i].roots.front();
    std::string h = leduc.history_string(r);
    if (h.substr(h.size() - 3) == "k k") kk = static_cast<int>(i);
  }
  REQUIRE(kk >= 0);
  const auto& groups = lpart.subgames[kk].root_groups[kP2 - 1];
  std::vector<double> lcfvs(groups.size(), 7.0);  // sentinel
  RecoveryGame rec = build_recovery_game(leduc, lpart, kk, ls, kP1, lcfvs);
  StrategyProfile always_t = uniform_profile(rec.game);
  for (size_t i = 0; i < rec.game.infosets.size(); ++i) {
    const auto& I = rec.game.infosets[i];
    if (I.player == kP2 && rec.infoset_to_original[i] < 0) {
      always_t[I.action_offset] = 0.0;
      always_t[I.action_offset + 1] = 1.0;
    }
  }
  int js_group = -1;
  for (size_t gi = 0; gi < groups.size(); ++gi)
    if (groups[gi].key.find("Js") != std::string::npos) js_group = static_cast<int>(gi);
  REQUIRE(js_group >= 0);
  for (size_t gi = 0; gi < groups.size(); ++gi) {
    double got = gadget_root_utility(rec, always_t, static_cast<int>(gi));
    if (static_cast<int>(gi) == js_group)
      CHECK(got == doctest::Approx(0.0));  // zero weight and zero T value
    else
      CHECK(got == doctest::Approx(7.0).epsilon(1e-9));
  }
}

TEST_CASE("rps recovery reproduces the uniform subgame strategy") {
  GameDefinition g = build_rps();
  SubgamePartition part = partition_game(g, make_frontier(g, "main"));
  StrategyProfile uni = uniform_profile(g);

  // Recover player two's strategy from the equilibrium trunk and zero cfvs.
  const auto& p1_groups = part.subgames[0].root_groups[0];
  std::vector<double> cfvs(p1_groups.size(), 0.0);
  RecoveryGame rec = build_recovery_game(g, part, 0, uni, kP2, cfvs);
  CHECK(rec.k == doctest::Approx(3.0));
  StrategyFragment frag = resolve_subgame(rec, 10000);
  REQUIRE(frag.entries.size() == 1);
  for (double prob : frag.entries.front().second)
    CHECK(prob == doctest::Approx(1.0 / 3).epsilon(1e-2));

  StrategyProfile stitched = stitch(g, uni, part, 0, frag);
  CHECK(is_valid_profile(g, stitched));
  CHECK(exploitability(g, stitched) < 1e-2);
}

TEST_CASE("stitch is the identity on the original fragment") {
  GameDefinition g = build_kuhn();
  SubgamePartition part = partition_game(g, make_frontier(g, "after-first"));
  std::mt19937 rng(5);
  StrategyProfile s = oracle::random_profile(g, rng);

  for (int sub = 0; sub < 2; ++sub) {
    for (int p : {kP1, kP2}) {
      StrategyFragment frag;
      frag.player = p;
      for (int id : part.subgames[sub].infosets) {
        if (g.infosets[id].player != p) continue;
        const auto& I = g.infosets[id];
        std::vector<double> probs(I.num_actions);
        for (int a = 0; a < I.num_actions; ++a) probs[a] = s[I.action_offset + a];
        frag.entries.emplace_back(id, std::move(probs));
      }
      StrategyProfile out = stitch(g, s, part, sub, frag);
      CHECK(out == s);
    }
  }
}

TEST_CASE("stitched profiles change value only through subgame leaves") {
  GameDefinition g = build_rps();
  SubgamePartition part = partition_game(g, make_frontier(g, "main"));
  std::mt19937 rng(31);
  StrategyProfile base = oracle::random_profile(g, rng);
  StrategyProfile other = oracle::random_profile(g, rng);

  StrategyFragment frag;
  frag.player = kP2;
  for (int id : part.subgames[0].infosets) {
    if (g.infosets[id].player != kP2) continue;
    const auto& I = g.infosets[id];
    std::vector<double> probs(I.num_actions);
    for (int a = 0; a < I.num_actions; ++a) probs[a] = other[I.action_offset + a];
    frag.entries.emplace_back(id, std::move(probs));
  }
  StrategyProfile stitched = stitch(g, base, part, 0, frag);
  CHECK(is_valid_profile(g, stitched));

  double diff = oracle::leaf_sum_value(g, stitched)[0] - oracle::leaf_sum_value(g, base)[0];
  double leaf_diff = 0;
  for (int z = 0; z < g.num_nodes(); ++z) {
    if (!g.is_leaf(z) || part.region[z] < 0) continue;
    leaf_diff +=
        (oracle::joint_reach(g, stitched, z) - oracle::joint_reach(g, base, z)) * g.utility1[z];
  }
  CHECK(diff == doctest::Approx(leaf_diff).epsilon(1e-12));

  // Fragment key mismatch is rejected.
  StrategyFragment bad = frag;
  bad.entries.front().first = part.trunk_infosets.front();
  CHECK_THROWS_AS(stitch(g, base, part, 0, bad), ValidationError);
}

TEST_CASE("cfv files round-trip through partition groups") {
  GameDefinition g = build_leduc();
  SubgamePartition part = partition_game(g, make_frontier(g, "round2"));
  StrategyProfile s = solve_refined(g, 200);
  std::vector<RootCfvs> all;
  for (size_t i = 0; i < part.subgames.size(); ++i)
    all.push_back(root_cfvs(g, part, static_cast<int>(i), s));

  auto lines = cfvs_to_lines(part, all);
  CHECK(lines.size() == 60);
  auto text = cfvs_to_string(lines);
  auto parsed = cfvs_from_lines(part, cfvs_from_string(text));
  for (size_t i = 0; i < all.size(); ++i)
    for (int p = 0; p < 2; ++p)
      for (size_t k = 0; k < all[i].value[p].size(); ++k)
        CHECK(parsed[i].value[p][k] == all[i].value[p][k]);  // exact round-trip
}
