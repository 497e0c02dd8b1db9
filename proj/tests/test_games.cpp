#include <random>
#include <set>

#include "cfrd/games.hpp"
#include "doctest.h"
#include "support/oracle.hpp"

using namespace cfrd;

TEST_CASE("leduc has the canonical structure") {
  GameDefinition g = build_leduc();
  CHECK(g.infosets.size() == 936);
  int per_player[2] = {0, 0};
  for (const auto& I : g.infosets) per_player[I.player - 1]++;
  CHECK(per_player[0] == 468);
  CHECK(per_player[1] == 468);
  CHECK(validate(g).ok);

  // 6 cards, ante 1, bets 2 then 4: the largest pot loss is 1 + 4 + 8.
  double max_u = 0;
  for (int z = 0; z < g.num_nodes(); ++z)
    if (g.is_leaf(z)) max_u = std::max(max_u, std::fabs(g.utility1[z]));
  CHECK(max_u == doctest::Approx(13.0));
}

TEST_CASE("rps matches the sequential-form figure") {
  GameDefinition g = build_rps();
  CHECK(validate(g).ok);
  int p2_sets = 0;
  for (const auto& I : g.infosets)
    if (I.player == kP2) {
      ++p2_sets;
      CHECK(I.members.size() == 3);
    }
  CHECK(p2_sets == 1);
}

TEST_CASE("kuhn has six information sets per player") {
  GameDefinition g = build_kuhn();
  CHECK(validate(g).ok);
  int per_player[2] = {0, 0};
  for (const auto& I : g.infosets) per_player[I.player - 1]++;
  CHECK(per_player[0] == 6);
  CHECK(per_player[1] == 6);
}

TEST_CASE("augmented information sets") {
  GameDefinition rps = build_rps();
  // The three player-one augmented sets below the root are singletons {R}, {P}, {S}.
  std::set<std::string> keys;
  for (int n = 0; n < rps.num_nodes(); ++n) {
    if (rps.parent[n] == 0 && !rps.is_leaf(n)) {
      int id = rps.augmented_id(n, kP1);
      CHECK(rps.aug_sets[0][id].members.size() == 1);
      keys.insert(rps.augmented_key(n, kP1));
    }
  }
  CHECK(keys.size() == 3);

  // On the actor's own turn the augmented key is the standard key.
  GameDefinition kuhn = build_kuhn();
  for (int n = 0; n < kuhn.num_nodes(); ++n) {
    if (kuhn.is_leaf(n) || kuhn.actor[n] == kChance) continue;
    int p = kuhn.actor[n];
    CHECK(kuhn.augmented_key(n, p) == kuhn.infoset_key(n));
  }

  // Round-two Leduc histories differing only in the opponent's private card
  // share the observer's augmented key.
  GameDefinition leduc = build_leduc();
  for (const auto& aug : leduc.aug_sets[0]) {
    if (aug.infoset >= 0) continue;
    for (int m : aug.members) CHECK(leduc.augmented_key(m, kP1) == aug.key);
  }
  // Pick two public-card chance nodes after "k k" with the same p1 card.
  int a = -1, b = -1;
  for (int n = 0; n < leduc.num_nodes() && b < 0; ++n) {
    if (leduc.actor[n] != kChance || leduc.parent[n] < 0) continue;
    if (leduc.actor[leduc.parent[n]] == kChance) continue;
    std::string h = leduc.history_string(n);
    if (h.substr(0, 2) == "Js" && h.substr(h.size() - 3) == "k k") {
      if (a < 0)
        a = n;
      else
        b = n;
    }
  }
  REQUIRE(a >= 0);
  REQUIRE(b >= 0);
  CHECK(leduc.augmented_key(a, kP1) == leduc.augmented_key(b, kP1));
  CHECK(leduc.augmented_key(a, kP2) != leduc.augmented_key(b, kP2));
}

TEST_CASE("reach probabilities") {
  GameDefinition rps = build_rps();
  StrategyProfile uni = uniform_profile(rps);
  ReachProbabilities root = reach(rps, uni, 0);
  CHECK(root.pi1 == 1.0);
  CHECK(root.pi2 == 1.0);
  CHECK(root.pic == 1.0);

  int r_node = rps.child(0, 0);
  ReachProbabilities r = reach(rps, uni, r_node);
  CHECK(r.pi1 == doctest::Approx(1.0 / 3));
  CHECK(r.pi2 == 1.0);
  CHECK(r.pic == 1.0);

  GameDefinition leduc = build_leduc();
  StrategyProfile lu = uniform_profile(leduc);
  // Any node right after both private deals.
  int deal = leduc.child(leduc.child(0, 0), 2);
  ReachProbabilities lr = reach(leduc, lu, deal);
  CHECK(lr.pic == doctest::Approx(1.0 / 30).epsilon(1e-12));
  CHECK(lr.pi1 == 1.0);
  CHECK(lr.pi2 == 1.0);
}

TEST_CASE("expected value") {
  GameDefinition rps = build_rps();
  StrategyProfile uni = uniform_profile(rps);
  auto v = expected_value(rps, uni);
  CHECK(v[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(v[1] == doctest::Approx(0.0).epsilon(1e-12));

  // p1 always rock, p2 always paper: paper beats rock.
  StrategyProfile s(rps.total_actions, 0.0);
  for (const auto& I : rps.infosets) s[I.action_offset + (I.player == kP1 ? 0 : 1)] = 1.0;
  auto w = expected_value(rps, s);
  CHECK(w[1] == doctest::Approx(1.0));
  CHECK(w[0] == doctest::Approx(-1.0));
}

TEST_CASE("kuhn equilibrium oracle") {
  GameDefinition g = build_kuhn();
  oracle::EquilibriumOracle eq = oracle::solve_equilibrium(g);
  CHECK(eq.value1 == doctest::Approx(-1.0 / 18).epsilon(1e-10));
  CHECK(is_valid_profile(g, eq.profile));
  auto v = expected_value(g, eq.profile);
  CHECK(v[0] == doctest::Approx(-1.0 / 18).epsilon(1e-9));
  CHECK(oracle::exploitability(g, eq.profile) <= 1e-9);
}

TEST_CASE("rps equilibrium oracle is uniform") {
  GameDefinition g = build_rps();
  oracle::EquilibriumOracle eq = oracle::solve_equilibrium(g);
  CHECK(eq.value1 == doctest::Approx(0.0).epsilon(1e-12));
  for (int a = 0; a < g.total_actions; ++a)
    CHECK(eq.profile[a] == doctest::Approx(1.0 / 3).epsilon(1e-9));
}

TEST_CASE("validate flags structural violations") {
  CHECK(validate(build_leduc()).ok);
  CHECK(validate(build_leduc(true)).ok);
  CHECK(validate(build_kuhn()).ok);
  CHECK(validate(build_rps()).ok);

  {
    GameBuilder b("broken-sum");
    b.set_decision(b.root(), kP1, "x");
    int l = b.add_child(b.root(), "a");
    b.set_leaf(l, 1.0, 0.0);  // sums to 1
    int r = b.add_child(b.root(), "b");
    b.set_leaf(r, 0.0, 0.0);
    auto d = validate(b.finalize());
    CHECK(!d.ok);
    CHECK(d.message.find("zero-sum") != std::string::npos);
  }
  {
    // Player one forgets its own first action: both second decisions share a key.
    GameBuilder b("broken-recall");
    b.set_decision(b.root(), kP1, "first");
    for (int a = 0; a < 2; ++a) {
      int n = b.add_child(b.root(), a == 0 ? "l" : "r");
      b.set_decision(n, kP1, "second");
      for (int c = 0; c < 2; ++c) b.set_leaf(b.add_child(n, c == 0 ? "l" : "r"), 0.0);
    }
    auto d = validate(b.finalize());
    CHECK(!d.ok);
    CHECK(d.message.find("perfect recall") != std::string::npos);
  }
  {
    GameBuilder b("broken-chance");
    b.set_chance(b.root());
    b.set_leaf(b.add_child(b.root(), "x", 0.5), 0.0);
    b.set_leaf(b.add_child(b.root(), "y", 0.4), 0.0);
    auto d = validate(b.finalize());
    CHECK(!d.ok);
    CHECK(d.message.find("chance") != std::string::npos);
  }
  CHECK_THROWS_AS(build_game("omaha"), ConfigError);
}

TEST_CASE("reach decomposition properties") {
  std::mt19937 rng(20240817);
  for (const char* name : {"kuhn", "rps", "leduc"}) {
    GameDefinition g = build_game(name);
    StrategyProfile s = oracle::random_profile(g, rng);

    double leaf_total = 0;
    for (int n = 0; n < g.num_nodes(); ++n) {
      ReachProbabilities r = reach(g, s, n);
      double joint = oracle::joint_reach(g, s, n);
      CHECK(r.joint() == doctest::Approx(joint).epsilon(1e-12));
      for (int p : {kP1, kP2}) {
        if (r.own(p) > 0)
          CHECK(r.excluding(p) == doctest::Approx(joint / r.own(p)).epsilon(1e-9));
      }
      if (g.is_leaf(n)) leaf_total += joint;
    }
    CHECK(leaf_total == doctest::Approx(1.0).epsilon(1e-9));

    // Perfect recall: members of an information set share the owner's reach.
    for (const auto& I : g.infosets) {
      double own = reach(g, s, I.members.front()).own(I.player);
      for (int m : I.members)
        CHECK(reach(g, s, m).own(I.player) == doctest::Approx(own).epsilon(1e-12));
    }

    // Augmented sets partition all non-leaf histories and refine correctly:
    // standard sets on own turns stay whole.
    for (int p : {kP1, kP2}) {
      for (const auto& aug : g.aug_sets[p - 1]) {
        if (aug.infoset >= 0)
          CHECK(aug.members.size() == g.infosets[aug.infoset].members.size());
      }
      size_t covered = 0;
      for (const auto& aug : g.aug_sets[p - 1]) covered += aug.members.size();
      size_t non_leaf = 0;
      for (int n = 0; n < g.num_nodes(); ++n)
        if (!g.is_leaf(n)) ++non_leaf;
      CHECK(covered == non_leaf);
    }

    auto ev = expected_value(g, s);
    auto oracle_ev = oracle::leaf_sum_value(g, s);
    CHECK(ev[0] == doctest::Approx(oracle_ev[0]).epsilon(1e-10));
    CHECK(ev[1] == doctest::Approx(oracle_ev[1]).epsilon(1e-10));
  }
}
