#pragma once

#include <array>
#include <functional>
#include <string>

#include "cfrd/game.hpp"

namespace cfrd {

// ---------------------------------------------------------------------------
// Rock-paper-scissors in sequential form: p1 commits without revealing, then
// p2 acts from a single information set over {R, P, S}.

inline GameDefinition build_rps() {
  GameBuilder b("rps");
  const std::array<std::string, 3> acts = {"R", "P", "S"};
  b.set_decision(b.root(), kP1, "p1");
  for (int i = 0; i < 3; ++i) {
    int h = b.add_child(b.root(), acts[i]);
    b.set_decision(h, kP2, "p2");
    for (int j = 0; j < 3; ++j) {
      int z = b.add_child(h, acts[j]);
      double u1 = i == j ? 0.0 : ((j + 1) % 3 == i ? 1.0 : -1.0);
      b.set_leaf(z, u1);
    }
  }
  return b.finalize();
}

// ---------------------------------------------------------------------------
// Kuhn poker: 3 cards, 1-chip ante, 1-chip bets, one bet max. Small enough
// for exact brute-force oracles.

namespace detail {

inline void kuhn_betting(GameBuilder& b, int node, int c1, int c2, const std::string& bets,
                         int to_act, int to_call, std::array<int, 2> invested) {
  static const std::array<std::string, 3> cards = {"J", "Q", "K"};
  auto showdown = [&](int leaf, std::array<int, 2> inv) {
    if (c1 == c2) throw ValidationError("kuhn: duplicate deal");
    int winner = c1 > c2 ? kP1 : kP2;
    double u1 = winner == kP1 ? inv[1] : -inv[0];
    b.set_leaf(leaf, u1);
  };
  b.set_decision(node, to_act, cards[to_act == kP1 ? c1 : c2] + ":" + bets);
  int opp = other_player(to_act);
  if (to_call == 0) {
    int k = b.add_child(node, "k");
    if (bets == "k")
      showdown(k, invested);
    else
      kuhn_betting(b, k, c1, c2, bets + "k", opp, 0, invested);
    int bet = b.add_child(node, "b");
    auto inv = invested;
    inv[to_act - 1] += 1;
    kuhn_betting(b, bet, c1, c2, bets + "b", opp, 1, inv);
  } else {
    int f = b.add_child(node, "f");
    b.set_leaf(f, to_act == kP1 ? -invested[0] : invested[1]);
    int c = b.add_child(node, "c");
    auto inv = invested;
    inv[to_act - 1] += to_call;
    showdown(c, inv);
  }
}

}  // namespace detail

inline GameDefinition build_kuhn() {
  GameBuilder b("kuhn");
  static const std::array<std::string, 3> cards = {"J", "Q", "K"};
  b.set_chance(b.root());
  for (int c1 = 0; c1 < 3; ++c1) {
    int n1 = b.add_child(b.root(), cards[c1], 1.0 / 3);
    b.set_chance(n1);
    for (int c2 = 0; c2 < 3; ++c2) {
      if (c2 == c1) continue;
      int n2 = b.add_child(n1, cards[c2], 1.0 / 2);
      detail::kuhn_betting(b, n2, c1, c2, "", kP1, 0, {1, 1});
    }
  }
  return b.finalize();
}

// ---------------------------------------------------------------------------
// Leduc hold'em: 6 cards (3 ranks, 2 suits), 1-chip ante, two betting rounds
// with at most one bet and one raise each, bet size 2 in round one and 4 in
// round two, one public card between the rounds. Pair beats high card at
// showdown; equal ranks split the pot.
//
// The abstract variant keeps the same tree and coarsens round-two observation
// keys: a player holding a Jack cannot tell a Queen board from a King board,
// and a player holding a King cannot tell a Jack board from a Queen board.

namespace detail {

inline const std::array<std::string, 6>& leduc_cards() {
  static const std::array<std::string, 6> cards = {"Js", "Jh", "Qs", "Qh", "Ks", "Kh"};
  return cards;
}

struct LeducSpec {
  bool abstract_round2 = false;

  int rank(int c) const { return c / 2; }

  std::string board_token(int own, int board) const {
    if (board < 0) return "?";
    if (abstract_round2) {
      if (rank(own) == 0 && rank(board) >= 1) return "^";  // J holder, Q/K board merged
      if (rank(own) == 2 && rank(board) <= 1) return "v";  // K holder, J/Q board merged
    }
    return leduc_cards()[board];
  }

  std::string key(int own, int board, const std::string& bets1, const std::string& bets2,
                  int round) const {
    std::string k = leduc_cards()[own] + board_token(own, board) + ":" + bets1;
    if (round == 2) k += "/" + bets2;
    return k;
  }
};

inline void leduc_round_end(GameBuilder& b, const LeducSpec& spec, int node, int c1, int c2,
                            int board, int round, const std::string& bets1,
                            std::array<int, 2> invested);

inline void leduc_betting(GameBuilder& b, const LeducSpec& spec, int node, int c1, int c2,
                          int board, int round, const std::string& bets1,
                          const std::string& bets2, int to_act, int num_bets, int to_call,
                          std::array<int, 2> invested) {
  const std::string& street = round == 1 ? bets1 : bets2;
  int own = to_act == kP1 ? c1 : c2;
  b.set_decision(node, to_act, spec.key(own, board, bets1, bets2, round));
  int opp = other_player(to_act);
  int bet_size = round == 1 ? 2 : 4;
  auto advance = [&](const std::string& act) {
    return round == 1 ? std::make_pair(bets1 + act, bets2) : std::make_pair(bets1, bets2 + act);
  };

  if (to_call == 0) {
    int k = b.add_child(node, "k");
    auto [n1, n2] = advance("k");
    if (street == "k")
      leduc_round_end(b, spec, k, c1, c2, board, round, n1, invested);
    else
      leduc_betting(b, spec, k, c1, c2, board, round, n1, n2, opp, 0, 0, invested);
    int bet = b.add_child(node, "b");
    auto [m1, m2] = advance("b");
    auto inv = invested;
    inv[to_act - 1] += bet_size;
    leduc_betting(b, spec, bet, c1, c2, board, round, m1, m2, opp, 1, bet_size, inv);
  } else {
    int f = b.add_child(node, "f");
    b.set_leaf(f, to_act == kP1 ? -invested[0] : invested[1]);
    int c = b.add_child(node, "c");
    auto [n1, n2] = advance("c");
    auto inv = invested;
    inv[to_act - 1] += to_call;
    leduc_round_end(b, spec, c, c1, c2, board, round, n1, inv);
    if (num_bets < 2) {
      int r = b.add_child(node, "r");
      auto [m1, m2] = advance("r");
      auto inv2 = invested;
      inv2[to_act - 1] += to_call + bet_size;
      leduc_betting(b, spec, r, c1, c2, board, round, m1, m2, opp, num_bets + 1, bet_size, inv2);
    }
  }
}

inline void leduc_round_end(GameBuilder& b, const LeducSpec& spec, int node, int c1, int c2,
                            int board, int round, const std::string& bets1,
                            std::array<int, 2> invested) {
  if (round == 1) {
    b.set_chance(node);
    for (int pub = 0; pub < 6; ++pub) {
      if (pub == c1 || pub == c2) continue;
      int child = b.add_child(node, leduc_cards()[pub], 1.0 / 4);
      leduc_betting(b, spec, child, c1, c2, pub, 2, bets1, "", kP1, 0, 0, invested);
    }
    return;
  }
  int r1 = spec.rank(c1), r2 = spec.rank(c2), rb = spec.rank(board);
  int winner = r1 == rb ? kP1 : r2 == rb ? kP2 : r1 > r2 ? kP1 : r1 < r2 ? kP2 : 0;
  double u1 = winner == kP1 ? invested[1] : winner == kP2 ? -invested[0] : 0.0;
  b.set_leaf(node, u1);
}

}  // namespace detail

inline GameDefinition build_leduc(bool abstract_round2 = false) {
  detail::LeducSpec spec{abstract_round2};
  GameBuilder b(abstract_round2 ? "leduc-abstract" : "leduc");
  b.set_chance(b.root());
  for (int c1 = 0; c1 < 6; ++c1) {
    int n1 = b.add_child(b.root(), detail::leduc_cards()[c1], 1.0 / 6);
    b.set_chance(n1);
    for (int c2 = 0; c2 < 6; ++c2) {
      if (c2 == c1) continue;
      int n2 = b.add_child(n1, detail::leduc_cards()[c2], 1.0 / 5);
      detail::leduc_betting(b, spec, n2, c1, c2, -1, 1, "", "", kP1, 0, 0, {1, 1});
    }
  }
  return b.finalize();
}

// ---------------------------------------------------------------------------

inline GameDefinition build_game(const std::string& name) {
  if (name == "rps") return build_rps();
  if (name == "kuhn") return build_kuhn();
  if (name == "leduc") return build_leduc(false);
  if (name == "leduc-abstract") return build_leduc(true);
  throw ConfigError("unknown game: " + name);
}

// ---------------------------------------------------------------------------
// Frontier predicates. A frontier marks subgame root histories; the named
// frontiers below are the canonical splits used by the experiments.

using FrontierPredicate = std::function<bool(const GameDefinition&, int)>;

inline FrontierPredicate make_frontier(const GameDefinition& g, const std::string& name) {
  if (name == "none") return [](const GameDefinition&, int) { return false; };
  bool is_leduc = g.name == "leduc" || g.name == "leduc-abstract";
  if ((name == "main" && is_leduc) || name == "round2") {
    // End of round-one betting: the public-card chance nodes, i.e. chance
    // nodes entered from a betting decision.
    return [](const GameDefinition& gd, int n) {
      return gd.actor[n] == kChance && gd.parent[n] >= 0 &&
             (gd.actor[gd.parent[n]] == kP1 || gd.actor[gd.parent[n]] == kP2);
    };
  }
  if ((name == "main" && g.name == "kuhn") || name == "after-first") {
    // Histories right after the first player's opening action.
    return [](const GameDefinition& gd, int n) {
      int p = gd.parent[n];
      return p >= 0 && gd.actor[p] == kP1 && gd.infosets[gd.infoset[p]].own_level == 0;
    };
  }
  if (name == "main" && g.name == "rps") {
    return [](const GameDefinition& gd, int n) { return gd.parent[n] == 0; };
  }
  throw ConfigError("unknown frontier '" + name + "' for game " + g.name);
}

}  // namespace cfrd
