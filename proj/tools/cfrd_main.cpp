// Command line driver: solving, decomposition-based solving, safe and unsafe
// subgame re-solving, exploitability evaluation, and game validation.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical or validation
// failure. CFRD_LOG=1|2 controls progress output on stderr.

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cfrd/baselines.hpp"
#include "cfrd/cfrd.hpp"
#include "cfrd/games.hpp"
#include "cfrd/io.hpp"

using namespace cfrd;

namespace {

struct CommonArgs {
  std::string game = "leduc";
  std::string frontier;
  std::string out = "cfrd-out";
  long long iters = 100000;
  long long trunk_iters = 1000;
  long long subgame_iters = 1000;
  long long recovery_iters = 200000;
  long long eval_every = 0;
  int workers = 1;
  unsigned seed = 0;  // reserved for property-test tooling; solve paths are deterministic
  bool refine = false;
};

std::vector<long long> checkpoints(long long max_iters, long long eval_every) {
  std::vector<long long> out;
  if (eval_every > 0) {
    for (long long t = eval_every; t < max_iters; t += eval_every) out.push_back(t);
  } else {
    for (long long t = 1; t < max_iters; t *= 2) out.push_back(t);
  }
  out.push_back(max_iters);
  return out;
}

int cmd_solve(const CommonArgs& a) {
  GameDefinition g = build_game(a.game);
  auto start = std::chrono::steady_clock::now();
  StrategyProfile average;
  std::vector<TraceRow> trace;

  if (a.refine) {
    average = solve_refined(g, a.iters);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    trace.push_back({a.iters, exploitability(g, average), secs});
  } else {
    SolveOptions opts;
    opts.trace = a.eval_every <= 0;
    opts.eval_every = a.eval_every > 0 ? static_cast<int>(a.eval_every) : 0;
    opts.on_trace = [&](const TraceRow& r) {
      log(1, "solve: iter %lld exploitability %.6g", r.iteration, r.exploitability_chips);
    };
    SolveResult res = cfr_solve(g, a.iters, opts);
    average = std::move(res.average);
    trace = std::move(res.trace);
  }

  save_strategy(a.out + ".strategy.txt", g, average);
  save_trace(a.out + ".trace.csv", trace);
  if (!a.frontier.empty() && a.frontier != "none") {
    SubgamePartition part = partition_game(g, make_frontier(g, a.frontier));
    std::vector<RootCfvs> all;
    for (size_t s = 0; s < part.subgames.size(); ++s)
      all.push_back(root_cfvs(g, part, static_cast<int>(s), average));
    save_cfvs(a.out + ".cfv.txt", cfvs_to_lines(part, all));
  }
  auto v = expected_value(g, average);
  std::printf("game=%s iterations=%lld value_p1=%s exploitability=%s\n", a.game.c_str(), a.iters,
              format_double(v[0]).c_str(),
              format_double(trace.empty() ? exploitability(g, average)
                                          : trace.back().exploitability_chips)
                  .c_str());
  return 0;
}

int cmd_recover(const CommonArgs& a, const std::string& strategy_file,
                const std::string& cfv_file) {
  GameDefinition g = build_game(a.game);
  SubgamePartition part =
      partition_game(g, make_frontier(g, a.frontier.empty() ? "main" : a.frontier));
  StrategyProfile original = load_strategy(strategy_file, g);
  std::vector<RootCfvs> cfvs = cfvs_from_lines(part, load_cfvs(cfv_file));

  std::vector<CompareRow> rows;
  StrategyProfile last_safe;
  for (long long iters : checkpoints(a.recovery_iters, a.eval_every)) {
    StrategyProfile safe = recover_full(g, part, original, cfvs, iters,
                                        RecoverOptions{.workers = a.workers});
    StrategyProfile unsafe_p = unsafe_resolve_all(g, part, original, iters, a.workers);
    CompareRow row;
    row.iterations = iters;
    row.safe_expl = exploitability(g, safe);
    row.unsafe_expl = exploitability(g, unsafe_p);
    row.safe_vs_orig = value_vs_original(g, safe, original);
    row.unsafe_vs_orig = value_vs_original(g, unsafe_p, original);
    rows.push_back(row);
    last_safe = std::move(safe);
    log(1, "recover: iters %lld safe %.6g unsafe %.6g", iters, row.safe_expl, row.unsafe_expl);
  }
  save_comparison(a.out + ".recover.csv", rows);
  save_strategy(a.out + ".recovered.strategy.txt", g, last_safe);
  std::printf("recovered exploitability=%s unsafe=%s\n",
              format_double(rows.back().safe_expl).c_str(),
              format_double(rows.back().unsafe_expl).c_str());
  return 0;
}

int cmd_cfrd(const CommonArgs& a) {
  GameDefinition g = build_game(a.game);
  SubgamePartition part =
      partition_game(g, make_frontier(g, a.frontier.empty() ? "main" : a.frontier));

  auto start = std::chrono::steady_clock::now();
  std::vector<CfrdTraceRow> trace;
  CfrdOptions opts;
  opts.workers = a.workers;
  if (a.eval_every != 0) {
    opts.on_checkpoint = [&](long long t, const StrategyProfile& trunk_avg,
                             const std::vector<RootCfvs>& avg_cfvs) {
      if (a.eval_every > 0 && t % a.eval_every != 0 && t != a.trunk_iters) return;
      StrategyProfile full = recover_full(g, part, trunk_avg, avg_cfvs, a.recovery_iters,
                                          RecoverOptions{.workers = a.workers});
      double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      trace.push_back({t, a.subgame_iters, exploitability(g, full), secs});
      log(1, "cfrd: trunk iter %lld exploitability %.6g", t,
          trace.back().exploitability_chips);
    };
  }
  CfrdResult res = cfr_d(g, part, a.trunk_iters, a.subgame_iters, opts);
  StrategyProfile full = recover_full(g, part, res.trunk_average, res.avg_cfvs,
                                      a.recovery_iters, RecoverOptions{.workers = a.workers});
  double expl = exploitability(g, full);
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (trace.empty() || trace.back().iteration != a.trunk_iters)
    trace.push_back({a.trunk_iters, a.subgame_iters, expl, secs});

  save_strategy(a.out + ".trunk.strategy.txt", g, res.trunk_average);
  save_cfvs(a.out + ".cfv.txt", cfvs_to_lines(part, res.avg_cfvs));
  save_cfrd_trace(a.out + ".cfrd.csv", trace);
  save_strategy(a.out + ".full.strategy.txt", g, full);
  std::printf(
      "cfrd: trunk_iters=%lld subgame_iters=%lld recovery_iters=%lld exploitability=%s "
      "bound_trunk_sets=%d root_sets=%d\n",
      a.trunk_iters, a.subgame_iters, a.recovery_iters, format_double(expl).c_str(),
      res.report.trunk_infosets, res.report.root_infosets);
  return 0;
}

int cmd_resolve_abstract(const CommonArgs& a) {
  if (a.game != "leduc") throw ConfigError("resolve-abstract runs on leduc");
  GameDefinition g = build_game("leduc");
  SubgamePartition part =
      partition_game(g, make_frontier(g, a.frontier.empty() ? "round2" : a.frontier));
  Abstraction abs = build_abstraction(g);
  StrategyProfile abstract_eq = solve_refined(abs.game, a.iters);
  StrategyProfile original = lift(g, abs, abstract_eq);
  double base_expl = exploitability(g, original);
  log(1, "resolve-abstract: lifted exploitability %.6g", base_expl);

  std::vector<CompareRow> rows;
  for (long long iters : checkpoints(a.recovery_iters, a.eval_every)) {
    StrategyProfile safe = safe_resolve_all(g, part, original, iters, a.workers);
    StrategyProfile unsafe_p = unsafe_resolve_all(g, part, original, iters, a.workers);
    CompareRow row;
    row.iterations = iters;
    row.safe_expl = exploitability(g, safe);
    row.unsafe_expl = exploitability(g, unsafe_p);
    row.safe_vs_orig = value_vs_original(g, safe, original);
    row.unsafe_vs_orig = value_vs_original(g, unsafe_p, original);
    rows.push_back(row);
    log(1, "resolve-abstract: iters %lld safe %.6g unsafe %.6g", iters, row.safe_expl,
        row.unsafe_expl);
  }
  save_comparison(a.out + ".compare.csv", rows);
  save_strategy(a.out + ".original.strategy.txt", g, original);
  std::printf("original=%s safe=%s unsafe=%s\n", format_double(base_expl).c_str(),
              format_double(rows.back().safe_expl).c_str(),
              format_double(rows.back().unsafe_expl).c_str());
  return 0;
}

int cmd_exploit(const CommonArgs& a, const std::string& strategy_file) {
  GameDefinition g = build_game(a.game);
  StrategyProfile s = load_strategy(strategy_file, g);
  if (!is_valid_profile(g, s)) throw ValidationError("strategy file is not a valid profile");
  CbrResult b1 = counterfactual_best_response_values(g, s, kP1);
  CbrResult b2 = counterfactual_best_response_values(g, s, kP2);
  auto v = expected_value(g, s);
  std::printf("value_p1=%s br1_gain=%s br2_gain=%s exploitability=%s\n",
              format_double(v[0]).c_str(), format_double(b1.root_value - v[0]).c_str(),
              format_double(b2.root_value - v[1]).c_str(),
              format_double((b1.root_value + b2.root_value) / 2).c_str());
  return 0;
}

int cmd_validate(const CommonArgs& a) {
  GameDefinition g = build_game(a.game);
  Diagnostics d = validate(g);
  if (!d.ok) {
    std::printf("FAIL %s: %s\n", a.game.c_str(), d.message.c_str());
    return 3;
  }
  std::printf("OK %s: %d nodes, %zu information sets, %d actions\n", a.game.c_str(),
              g.num_nodes(), g.infosets.size(), g.total_actions);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Counterfactual regret minimization with decomposition-based solving"};
  app.require_subcommand(1);
  CommonArgs a;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--game", a.game, "rps | kuhn | leduc | leduc-abstract");
    cmd->add_option("--frontier", a.frontier, "subgame frontier (main, round2, after-first, none)");
    cmd->add_option("--out", a.out, "output path prefix");
    cmd->add_option("--workers", a.workers, "parallel subgame workers");
    cmd->add_option("--seed", a.seed, "seed for randomized tooling (solves are deterministic)");
    cmd->add_option("--eval-every", a.eval_every,
                    "evaluation cadence; 0 = powers of two, N = every N iterations");
  };

  CLI::App* solve = app.add_subcommand("solve", "vanilla CFR self play");
  add_common(solve);
  solve->add_option("--iters", a.iters, "CFR iterations");
  solve->add_flag("--refine", a.refine, "high-precision refinement mode");

  CLI::App* recover = app.add_subcommand("recover", "safe subgame recovery from stored cfvs");
  add_common(recover);
  std::string strategy_file, cfv_file;
  recover->add_option("strategy", strategy_file, "strategy file")->required();
  recover->add_option("cfvs", cfv_file, "counterfactual value file")->required();
  recover->add_option("--recovery-iters", a.recovery_iters, "gadget CFR iterations");

  CLI::App* cfrd_cmd = app.add_subcommand("cfrd", "decomposition-based solving");
  add_common(cfrd_cmd);
  cfrd_cmd->add_option("--trunk-iters", a.trunk_iters, "trunk CFR iterations");
  cfrd_cmd->add_option("--subgame-iters", a.subgame_iters, "subgame CFR iterations per trunk iteration");
  cfrd_cmd->add_option("--recovery-iters", a.recovery_iters, "recovery gadget iterations");

  CLI::App* resolve_abs = app.add_subcommand("resolve-abstract",
                                             "re-solve an abstract strategy, safe vs unsafe");
  add_common(resolve_abs);
  resolve_abs->add_option("--iters", a.iters, "abstract-game solve iterations");
  resolve_abs->add_option("--recovery-iters", a.recovery_iters, "re-solve iteration sweep limit");

  CLI::App* exploit = app.add_subcommand("exploit", "evaluate a strategy file");
  add_common(exploit);
  std::string exploit_file;
  exploit->add_option("strategy", exploit_file, "strategy file")->required();

  CLI::App* validate_cmd = app.add_subcommand("validate", "structural game checks");
  add_common(validate_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (solve->parsed()) return cmd_solve(a);
    if (recover->parsed()) return cmd_recover(a, strategy_file, cfv_file);
    if (cfrd_cmd->parsed()) return cmd_cfrd(a);
    if (resolve_abs->parsed()) return cmd_resolve_abstract(a);
    if (exploit->parsed()) return cmd_exploit(a, exploit_file);
    if (validate_cmd->parsed()) return cmd_validate(a);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 2;
}
