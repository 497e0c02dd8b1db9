#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cfrd/cfr.hpp"
#include "cfrd/game.hpp"

namespace cfrd {

// ---------------------------------------------------------------------------
// Strategy file: one line per information set,
//   <player> <infoset-key> <action>=<prob> ...
// probabilities with 17 significant digits, lines sorted lexicographically by
// key (player breaks ties). load(save(x)) reproduces x exactly.

inline std::string strategy_to_string(const GameDefinition& g, const StrategyProfile& s) {
  std::vector<std::pair<std::pair<std::string, int>, std::string>> lines;
  lines.reserve(g.infosets.size());
  for (const auto& I : g.infosets) {
    std::string line = std::to_string(I.player) + " " + I.key;
    for (int a = 0; a < I.num_actions; ++a)
      line += " " + I.action_names[a] + "=" + format_double(s[I.action_offset + a]);
    lines.push_back({{I.key, I.player}, std::move(line)});
  }
  std::sort(lines.begin(), lines.end());
  std::string out;
  for (auto& [key, line] : lines) {
    out += line;
    out += '\n';
  }
  return out;
}

inline StrategyProfile strategy_from_string(const GameDefinition& g, const std::string& text) {
  std::map<std::pair<int, std::string>, int> by_key;
  for (size_t i = 0; i < g.infosets.size(); ++i)
    by_key[{g.infosets[i].player, g.infosets[i].key}] = static_cast<int>(i);

  StrategyProfile s(g.total_actions, 0.0);
  std::vector<char> seen(g.infosets.size(), 0);
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    int player;
    std::string key;
    if (!(ls >> player >> key))
      throw ValidationError("strategy line " + std::to_string(line_no) + ": malformed");
    auto it = by_key.find({player, key});
    if (it == by_key.end())
      throw ValidationError("strategy line " + std::to_string(line_no) +
                            ": unknown information set " + key);
    const auto& I = g.infosets[it->second];
    seen[it->second] = 1;
    std::string tok;
    int count = 0;
    while (ls >> tok) {
      auto eq = tok.rfind('=');
      if (eq == std::string::npos)
        throw ValidationError("strategy line " + std::to_string(line_no) + ": bad token " + tok);
      std::string action = tok.substr(0, eq);
      double prob = parse_double(tok.substr(eq + 1));
      int a = -1;
      for (int k = 0; k < I.num_actions; ++k)
        if (I.action_names[k] == action) a = k;
      if (a < 0)
        throw ValidationError("strategy line " + std::to_string(line_no) + ": unknown action " +
                              action + " at " + key);
      s[I.action_offset + a] = prob;
      ++count;
    }
    if (count != I.num_actions)
      throw ValidationError("strategy line " + std::to_string(line_no) +
                            ": wrong action count at " + key);
  }
  for (size_t i = 0; i < g.infosets.size(); ++i)
    if (!seen[i])
      throw ValidationError("strategy file missing information set " + g.infosets[i].key);
  return s;
}

inline void save_strategy(const std::string& path, const GameDefinition& g,
                          const StrategyProfile& s) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path);
  out << strategy_to_string(g, s);
}

inline StrategyProfile load_strategy(const std::string& path, const GameDefinition& g) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return strategy_from_string(g, buf.str());
}

// ---------------------------------------------------------------------------
// Counterfactual-value file: one line per root information set,
//   <player> <infoset-key> <cfv>
// Keys are the augmented keys of the subgame-root sets.

struct CfvLine {
  int player = 0;
  std::string key;
  double value = 0;
};

inline std::string cfvs_to_string(std::vector<CfvLine> lines) {
  std::sort(lines.begin(), lines.end(), [](const CfvLine& a, const CfvLine& b) {
    return std::tie(a.key, a.player) < std::tie(b.key, b.player);
  });
  std::string out;
  for (const auto& l : lines)
    out += std::to_string(l.player) + " " + l.key + " " + format_double(l.value) + "\n";
  return out;
}

inline std::vector<CfvLine> cfvs_from_string(const std::string& text) {
  std::vector<CfvLine> lines;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    CfvLine l;
    std::string value;
    if (!(ls >> l.player >> l.key >> value))
      throw ValidationError("cfv line " + std::to_string(line_no) + ": malformed");
    l.value = parse_double(value);
    lines.push_back(std::move(l));
  }
  return lines;
}

inline void save_cfvs(const std::string& path, const std::vector<CfvLine>& lines) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path);
  out << cfvs_to_string(lines);
}

inline std::vector<CfvLine> load_cfvs(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return cfvs_from_string(buf.str());
}

// ---------------------------------------------------------------------------
// Trace CSVs.

inline void save_trace(const std::string& path, const std::vector<TraceRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path);
  out << "iteration,exploitability_chips,elapsed_seconds\n";
  for (const auto& r : rows)
    out << r.iteration << "," << format_double(r.exploitability_chips) << ","
        << format_double(r.elapsed_seconds) << "\n";
}

struct CfrdTraceRow {
  long long iteration = 0;
  long long subgame_iters = 0;
  double exploitability_chips = 0;
  double elapsed_seconds = 0;
};

inline void save_cfrd_trace(const std::string& path, const std::vector<CfrdTraceRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path);
  out << "iteration,subgame_iters,exploitability_chips,elapsed_seconds\n";
  for (const auto& r : rows)
    out << r.iteration << "," << r.subgame_iters << ","
        << format_double(r.exploitability_chips) << "," << format_double(r.elapsed_seconds)
        << "\n";
}

struct CompareRow {
  long long iterations = 0;
  double safe_expl = 0;
  double unsafe_expl = 0;
  double safe_vs_orig = 0;
  double unsafe_vs_orig = 0;
};

inline void save_comparison(const std::string& path, const std::vector<CompareRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path);
  out << "iterations,safe_expl,unsafe_expl,safe_vs_orig,unsafe_vs_orig\n";
  for (const auto& r : rows)
    out << r.iterations << "," << format_double(r.safe_expl) << ","
        << format_double(r.unsafe_expl) << "," << format_double(r.safe_vs_orig) << ","
        << format_double(r.unsafe_vs_orig) << "\n";
}

}  // namespace cfrd
