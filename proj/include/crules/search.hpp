#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "crules/rulecore.hpp"
#include "crules/surrogate.hpp"

namespace crules {

struct ProgressEvent {
  int rule_index = 0;  // 1-based position in the rule set being built
  int mm_iter = 0;
  double f = kNegInf;
  int rule_size = 0;
};

struct SearchConfig {
  double lambda = 1.0;
  int max_rules = 3;             // K
  int max_len = 3;               // L
  double epsilon = -1.0;         // <= 0: 1e-3 * mean(w*Y) over treated units
  std::uint32_t min_support = 10;
  int max_mm_iters = 50;
  double f_tolerance = 1e-9;
  std::uint64_t seed = 0;
  int threads = 0;               // 0 = hardware default
  std::function<void(const ProgressEvent&)> on_progress;
};

/// Treated units already covered by accepted rules; their q1 contribution
/// is replaced by epsilon while searching for the next rule.
struct OverlapMask {
  BitVec bits;

  static OverlapMask empty(const BinarizedDataset& ds) { return {BitVec(ds.n_units)}; }
};

double default_epsilon(const BinarizedDataset& ds);

/// Starting from the empty rule, adds the literal that most improves the
/// true objective until nothing improves or the length cap is hit. Throws
/// NoFeasibleRule when the empty rule and every singleton are infeasible.
Rule greedy_init(const BinarizedDataset& ds, const SearchConfig& cfg, const OverlapMask& mask);

struct LocalSearchStats {
  int moves = 0;
  bool move_cap_hit = false;
};

/// Add / remove / swap passes over the surrogate until a full pass changes
/// nothing. Never returns a rule with smaller g than init.
Rule local_search(const SurrogateAnchor& anchor, const BinarizedDataset& ds, Rule init,
                  const SearchConfig& cfg, LocalSearchStats* stats = nullptr);

struct MmTrace {
  std::vector<double> f_per_iter;  // f at init, then after each MM step
  bool move_cap_hit = false;
};

/// MM loop for a single rule: anchor at R_m, maximize the surrogate, repeat.
/// Returns the best iterate by true objective.
Rule optimize_rule(const BinarizedDataset& ds, const SearchConfig& cfg, const OverlapMask& mask,
                   MmTrace* trace = nullptr);

/// Sequentially extracts up to K rules, penalizing overlap with already
/// covered treated units. Consequents are penalty-free.
RuleSet learn_ruleset(const BinarizedDataset& ds, const SearchConfig& cfg);

}  // namespace crules
