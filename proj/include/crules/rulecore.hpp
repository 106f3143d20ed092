#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crules/bitvec.hpp"
#include "crules/dataset.hpp"

namespace crules {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Conjunction of literals in canonical form: ids sorted ascending, no
/// literal together with its negation partner.
struct Rule {
  std::vector<int> lits;

  static Rule make(std::vector<int> ids, const BinarizedDataset& ds);

  bool empty() const { return lits.empty(); }
  int size() const { return static_cast<int>(lits.size()); }
  bool contains(int id) const;
  bool operator==(const Rule&) const = default;

  Rule with(int id, const BinarizedDataset& ds) const;
  Rule without(int id) const;

  std::string text(const BinarizedDataset& ds) const;  // "a <= 3 AND b == x"
};

enum class StatsFlag : std::uint8_t { ok, min_support, zero_q, zero_variance };

struct RuleStats {
  double q1 = 0, q2 = 0, q3 = 0, q4 = 0, q5 = 0, q6 = 0;
  double tau = 0.0;
  double sigma2 = 0.0;
  double f_value = kNegInf;
  std::uint32_t n_treated_covered = 0;
  std::uint32_t n_control_covered = 0;
  StatsFlag flag = StatsFlag::ok;
};

struct StatsConfig {
  double lambda = 1.0;
  std::uint32_t min_support = 10;
  /// Units whose q1 contribution is replaced by epsilon (treated units
  /// already covered by accepted rules). Null = no penalty.
  const BitVec* penalty_mask = nullptr;
  double epsilon = 1e-3;
  /// Anchor mean for q5. Negative = use the rule's own weighted treated
  /// mean, which makes q5 == sigma2 * q2.
  double anchor_mu = -1.0;
};

BitVec rule_cover(const Rule& rule, const BinarizedDataset& ds);

/// Q1..Q6, tau, sigma2 and f for one rule. sigma2 always uses penalty-free
/// outcomes; the penalty only enters q1 (and hence f) to steer the search.
RuleStats q_stats(const Rule& rule, const BinarizedDataset& ds, const StatsConfig& cfg);

double weighted_variance(std::span<const double> w, std::span<const double> y);

/// f = log q1 + log q4 - log q2 - log q3 - lambda * log sigma2. Returns
/// -inf instead of throwing and records the reason in stats.flag
/// (zero_q / zero_variance).
double objective(RuleStats& stats, double lambda);

struct RuleSet {
  struct Entry {
    Rule rule;
    double tau = 0.0;     // penalty-free consequent
    double sigma2 = 0.0;
    double f = kNegInf;   // penalized objective at acceptance time
    std::uint32_t coverage = 0;
  };
  std::vector<Entry> rules;
  double lambda = 1.0;
  int max_rules = 0;
  int max_len = 0;
  double epsilon = 0.0;
  std::uint32_t min_support = 10;
  std::uint64_t seed = 0;
  std::optional<double> fallback_effect;  // population IPW ATE when enabled
};

/// Mean consequent over covering rules; fallback for uncovered units when
/// configured, otherwise nullopt.
std::optional<double> ruleset_predict(const RuleSet& rs, const BinarizedDataset& ds,
                                      std::size_t unit);

/// "IF a <= 3 AND b == x THEN tau = 1.23"
std::string rule_line(const Rule& rule, double tau, const BinarizedDataset& ds);

}  // namespace crules
