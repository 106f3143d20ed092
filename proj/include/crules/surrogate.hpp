#pragma once

#include <cstdint>
#include <vector>

#include "crules/kernels.hpp"
#include "crules/rulecore.hpp"

namespace crules {

/// Q-functions that get modular lower bounds in the surrogate. q6 == q2 as
/// a function, but its bound enters g scaled by lambda, so it keeps its own
/// table slot.
enum class QFun : int { q1 = 0, q4 = 1, q6 = 2 };

enum class BoundKind { b1, b2, best };

/// Everything the MM step needs, frozen at the anchor rule R_m: the anchor
/// mean mu_m, Q values at R_m, and per-literal marginal-gain tables for the
/// modular bounds. Immutable once built; candidate evaluations against it
/// are pure and safe to run concurrently.
struct SurrogateAnchor {
  Rule anchor;
  double mu_m = 0.0;
  double lambda = 1.0;
  std::uint32_t min_support = 10;
  RuleStats q_at_anchor;          // penalized q1, q5 at mu_m, q6 = q2
  kernels::UnitValues values;     // dev primed at mu_m

  struct GainTable {
    double q_empty = 0.0;
    double q_anchor = 0.0;
    std::vector<double> gain_empty;        // Q(j | empty)
    std::vector<double> gain_anchor;       // Q(j | R_m), j outside R_m
    std::vector<double> gain_anchor_drop;  // Q(j | R_m \ {j}), j in R_m
    std::vector<double> gain_universe;     // Q(j | V \ {j, partner(j)})
  };
  GainTable tables[3];

  const GainTable& table(QFun q) const { return tables[static_cast<int>(q)]; }
};

struct AnchorConfig {
  double lambda = 1.0;
  std::uint32_t min_support = 10;
  const BitVec* penalty_mask = nullptr;
  double epsilon = 1e-3;
  int threads = 0;
};

/// Builds the anchor state at R_m. The anchor must be feasible (all Q
/// strictly positive; q5 positive when lambda > 0). mu_m is the weighted
/// treated-outcome mean over the anchor's coverage; over all treated units
/// for the empty anchor.
SurrogateAnchor build_anchor(const BinarizedDataset& ds, const Rule& anchor_rule,
                             const AnchorConfig& cfg);

/// Q5/Q6 at a fixed mean: the variance majorant of the MM step.
double variance_majorant(const Rule& rule, const BinarizedDataset& ds, double mu_m,
                         std::uint32_t min_support);

/// Modular lower bound of the chosen Q at the anchor; `best` is
/// max(b1, b2). Tight at the anchor for every kind.
double modular_bound(QFun q, const SurrogateAnchor& anchor, const Rule& rule,
                     BoundKind kind = BoundKind::best);

/// The MM surrogate g(R). Built on the b2 tables, which keeps g submodular
/// (a max of the two bounds is not modular and loses that property).
/// Returns -inf when the rule violates min support or a bound is
/// non-positive.
double surrogate_value(const Rule& rule, const SurrogateAnchor& anchor,
                       const BinarizedDataset& ds);

/// Same surrogate evaluated from precomputed cover sums (hot path).
double surrogate_from_sums(const kernels::CoverSums& sums, const Rule& rule,
                           const SurrogateAnchor& anchor);

/// g(R + j) - g(R). Precondition: neither j nor its partner is in the rule.
double marginal_gain(const SurrogateAnchor& anchor, const BinarizedDataset& ds,
                     const Rule& rule, int lit);

}  // namespace crules
