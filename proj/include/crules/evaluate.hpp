#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crules/dataset.hpp"
#include "crules/propensity.hpp"
#include "crules/rulecore.hpp"
#include "crules/search.hpp"
#include "crules/synth.hpp"
#include "crules/table.hpp"

namespace crules {

/// Root-mean-square error between predicted and true per-unit effects.
double pehe(std::span<const double> pred, std::span<const double> truth);

/// Mean absolute percentage error; zero-truth units are excluded and their
/// count reported through excluded (AllTruthZero if none remain).
double mape(std::span<const double> pred, std::span<const double> truth,
            std::size_t* excluded = nullptr);

struct RuleMetrics {
  double cate = 0.0;     // tau via the weighted estimate on covered units
  double variance = 0.0; // treated-outcome variance within the subgroup
  std::uint32_t coverage = 0;
  std::optional<double> avg_ite;  // mean true ITE over covered units
  std::optional<double> pehe;     // per-rule: every covered unit predicted tau
  std::optional<double> mape;
};

RuleMetrics subgroup_metrics(const Rule& rule, const BinarizedDataset& ds,
                             const std::vector<double>* truth_te, std::uint32_t min_support);

struct SetMetrics {
  double avg_len = 0.0;
  double overlap_pct = 0.0;   // mean pairwise |A∩B| / n_units, in percent
  double jaccard_pct = 0.0;   // secondary: mean pairwise Jaccard, in percent
  double coverage_pct = 0.0;  // |union| / n_units, in percent
};

SetMetrics interpretability_metrics(const RuleSet& rs, const BinarizedDataset& ds);

struct MetricsReport {
  std::vector<RuleMetrics> per_rule;
  SetMetrics per_set;
  std::optional<double> set_pehe;  // via ruleset_predict over covered units
  std::optional<double> set_mape;
  std::size_t n_units = 0;
};

MetricsReport evaluate_ruleset(const RuleSet& rs, const BinarizedDataset& ds,
                               const std::vector<double>* truth_te);

struct OracleEntry {
  Rule rule;
  double f = kNegInf;
};

struct OracleResult {
  Rule best;
  double best_f = kNegInf;
  std::vector<OracleEntry> table;  // every feasible rule up to max_len
};

/// Exhaustive f over all non-contradictory rules with |R| <= max_len.
/// Guards the enumeration at 10^6 rules.
OracleResult brute_force_best_rule(const BinarizedDataset& ds, const SearchConfig& cfg,
                                   int max_len, const OverlapMask* mask = nullptr);

struct PipelineConfig {
  BinSpec bins;
  PropensityConfig propensity;
  SearchConfig search;
  bool use_propensity_column = false;  // use table.propensity when present
};

struct FittedModel {
  BinarizedDataset dataset;
  RuleSet rules;
  double population_ate = 0.0;
  std::optional<PropensityModel> propensity;  // absent on the precomputed path
};

/// binarize -> weights -> learn_ruleset, the shared path under the CLI,
/// cross-validation and bin selection.
FittedModel fit_pipeline(const RawTable& table, const PipelineConfig& cfg);

struct GridSpec {
  std::vector<double> lambdas = {0.1, 0.5, 1.0, 1.5};
  std::vector<int> max_lens = {3, 4, 5, 6};
};

struct FoldScore {
  double mean_rule_f = kNegInf;  // held-out mean objective over learned rules
  int n_rules = 0;
  std::optional<double> pehe;
  std::optional<double> mape;
  double avg_cate = 0.0;
  std::optional<double> avg_ite;
  double avg_variance = 0.0;
  SetMetrics interpretability;
};

struct CvCell {
  double lambda = 0.0;
  int max_len = 0;
  std::vector<FoldScore> folds;
  double mean_score = kNegInf;
  double std_score = 0.0;
};

struct CvResult {
  double best_lambda = 0.0;
  int best_max_len = 0;
  std::vector<CvCell> grid;
};

/// Stratified-by-treatment k-fold grid search; scores a configuration by
/// the held-out mean rule objective.
CvResult cross_validate(const RawTable& table, const GridSpec& grid, int folds,
                        std::uint64_t seed, const PipelineConfig& base);

/// Picks one bin count for all numeric columns by k-fold held-out score.
/// Ties break toward fewer bins.
std::map<std::string, int> select_bin_count(const RawTable& table,
                                            const std::vector<int>& candidate_bins, int folds,
                                            const PipelineConfig& base);

/// Stratified fold ids (0..folds-1 per unit), deterministic in seed.
std::vector<int> stratified_folds(const RawTable& table, int folds, std::uint64_t seed);

}  // namespace crules
