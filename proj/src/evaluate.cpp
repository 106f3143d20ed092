#include "crules/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "crules/error.hpp"
#include "crules/kernels.hpp"
#include "crules/rng.hpp"

namespace crules {

double pehe(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size() || pred.empty())
    fail(Errc::length_mismatch, "LengthMismatch in pehe");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - truth[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(pred.size()));
}

double mape(std::span<const double> pred, std::span<const double> truth,
            std::size_t* excluded) {
  if (pred.size() != truth.size() || pred.empty())
    fail(Errc::length_mismatch, "LengthMismatch in mape");
  double acc = 0.0;
  std::size_t used = 0, skipped = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (truth[i] == 0.0) {
      ++skipped;
      continue;
    }
    acc += std::abs((pred[i] - truth[i]) / truth[i]);
    ++used;
  }
  if (excluded) *excluded = skipped;
  if (used == 0) fail(Errc::all_truth_zero, "AllTruthZero in mape");
  return acc / static_cast<double>(used);
}

RuleMetrics subgroup_metrics(const Rule& rule, const BinarizedDataset& ds,
                             const std::vector<double>* truth_te, std::uint32_t min_support) {
  StatsConfig scfg;
  scfg.lambda = 0.0;
  scfg.min_support = min_support;
  const RuleStats st = q_stats(rule, ds, scfg);
  if (st.flag == StatsFlag::min_support)
    fail(Errc::min_support_violated, "MinSupportViolated in subgroup_metrics");

  RuleMetrics m;
  m.cate = st.tau;
  m.variance = st.sigma2;
  const BitVec cov = rule_cover(rule, ds);
  m.coverage = static_cast<std::uint32_t>(cov.count());

  if (truth_te) {
    std::vector<double> t, p;
    t.reserve(m.coverage);
    cov.for_each_set([&](std::size_t i) { t.push_back((*truth_te)[i]); });
    m.avg_ite = std::accumulate(t.begin(), t.end(), 0.0) / static_cast<double>(t.size());
    p.assign(t.size(), st.tau);
    m.pehe = pehe(p, t);
    bool any_nonzero = false;
    for (double v : t)
      if (v != 0.0) any_nonzero = true;
    if (any_nonzero) m.mape = mape(p, t);
  }
  return m;
}

SetMetrics interpretability_metrics(const RuleSet& rs, const BinarizedDataset& ds) {
  SetMetrics m;
  if (rs.rules.empty()) return m;

  double len_acc = 0.0;
  std::vector<BitVec> covers;
  covers.reserve(rs.rules.size());
  for (const auto& e : rs.rules) {
    len_acc += e.rule.size();
    covers.push_back(rule_cover(e.rule, ds));
  }
  m.avg_len = len_acc / static_cast<double>(rs.rules.size());

  const double n = static_cast<double>(ds.n_units);
  BitVec all_union(ds.n_units);
  double ov_acc = 0.0, jac_acc = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < covers.size(); ++a) {
    all_union |= covers[a];
    for (std::size_t b = a + 1; b < covers.size(); ++b) {
      const double inter = static_cast<double>(covers[a].count_and(covers[b]));
      const double uni = static_cast<double>(covers[a].count_or(covers[b]));
      ov_acc += inter / n;
      jac_acc += uni > 0 ? inter / uni : 0.0;
      ++pairs;
    }
  }
  if (pairs > 0) {
    m.overlap_pct = 100.0 * ov_acc / static_cast<double>(pairs);
    m.jaccard_pct = 100.0 * jac_acc / static_cast<double>(pairs);
  }
  m.coverage_pct = 100.0 * static_cast<double>(all_union.count()) / n;
  return m;
}

MetricsReport evaluate_ruleset(const RuleSet& rs, const BinarizedDataset& ds,
                               const std::vector<double>* truth_te) {
  MetricsReport rep;
  rep.n_units = ds.n_units;
  for (const auto& e : rs.rules)
    rep.per_rule.push_back(subgroup_metrics(e.rule, ds, truth_te, 0));
  rep.per_set = interpretability_metrics(rs, ds);

  if (truth_te && !rs.rules.empty()) {
    std::vector<double> pred, tru;
    for (std::size_t i = 0; i < ds.n_units; ++i) {
      const auto est = ruleset_predict(rs, ds, i);
      if (est) {
        pred.push_back(*est);
        tru.push_back((*truth_te)[i]);
      }
    }
    if (!pred.empty()) {
      rep.set_pehe = pehe(pred, tru);
      bool any_nonzero = false;
      for (double v : tru)
        if (v != 0.0) any_nonzero = true;
      if (any_nonzero) rep.set_mape = mape(pred, tru);
    }
  }
  return rep;
}

OracleResult brute_force_best_rule(const BinarizedDataset& ds, const SearchConfig& cfg,
                                   int max_len, const OverlapMask* mask) {
  const int d = ds.n_literals();
  const int n_pairs = d / 2;

  // Count C(pairs, k) * 2^k for k = 1..max_len before enumerating.
  double total = 0.0;
  double choose = 1.0;
  for (int k = 1; k <= std::min(max_len, n_pairs); ++k) {
    choose = choose * (n_pairs - k + 1) / k;
    total += choose * std::pow(2.0, k);
    if (total > 1e6)
      fail(Errc::search_space_too_large,
           "SearchSpaceTooLarge: more than 1e6 rules at max_len " + std::to_string(max_len));
  }

  std::vector<std::vector<int>> rules;
  std::vector<int> current;
  // Pairs are adjacent ids {2p, 2p+1}; pick at most one member per pair.
  auto recurse = [&](auto&& self, int pair, int remaining) -> void {
    if (!current.empty()) rules.push_back(current);
    if (remaining == 0 || pair >= n_pairs) return;
    for (int p = pair; p < n_pairs; ++p) {
      for (int side = 0; side < 2; ++side) {
        current.push_back(2 * p + side);
        self(self, p + 1, remaining - 1);
        current.pop_back();
      }
    }
  };
  recurse(recurse, 0, std::min(max_len, n_pairs));

  const double eps = cfg.epsilon > 0.0 ? cfg.epsilon : default_epsilon(ds);
  StatsConfig scfg;
  scfg.lambda = cfg.lambda;
  scfg.min_support = cfg.min_support;
  scfg.epsilon = eps;
  scfg.penalty_mask = mask ? &mask->bits : nullptr;

  std::vector<double> fs(rules.size(), kNegInf);
  const int nt = kernels::resolve_threads(cfg.threads);
#pragma omp parallel for schedule(static) num_threads(nt)
  for (std::int64_t r = 0; r < static_cast<std::int64_t>(rules.size()); ++r) {
    Rule rule{rules[r]};
    std::sort(rule.lits.begin(), rule.lits.end());
    fs[r] = q_stats(rule, ds, scfg).f_value;
  }

  OracleResult out;
  for (std::size_t r = 0; r < rules.size(); ++r) {
    if (fs[r] == kNegInf) continue;
    Rule rule{rules[r]};
    std::sort(rule.lits.begin(), rule.lits.end());
    out.table.push_back({rule, fs[r]});
    if (fs[r] > out.best_f) {
      out.best_f = fs[r];
      out.best = std::move(rule);
    }
  }
  if (out.table.empty()) fail(Errc::no_feasible_rule, "NoFeasibleRule: oracle found none");
  return out;
}

FittedModel fit_pipeline(const RawTable& table, const PipelineConfig& cfg) {
  FittedModel model;
  model.dataset = binarize(table, cfg.bins);
  if (cfg.use_propensity_column && table.propensity) {
    compute_weights(model.dataset, *table.propensity, cfg.propensity.clip_lo,
                    cfg.propensity.clip_hi);
  } else {
    model.propensity = fit_propensity(model.dataset, cfg.propensity);
    compute_weights(model.dataset, *model.propensity);
  }
  model.population_ate = ipw_ate(model.dataset);
  model.rules = learn_ruleset(model.dataset, cfg.search);
  return model;
}

std::vector<int> stratified_folds(const RawTable& table, int folds, std::uint64_t seed) {
  std::vector<int> treated_idx, control_idx;
  for (std::size_t i = 0; i < table.n_units; ++i)
    (table.treatment[i] ? treated_idx : control_idx).push_back(static_cast<int>(i));
  Rng rng(seed);
  Rng r1 = rng.fork(1), r2 = rng.fork(2);
  r1.shuffle(treated_idx);
  r2.shuffle(control_idx);
  std::vector<int> fold_of(table.n_units, 0);
  for (std::size_t k = 0; k < treated_idx.size(); ++k)
    fold_of[treated_idx[k]] = static_cast<int>(k % folds);
  // Offsetting the control stratum by the treated remainder keeps total
  // fold sizes exact when folds divides n.
  const std::size_t offset = treated_idx.size() % folds;
  for (std::size_t k = 0; k < control_idx.size(); ++k)
    fold_of[control_idx[k]] = static_cast<int>((k + offset) % folds);
  return fold_of;
}

namespace {

RawTable subset_rows(const RawTable& table, const std::vector<int>& rows) {
  RawTable out;
  out.n_units = rows.size();
  out.covariates.reserve(table.covariates.size());
  for (const auto& col : table.covariates) {
    RawColumn c;
    c.name = col.name;
    c.type = col.type;
    if (col.type == ColumnType::numeric) {
      c.values.reserve(rows.size());
      for (int r : rows) c.values.push_back(col.values[r]);
    } else {
      c.labels.reserve(rows.size());
      for (int r : rows) c.labels.push_back(col.labels[r]);
    }
    out.covariates.push_back(std::move(c));
  }
  out.treatment.reserve(rows.size());
  for (int r : rows) out.treatment.push_back(table.treatment[r]);
  out.outcome.reserve(rows.size());
  for (int r : rows) out.outcome.push_back(table.outcome[r]);
  if (table.propensity) {
    std::vector<double> e;
    e.reserve(rows.size());
    for (int r : rows) e.push_back((*table.propensity)[r]);
    out.propensity = std::move(e);
  }
  if (table.true_ite) {
    std::vector<double> t;
    t.reserve(rows.size());
    for (int r : rows) t.push_back((*table.true_ite)[r]);
    out.true_ite = std::move(t);
  }
  return out;
}

/// Fits on the training rows and scores the learned rules on the test rows.
FoldScore score_one_fold(const RawTable& table, const std::vector<int>& train_rows,
                         const std::vector<int>& test_rows, const PipelineConfig& cfg) {
  const RawTable train = subset_rows(table, train_rows);
  const RawTable test = subset_rows(table, test_rows);

  FoldScore score;
  FittedModel model;
  try {
    model = fit_pipeline(train, cfg);
  } catch (const Error& e) {
    if (e.code() == Errc::no_feasible_rule) return score;
    throw;
  }
  if (model.rules.rules.empty()) return score;
  score.n_rules = static_cast<int>(model.rules.rules.size());

  // Bind the training literal universe to the held-out rows; weights come
  // from the training propensity model applied to the held-out units.
  BinarizedDataset test_ds =
      bind_literals(test, model.dataset.literals, model.dataset.y_offset);
  if (cfg.use_propensity_column && test.propensity) {
    compute_weights(test_ds, *test.propensity, cfg.propensity.clip_lo, cfg.propensity.clip_hi);
  } else {
    compute_weights(test_ds, *model.propensity);
  }

  StatsConfig scfg;
  scfg.lambda = cfg.search.lambda;
  scfg.min_support = cfg.search.min_support;

  double f_acc = 0.0, cate_acc = 0.0, var_acc = 0.0;
  int usable = 0;
  for (const auto& e : model.rules.rules) {
    const RuleStats st = q_stats(e.rule, test_ds, scfg);
    if (st.f_value == kNegInf) continue;
    f_acc += st.f_value;
    cate_acc += st.tau;
    var_acc += st.sigma2;
    ++usable;
  }
  if (usable == 0) return score;
  score.mean_rule_f = f_acc / usable;
  score.avg_cate = cate_acc / usable;
  score.avg_variance = var_acc / usable;
  score.interpretability = interpretability_metrics(model.rules, test_ds);

  if (test.true_ite) {
    const MetricsReport rep = evaluate_ruleset(model.rules, test_ds, &*test.true_ite);
    score.pehe = rep.set_pehe;
    score.mape = rep.set_mape;
    double ite_acc = 0.0;
    int ite_n = 0;
    for (const auto& rm : rep.per_rule)
      if (rm.avg_ite) {
        ite_acc += *rm.avg_ite;
        ++ite_n;
      }
    if (ite_n > 0) score.avg_ite = ite_acc / ite_n;
  }
  return score;
}

void check_fold_counts(const RawTable& table, const std::vector<int>& fold_of, int folds) {
  for (int f = 0; f < folds; ++f) {
    int nt = 0, nc = 0;
    for (std::size_t i = 0; i < table.n_units; ++i)
      if (fold_of[i] == f) (table.treatment[i] ? nt : nc)++;
    if (nt < 2 || nc < 2)
      fail(Errc::insufficient_units,
           "InsufficientUnits: fold " + std::to_string(f) + " has " + std::to_string(nt) +
               " treated / " + std::to_string(nc) + " control units");
  }
}

}  // namespace

CvResult cross_validate(const RawTable& table, const GridSpec& grid, int folds,
                        std::uint64_t seed, const PipelineConfig& base) {
  if (folds < 2) fail(Errc::bad_config, "folds must be >= 2");
  const std::vector<int> fold_of = stratified_folds(table, folds, seed);
  check_fold_counts(table, fold_of, folds);

  CvResult result;
  for (double lambda : grid.lambdas)
    for (int len : grid.max_lens) {
      CvCell cell;
      cell.lambda = lambda;
      cell.max_len = len;
      cell.folds.resize(folds);
      result.grid.push_back(std::move(cell));
    }

  struct Job {
    int cell;
    int fold;
  };
  std::vector<Job> jobs;
  for (std::size_t c = 0; c < result.grid.size(); ++c)
    for (int f = 0; f < folds; ++f) jobs.push_back({static_cast<int>(c), f});

  const int nt = kernels::resolve_threads(base.search.threads);
#pragma omp parallel for schedule(dynamic) num_threads(nt)
  for (std::int64_t j = 0; j < static_cast<std::int64_t>(jobs.size()); ++j) {
    const Job job = jobs[j];
    CvCell& cell = result.grid[job.cell];
    std::vector<int> train_rows, test_rows;
    for (std::size_t i = 0; i < table.n_units; ++i)
      (fold_of[i] == job.fold ? test_rows : train_rows).push_back(static_cast<int>(i));
    PipelineConfig cfg = base;
    cfg.search.lambda = cell.lambda;
    cfg.search.max_len = cell.max_len;
    cfg.search.threads = 1;  // jobs are the parallel axis
    cfg.search.on_progress = nullptr;
    cell.folds[job.fold] = score_one_fold(table, train_rows, test_rows, cfg);
  }

  for (auto& cell : result.grid) {
    double acc = 0.0;
    bool any_neg_inf = false;
    for (const auto& fs : cell.folds) {
      if (fs.mean_rule_f == kNegInf) any_neg_inf = true;
      else acc += fs.mean_rule_f;
    }
    if (any_neg_inf) {
      cell.mean_score = kNegInf;
      continue;
    }
    cell.mean_score = acc / folds;
    double var = 0.0;
    for (const auto& fs : cell.folds) {
      const double d = fs.mean_rule_f - cell.mean_score;
      var += d * d;
    }
    cell.std_score = std::sqrt(var / folds);
  }

  std::size_t best = 0;
  for (std::size_t c = 1; c < result.grid.size(); ++c)
    if (result.grid[c].mean_score > result.grid[best].mean_score) best = c;
  result.best_lambda = result.grid[best].lambda;
  result.best_max_len = result.grid[best].max_len;
  return result;
}

std::map<std::string, int> select_bin_count(const RawTable& table,
                                            const std::vector<int>& candidate_bins, int folds,
                                            const PipelineConfig& base) {
  if (candidate_bins.empty()) fail(Errc::bad_config, "no candidate bin counts");
  for (int b : candidate_bins)
    if (b < 2 || b > 64) fail(Errc::bad_config, "candidate bin count outside [2, 64]");

  auto all_numeric = [&]() {
    std::map<std::string, int> out;
    for (const auto& col : table.covariates)
      if (col.type == ColumnType::numeric) out[col.name] = 0;
    return out;
  };

  std::vector<int> cands(candidate_bins);
  std::sort(cands.begin(), cands.end());
  cands.erase(std::unique(cands.begin(), cands.end()), cands.end());

  std::map<std::string, int> result = all_numeric();
  if (cands.size() == 1) {
    for (auto& [k, v] : result) v = cands[0];
    return result;
  }

  if (folds < 2) fail(Errc::bad_config, "folds must be >= 2");
  const std::vector<int> fold_of = stratified_folds(table, folds, base.search.seed);
  check_fold_counts(table, fold_of, folds);

  double best_score = kNegInf;
  int best_bins = cands.front();
  for (int bins : cands) {  // ascending: ties keep the smaller count
    PipelineConfig cfg = base;
    cfg.bins.default_bins = bins;
    cfg.bins.per_column.clear();
    double acc = 0.0;
    bool degenerate = false;
    for (int f = 0; f < folds; ++f) {
      std::vector<int> train_rows, test_rows;
      for (std::size_t i = 0; i < table.n_units; ++i)
        (fold_of[i] == f ? test_rows : train_rows).push_back(static_cast<int>(i));
      const FoldScore fs = score_one_fold(table, train_rows, test_rows, cfg);
      if (fs.mean_rule_f == kNegInf) {
        degenerate = true;
        break;
      }
      acc += fs.mean_rule_f;
    }
    if (degenerate) continue;
    const double score = acc / folds;
    if (score > best_score) {
      best_score = score;
      best_bins = bins;
    }
  }
  for (auto& [k, v] : result) v = best_bins;
  return result;
}

}  // namespace crules
