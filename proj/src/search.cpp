#include "crules/search.hpp"

#include <algorithm>
#include <cmath>

#include "crules/error.hpp"
#include "crules/kernels.hpp"

namespace crules {

namespace {

StatsConfig stats_config(const SearchConfig& cfg, const OverlapMask& mask, double epsilon) {
  StatsConfig s;
  s.lambda = cfg.lambda;
  s.min_support = cfg.min_support;
  s.penalty_mask = &mask.bits;
  s.epsilon = epsilon;
  return s;
}

/// Candidate literals addable to the rule: not present, partner not present.
std::vector<int> addable(const Rule& rule, const BinarizedDataset& ds) {
  std::vector<int> out;
  out.reserve(ds.n_literals());
  for (int j = 0; j < ds.n_literals(); ++j)
    if (!rule.contains(j) && !rule.contains(ds.partner(j))) out.push_back(j);
  return out;
}

/// f(R + cand) for every candidate, via the canonical q_stats path.
void batch_objective(const BitVec& base, const std::vector<int>& cands,
                     const BinarizedDataset& ds, const StatsConfig& scfg, int threads,
                     std::vector<double>& out) {
  out.assign(cands.size(), kNegInf);
  const int nt = kernels::resolve_threads(threads);
#pragma omp parallel for schedule(static) num_threads(nt)
  for (std::int64_t c = 0; c < static_cast<std::int64_t>(cands.size()); ++c) {
    BitVec cov;
    BitVec::and_of(cov, base, ds.coverage[cands[c]]);

    RuleStats st;
    double sw = 0.0, swy = 0.0;
    cov.for_each_set([&](std::size_t i) {
      const double w = ds.weights[i];
      const double wy = w * ds.outcome[i];
      if (ds.treated.test(i)) {
        ++st.n_treated_covered;
        st.q2 += w;
        sw += w;
        swy += wy;
        st.q1 += (scfg.penalty_mask && scfg.penalty_mask->test(i)) ? scfg.epsilon : wy;
      } else {
        ++st.n_control_covered;
        st.q3 += wy;
        st.q4 += w;
      }
    });
    if (st.n_treated_covered < scfg.min_support || st.n_control_covered < scfg.min_support ||
        st.n_treated_covered == 0 || st.n_control_covered == 0)
      continue;
    st.sigma2 = kernels::cover_sq_dev(cov, ds.treated, ds, swy / sw) / sw;
    out[c] = objective(st, scfg.lambda);
  }
}

/// g(base & cand) for every candidate against a fixed anchor.
void batch_surrogate(const BitVec& base, const Rule& base_rule, const std::vector<int>& cands,
                     const BinarizedDataset& ds, const SurrogateAnchor& anchor, int threads,
                     std::vector<double>& out) {
  out.assign(cands.size(), kNegInf);
  std::vector<kernels::CoverSums> sums;
  kernels::batch_sums(base, cands, ds, anchor.values, sums, threads);
  for (std::size_t c = 0; c < cands.size(); ++c) {
    Rule cand = base_rule;
    cand.lits.insert(std::lower_bound(cand.lits.begin(), cand.lits.end(), cands[c]), cands[c]);
    out[c] = surrogate_from_sums(sums[c], cand, anchor);
  }
}

/// Index of the strictly best finite value, lowest index on ties.
int argmax_strict(const std::vector<double>& vals, double floor) {
  int best = -1;
  double best_v = floor;
  for (std::size_t i = 0; i < vals.size(); ++i)
    if (vals[i] > best_v) {
      best_v = vals[i];
      best = static_cast<int>(i);
    }
  return best;
}

}  // namespace

double default_epsilon(const BinarizedDataset& ds) {
  double acc = 0.0;
  std::size_t n = 0;
  ds.treated.for_each_set([&](std::size_t i) {
    acc += ds.weights[i] * ds.outcome[i];
    ++n;
  });
  return n == 0 ? 1e-3 : 1e-3 * acc / static_cast<double>(n);
}

Rule greedy_init(const BinarizedDataset& ds, const SearchConfig& cfg, const OverlapMask& mask) {
  if (!ds.has_weights()) fail(Errc::bad_config, "weights not computed");
  const double eps = cfg.epsilon > 0.0 ? cfg.epsilon : default_epsilon(ds);
  const StatsConfig scfg = stats_config(cfg, mask, eps);

  Rule rule;
  RuleStats st = q_stats(rule, ds, scfg);
  double f = st.f_value;

  std::vector<double> fs;
  while (rule.size() < cfg.max_len) {
    const std::vector<int> cands = addable(rule, ds);
    if (cands.empty()) break;
    const BitVec base = rule_cover(rule, ds);
    batch_objective(base, cands, ds, scfg, cfg.threads, fs);
    const int pick = argmax_strict(fs, std::isinf(f) ? kNegInf : f);
    if (pick < 0 || fs[pick] == kNegInf) break;
    if (!std::isinf(f) && fs[pick] <= f) break;
    rule = rule.with(cands[pick], ds);
    f = fs[pick];
  }

  if (rule.empty() && f == kNegInf)
    fail(Errc::no_feasible_rule, "NoFeasibleRule: empty rule and every singleton infeasible");
  return rule;
}

Rule local_search(const SurrogateAnchor& anchor, const BinarizedDataset& ds, Rule init,
                  const SearchConfig& cfg, LocalSearchStats* stats) {
  const int d = ds.n_literals();
  const int move_cap = 10 * d * std::max(1, cfg.max_len);
  LocalSearchStats local;
  Rule rule = std::move(init);
  double g = surrogate_value(rule, anchor, ds);
  std::vector<double> gs;

  bool changed = true;
  while (changed) {
    changed = false;

    // Additions: best positive marginal gain, while room remains.
    while (rule.size() < cfg.max_len && local.moves < move_cap) {
      const std::vector<int> cands = addable(rule, ds);
      if (cands.empty()) break;
      const BitVec base = rule_cover(rule, ds);
      batch_surrogate(base, rule, cands, ds, anchor, cfg.threads, gs);
      const int pick = argmax_strict(gs, g + cfg.f_tolerance);
      if (pick < 0) break;
      rule = rule.with(cands[pick], ds);
      g = gs[pick];
      ++local.moves;
      changed = true;
    }

    // Removals: drop j while its own marginal contribution is <= 0,
    // i.e. the rule without it scores at least as well.
    while (!rule.empty() && local.moves < move_cap) {
      int pick = -1;
      double best = kNegInf;
      for (int j : rule.lits) {
        const double gj = surrogate_value(rule.without(j), anchor, ds);
        if (gj >= g && gj > best) {
          best = gj;
          pick = j;
        }
      }
      if (pick < 0) break;
      rule = rule.without(pick);
      g = best;
      ++local.moves;
      changed = true;
    }

    // Swaps: strict improvement only, keeping the length fixed.
    while (!rule.empty() && local.moves < move_cap) {
      int best_i = -1, best_j = -1;
      double best = g + cfg.f_tolerance;
      for (int i : rule.lits) {
        const Rule reduced = rule.without(i);
        const BitVec base = rule_cover(reduced, ds);
        std::vector<int> cands;
        for (int j = 0; j < d; ++j)
          if (j != i && !reduced.contains(j) && !reduced.contains(ds.partner(j)) &&
              !rule.contains(j))
            cands.push_back(j);
        batch_surrogate(base, reduced, cands, ds, anchor, cfg.threads, gs);
        for (std::size_t c = 0; c < cands.size(); ++c)
          if (gs[c] > best) {
            best = gs[c];
            best_i = i;
            best_j = cands[c];
          }
      }
      if (best_i < 0) break;
      rule = rule.without(best_i).with(best_j, ds);
      g = best;
      ++local.moves;
      changed = true;
    }

    if (local.moves >= move_cap) {
      local.move_cap_hit = true;
      break;
    }
  }

  if (stats) *stats = local;
  return rule;
}

Rule optimize_rule(const BinarizedDataset& ds, const SearchConfig& cfg, const OverlapMask& mask,
                   MmTrace* trace) {
  const double eps = cfg.epsilon > 0.0 ? cfg.epsilon : default_epsilon(ds);
  const StatsConfig scfg = stats_config(cfg, mask, eps);

  Rule current = greedy_init(ds, cfg, mask);
  double f = q_stats(current, ds, scfg).f_value;
  if (trace) trace->f_per_iter.push_back(f);

  Rule best = current;
  double best_f = f;

  AnchorConfig acfg{cfg.lambda, cfg.min_support, &mask.bits, eps, cfg.threads};

  for (int m = 0; m < cfg.max_mm_iters; ++m) {
    if (f == kNegInf || current.empty()) break;
    const SurrogateAnchor anchor = build_anchor(ds, current, acfg);
    LocalSearchStats ls;
    Rule next = local_search(anchor, ds, current, cfg, &ls);
    if (trace && ls.move_cap_hit) trace->move_cap_hit = true;

    const double f_next = q_stats(next, ds, scfg).f_value;
    if (trace) trace->f_per_iter.push_back(f_next);
    if (cfg.on_progress)
      cfg.on_progress(ProgressEvent{0, m + 1, f_next, next.size()});
    if (f_next > best_f) {
      best = next;
      best_f = f_next;
    }
    if (next == current || std::abs(f_next - f) < cfg.f_tolerance) break;
    current = std::move(next);
    f = f_next;
  }
  return best;
}

RuleSet learn_ruleset(const BinarizedDataset& ds, const SearchConfig& cfg) {
  if (cfg.max_rules < 1 || cfg.max_len < 1)
    fail(Errc::bad_config, "K and L must be >= 1");
  const double eps = cfg.epsilon > 0.0 ? cfg.epsilon : default_epsilon(ds);

  RuleSet rs;
  rs.lambda = cfg.lambda;
  rs.max_rules = cfg.max_rules;
  rs.max_len = cfg.max_len;
  rs.epsilon = eps;
  rs.min_support = cfg.min_support;
  rs.seed = cfg.seed;

  OverlapMask mask = OverlapMask::empty(ds);
  for (int k = 0; k < cfg.max_rules; ++k) {
    Rule rule;
    try {
      SearchConfig inner = cfg;
      inner.epsilon = eps;
      if (cfg.on_progress) {
        const int rule_index = k + 1;
        inner.on_progress = [&cfg, rule_index](const ProgressEvent& ev) {
          ProgressEvent copy = ev;
          copy.rule_index = rule_index;
          cfg.on_progress(copy);
        };
      }
      rule = optimize_rule(ds, inner, mask);
    } catch (const Error& e) {
      if (e.code() == Errc::no_feasible_rule) break;
      throw;
    }
    if (rule.empty()) break;

    StatsConfig penalized = stats_config(cfg, mask, eps);
    const RuleStats st_pen = q_stats(rule, ds, penalized);
    if (!(st_pen.f_value > 0.0)) break;

    StatsConfig plain;
    plain.lambda = cfg.lambda;
    plain.min_support = cfg.min_support;
    const RuleStats st = q_stats(rule, ds, plain);

    const BitVec cov = rule_cover(rule, ds);
    RuleSet::Entry entry;
    entry.rule = rule;
    entry.tau = st.tau;
    entry.sigma2 = st.sigma2;
    entry.f = st_pen.f_value;
    entry.coverage = static_cast<std::uint32_t>(cov.count());
    rs.rules.push_back(std::move(entry));

    BitVec treated_cov;
    BitVec::and_of(treated_cov, cov, ds.treated);
    mask.bits |= treated_cov;
  }
  return rs;
}

}  // namespace crules
