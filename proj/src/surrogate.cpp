#include "crules/surrogate.hpp"

#include <algorithm>
#include <cmath>

#include "crules/error.hpp"

namespace crules {

namespace {

const std::vector<double>& value_vector(const kernels::UnitValues& v, QFun q) {
  switch (q) {
    case QFun::q1: return v.q1;
    case QFun::q4: return v.q4;
    case QFun::q6: return v.q2;
  }
  return v.q2;
}

double masked_sum(const BitVec& cover, const std::vector<double>& v) {
  double acc = 0.0;
  cover.for_each_set([&](std::size_t i) { acc += v[i]; });
  return acc;
}

double taylor_at(double q, double q_anchor) {
  return std::log(q_anchor) + (q - q_anchor) / q_anchor;
}

}  // namespace

SurrogateAnchor build_anchor(const BinarizedDataset& ds, const Rule& anchor_rule,
                             const AnchorConfig& cfg) {
  SurrogateAnchor a;
  a.anchor = anchor_rule;
  a.lambda = cfg.lambda;
  a.min_support = cfg.min_support;

  const BitVec anchor_cov = rule_cover(anchor_rule, ds);

  // mu_m: weighted treated mean over the anchor's coverage.
  double sw = 0.0, swy = 0.0;
  anchor_cov.for_each_set([&](std::size_t i) {
    if (ds.treated.test(i)) {
      sw += ds.weights[i];
      swy += ds.weights[i] * ds.outcome[i];
    }
  });
  if (sw <= 0.0) fail(Errc::min_support_violated, "anchor covers no treated units");
  a.mu_m = swy / sw;

  a.values = kernels::UnitValues::build(ds, cfg.penalty_mask, cfg.epsilon);
  a.values.set_anchor_mu(ds, a.mu_m);

  StatsConfig scfg{cfg.lambda, cfg.min_support, cfg.penalty_mask, cfg.epsilon, a.mu_m};
  a.q_at_anchor = q_stats(anchor_rule, ds, scfg);
  if (a.q_at_anchor.flag != StatsFlag::ok || !(a.q_at_anchor.q1 > 0.0) ||
      !(a.q_at_anchor.q4 > 0.0) || (cfg.lambda != 0.0 && !(a.q_at_anchor.q5 > 0.0)))
    fail(Errc::min_support_violated, "anchor rule is infeasible");

  const int d = ds.n_literals();
  const int nt = kernels::resolve_threads(cfg.threads);

  // Prefix/suffix covers exploit partner adjacency: excluding a pair from
  // the all-literal intersection is a contiguous cut.
  std::vector<BitVec> prefix(d + 1), suffix(d + 1);
  prefix[0] = BitVec(ds.n_units, true);
  for (int j = 0; j < d; ++j) {
    prefix[j + 1] = prefix[j];
    prefix[j + 1] &= ds.coverage[j];
  }
  suffix[d] = BitVec(ds.n_units, true);
  for (int j = d - 1; j >= 0; --j) {
    suffix[j] = suffix[j + 1];
    suffix[j] &= ds.coverage[j];
  }

  for (int qi = 0; qi < 3; ++qi) {
    auto& tab = a.tables[qi];
    const auto& vals = value_vector(a.values, static_cast<QFun>(qi));
    tab.q_empty = masked_sum(prefix[0], vals);
    tab.q_anchor = masked_sum(anchor_cov, vals);
    tab.gain_empty.assign(d, 0.0);
    tab.gain_anchor.assign(d, 0.0);
    tab.gain_anchor_drop.assign(d, 0.0);
    tab.gain_universe.assign(d, 0.0);

#pragma omp parallel for schedule(static) num_threads(nt)
    for (int j = 0; j < d; ++j) {
      BitVec scratch;
      tab.gain_empty[j] = masked_sum(ds.coverage[j], vals) - tab.q_empty;
      if (anchor_rule.contains(j)) {
        BitVec drop = rule_cover(anchor_rule.without(j), ds);
        tab.gain_anchor_drop[j] = tab.q_anchor - masked_sum(drop, vals);
      } else {
        BitVec::and_of(scratch, anchor_cov, ds.coverage[j]);
        tab.gain_anchor[j] = masked_sum(scratch, vals) - tab.q_anchor;
      }
      const int lo = j & ~1;  // pair occupies ids {lo, lo+1}
      BitVec::and_of(scratch, prefix[lo], suffix[lo + 2]);
      const double q_ctx = masked_sum(scratch, vals);
      scratch &= ds.coverage[j];
      tab.gain_universe[j] = masked_sum(scratch, vals) - q_ctx;
    }
  }
  return a;
}

double variance_majorant(const Rule& rule, const BinarizedDataset& ds, double mu_m,
                         std::uint32_t min_support) {
  const BitVec cov = rule_cover(rule, ds);
  const std::size_t nt = cov.count_and(ds.treated);
  const std::size_t nc = cov.count_and(ds.control);
  if (nt < min_support || nc < min_support)
    fail(Errc::min_support_violated, "MinSupportViolated in variance_majorant");
  double sw = 0.0;
  cov.for_each_set([&](std::size_t i) {
    if (ds.treated.test(i)) sw += ds.weights[i];
  });
  return kernels::cover_sq_dev(cov, ds.treated, ds, mu_m) / sw;
}

namespace {

double bound_from_table(const SurrogateAnchor::GainTable& tab, const Rule& anchor,
                        const Rule& rule, BoundKind kind) {
  double b1 = tab.q_anchor, b2 = tab.q_anchor;
  for (int j : anchor.lits) {
    if (!rule.contains(j)) {
      b1 -= tab.gain_anchor_drop[j];
      b2 -= tab.gain_universe[j];
    }
  }
  for (int j : rule.lits) {
    if (!anchor.contains(j)) {
      b1 += tab.gain_empty[j];
      b2 += tab.gain_anchor[j];
    }
  }
  switch (kind) {
    case BoundKind::b1: return b1;
    case BoundKind::b2: return b2;
    case BoundKind::best: return std::max(b1, b2);
  }
  return b2;
}

}  // namespace

double modular_bound(QFun q, const SurrogateAnchor& anchor, const Rule& rule, BoundKind kind) {
  return bound_from_table(anchor.table(q), anchor.anchor, rule, kind);
}

double surrogate_from_sums(const kernels::CoverSums& sums, const Rule& rule,
                           const SurrogateAnchor& anchor) {
  if (sums.n_treated < anchor.min_support || sums.n_control < anchor.min_support)
    return kNegInf;

  const double b_q1 = modular_bound(QFun::q1, anchor, rule, BoundKind::b2);
  const double b_q4 = modular_bound(QFun::q4, anchor, rule, BoundKind::b2);
  if (!(b_q1 > 0.0) || !(b_q4 > 0.0)) return kNegInf;

  const auto& qa = anchor.q_at_anchor;
  double g = std::log(b_q1) + std::log(b_q4) - taylor_at(sums.q2, qa.q2) -
             taylor_at(sums.q3, qa.q3);
  if (anchor.lambda != 0.0) {
    const double b_q6 = modular_bound(QFun::q6, anchor, rule, BoundKind::b2);
    if (!(b_q6 > 0.0)) return kNegInf;
    g += anchor.lambda * (std::log(b_q6) - taylor_at(sums.dev, qa.q5));
  }
  return g;
}

double surrogate_value(const Rule& rule, const SurrogateAnchor& anchor,
                       const BinarizedDataset& ds) {
  const BitVec cov = rule_cover(rule, ds);
  const kernels::CoverSums sums = kernels::cover_sums(cov, ds.treated, anchor.values);
  return surrogate_from_sums(sums, rule, anchor);
}

double marginal_gain(const SurrogateAnchor& anchor, const BinarizedDataset& ds,
                     const Rule& rule, int lit) {
  if (rule.contains(lit) || rule.contains(ds.partner(lit)))
    fail(Errc::bad_config, "marginal_gain: literal or its partner already in the rule");
  const double g_with = surrogate_value(rule.with(lit, ds), anchor, ds);
  if (g_with == kNegInf) return kNegInf;
  return g_with - surrogate_value(rule, anchor, ds);
}

}  // namespace crules
