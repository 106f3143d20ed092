#include "crules/rulecore.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "crules/error.hpp"
#include "crules/kernels.hpp"

namespace crules {

Rule Rule::make(std::vector<int> ids, const BinarizedDataset& ds) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  for (int id : ids) {
    if (id < 0 || id >= ds.n_literals())
      fail(Errc::unknown_literal, "UnknownLiteral: id " + std::to_string(id));
    if (std::binary_search(ids.begin(), ids.end(), ds.partner(id)))
      fail(Errc::bad_config, "rule contains literal " + std::to_string(id) +
                                 " together with its negation partner");
  }
  return Rule{std::move(ids)};
}

bool Rule::contains(int id) const {
  return std::binary_search(lits.begin(), lits.end(), id);
}

Rule Rule::with(int id, const BinarizedDataset& ds) const {
  std::vector<int> ids = lits;
  ids.push_back(id);
  return make(std::move(ids), ds);
}

Rule Rule::without(int id) const {
  Rule r;
  r.lits.reserve(lits.size());
  for (int j : lits)
    if (j != id) r.lits.push_back(j);
  return r;
}

std::string Rule::text(const BinarizedDataset& ds) const {
  if (lits.empty()) return "TRUE";
  std::string out;
  for (std::size_t k = 0; k < lits.size(); ++k) {
    if (k) out += " AND ";
    out += ds.literals[lits[k]].describe();
  }
  return out;
}

std::string rule_line(const Rule& rule, double tau, const BinarizedDataset& ds) {
  std::ostringstream ss;
  ss.precision(10);
  ss << "IF " << rule.text(ds) << " THEN tau = " << tau;
  return ss.str();
}

BitVec rule_cover(const Rule& rule, const BinarizedDataset& ds) {
  BitVec cov(ds.n_units, true);
  for (int id : rule.lits) cov &= ds.literal_coverage(id);
  return cov;
}

double weighted_variance(std::span<const double> w, std::span<const double> y) {
  if (w.empty() || w.size() != y.size())
    fail(Errc::empty_input, "weighted_variance needs matching non-empty inputs");
  double sw = 0.0, swy = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    sw += w[i];
    swy += w[i] * y[i];
  }
  const double mu = swy / sw;
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) acc += w[i] * (y[i] - mu) * (y[i] - mu);
  return acc / sw;
}

RuleStats q_stats(const Rule& rule, const BinarizedDataset& ds, const StatsConfig& cfg) {
  if (!ds.has_weights()) fail(Errc::bad_config, "weights not computed");
  const BitVec cov = rule_cover(rule, ds);

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
      st.q1 += (cfg.penalty_mask && cfg.penalty_mask->test(i)) ? cfg.epsilon : wy;
    } else {
      ++st.n_control_covered;
      st.q3 += wy;
      st.q4 += w;
    }
  });
  st.q6 = st.q2;

  if (st.n_treated_covered < cfg.min_support || st.n_control_covered < cfg.min_support) {
    st.flag = StatsFlag::min_support;
    st.f_value = kNegInf;
    return st;
  }
  if (st.n_treated_covered == 0 || st.n_control_covered == 0) {
    st.flag = StatsFlag::zero_q;  // min_support == 0 with an empty side
    st.f_value = kNegInf;
    return st;
  }

  const double mu_own = swy / sw;
  st.sigma2 = kernels::cover_sq_dev(cov, ds.treated, ds, mu_own) / sw;
  const double mu5 = cfg.anchor_mu >= 0.0 ? cfg.anchor_mu : mu_own;
  st.q5 = cfg.anchor_mu >= 0.0 ? kernels::cover_sq_dev(cov, ds.treated, ds, mu5)
                               : st.sigma2 * st.q2;
  st.tau = st.q1 / st.q2 - st.q3 / st.q4;
  st.f_value = objective(st, cfg.lambda);
  return st;
}

double objective(RuleStats& stats, double lambda) {
  if (stats.flag == StatsFlag::min_support) return kNegInf;
  if (!(stats.q1 > 0.0 && stats.q2 > 0.0 && stats.q3 > 0.0 && stats.q4 > 0.0)) {
    stats.flag = StatsFlag::zero_q;
    return kNegInf;
  }
  double f = std::log(stats.q1) + std::log(stats.q4) - std::log(stats.q2) -
             std::log(stats.q3);
  if (lambda != 0.0) {
    if (!(stats.sigma2 > 0.0)) {
      stats.flag = StatsFlag::zero_variance;
      return kNegInf;
    }
    f -= lambda * std::log(stats.sigma2);
  }
  return f;
}

std::optional<double> ruleset_predict(const RuleSet& rs, const BinarizedDataset& ds,
                                      std::size_t unit) {
  double acc = 0.0;
  int hits = 0;
  for (const auto& e : rs.rules) {
    bool covered = true;
    for (int id : e.rule.lits)
      if (!ds.literal_coverage(id).test(unit)) {
        covered = false;
        break;
      }
    if (covered) {
      acc += e.tau;
      ++hits;
    }
  }
  if (hits > 0) return acc / hits;
  return rs.fallback_effect;
}

}  // namespace crules
