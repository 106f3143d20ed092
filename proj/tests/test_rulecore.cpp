#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "crules/error.hpp"
#include "crules/rulecore.hpp"
#include "helpers.hpp"

using namespace crules;
using namespace crules::testing;

namespace {

/// Four units: two treated covered (w=1, Y=3/5), two control covered
/// (w=1, Y=1/3). One literal pair; literal 0 covers everything.
BinarizedDataset tiny_dataset() {
  BinarizedDataset ds;
  ds.n_units = 4;
  ds.treated = BitVec(4);
  ds.treated.set(0);
  ds.treated.set(1);
  ds.control = ~ds.treated;
  ds.n_treated = 2;
  ds.n_control = 2;
  BitVec all(4, true);
  ds.literals.push_back({"g", Literal::Op::eq, 0.0, "1", 1});
  ds.coverage.push_back(all);
  ds.literals.push_back({"g", Literal::Op::neq, 0.0, "1", 0});
  ds.coverage.push_back(BitVec(4));
  ds.outcome = {3, 5, 1, 3};
  ds.weights = {1, 1, 1, 1};
  return ds;
}

}  // namespace

TEST_CASE("rule canonical form") {
  const auto ds = random_dataset(1, 32, 3);
  const Rule r = Rule::make({4, 0, 2, 0}, ds);
  CHECK(r.lits == std::vector<int>{0, 2, 4});
  CHECK_THROWS_AS(Rule::make({0, 1}, ds), Error);  // literal with its partner
  CHECK_THROWS_AS(Rule::make({99}, ds), Error);
}

TEST_CASE("rule_cover: empty rule covers everything, conjunction intersects") {
  const auto ds = random_dataset(2, 40, 3);
  CHECK(rule_cover(Rule{}, ds).count() == 40);
  const Rule r = Rule::make({0, 2}, ds);
  BitVec expect = ds.coverage[0];
  expect &= ds.coverage[2];
  CHECK(rule_cover(r, ds) == expect);
}

TEST_CASE("q_stats hand arithmetic") {
  const auto ds = tiny_dataset();
  StatsConfig cfg;
  cfg.lambda = 1.0;
  cfg.min_support = 1;
  const RuleStats st = q_stats(Rule::make({0}, ds), ds, cfg);
  CHECK(st.q1 == 8.0);
  CHECK(st.q2 == 2.0);
  CHECK(st.q3 == 4.0);
  CHECK(st.q4 == 2.0);
  CHECK(st.q6 == st.q2);
  CHECK(st.tau == 2.0);  // 8/2 - 4/2
  CHECK(st.sigma2 == 1.0);
  CHECK(st.n_treated_covered == 2);
  CHECK(st.n_control_covered == 2);
}

TEST_CASE("q_stats applies the overlap penalty to q1 only") {
  const auto ds = tiny_dataset();
  BitVec mask(4);
  mask.set(0);  // treated unit with w*Y = 3
  StatsConfig cfg;
  cfg.lambda = 1.0;
  cfg.min_support = 1;
  cfg.penalty_mask = &mask;
  cfg.epsilon = 0.001;
  const RuleStats st = q_stats(Rule::make({0}, ds), ds, cfg);
  CHECK(close(st.q1, 5.001, 1e-12));
  CHECK(st.q2 == 2.0);
  CHECK(close(st.tau, 5.001 / 2 - 2.0, 1e-12));
  CHECK(st.sigma2 == 1.0);  // variance stays penalty-free
}

TEST_CASE("q_stats min support violation") {
  const auto ds = tiny_dataset();
  StatsConfig cfg;
  cfg.min_support = 1;
  // literal 1 covers nothing -> no control units either
  const RuleStats st = q_stats(Rule::make({1}, ds), ds, cfg);
  CHECK(st.flag == StatsFlag::min_support);
  CHECK(st.f_value == kNegInf);
}

TEST_CASE("weighted_variance") {
  CHECK(weighted_variance(std::vector<double>{1, 1}, std::vector<double>{1, 3}) == 1.0);
  CHECK(weighted_variance(std::vector<double>{2}, std::vector<double>{7}) == 0.0);
  CHECK(weighted_variance(std::vector<double>{1, 3}, std::vector<double>{0, 4}) == 3.0);
  CHECK_THROWS_AS(weighted_variance({}, {}), Error);
}

TEST_CASE("objective formula and sentinels") {
  RuleStats st;
  st.q1 = 8;
  st.q2 = 2;
  st.q3 = 4;
  st.q4 = 2;
  st.sigma2 = 1.0;
  CHECK(close(objective(st, 1.0), std::log(2.0), 1e-12));
  CHECK(close(objective(st, 0.0), std::log(2.0), 1e-12));  // ln(8*2/(2*4))

  RuleStats zq = st;
  zq.q1 = 0;
  CHECK(objective(zq, 1.0) == kNegInf);
  CHECK(zq.flag == StatsFlag::zero_q);

  RuleStats zv = st;
  zv.sigma2 = 0.0;
  CHECK(objective(zv, 1.0) == kNegInf);
  CHECK(zv.flag == StatsFlag::zero_variance);
  RuleStats zv0 = st;
  zv0.sigma2 = 0.0;
  CHECK(std::isfinite(objective(zv0, 0.0)));  // variance term absent at lambda 0
}

TEST_CASE("objective equals independent recomputation on random rules") {
  const auto ds = random_dataset(7, 120, 4);
  StatsConfig cfg;
  cfg.lambda = 0.7;
  cfg.min_support = 3;
  Rng rng(17);
  for (const auto& lits : all_rules(ds.n_literals(), 3)) {
    const Rule rule{lits};
    const RuleStats st = q_stats(rule, ds, cfg);
    // naive per-unit loop
    double q1 = 0, q2 = 0, q3 = 0, q4 = 0;
    std::vector<double> tw, ty;
    for (std::size_t i = 0; i < ds.n_units; ++i) {
      bool cov = true;
      for (int j : lits)
        if (!ds.coverage[j].test(i)) cov = false;
      if (!cov) continue;
      if (ds.treated.test(i)) {
        q1 += ds.weights[i] * ds.outcome[i];
        q2 += ds.weights[i];
        tw.push_back(ds.weights[i]);
        ty.push_back(ds.outcome[i]);
      } else {
        q3 += ds.weights[i] * ds.outcome[i];
        q4 += ds.weights[i];
      }
    }
    if (st.flag == StatsFlag::min_support) {
      CHECK((tw.size() < 3 ||
             static_cast<std::size_t>(st.n_control_covered) < 3));
      continue;
    }
    CHECK(close_rel(st.q1, q1, 1e-12));
    CHECK(close_rel(st.q2, q2, 1e-12));
    CHECK(close_rel(st.q3, q3, 1e-12));
    CHECK(close_rel(st.q4, q4, 1e-12));
    const double sigma2 = weighted_variance(tw, ty);
    CHECK(close_rel(st.sigma2, sigma2, 1e-9));
    const double f = std::log(q1) + std::log(q4) - std::log(q2) - std::log(q3) -
                     0.7 * std::log(sigma2);
    CHECK(close_rel(st.f_value, f, 1e-9));
    CHECK(close_rel(st.q5, st.sigma2 * st.q2, 1e-9));
  }
}

TEST_CASE("monotone coverage under literal addition") {
  const auto ds = random_dataset(11, 200, 5);
  Rng rng(5);
  for (int t = 0; t < 200; ++t) {
    const int j = static_cast<int>(rng.uniform_int(ds.n_literals()));
    std::vector<int> base;
    for (int tries = 0; tries < 3; ++tries) {
      const int k = static_cast<int>(rng.uniform_int(ds.n_literals()));
      bool clash = k == j || ds.partner(k) == j;
      for (int b : base)
        if (b == k || ds.partner(b) == k) clash = true;
      if (!clash) base.push_back(k);
    }
    const Rule r{[&] {
      auto v = base;
      std::sort(v.begin(), v.end());
      return v;
    }()};
    const Rule rj = r.with(j, ds);
    const BitVec c0 = rule_cover(r, ds);
    const BitVec c1 = rule_cover(rj, ds);
    BitVec inter = c0;
    inter &= c1;
    CHECK(inter == c1);  // cover(R + j) subset of cover(R)
  }
}

TEST_CASE("bitset cover equals naive predicate loop on random rules") {
  const auto ds = random_dataset(13, 257, 6);
  Rng rng(23);
  const auto rules = all_rules(ds.n_literals(), 3);
  for (int t = 0; t < 1000; ++t) {
    const auto& lits = rules[rng.uniform_int(rules.size())];
    const BitVec cov = rule_cover(Rule{lits}, ds);
    for (std::size_t i = 0; i < ds.n_units; ++i) {
      bool expect = true;
      for (int j : lits)
        if (!ds.coverage[j].test(i)) expect = false;
      CHECK(cov.test(i) == expect);
    }
  }
}

TEST_CASE("outcome scaling: tau and sigma2 scale, lambda=0 argmax invariant") {
  auto ds = random_dataset(29, 150, 4);
  StatsConfig cfg;
  cfg.lambda = 0.0;
  cfg.min_support = 3;
  const double c = 3.7;

  auto scaled = ds;
  for (auto& y : scaled.outcome) y *= c;

  double best0 = kNegInf, best1 = kNegInf;
  std::vector<int> arg0, arg1;
  for (const auto& lits : all_rules(ds.n_literals(), 2)) {
    const Rule rule{lits};
    const RuleStats a = q_stats(rule, ds, cfg);
    const RuleStats b = q_stats(rule, scaled, cfg);
    if (a.flag == StatsFlag::ok && b.flag == StatsFlag::ok) {
      CHECK(close_rel(b.tau, c * a.tau, 1e-9));
      CHECK(close_rel(b.sigma2, c * c * a.sigma2, 1e-9));
    }
    if (a.f_value > best0) {
      best0 = a.f_value;
      arg0 = lits;
    }
    if (b.f_value > best1) {
      best1 = b.f_value;
      arg1 = lits;
    }
  }
  CHECK(arg0 == arg1);
}

TEST_CASE("ruleset_predict averages over covering rules") {
  const auto ds = random_dataset(3, 16, 2);
  RuleSet rs;
  // literal 0 and literal 2 rules with taus 2 and 4
  rs.rules.push_back({Rule::make({0}, ds), 2.0, 0.0, 0.0, 0});
  rs.rules.push_back({Rule::make({2}, ds), 4.0, 0.0, 0.0, 0});

  for (std::size_t i = 0; i < ds.n_units; ++i) {
    const bool in0 = ds.coverage[0].test(i);
    const bool in2 = ds.coverage[2].test(i);
    const auto est = ruleset_predict(rs, ds, i);
    if (in0 && in2) CHECK(*est == 3.0);
    else if (in0) CHECK(*est == 2.0);
    else if (in2) CHECK(*est == 4.0);
    else CHECK(!est.has_value());
  }

  RuleSet single;
  single.rules.push_back({Rule::make({0}, ds), 0.88, 0.0, 0.0, 0});
  for (std::size_t i = 0; i < ds.n_units; ++i)
    if (ds.coverage[0].test(i)) CHECK(*ruleset_predict(single, ds, i) == 0.88);

  single.fallback_effect = 1.5;
  for (std::size_t i = 0; i < ds.n_units; ++i)
    if (!ds.coverage[0].test(i)) CHECK(*ruleset_predict(single, ds, i) == 1.5);
}

TEST_CASE("rule text matches the IF/THEN shape") {
  const auto ds = tiny_dataset();
  const std::string line = rule_line(Rule::make({0}, ds), 0.88, ds);
  CHECK(line == "IF g == 1 THEN tau = 0.88");
}
