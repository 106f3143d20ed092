#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "crules/dataset.hpp"
#include "crules/rng.hpp"
#include "crules/rulecore.hpp"

namespace crules::testing {

/// Desk-scale dataset built directly: npairs complementary literal pairs
/// with random coverage, random treatment, Y ~ U(0.1, 5), w ~ U(1, 3).
inline BinarizedDataset random_dataset(std::uint64_t seed, std::size_t n, int npairs,
                                       bool unit_weights = false) {
  Rng rng(seed);
  BinarizedDataset ds;
  ds.n_units = n;
  ds.treated = BitVec(n);
  for (std::size_t i = 0; i < n; ++i)
    if (rng.bernoulli(0.5)) ds.treated.set(i);
  ds.control = ~ds.treated;
  ds.n_treated = ds.treated.count();
  ds.n_control = n - ds.n_treated;

  for (int p = 0; p < npairs; ++p) {
    const double density = rng.uniform(0.3, 0.7);
    BitVec cov(n);
    for (std::size_t i = 0; i < n; ++i)
      if (rng.bernoulli(density)) cov.set(i);
    const std::string col = "p" + std::to_string(p);
    Literal a{col, Literal::Op::eq, 0.0, "1", 2 * p + 1};
    Literal b{col, Literal::Op::neq, 0.0, "1", 2 * p};
    ds.literals.push_back(a);
    ds.coverage.push_back(cov);
    ds.literals.push_back(b);
    ds.coverage.push_back(~cov);
  }

  ds.outcome.resize(n);
  ds.weights.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    ds.outcome[i] = rng.uniform(0.1, 5.0);
    ds.weights[i] = unit_weights ? 1.0 : rng.uniform(1.0, 3.0);
  }
  return ds;
}

/// All non-contradictory literal subsets with 1 <= |R| <= max_len
/// (includes the empty rule when include_empty).
inline std::vector<std::vector<int>> all_rules(int n_literals, int max_len,
                                               bool include_empty = false) {
  const int n_pairs = n_literals / 2;
  std::vector<std::vector<int>> out;
  if (include_empty) out.push_back({});
  std::vector<int> current;
  auto rec = [&](auto&& self, int pair, int remaining) -> void {
    if (pair >= n_pairs || remaining == 0) return;
    for (int p = pair; p < n_pairs; ++p)
      for (int side = 0; side < 2; ++side) {
        current.push_back(2 * p + side);
        out.push_back(current);
        self(self, p + 1, remaining - 1);
        current.pop_back();
      }
  };
  rec(rec, 0, max_len);
  return out;
}

inline bool close(double a, double b, double tol = 1e-9) {
  return std::abs(a - b) <= tol;
}

inline bool close_rel(double a, double b, double tol = 1e-9) {
  const double scale = std::max({1.0, std::abs(a), std::abs(b)});
  return std::abs(a - b) <= tol * scale;
}

}  // namespace crules::testing
