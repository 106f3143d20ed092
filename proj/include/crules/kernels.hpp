#pragma once

#include <cstdint>
#include <vector>

#include "crules/bitvec.hpp"
#include "crules/dataset.hpp"

namespace crules::kernels {

/// Per-unit value arrays the coverage-sum kernels reduce over. q1 values
/// carry the overlap penalty (masked treated units contribute epsilon
/// instead of w*Y); wy/y2 stay penalty-free for mean/variance work.
struct UnitValues {
  std::vector<double> q1;   // treated: penalized w*Y, control: 0
  std::vector<double> q2;   // treated: w,              control: 0
  std::vector<double> q3;   // control: w*Y
  std::vector<double> q4;   // control: w
  std::vector<double> wy;   // treated: w*Y (no penalty)
  std::vector<double> dev;  // treated: w*(Y - mu)^2 for a fixed mu, else 0

  static UnitValues build(const BinarizedDataset& ds, const BitVec* penalty_mask,
                          double epsilon);
  /// Fills dev for a fixed anchor mean.
  void set_anchor_mu(const BinarizedDataset& ds, double mu);
};

/// Raw sums of one coverage set.
struct CoverSums {
  double q1 = 0, q2 = 0, q3 = 0, q4 = 0, wy = 0, dev = 0;
  std::uint32_t n_treated = 0, n_control = 0;
};

/// Canonical reduction: iterates set bits in index order so every caller
/// (serial, parallel, batched) accumulates in the same order and produces
/// bit-identical sums.
CoverSums cover_sums(const BitVec& cover, const BitVec& treated, const UnitValues& v);

/// Second pass for a rule-local variance: sum of w*(Y-mu)^2 over covered
/// treated units at the given mu.
double cover_sq_dev(const BitVec& cover, const BitVec& treated, const BinarizedDataset& ds,
                    double mu);

/// Evaluates cover(base & coverage[lit]) for a batch of candidate literals.
/// The parallel version splits candidates across OpenMP threads; each
/// candidate's reduction is the canonical serial one, so results are
/// bit-identical to the serial reference for any thread count.
void batch_sums_serial(const BitVec& base, const std::vector<int>& cands,
                       const BinarizedDataset& ds, const UnitValues& v,
                       std::vector<CoverSums>& out);
void batch_sums_parallel(const BitVec& base, const std::vector<int>& cands,
                         const BinarizedDataset& ds, const UnitValues& v,
                         std::vector<CoverSums>& out, int threads);
void batch_sums(const BitVec& base, const std::vector<int>& cands, const BinarizedDataset& ds,
                const UnitValues& v, std::vector<CoverSums>& out, int threads);

int resolve_threads(int requested);

}  // namespace crules::kernels
