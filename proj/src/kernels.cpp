#include "crules/kernels.hpp"

#include <omp.h>

#include <algorithm>

namespace crules::kernels {

UnitValues UnitValues::build(const BinarizedDataset& ds, const BitVec* penalty_mask,
                             double epsilon) {
  const std::size_t n = ds.n_units;
  UnitValues v;
  v.q1.assign(n, 0.0);
  v.q2.assign(n, 0.0);
  v.q3.assign(n, 0.0);
  v.q4.assign(n, 0.0);
  v.wy.assign(n, 0.0);
  v.dev.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = ds.weights[i];
    const double wy = w * ds.outcome[i];
    if (ds.treated.test(i)) {
      v.q2[i] = w;
      v.wy[i] = wy;
      v.q1[i] = (penalty_mask && penalty_mask->test(i)) ? epsilon : wy;
    } else {
      v.q3[i] = wy;
      v.q4[i] = w;
    }
  }
  return v;
}

void UnitValues::set_anchor_mu(const BinarizedDataset& ds, double mu) {
  dev.assign(ds.n_units, 0.0);
  ds.treated.for_each_set([&](std::size_t i) {
    const double d = ds.outcome[i] - mu;
    dev[i] = ds.weights[i] * d * d;
  });
}

CoverSums cover_sums(const BitVec& cover, const BitVec& treated, const UnitValues& v) {
  CoverSums s;
  const auto& cw = cover.words();
  const auto& tw = treated.words();
  for (std::size_t k = 0; k < cw.size(); ++k) {
    std::uint64_t w = cw[k];
    if (!w) continue;
    s.n_treated += std::popcount(w & tw[k]);
    s.n_control += std::popcount(w & ~tw[k]);
    while (w) {
      const std::size_t i = k * 64 + std::countr_zero(w);
      s.q1 += v.q1[i];
      s.q2 += v.q2[i];
      s.q3 += v.q3[i];
      s.q4 += v.q4[i];
      s.wy += v.wy[i];
      s.dev += v.dev[i];
      w &= w - 1;
    }
  }
  return s;
}

double cover_sq_dev(const BitVec& cover, const BitVec& treated, const BinarizedDataset& ds,
                    double mu) {
  double acc = 0.0;
  const auto& cw = cover.words();
  const auto& tw = treated.words();
  for (std::size_t k = 0; k < cw.size(); ++k) {
    std::uint64_t w = cw[k] & tw[k];
    while (w) {
      const std::size_t i = k * 64 + std::countr_zero(w);
      const double d = ds.outcome[i] - mu;
      acc += ds.weights[i] * d * d;
      w &= w - 1;
    }
  }
  return acc;
}

namespace {

CoverSums one_candidate(const BitVec& base, int lit, const BinarizedDataset& ds,
                        const UnitValues& v) {
  thread_local BitVec scratch;
  BitVec::and_of(scratch, base, ds.coverage[lit]);
  return cover_sums(scratch, ds.treated, v);
}

}  // namespace

void batch_sums_serial(const BitVec& base, const std::vector<int>& cands,
                       const BinarizedDataset& ds, const UnitValues& v,
                       std::vector<CoverSums>& out) {
  out.resize(cands.size());
  for (std::size_t c = 0; c < cands.size(); ++c)
    out[c] = one_candidate(base, cands[c], ds, v);
}

void batch_sums_parallel(const BitVec& base, const std::vector<int>& cands,
                         const BinarizedDataset& ds, const UnitValues& v,
                         std::vector<CoverSums>& out, int threads) {
  out.resize(cands.size());
  const int nt = resolve_threads(threads);
#pragma omp parallel for schedule(static) num_threads(nt)
  for (std::int64_t c = 0; c < static_cast<std::int64_t>(cands.size()); ++c)
    out[c] = one_candidate(base, cands[c], ds, v);
}

void batch_sums(const BitVec& base, const std::vector<int>& cands, const BinarizedDataset& ds,
                const UnitValues& v, std::vector<CoverSums>& out, int threads) {
  if (resolve_threads(threads) <= 1 || cands.size() < 8)
    batch_sums_serial(base, cands, ds, v, out);
  else
    batch_sums_parallel(base, cands, ds, v, out, threads);
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  return std::max(1, omp_get_max_threads());
}

}  // namespace crules::kernels
