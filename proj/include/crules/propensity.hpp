#pragma once

#include <vector>

#include "crules/dataset.hpp"

namespace crules {

struct PropensityConfig {
  double l2 = 1e-2;       // penalty on literal coefficients, intercept free
  int max_iter = 100;
  double tol = 1e-8;      // max absolute coefficient change
  double clip_lo = 0.01;
  double clip_hi = 0.99;
};

struct PropensityModel {
  std::vector<double> coef;  // [intercept, one per literal]
  double l2 = 0.0;
  double clip_lo = 0.01;
  double clip_hi = 0.99;
  bool converged = false;
  int iterations = 0;
  std::vector<double> loglik_trace;  // penalized log-likelihood per iteration
};

/// L2-penalized logistic regression of T on the literal indicators, by
/// Newton ascent with step halving. Scores are clipped to
/// [clip_lo, clip_hi] at prediction time.
PropensityModel fit_propensity(const BinarizedDataset& ds, const PropensityConfig& cfg = {});

std::vector<double> predict_scores(const BinarizedDataset& ds, const PropensityModel& model);

/// w_i = T_i/e_i + (1-T_i)/(1-e_i), written into ds.weights.
void compute_weights(BinarizedDataset& ds, const PropensityModel& model);

/// Precomputed-score path; every score must lie in (0,1) before clipping.
void compute_weights(BinarizedDataset& ds, const std::vector<double>& scores,
                     double clip_lo = 0.01, double clip_hi = 0.99);

/// Normalized whole-population IPW effect estimate (weights required).
double ipw_ate(const BinarizedDataset& ds);

}  // namespace crules
