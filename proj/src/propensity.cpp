#include "crules/propensity.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "crules/error.hpp"

namespace crules {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

/// Penalized Bernoulli log-likelihood at the given linear predictor.
double penalized_ll(const Eigen::VectorXd& z, const BinarizedDataset& ds,
                    const Eigen::VectorXd& beta, double l2) {
  double ll = 0.0;
  for (std::size_t i = 0; i < ds.n_units; ++i) {
    const double zi = z(static_cast<Eigen::Index>(i));
    // log sigma(z) = -log(1+exp(-z)); stable for both signs
    const double log_p = zi >= 0 ? -std::log1p(std::exp(-zi)) : zi - std::log1p(std::exp(zi));
    const double log_q = zi >= 0 ? -zi - std::log1p(std::exp(-zi)) : -std::log1p(std::exp(zi));
    ll += ds.treated.test(i) ? log_p : log_q;
  }
  double pen = 0.0;
  for (Eigen::Index j = 1; j < beta.size(); ++j) pen += beta(j) * beta(j);
  return ll - 0.5 * l2 * pen;
}

}  // namespace

PropensityModel fit_propensity(const BinarizedDataset& ds, const PropensityConfig& cfg) {
  if (ds.n_treated == 0 || ds.n_control == 0)
    fail(Errc::all_treated_or_all_control, "AllTreatedOrAllControl");
  if (cfg.l2 < 0.0) fail(Errc::bad_config, "l2 must be >= 0");
  if (!(cfg.clip_lo > 0.0 && cfg.clip_lo <= 0.5 && cfg.clip_hi >= 0.5 && cfg.clip_hi < 1.0))
    fail(Errc::bad_config, "clip bounds must satisfy 0 < lo <= 0.5 <= hi < 1");

  const Eigen::Index n = static_cast<Eigen::Index>(ds.n_units);
  const Eigen::Index d = static_cast<Eigen::Index>(ds.n_literals());
  const Eigen::Index p = d + 1;

  Eigen::MatrixXd A(n, p);
  A.col(0).setOnes();
  for (Eigen::Index j = 0; j < d; ++j) {
    A.col(j + 1).setZero();
    ds.coverage[static_cast<std::size_t>(j)].for_each_set(
        [&](std::size_t i) { A(static_cast<Eigen::Index>(i), j + 1) = 1.0; });
  }
  Eigen::VectorXd t(n);
  for (Eigen::Index i = 0; i < n; ++i) t(i) = ds.treated.test(static_cast<std::size_t>(i));

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd pen = Eigen::VectorXd::Constant(p, cfg.l2);
  pen(0) = 0.0;

  PropensityModel model;
  model.l2 = cfg.l2;
  model.clip_lo = cfg.clip_lo;
  model.clip_hi = cfg.clip_hi;

  Eigen::VectorXd z = A * beta;
  double ll = penalized_ll(z, ds, beta, cfg.l2);
  model.loglik_trace.push_back(ll);

  for (int it = 0; it < cfg.max_iter; ++it) {
    Eigen::VectorXd prob = z.unaryExpr([](double v) { return sigmoid(v); });
    Eigen::VectorXd grad = A.transpose() * (t - prob) - pen.cwiseProduct(beta);
    Eigen::VectorXd wdiag = prob.array() * (1.0 - prob.array()) + 1e-12;
    Eigen::MatrixXd hess = A.transpose() * wdiag.asDiagonal() * A;
    hess.diagonal() += pen;
    hess.diagonal().array() += 1e-10;  // keeps the solve well-posed at l2 = 0

    Eigen::VectorXd step = hess.ldlt().solve(grad);
    if (step.cwiseAbs().maxCoeff() < cfg.tol) {
      model.converged = true;
      break;
    }

    // Step halving keeps the penalized log-likelihood non-decreasing.
    double scale = 1.0;
    Eigen::VectorXd beta_new, z_new;
    double ll_new = ll;
    for (int h = 0; h < 30; ++h) {
      beta_new = beta + scale * step;
      z_new = A * beta_new;
      ll_new = penalized_ll(z_new, ds, beta_new, cfg.l2);
      if (ll_new >= ll - 1e-12) break;
      scale *= 0.5;
    }
    if (ll_new < ll - 1e-12) break;  // no ascent direction left

    const double max_change = (scale * step).cwiseAbs().maxCoeff();
    beta = beta_new;
    z = z_new;
    ll = ll_new;
    model.loglik_trace.push_back(ll);
    model.iterations = it + 1;
    if (max_change < cfg.tol) {
      model.converged = true;
      break;
    }
  }

  model.coef.assign(beta.data(), beta.data() + p);
  return model;
}

std::vector<double> predict_scores(const BinarizedDataset& ds, const PropensityModel& model) {
  std::vector<double> scores(ds.n_units, model.coef.at(0));
  for (int j = 0; j < ds.n_literals(); ++j) {
    const double c = model.coef.at(static_cast<std::size_t>(j) + 1);
    if (c == 0.0) continue;
    ds.coverage[j].for_each_set([&](std::size_t i) { scores[i] += c; });
  }
  for (auto& s : scores) s = std::clamp(sigmoid(s), model.clip_lo, model.clip_hi);
  return scores;
}

void compute_weights(BinarizedDataset& ds, const PropensityModel& model) {
  const std::vector<double> scores = predict_scores(ds, model);
  ds.weights.resize(ds.n_units);
  for (std::size_t i = 0; i < ds.n_units; ++i)
    ds.weights[i] = ds.treated.test(i) ? 1.0 / scores[i] : 1.0 / (1.0 - scores[i]);
}

void compute_weights(BinarizedDataset& ds, const std::vector<double>& scores, double clip_lo,
                     double clip_hi) {
  if (scores.size() != ds.n_units)
    fail(Errc::length_mismatch, "score vector length != n_units");
  ds.weights.resize(ds.n_units);
  for (std::size_t i = 0; i < ds.n_units; ++i) {
    if (!(scores[i] > 0.0 && scores[i] < 1.0))
      fail(Errc::score_out_of_range,
           "ScoreOutOfRange: unit " + std::to_string(i) + " has e = " + std::to_string(scores[i]));
    const double e = std::clamp(scores[i], clip_lo, clip_hi);
    ds.weights[i] = ds.treated.test(i) ? 1.0 / e : 1.0 / (1.0 - e);
  }
}

double ipw_ate(const BinarizedDataset& ds) {
  if (!ds.has_weights()) fail(Errc::bad_config, "weights not computed");
  double swy_t = 0, sw_t = 0, swy_c = 0, sw_c = 0;
  for (std::size_t i = 0; i < ds.n_units; ++i) {
    const double w = ds.weights[i];
    const double wy = w * ds.outcome[i];
    if (ds.treated.test(i)) {
      swy_t += wy;
      sw_t += w;
    } else {
      swy_c += wy;
      sw_c += w;
    }
  }
  if (sw_t <= 0.0 || sw_c <= 0.0)
    fail(Errc::all_treated_or_all_control, "AllTreatedOrAllControl");
  return swy_t / sw_t - swy_c / sw_c;
}

}  // namespace crules
