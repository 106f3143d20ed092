#include "crules/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "crules/error.hpp"
#include "crules/rng.hpp"

namespace crules {

namespace {

constexpr int kLevels = 5;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

SynthData generate(const SynthConfig& cfg) {
  if (cfg.n_units < 1 || cfg.b <= 0.0 || cfg.n_categorical < 0 || cfg.n_numeric < 0)
    fail(Errc::bad_config, "invalid synth config");

  const std::size_t n = cfg.n_units;
  const int d_onehot = cfg.n_categorical * kLevels + cfg.n_numeric;
  Rng rng(cfg.seed);

  // Covariates.
  std::vector<std::vector<int>> cat(cfg.n_categorical, std::vector<int>(n));
  for (auto& col : cat)
    for (auto& v : col) v = static_cast<int>(rng.uniform_int(kLevels));
  std::vector<std::vector<double>> num(cfg.n_numeric, std::vector<double>(n));
  for (auto& col : num)
    for (auto& v : col) v = rng.normal();

  // One-hot expansion keeps all levels; |X| = 5 * n_categorical + n_numeric.
  auto x_dot = [&](std::size_t i, const std::vector<double>& coef) {
    double acc = 0.0;
    int k = 0;
    for (int c = 0; c < cfg.n_categorical; ++c)
      for (int lv = 0; lv < kLevels; ++lv, ++k)
        if (cat[c][i] == lv) acc += coef[k];
    for (int m = 0; m < cfg.n_numeric; ++m, ++k) acc += coef[k] * num[m][i];
    return acc;
  };

  SynthTruth truth;
  truth.config = cfg;
  truth.prng = Rng::kName;

  truth.beta.resize(d_onehot);
  for (auto& v : truth.beta) v = rng.uniform(0.0, cfg.b);
  if (cfg.global_eta) {
    truth.eta.assign(1, rng.uniform(-1.0, 1.0));
  } else {
    truth.eta.resize(n);
    for (auto& v : truth.eta) v = rng.uniform(-1.0, 1.0);
  }

  truth.propensity.resize(n);
  std::vector<std::uint8_t> treatment(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double eta_i = cfg.global_eta ? truth.eta[0] : truth.eta[i];
    truth.propensity[i] = sigmoid(x_dot(i, truth.beta) + eta_i);
    treatment[i] = rng.bernoulli(truth.propensity[i]) ? 1 : 0;
  }

  truth.alpha.resize(d_onehot);
  for (auto& v : truth.alpha) v = rng.uniform(0.0, 2.0);
  truth.gamma.resize(d_onehot);
  for (auto& v : truth.gamma) v = rng.uniform(0.0, 1.0);
  truth.noise.resize(n);
  for (auto& v : truth.noise) v = rng.uniform(-1.0, 1.0);

  truth.te.resize(n);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    truth.te[i] = x_dot(i, truth.alpha);
    y[i] = treatment[i] * truth.te[i] + x_dot(i, truth.gamma) + truth.noise[i];
  }

  // Offset keeps every outcome strictly positive; the tiny margin covers
  // the unit sitting exactly at the minimum.
  const double y_min = *std::min_element(y.begin(), y.end());
  truth.y_offset = y_min < 0.0 ? -y_min + 1e-6 : 0.0;
  for (auto& v : y) v += truth.y_offset;

  SynthData out;
  out.truth = std::move(truth);
  out.table.n_units = n;
  out.table.treatment = std::move(treatment);
  out.table.outcome = std::move(y);
  out.table.true_ite = out.truth.te;
  for (int c = 0; c < cfg.n_categorical; ++c) {
    RawColumn col;
    col.name = "c" + std::to_string(c);
    col.type = ColumnType::categorical;
    col.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) col.labels[i] = std::string(1, char('A' + cat[c][i]));
    out.table.covariates.push_back(std::move(col));
  }
  for (int m = 0; m < cfg.n_numeric; ++m) {
    RawColumn col;
    col.name = "x" + std::to_string(m);
    col.type = ColumnType::numeric;
    col.values = std::move(num[m]);
    out.table.covariates.push_back(std::move(col));
  }
  return out;
}

RawTable ihdp_load(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(Errc::io_error, "cannot open " + path);
  std::string header;
  std::getline(f, header);
  f.close();
  auto has = [&](const std::string& name) {
    std::size_t pos = 0;
    while ((pos = header.find(name, pos)) != std::string::npos) {
      const bool left_ok = pos == 0 || header[pos - 1] == ',';
      std::size_t end = pos + name.size();
      while (end < header.size() && header[end] == '\r') ++end;
      const bool right_ok = end >= header.size() || header[end] == ',' ||
                            header[pos + name.size()] == '\r';
      if (left_ok && right_ok) return true;
      ++pos;
    }
    return false;
  };

  Schema schema;
  schema.treatment_col = has("T") ? "T" : "treatment";
  schema.outcome_col = has("Y") ? "Y" : "y_factual";
  if (has("ite")) schema.ite_col = "ite";
  return load_csv(path, schema);
}

}  // namespace crules
