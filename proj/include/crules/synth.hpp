#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crules/table.hpp"

namespace crules {

struct SynthConfig {
  std::size_t n_units = 3000;
  int n_categorical = 5;  // 5-level columns, labels A..E
  int n_numeric = 5;
  double b = 0.6;         // upper bound of beta's uniform range
  std::uint64_t seed = 1;
  /// true: one eta draw shared by all units; false: one per unit.
  bool global_eta = false;
};

struct SynthTruth {
  std::vector<double> te;          // per-unit ground-truth ITE
  std::vector<double> propensity;  // f(X_i)
  std::vector<double> eta;         // size 1 when global_eta
  std::vector<double> noise;       // per-unit outcome noise
  std::vector<double> alpha, beta, gamma;
  double y_offset = 0.0;
  SynthConfig config;
  std::string prng;
};

struct SynthData {
  RawTable table;
  SynthTruth truth;
};

/// Categorical covariates uniform over {A..E}, numeric ~ Normal(0,1);
/// treatment from a sigmoid assignment score over the one-hot expansion;
/// outcome T*TE + <X,gamma> + offset + noise, shifted strictly positive.
SynthData generate(const SynthConfig& cfg);

/// Loads a semi-synthetic CSV (treatment column "T" or "treatment", outcome
/// "Y" or "y_factual", optional "ite" truth column). Truth stays absent
/// when the column is missing, which disables PEHE/MAPE downstream.
RawTable ihdp_load(const std::string& path);

}  // namespace crules
