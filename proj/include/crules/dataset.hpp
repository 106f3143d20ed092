#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "crules/bitvec.hpp"
#include "crules/table.hpp"

namespace crules {

/// One binary condition on a covariate, or its negation. Literals are
/// emitted in partner pairs at adjacent ids, so partner(id) == id ^ 1.
struct Literal {
  enum class Op { leq, gt, eq, neq };

  std::string column;
  Op op = Op::leq;
  double threshold = 0.0;  // leq / gt
  std::string level;       // eq / neq
  int partner = -1;

  std::string describe() const;
};

std::string op_name(Literal::Op op);
std::optional<Literal::Op> op_from_name(const std::string& s);

struct BinSpec {
  int default_bins = 8;                  // bins per numeric column, [2, 64]
  std::map<std::string, int> per_column;

  int bins_for(const std::string& col) const {
    auto it = per_column.find(col);
    return it == per_column.end() ? default_bins : it->second;
  }
};

/// Immutable unit table used by everything downstream: literal coverage
/// rows, treatment mask, shifted outcomes and IPW weights. Weights start
/// empty and are filled once by the propensity module.
struct BinarizedDataset {
  std::vector<Literal> literals;
  std::vector<BitVec> coverage;   // one row per literal
  BitVec treated;                 // unit mask, T == 1
  BitVec control;                 // complement
  std::vector<double> outcome;    // shifted: raw Y + y_offset, >= 0
  std::vector<double> weights;    // empty until compute_weights
  double y_offset = 0.0;
  std::size_t n_units = 0;
  std::size_t n_treated = 0;
  std::size_t n_control = 0;
  std::vector<std::string> warnings;  // skipped constant columns etc.

  /// Per-column provenance so rules can be printed in original units and
  /// applied to new data: numeric boundaries / categorical levels seen.
  std::map<std::string, std::vector<double>> numeric_boundaries;
  std::map<std::string, std::vector<std::string>> categorical_levels;

  int n_literals() const { return static_cast<int>(literals.size()); }
  bool has_weights() const { return !weights.empty(); }
  const BitVec& literal_coverage(int id) const;
  int partner(int id) const { return literals[id].partner; }
};

/// Quantile-threshold literals for numeric columns, equals/not-equals pairs
/// per categorical level. Constant columns are skipped with a warning.
BinarizedDataset binarize(const RawTable& table, const BinSpec& spec);

/// Rebuilds a dataset from an explicit literal universe (e.g. one stored in
/// a model file), applying the given outcome offset. Fails with
/// schema_mismatch if a referenced column is absent or of the wrong type.
BinarizedDataset bind_literals(const RawTable& table, const std::vector<Literal>& literals,
                               double y_offset);

}  // namespace crules
