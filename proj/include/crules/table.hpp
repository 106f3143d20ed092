#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace crules {

enum class ColumnType { numeric, categorical };

struct RawColumn {
  std::string name;
  ColumnType type = ColumnType::numeric;
  std::vector<double> values;        // numeric columns
  std::vector<std::string> labels;   // categorical columns
};

/// One tabular dataset: covariate columns plus the treatment/outcome roles
/// split out. Rows with missing values in any used column are dropped at
/// load time and counted in dropped_rows.
struct RawTable {
  std::vector<RawColumn> covariates;
  std::vector<std::uint8_t> treatment;       // 0/1 per unit
  std::vector<double> outcome;
  std::optional<std::vector<double>> propensity;  // optional precomputed scores
  std::optional<std::vector<double>> true_ite;    // optional ground-truth ITE
  std::size_t n_units = 0;
  std::size_t dropped_rows = 0;

  int column_index(const std::string& name) const {
    for (std::size_t i = 0; i < covariates.size(); ++i)
      if (covariates[i].name == name) return static_cast<int>(i);
    return -1;
  }
};

struct Schema {
  std::string treatment_col;
  std::string outcome_col;
  std::string propensity_col;  // empty = none
  std::string ite_col;         // empty = none
  /// Raw treatment-column values mapped to T=1; all other values map to 0.
  /// Empty means the column must already be 0/1.
  std::vector<std::string> treatment_positive;
  std::map<std::string, ColumnType> type_hints;
  std::vector<std::string> ignore_cols;
};

RawTable load_csv(const std::string& path, const Schema& schema);

/// Parses in-memory CSV text; load_csv is a thin file wrapper around this.
RawTable parse_csv(const std::string& text, const Schema& schema);

std::string csv_string(const RawTable& table);
void write_csv(const RawTable& table, const std::string& path);

}  // namespace crules
