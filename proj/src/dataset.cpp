#include "crules/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "crules/error.hpp"

namespace crules {

namespace {

std::string fmt_num(double x) {
  std::ostringstream ss;
  ss.precision(10);
  ss << x;
  return ss.str();
}

BitVec cover_of(const Literal& lit, const RawColumn& col, std::size_t n) {
  BitVec bv(n);
  switch (lit.op) {
    case Literal::Op::leq:
      for (std::size_t i = 0; i < n; ++i)
        if (col.values[i] <= lit.threshold) bv.set(i);
      break;
    case Literal::Op::gt:
      for (std::size_t i = 0; i < n; ++i)
        if (col.values[i] > lit.threshold) bv.set(i);
      break;
    case Literal::Op::eq:
      for (std::size_t i = 0; i < n; ++i)
        if (col.labels[i] == lit.level) bv.set(i);
      break;
    case Literal::Op::neq:
      for (std::size_t i = 0; i < n; ++i)
        if (col.labels[i] != lit.level) bv.set(i);
      break;
  }
  return bv;
}

void init_roles(BinarizedDataset& ds, const RawTable& table) {
  const std::size_t n = table.n_units;
  ds.n_units = n;
  ds.treated = BitVec(n);
  for (std::size_t i = 0; i < n; ++i)
    if (table.treatment[i]) ds.treated.set(i);
  ds.control = ~ds.treated;
  ds.n_treated = ds.treated.count();
  ds.n_control = n - ds.n_treated;

  double y_min = 0.0;
  if (n > 0) y_min = *std::min_element(table.outcome.begin(), table.outcome.end());
  ds.y_offset = std::max(0.0, -y_min);
  ds.outcome.resize(n);
  for (std::size_t i = 0; i < n; ++i) ds.outcome[i] = table.outcome[i] + ds.y_offset;
}

}  // namespace

std::string op_name(Literal::Op op) {
  switch (op) {
    case Literal::Op::leq: return "<=";
    case Literal::Op::gt: return ">";
    case Literal::Op::eq: return "==";
    case Literal::Op::neq: return "!=";
  }
  return "?";
}

std::optional<Literal::Op> op_from_name(const std::string& s) {
  if (s == "<=") return Literal::Op::leq;
  if (s == ">") return Literal::Op::gt;
  if (s == "==") return Literal::Op::eq;
  if (s == "!=") return Literal::Op::neq;
  return std::nullopt;
}

std::string Literal::describe() const {
  if (op == Op::leq || op == Op::gt)
    return column + " " + op_name(op) + " " + fmt_num(threshold);
  return column + " " + op_name(op) + " " + level;
}

const BitVec& BinarizedDataset::literal_coverage(int id) const {
  if (id < 0 || id >= n_literals())
    fail(Errc::unknown_literal, "UnknownLiteral: id " + std::to_string(id));
  return coverage[id];
}

BinarizedDataset binarize(const RawTable& table, const BinSpec& spec) {
  BinarizedDataset ds;
  init_roles(ds, table);
  const std::size_t n = table.n_units;

  auto push_pair = [&](Literal a, Literal b, BitVec cov_a) {
    BitVec cov_b = ~cov_a;
    a.partner = ds.n_literals() + 1;
    b.partner = ds.n_literals();
    ds.literals.push_back(std::move(a));
    ds.coverage.push_back(std::move(cov_a));
    ds.literals.push_back(std::move(b));
    ds.coverage.push_back(std::move(cov_b));
  };

  for (const auto& col : table.covariates) {
    if (col.type == ColumnType::numeric) {
      std::vector<double> sorted(col.values);
      std::sort(sorted.begin(), sorted.end());
      const std::size_t distinct =
          std::unique(sorted.begin(), sorted.end()) - sorted.begin();
      sorted.resize(distinct);
      if (distinct <= 1) {
        ds.warnings.push_back("ConstantColumn: " + col.name + " (skipped)");
        continue;
      }
      int bins = spec.bins_for(col.name);
      if (bins < 2 || bins > 64)
        fail(Errc::bad_config, "bin count for " + col.name + " outside [2, 64]");
      if (static_cast<std::size_t>(bins) > distinct) bins = static_cast<int>(distinct);

      // Equal-frequency boundaries: k/bins lower order statistics, merged
      // when duplicated. Ties at a boundary go to the "<=" side.
      std::vector<double> all(col.values);
      std::sort(all.begin(), all.end());
      std::vector<double> bounds;
      for (int k = 1; k < bins; ++k) {
        const std::size_t rank =
            (static_cast<std::size_t>(k) * all.size() + bins - 1) / bins;  // ceil
        bounds.push_back(all[rank - 1]);
      }
      bounds.erase(std::unique(bounds.begin(), bounds.end()), bounds.end());

      std::vector<double> kept;
      for (double t : bounds) {
        Literal le{col.name, Literal::Op::leq, t, "", -1};
        BitVec cov = cover_of(le, col, n);
        const std::size_t c = cov.count();
        if (c == 0 || c == n) continue;  // degenerate split at the extreme
        Literal gt{col.name, Literal::Op::gt, t, "", -1};
        push_pair(std::move(le), std::move(gt), std::move(cov));
        kept.push_back(t);
      }
      if (kept.empty())
        ds.warnings.push_back("ConstantColumn: " + col.name + " (no usable split)");
      else
        ds.numeric_boundaries[col.name] = std::move(kept);
    } else {
      std::set<std::string> level_set(col.labels.begin(), col.labels.end());
      if (level_set.size() <= 1) {
        ds.warnings.push_back("ConstantColumn: " + col.name + " (skipped)");
        continue;
      }
      if (level_set.size() > 32)
        fail(Errc::bad_config, "categorical column " + col.name + " has " +
                                   std::to_string(level_set.size()) + " levels (max 32)");
      std::vector<std::string> levels(level_set.begin(), level_set.end());
      for (const auto& lv : levels) {
        Literal eq{col.name, Literal::Op::eq, 0.0, lv, -1};
        BitVec cov = cover_of(eq, col, n);
        const std::size_t c = cov.count();
        if (c == 0 || c == n) continue;
        Literal ne{col.name, Literal::Op::neq, 0.0, lv, -1};
        push_pair(std::move(eq), std::move(ne), std::move(cov));
      }
      ds.categorical_levels[col.name] = std::move(levels);
    }
  }
  return ds;
}

BinarizedDataset bind_literals(const RawTable& table, const std::vector<Literal>& literals,
                               double y_offset) {
  BinarizedDataset ds;
  init_roles(ds, table);
  ds.y_offset = y_offset;
  for (std::size_t i = 0; i < table.n_units; ++i)
    ds.outcome[i] = table.outcome[i] + y_offset;

  ds.literals = literals;
  ds.coverage.reserve(literals.size());
  for (const auto& lit : literals) {
    const int ci = table.column_index(lit.column);
    if (ci < 0) fail(Errc::schema_mismatch, "SchemaMismatch: column " + lit.column + " absent");
    const RawColumn& col = table.covariates[ci];
    const bool needs_numeric = lit.op == Literal::Op::leq || lit.op == Literal::Op::gt;
    if (needs_numeric != (col.type == ColumnType::numeric))
      fail(Errc::schema_mismatch, "SchemaMismatch: column " + lit.column + " type changed");
    ds.coverage.push_back(cover_of(lit, col, table.n_units));
  }
  return ds;
}

}  // namespace crules
