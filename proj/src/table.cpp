#include "crules/table.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "crules/error.hpp"

namespace crules {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
    } else if (c == ',' && !quoted) {
      out.push_back(cell);
      cell.clear();
    } else {
      cell.push_back(c);
    }
  }
  out.push_back(cell);
  for (auto& s : out) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
    std::size_t b = 0;
    while (b < s.size() && s[b] == ' ') ++b;
    s.erase(0, b);
  }
  return out;
}

bool is_missing(const std::string& s) {
  return s.empty() || s == "NA" || s == "na" || s == "nan" || s == "NaN" || s == "null" ||
         s == "NULL" || s == "?";
}

bool parse_double(const std::string& s, double& out) {
  const char* b = s.data();
  const char* e = b + s.size();
  auto [p, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && p == e && std::isfinite(out);
}

}  // namespace

RawTable parse_csv(const std::string& text, const Schema& schema) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) fail(Errc::io_error, "empty CSV input");
  const std::vector<std::string> header = split_line(line);

  auto col_of = [&](const std::string& name) -> int {
    auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
  };

  const int t_idx = col_of(schema.treatment_col);
  if (t_idx < 0) fail(Errc::missing_column, "MissingColumn: " + schema.treatment_col);
  const int y_idx = col_of(schema.outcome_col);
  if (y_idx < 0) fail(Errc::missing_column, "MissingColumn: " + schema.outcome_col);
  int e_idx = -1;
  if (!schema.propensity_col.empty()) {
    e_idx = col_of(schema.propensity_col);
    if (e_idx < 0) fail(Errc::missing_column, "MissingColumn: " + schema.propensity_col);
  }
  int ite_idx = -1;
  if (!schema.ite_col.empty()) {
    ite_idx = col_of(schema.ite_col);
    if (ite_idx < 0) fail(Errc::missing_column, "MissingColumn: " + schema.ite_col);
  }

  std::set<int> skip{t_idx, y_idx};
  if (e_idx >= 0) skip.insert(e_idx);
  if (ite_idx >= 0) skip.insert(ite_idx);
  for (const auto& name : schema.ignore_cols) {
    const int i = col_of(name);
    if (i >= 0) skip.insert(i);
  }

  std::vector<int> cov_idx;
  for (int i = 0; i < static_cast<int>(header.size()); ++i)
    if (!skip.count(i)) cov_idx.push_back(i);

  // First pass: collect raw rows, drop rows with missing cells.
  std::vector<std::vector<std::string>> rows;
  std::size_t dropped = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
    auto cells = split_line(line);
    if (cells.size() != header.size())
      fail(Errc::unparseable_cell,
           "row " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
               " cells, got " + std::to_string(cells.size()));
    bool missing = false;
    for (int i : cov_idx)
      if (is_missing(cells[i])) missing = true;
    if (is_missing(cells[t_idx]) || is_missing(cells[y_idx])) missing = true;
    if (e_idx >= 0 && is_missing(cells[e_idx])) missing = true;
    if (missing) {
      ++dropped;
      continue;
    }
    rows.push_back(std::move(cells));
  }

  RawTable table;
  table.n_units = rows.size();
  table.dropped_rows = dropped;

  // Column typing: hint wins; otherwise numeric iff every cell parses.
  auto decide_type = [&](int idx) {
    auto hint = schema.type_hints.find(header[idx]);
    if (hint != schema.type_hints.end()) return hint->second;
    double x;
    for (const auto& r : rows)
      if (!parse_double(r[idx], x)) return ColumnType::categorical;
    return ColumnType::numeric;
  };

  for (int idx : cov_idx) {
    RawColumn col;
    col.name = header[idx];
    col.type = decide_type(idx);
    if (col.type == ColumnType::numeric) {
      col.values.reserve(rows.size());
      for (std::size_t r = 0; r < rows.size(); ++r) {
        double x;
        if (!parse_double(rows[r][idx], x))
          fail(Errc::unparseable_cell,
               "UnparseableCell at row " + std::to_string(r + 2) + ", column " + col.name);
        col.values.push_back(x);
      }
    } else {
      col.labels.reserve(rows.size());
      for (auto& r : rows) col.labels.push_back(r[idx]);
    }
    table.covariates.push_back(std::move(col));
  }

  table.treatment.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const std::string& cell = rows[r][t_idx];
    if (!schema.treatment_positive.empty()) {
      const bool pos = std::find(schema.treatment_positive.begin(),
                                 schema.treatment_positive.end(),
                                 cell) != schema.treatment_positive.end();
      table.treatment.push_back(pos ? 1 : 0);
    } else {
      double x;
      if (!parse_double(cell, x) || (x != 0.0 && x != 1.0))
        fail(Errc::non_binary_treatment,
             "NonBinaryTreatment at row " + std::to_string(r + 2) + ": '" + cell + "'");
      table.treatment.push_back(static_cast<std::uint8_t>(x));
    }
  }

  table.outcome.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    double y;
    if (!parse_double(rows[r][y_idx], y))
      fail(Errc::unparseable_cell,
           "UnparseableCell at row " + std::to_string(r + 2) + ", column " + schema.outcome_col);
    table.outcome.push_back(y);
  }

  if (e_idx >= 0) {
    std::vector<double> e(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (!parse_double(rows[r][e_idx], e[r]))
        fail(Errc::unparseable_cell, "UnparseableCell in propensity column, row " +
                                         std::to_string(r + 2));
      if (!(e[r] > 0.0 && e[r] < 1.0))
        fail(Errc::score_out_of_range,
             "propensity score " + std::to_string(e[r]) + " outside (0,1) at row " +
                 std::to_string(r + 2));
    }
    table.propensity = std::move(e);
  }

  if (ite_idx >= 0) {
    std::vector<double> ite(rows.size());
    bool ok = true;
    for (std::size_t r = 0; r < rows.size() && ok; ++r)
      ok = !is_missing(rows[r][ite_idx]) && parse_double(rows[r][ite_idx], ite[r]);
    if (ok) table.true_ite = std::move(ite);  // unusable truth column: absent
  }

  return table;
}

RawTable load_csv(const std::string& path, const Schema& schema) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(Errc::io_error, "cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_csv(ss.str(), schema);
}

std::string csv_string(const RawTable& table) {
  std::ostringstream f;
  f << "T,Y";
  for (const auto& c : table.covariates) f << ',' << c.name;
  if (table.true_ite) f << ",ite";
  f << '\n';
  f.precision(17);
  for (std::size_t i = 0; i < table.n_units; ++i) {
    f << int(table.treatment[i]) << ',' << table.outcome[i];
    for (const auto& c : table.covariates) {
      if (c.type == ColumnType::numeric) f << ',' << c.values[i];
      else f << ',' << c.labels[i];
    }
    if (table.true_ite) f << ',' << (*table.true_ite)[i];
    f << '\n';
  }
  return f.str();
}

void write_csv(const RawTable& table, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(Errc::io_error, "cannot write " + path);
  f << csv_string(table);
}

}  // namespace crules
