#include "crules/model_io.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "crules/error.hpp"

namespace crules {

using nlohmann::json;

namespace {

json literal_to_json(const Literal& lit) {
  json j;
  j["column"] = lit.column;
  j["op"] = op_name(lit.op);
  if (lit.op == Literal::Op::leq || lit.op == Literal::Op::gt)
    j["value"] = lit.threshold;
  else
    j["value"] = lit.level;
  j["partner"] = lit.partner;
  return j;
}

Literal literal_from_json(const json& j) {
  Literal lit;
  lit.column = j.at("column").get<std::string>();
  const auto op = op_from_name(j.at("op").get<std::string>());
  if (!op) fail(Errc::io_error, "unknown literal op in model file");
  lit.op = *op;
  if (lit.op == Literal::Op::leq || lit.op == Literal::Op::gt)
    lit.threshold = j.at("value").get<double>();
  else
    lit.level = j.at("value").get<std::string>();
  lit.partner = j.at("partner").get<int>();
  return lit;
}

}  // namespace

std::string model_to_json(const ModelFile& model, const BinarizedDataset& ds) {
  json j;
  j["tool"] = "crules";
  j["version"] = kToolVersion;
  j["input_digest"] = model.input_digest;
  if (!model.config_json.empty()) j["config"] = json::parse(model.config_json);
  j["y_offset"] = model.y_offset;
  j["population_ate"] = model.population_ate;
  j["seed"] = model.rules.seed;
  j["hyperparams"] = {{"lambda", model.rules.lambda},
                      {"max_rules", model.rules.max_rules},
                      {"max_len", model.rules.max_len},
                      {"epsilon", model.rules.epsilon},
                      {"min_support", model.rules.min_support}};

  j["literals"] = json::array();
  for (const auto& lit : model.literals) j["literals"].push_back(literal_to_json(lit));

  j["rules"] = json::array();
  for (const auto& e : model.rules.rules) {
    json r;
    r["literal_ids"] = e.rule.lits;
    r["literals"] = json::array();
    for (int id : e.rule.lits) r["literals"].push_back(literal_to_json(model.literals[id]));
    r["tau"] = e.tau;
    r["sigma2"] = e.sigma2;
    r["f"] = e.f;
    r["coverage_count"] = e.coverage;
    r["text"] = rule_line(e.rule, e.tau, ds);
    j["rules"].push_back(std::move(r));
  }
  if (model.rules.fallback_effect) j["fallback_effect"] = *model.rules.fallback_effect;
  return j.dump(2) + "\n";
}

ModelFile model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(Errc::io_error, std::string("model file is not valid JSON: ") + e.what());
  }
  ModelFile m;
  m.y_offset = j.at("y_offset").get<double>();
  m.population_ate = j.value("population_ate", 0.0);
  m.input_digest = j.value("input_digest", "");
  if (j.contains("config")) m.config_json = j["config"].dump();
  for (const auto& lj : j.at("literals")) m.literals.push_back(literal_from_json(lj));

  const auto& h = j.at("hyperparams");
  m.rules.lambda = h.at("lambda").get<double>();
  m.rules.max_rules = h.at("max_rules").get<int>();
  m.rules.max_len = h.at("max_len").get<int>();
  m.rules.epsilon = h.at("epsilon").get<double>();
  m.rules.min_support = h.at("min_support").get<std::uint32_t>();
  m.rules.seed = j.value("seed", 0ull);
  if (j.contains("fallback_effect")) m.rules.fallback_effect = j["fallback_effect"].get<double>();

  for (const auto& rj : j.at("rules")) {
    RuleSet::Entry e;
    e.rule.lits = rj.at("literal_ids").get<std::vector<int>>();
    e.tau = rj.at("tau").get<double>();
    e.sigma2 = rj.at("sigma2").get<double>();
    e.f = rj.value("f", 0.0);
    e.coverage = rj.at("coverage_count").get<std::uint32_t>();
    m.rules.rules.push_back(std::move(e));
  }
  return m;
}

std::string truth_to_json(const SynthTruth& truth) {
  json j;
  j["tool"] = "crules";
  j["version"] = kToolVersion;
  j["prng"] = truth.prng;
  j["config"] = {{"n_units", truth.config.n_units},
                 {"n_categorical", truth.config.n_categorical},
                 {"n_numeric", truth.config.n_numeric},
                 {"b", truth.config.b},
                 {"seed", truth.config.seed},
                 {"global_eta", truth.config.global_eta}};
  j["y_offset"] = truth.y_offset;
  j["alpha"] = truth.alpha;
  j["beta"] = truth.beta;
  j["gamma"] = truth.gamma;
  j["eta"] = truth.eta;
  j["te"] = truth.te;
  j["propensity"] = truth.propensity;
  return j.dump() + "\n";
}

SynthTruth truth_from_json(const std::string& text) {
  const json j = json::parse(text);
  SynthTruth t;
  t.prng = j.value("prng", "");
  const auto& c = j.at("config");
  t.config.n_units = c.at("n_units").get<std::size_t>();
  t.config.n_categorical = c.at("n_categorical").get<int>();
  t.config.n_numeric = c.at("n_numeric").get<int>();
  t.config.b = c.at("b").get<double>();
  t.config.seed = c.at("seed").get<std::uint64_t>();
  t.config.global_eta = c.value("global_eta", false);
  t.y_offset = j.at("y_offset").get<double>();
  t.alpha = j.at("alpha").get<std::vector<double>>();
  t.beta = j.at("beta").get<std::vector<double>>();
  t.gamma = j.at("gamma").get<std::vector<double>>();
  t.eta = j.at("eta").get<std::vector<double>>();
  t.te = j.at("te").get<std::vector<double>>();
  t.propensity = j.at("propensity").get<std::vector<double>>();
  return t;
}

namespace {

json rule_metrics_to_json(const RuleMetrics& m) {
  json j;
  j["cate"] = m.cate;
  j["variance"] = m.variance;
  j["coverage_count"] = m.coverage;
  if (m.avg_ite) j["avg_ite"] = *m.avg_ite;
  if (m.pehe) j["pehe"] = *m.pehe;
  if (m.mape) j["mape"] = *m.mape;
  return j;
}

}  // namespace

std::string report_to_json(const MetricsReport& report) {
  json j;
  j["tool"] = "crules";
  j["version"] = kToolVersion;
  j["n_units"] = report.n_units;
  // Overlap normalizes pairwise intersections by n_units; Jaccard is the
  // secondary pairwise measure.
  j["overlap_definition"] = "mean over rule pairs of |cover(Ra) & cover(Rb)| / n_units, percent";
  j["per_rule"] = json::array();
  for (const auto& m : report.per_rule) j["per_rule"].push_back(rule_metrics_to_json(m));
  j["per_set"] = {{"avg_len", report.per_set.avg_len},
                  {"overlap_pct", report.per_set.overlap_pct},
                  {"jaccard_pct", report.per_set.jaccard_pct},
                  {"coverage_pct", report.per_set.coverage_pct}};
  if (report.set_pehe) j["set_pehe"] = *report.set_pehe;
  if (report.set_mape) j["set_mape"] = *report.set_mape;
  return j.dump(2) + "\n";
}

std::string report_to_text(const MetricsReport& report) {
  std::ostringstream out;
  out << "# overlap = mean pairwise |intersection| / n_units (%); coverage = |union| / n_units (%)\n";
  out << std::left << std::setw(8) << "rule" << std::right << std::setw(12) << "CATE"
      << std::setw(12) << "Avg_ITE" << std::setw(12) << "Variance" << std::setw(12) << "PEHE"
      << std::setw(12) << "MAPE" << std::setw(12) << "covered" << "\n";
  out << std::fixed << std::setprecision(4);
  auto opt = [&](const std::optional<double>& v) {
    std::ostringstream c;
    if (v) c << std::fixed << std::setprecision(4) << *v;
    else c << "-";
    return c.str();
  };
  for (std::size_t r = 0; r < report.per_rule.size(); ++r) {
    const auto& m = report.per_rule[r];
    out << std::left << std::setw(8) << ("Rule" + std::to_string(r + 1)) << std::right
        << std::setw(12) << m.cate << std::setw(12) << opt(m.avg_ite) << std::setw(12)
        << m.variance << std::setw(12) << opt(m.pehe) << std::setw(12) << opt(m.mape)
        << std::setw(12) << m.coverage << "\n";
  }
  out << "\n";
  out << std::left << std::setw(14) << "Avg_len" << std::setw(14) << "Overlap(%)"
      << std::setw(14) << "Jaccard(%)" << std::setw(14) << "Coverage(%)" << "\n";
  out << std::left << std::setw(14) << report.per_set.avg_len << std::setw(14)
      << report.per_set.overlap_pct << std::setw(14) << report.per_set.jaccard_pct
      << std::setw(14) << report.per_set.coverage_pct << "\n";
  return out.str();
}

std::string fnv1a_digest(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << h;
  return ss.str();
}

std::string file_digest(const std::string& path) { return fnv1a_digest(read_file(path)); }

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(Errc::io_error, "cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void atomic_write(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) fail(Errc::io_error, "cannot write " + tmp);
    f << content;
    if (!f.good()) fail(Errc::io_error, "write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    fail(Errc::io_error, "rename failed for " + path);
}

}  // namespace crules
