#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "crules/error.hpp"
#include "crules/evaluate.hpp"
#include "crules/model_io.hpp"
#include "crules/search.hpp"
#include "crules/synth.hpp"

using namespace crules;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

bool log_enabled() {
  const char* v = std::getenv("CRULES_LOG");
  return v && std::string(v) != "" && std::string(v) != "0";
}

struct RunOptions {
  std::string data_path;
  std::string schema_path;
  std::string treatment_col;
  std::string outcome_col;
  std::string propensity_col;
  std::vector<std::string> treatment_positive;
  std::vector<std::string> ignore_cols;

  double lambda = 1.0;
  int k = 3;
  int max_len = 3;
  double epsilon = -1.0;
  unsigned min_support = 10;
  std::string bins = "8";  // single count or comma list of CV candidates
  int cv_folds = 5;
  std::string grid;        // "lambda=0.1,0.5;len=3,4"
  std::uint64_t seed = 1;
  int threads = 0;
  std::string out_dir = ".";
};

/// Precedence: CLI > schema file > defaults. The caller marks which CLI
/// flags were actually passed.
void merge_schema_file(RunOptions& opt, const std::set<std::string>& cli_set) {
  if (opt.schema_path.empty()) return;
  const json j = json::parse(read_file(opt.schema_path));
  auto take_str = [&](const char* key, std::string& field) {
    if (!cli_set.count(key) && j.contains(key)) field = j[key].get<std::string>();
  };
  take_str("treatment", opt.treatment_col);
  take_str("outcome", opt.outcome_col);
  take_str("propensity", opt.propensity_col);
  if (!cli_set.count("treatment_positive") && j.contains("treatment_positive"))
    opt.treatment_positive = j["treatment_positive"].get<std::vector<std::string>>();
  if (j.contains("ignore")) opt.ignore_cols = j["ignore"].get<std::vector<std::string>>();
  if (!cli_set.count("lambda") && j.contains("lambda")) opt.lambda = j["lambda"].get<double>();
  if (!cli_set.count("k") && j.contains("k")) opt.k = j["k"].get<int>();
  if (!cli_set.count("max_len") && j.contains("max_len")) opt.max_len = j["max_len"].get<int>();
  if (!cli_set.count("epsilon") && j.contains("epsilon") && !j["epsilon"].is_null())
    opt.epsilon = j["epsilon"].get<double>();
  if (!cli_set.count("min_support") && j.contains("min_support"))
    opt.min_support = j["min_support"].get<unsigned>();
  if (!cli_set.count("bins") && j.contains("bins")) {
    if (j["bins"].is_number()) opt.bins = std::to_string(j["bins"].get<int>());
    else opt.bins = j["bins"].get<std::string>();
  }
  if (!cli_set.count("seed") && j.contains("seed")) opt.seed = j["seed"].get<std::uint64_t>();
  if (!cli_set.count("threads") && j.contains("threads")) opt.threads = j["threads"].get<int>();
}

Schema schema_of(const RunOptions& opt) {
  Schema s;
  s.treatment_col = opt.treatment_col;
  s.outcome_col = opt.outcome_col;
  s.propensity_col = opt.propensity_col;
  s.treatment_positive = opt.treatment_positive;
  s.ignore_cols = opt.ignore_cols;
  return s;
}

json resolved_config(const RunOptions& opt) {
  json j;
  j["treatment"] = opt.treatment_col;
  j["outcome"] = opt.outcome_col;
  if (!opt.propensity_col.empty()) j["propensity"] = opt.propensity_col;
  if (!opt.treatment_positive.empty()) j["treatment_positive"] = opt.treatment_positive;
  if (!opt.ignore_cols.empty()) j["ignore"] = opt.ignore_cols;
  j["lambda"] = opt.lambda;
  j["k"] = opt.k;
  j["max_len"] = opt.max_len;
  j["epsilon"] = opt.epsilon;
  j["min_support"] = opt.min_support;
  j["bins"] = opt.bins;
  j["seed"] = opt.seed;
  j["threads"] = opt.threads;
  return j;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::string cell;
  for (char c : text + ",") {
    if (c == ',') {
      if (!cell.empty()) out.push_back(std::stoi(cell));
      cell.clear();
    } else {
      cell.push_back(c);
    }
  }
  return out;
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  std::string cell;
  for (char c : text + ",") {
    if (c == ',') {
      if (!cell.empty()) out.push_back(std::stod(cell));
      cell.clear();
    } else {
      cell.push_back(c);
    }
  }
  return out;
}

GridSpec parse_grid(const std::string& text) {
  GridSpec grid;
  grid.lambdas.clear();
  grid.max_lens.clear();
  std::string part;
  for (char c : text + ";") {
    if (c == ';') {
      const auto eq = part.find('=');
      if (eq == std::string::npos) fail(Errc::bad_config, "bad --grid segment: " + part);
      const std::string key = part.substr(0, eq);
      const std::string vals = part.substr(eq + 1);
      if (key == "lambda") grid.lambdas = parse_double_list(vals);
      else if (key == "len") grid.max_lens = parse_int_list(vals);
      else fail(Errc::bad_config, "unknown --grid key: " + key);
      part.clear();
    } else {
      part.push_back(c);
    }
  }
  if (grid.lambdas.empty() || grid.max_lens.empty())
    fail(Errc::bad_config, "--grid needs lambda=... and len=...");
  return grid;
}

PipelineConfig pipeline_of(const RunOptions& opt, int bins) {
  PipelineConfig cfg;
  cfg.bins.default_bins = bins;
  cfg.use_propensity_column = !opt.propensity_col.empty();
  cfg.search.lambda = opt.lambda;
  cfg.search.max_rules = opt.k;
  cfg.search.max_len = opt.max_len;
  cfg.search.epsilon = opt.epsilon;
  cfg.search.min_support = opt.min_support;
  cfg.search.seed = opt.seed;
  cfg.search.threads = opt.threads;
  if (log_enabled())
    cfg.search.on_progress = [](const ProgressEvent& ev) {
      std::cerr << "[fit] rule " << ev.rule_index << " mm " << ev.mm_iter << " f " << ev.f
                << " len " << ev.rule_size << "\n";
    };
  return cfg;
}

void ensure_outdir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!fs::is_directory(dir)) fail(Errc::io_error, "output directory unusable: " + dir);
  // Probe writability early so failures map to exit 2 with a clear message.
  const std::string probe = (fs::path(dir) / ".crules_probe").string();
  {
    std::ofstream f(probe);
    if (!f) fail(Errc::io_error, "output directory not writable: " + dir);
  }
  fs::remove(probe, ec);
}

int cmd_generate(const RunOptions& opt, const SynthConfig& scfg) {
  ensure_outdir(opt.out_dir);
  const SynthData data = generate(scfg);

  const std::string csv_path = (fs::path(opt.out_dir) / "synth_data.csv").string();
  atomic_write(csv_path, csv_string(data.table));
  std::cout << "wrote " << csv_path << " (" << data.table.n_units << " units)\n";
  const std::string truth_path = (fs::path(opt.out_dir) / "synth_truth.json").string();
  atomic_write(truth_path, truth_to_json(data.truth));
  std::cout << "wrote " << truth_path << "\n";
  return 0;
}

int cmd_fit(RunOptions& opt) {
  if (opt.data_path.empty()) fail(Errc::bad_config, "--data is required");
  if (opt.treatment_col.empty() || opt.outcome_col.empty())
    fail(Errc::bad_config, "treatment and outcome columns are required (flags or --schema)");
  ensure_outdir(opt.out_dir);

  const RawTable table = load_csv(opt.data_path, schema_of(opt));
  if (log_enabled())
    std::cerr << "[fit] " << table.n_units << " units, " << table.dropped_rows
              << " rows dropped\n";

  // Bin count: single value, or CV selection over a comma list.
  const std::vector<int> bin_candidates = parse_int_list(opt.bins);
  int bins = bin_candidates.at(0);
  if (bin_candidates.size() > 1) {
    const auto chosen =
        select_bin_count(table, bin_candidates, opt.cv_folds, pipeline_of(opt, bins));
    if (!chosen.empty()) bins = chosen.begin()->second;
    std::cout << "selected bins: " << bins << "\n";
  }

  // Optional grid search over lambda and max rule length.
  if (!opt.grid.empty()) {
    const GridSpec grid = parse_grid(opt.grid);
    const CvResult cv =
        cross_validate(table, grid, opt.cv_folds, opt.seed, pipeline_of(opt, bins));
    opt.lambda = cv.best_lambda;
    opt.max_len = cv.best_max_len;
    std::cout << "selected lambda: " << cv.best_lambda << ", max_len: " << cv.best_max_len
              << "\n";
  }

  const FittedModel model = fit_pipeline(table, pipeline_of(opt, bins));
  for (const auto& w : model.dataset.warnings) std::cerr << "warning: " << w << "\n";

  ModelFile mf;
  mf.literals = model.dataset.literals;
  mf.y_offset = model.dataset.y_offset;
  mf.rules = model.rules;
  mf.population_ate = model.population_ate;
  mf.input_digest = file_digest(opt.data_path);
  json cfg_json = resolved_config(opt);
  cfg_json["bins_selected"] = bins;
  mf.config_json = cfg_json.dump();

  const std::string model_path = (fs::path(opt.out_dir) / "model.json").string();
  atomic_write(model_path, model_to_json(mf, model.dataset));

  std::cout << "population IPW ATE: " << model.population_ate << "\n";
  for (const auto& e : model.rules.rules)
    std::cout << rule_line(e.rule, e.tau, model.dataset) << "\n";
  std::cout << "wrote " << model_path << " (" << model.rules.rules.size() << " rules)\n";
  return model.rules.rules.empty() ? 1 : 0;
}

int cmd_evaluate(const RunOptions& opt, const std::string& model_path,
                 const std::string& truth_path) {
  if (opt.data_path.empty()) fail(Errc::bad_config, "--data is required");
  ensure_outdir(opt.out_dir);

  const ModelFile mf = model_from_json(read_file(model_path));

  // Schema: CLI/schema-file overrides win, else the model's embedded config.
  RunOptions eff = opt;
  if (!mf.config_json.empty()) {
    const json mc = json::parse(mf.config_json);
    if (eff.treatment_col.empty()) eff.treatment_col = mc.value("treatment", "");
    if (eff.outcome_col.empty()) eff.outcome_col = mc.value("outcome", "");
    if (eff.propensity_col.empty() && mc.contains("propensity"))
      eff.propensity_col = mc["propensity"].get<std::string>();
    if (eff.treatment_positive.empty() && mc.contains("treatment_positive"))
      eff.treatment_positive = mc["treatment_positive"].get<std::vector<std::string>>();
    if (eff.ignore_cols.empty() && mc.contains("ignore"))
      eff.ignore_cols = mc["ignore"].get<std::vector<std::string>>();
  }
  if (eff.treatment_col.empty() || eff.outcome_col.empty())
    fail(Errc::bad_config, "treatment/outcome columns unknown; pass flags or --schema");

  const RawTable table = load_csv(opt.data_path, schema_of(eff));
  BinarizedDataset ds = bind_literals(table, mf.literals, mf.y_offset);

  if (!eff.propensity_col.empty() && table.propensity) {
    compute_weights(ds, *table.propensity);
  } else {
    const PropensityModel pm = fit_propensity(ds);
    compute_weights(ds, pm);
  }

  std::optional<std::vector<double>> truth;
  if (!truth_path.empty()) {
    truth = truth_from_json(read_file(truth_path)).te;
    if (truth->size() != ds.n_units)
      fail(Errc::length_mismatch, "truth sidecar row count != dataset rows");
  } else if (table.true_ite) {
    truth = table.true_ite;
  }

  // Recompute per-rule stats on this dataset; on the training data these
  // reproduce the stored consequents exactly.
  const MetricsReport report = evaluate_ruleset(mf.rules, ds, truth ? &*truth : nullptr);

  json out = json::parse(report_to_json(report));
  out["input_digest"] = file_digest(opt.data_path);
  out["model_digest"] = fnv1a_digest(read_file(model_path));
  out["seed"] = opt.seed;
  if (!mf.config_json.empty()) out["model_config"] = json::parse(mf.config_json);

  const std::string report_path = (fs::path(opt.out_dir) / "report.json").string();
  atomic_write(report_path, out.dump(2) + "\n");
  const std::string text_path = (fs::path(opt.out_dir) / "report.txt").string();
  atomic_write(text_path, report_to_text(report));

  std::cout << report_to_text(report);
  std::cout << "wrote " << report_path << " and " << text_path << "\n";
  return 0;
}

int cmd_oracle(const RunOptions& opt) {
  if (opt.data_path.empty()) fail(Errc::bad_config, "--data is required");
  if (opt.treatment_col.empty() || opt.outcome_col.empty())
    fail(Errc::bad_config, "treatment and outcome columns are required");

  const RawTable table = load_csv(opt.data_path, schema_of(opt));
  const std::vector<int> bin_candidates = parse_int_list(opt.bins);
  PipelineConfig cfg = pipeline_of(opt, bin_candidates.at(0));

  BinarizedDataset ds = binarize(table, cfg.bins);
  if (cfg.use_propensity_column && table.propensity) {
    compute_weights(ds, *table.propensity);
  } else {
    compute_weights(ds, fit_propensity(ds, cfg.propensity));
  }

  const OracleResult oracle = brute_force_best_rule(ds, cfg.search, opt.max_len);
  std::cout << "feasible rules: " << oracle.table.size() << "\n";
  std::cout << "best f: " << oracle.best_f << "\n";
  StatsConfig scfg;
  scfg.lambda = opt.lambda;
  scfg.min_support = opt.min_support;
  const RuleStats st = q_stats(oracle.best, ds, scfg);
  std::cout << rule_line(oracle.best, st.tau, ds) << "\n";
  return 0;
}

int cmd_bench(const RunOptions& opt, const std::string& dims, int reps, std::size_t n_units) {
  const std::vector<int> ds_dims = parse_int_list(dims);
  if (ds_dims.empty()) fail(Errc::bad_config, "--dims must name at least one covariate count");
  if (!opt.out_dir.empty()) ensure_outdir(opt.out_dir);

  struct Row {
    int d = 0;
    int literals = 0;
    std::vector<double> times;
    double mean = 0, sd = 0;
  };
  std::vector<Row> rows;

  for (int d : ds_dims) {
    SynthConfig scfg;
    scfg.n_units = n_units;
    scfg.n_categorical = 0;
    scfg.n_numeric = d;
    scfg.b = 0.6;
    scfg.seed = opt.seed;
    const SynthData data = generate(scfg);

    PipelineConfig cfg = pipeline_of(opt, 4);
    cfg.search.on_progress = nullptr;
    BinarizedDataset base = binarize(data.table, cfg.bins);
    compute_weights(base, fit_propensity(base, cfg.propensity));

    Row row;
    row.d = d;
    row.literals = base.n_literals();
    for (int r = 0; r < reps; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      learn_ruleset(base, cfg.search);
      const auto t1 = std::chrono::steady_clock::now();
      row.times.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    for (double t : row.times) row.mean += t;
    row.mean /= row.times.size();
    for (double t : row.times) row.sd += (t - row.mean) * (t - row.mean);
    row.sd = std::sqrt(row.sd / row.times.size());
    rows.push_back(row);
    std::cout << "d=" << d << " literals=" << row.literals << " mean=" << row.mean
              << "s sd=" << row.sd << "s over " << reps << " reps\n";
  }

  json out;
  out["tool"] = "crules";
  out["version"] = kToolVersion;
  out["seed"] = opt.seed;
  out["n_units"] = n_units;
  out["config"] = resolved_config(opt);
  out["rows"] = json::array();
  for (const auto& r : rows)
    out["rows"].push_back(
        {{"d", r.d}, {"literals", r.literals}, {"times", r.times}, {"mean", r.mean}, {"sd", r.sd}});

  if (rows.size() >= 2) {
    // Least squares of mean time on covariate count.
    const double n = static_cast<double>(rows.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& r : rows) {
      sx += r.d;
      sy += r.mean;
      sxx += double(r.d) * r.d;
      sxy += r.d * r.mean;
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double intercept = (sy - slope * sx) / n;
    double ss_res = 0, ss_tot = 0;
    for (const auto& r : rows) {
      const double fit = slope * r.d + intercept;
      ss_res += (r.mean - fit) * (r.mean - fit);
      ss_tot += (r.mean - sy / n) * (r.mean - sy / n);
    }
    const double r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
    std::cout << "linear fit: time = " << slope << " * d + " << intercept << ", R^2 = " << r2
              << "\n";
    out["fit"] = {{"slope", slope}, {"intercept", intercept}, {"r2", r2}};
  }

  const std::string path = (fs::path(opt.out_dir) / "bench.json").string();
  atomic_write(path, out.dump(2) + "\n");
  std::cout << "wrote " << path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"causal rule mining over observational tabular data"};
  app.require_subcommand(1);

  RunOptions opt;
  std::set<std::string> cli_set;

  auto add_common = [&](CLI::App* sub, bool with_fit_flags) {
    sub->add_option("--data", opt.data_path, "input CSV");
    sub->add_option("--schema", opt.schema_path, "JSON config file");
    sub->add_option("--treatment-col", opt.treatment_col, "treatment column")
        ->each([&](const std::string&) { cli_set.insert("treatment"); });
    sub->add_option("--outcome-col", opt.outcome_col, "outcome column")
        ->each([&](const std::string&) { cli_set.insert("outcome"); });
    sub->add_option("--propensity-col", opt.propensity_col, "precomputed propensity column")
        ->each([&](const std::string&) { cli_set.insert("propensity"); });
    sub->add_option("--treatment-positive", opt.treatment_positive,
                    "raw treatment values mapped to T=1")
        ->each([&](const std::string&) { cli_set.insert("treatment_positive"); });
    sub->add_option("--seed", opt.seed, "RNG seed")->each([&](const std::string&) {
      cli_set.insert("seed");
    });
    sub->add_option("--threads", opt.threads, "worker threads (0 = hardware)")
        ->each([&](const std::string&) { cli_set.insert("threads"); });
    sub->add_option("--out,-o", opt.out_dir, "output directory");
    if (with_fit_flags) {
      sub->add_option("--lambda", opt.lambda, "variance trade-off weight")
          ->each([&](const std::string&) { cli_set.insert("lambda"); });
      sub->add_option("--k", opt.k, "max rules")->each([&](const std::string&) {
        cli_set.insert("k");
      });
      sub->add_option("--max-len", opt.max_len, "max antecedent length")
          ->each([&](const std::string&) { cli_set.insert("max_len"); });
      sub->add_option("--epsilon", opt.epsilon, "overlap penalty value")
          ->each([&](const std::string&) { cli_set.insert("epsilon"); });
      sub->add_option("--min-support", opt.min_support, "min treated/control covered")
          ->each([&](const std::string&) { cli_set.insert("min_support"); });
      sub->add_option("--bins", opt.bins, "bins per numeric column, or comma list to CV-select")
          ->each([&](const std::string&) { cli_set.insert("bins"); });
      sub->add_option("--cv-folds", opt.cv_folds, "folds for CV selection");
      sub->add_option("--grid", opt.grid, "grid search, e.g. lambda=0.1,0.5;len=3,4");
    }
  };

  // generate
  auto* gen = app.add_subcommand("generate", "write a synthetic dataset + truth sidecar");
  SynthConfig scfg;
  gen->add_option("--n", scfg.n_units, "units");
  gen->add_option("--cat", scfg.n_categorical, "categorical covariates");
  gen->add_option("--num", scfg.n_numeric, "numeric covariates");
  gen->add_option("--b", scfg.b, "upper bound of the assignment coefficient range");
  gen->add_flag("--global-eta", scfg.global_eta, "one shared assignment noise draw");
  add_common(gen, false);

  auto* fit = app.add_subcommand("fit", "learn a causal rule set");
  add_common(fit, true);

  auto* eval = app.add_subcommand("evaluate", "score a fitted model on data");
  std::string model_path = "model.json", truth_path;
  eval->add_option("--model", model_path, "model JSON from fit");
  eval->add_option("--truth", truth_path, "truth sidecar JSON from generate");
  add_common(eval, false);

  auto* oracle = app.add_subcommand("oracle", "exhaustive best single rule (desk scale)");
  add_common(oracle, true);

  auto* bench = app.add_subcommand("bench", "rule-search wall-clock scaling in covariates");
  std::string dims = "10,20,40,80";
  int reps = 3;
  std::size_t bench_n = 3000;
  bench->add_option("--dims", dims, "comma list of covariate counts");
  bench->add_option("--reps", reps, "repetitions per grid point");
  bench->add_option("--n", bench_n, "units per generated dataset");
  add_common(bench, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    merge_schema_file(opt, cli_set);
    if (gen->parsed()) {
      scfg.seed = opt.seed;
      return cmd_generate(opt, scfg);
    }
    if (fit->parsed()) return cmd_fit(opt);
    if (eval->parsed()) return cmd_evaluate(opt, model_path, truth_path);
    if (oracle->parsed()) return cmd_oracle(opt);
    if (bench->parsed()) return cmd_bench(opt, dims, reps, bench_n);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == Errc::no_feasible_rule ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
