#include "ebproxy/cli.hpp"

#include "ebproxy/dataset_io.hpp"
#include "ebproxy/estimators.hpp"
#include "ebproxy/risk.hpp"
#include "ebproxy/simulation.hpp"
#include "ebproxy/transforms.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace ebproxy::cli {

namespace {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) {
    return "";
  }
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    out.push_back(trim(item));
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& s, const std::string& what) {
  std::vector<int> out;
  for (const std::string& tok : split(s, ',')) {
    try {
      std::size_t pos = 0;
      const int v = std::stoi(tok, &pos);
      if (pos != tok.size()) {
        throw std::invalid_argument(tok);
      }
      out.push_back(v);
    } catch (const std::exception&) {
      throw ConfigError(what + ": expected a comma-separated integer list, "
                        "got '" + s + "'");
    }
  }
  if (out.empty()) {
    throw ConfigError(what + ": empty list");
  }
  return out;
}

bool parse_bool(const std::string& s, const std::string& what) {
  const std::string v = lower(s);
  if (v == "true" || v == "1" || v == "yes") {
    return true;
  }
  if (v == "false" || v == "0" || v == "no") {
    return false;
  }
  throw ConfigError(what + ": expected true or false, got '" + s + "'");
}

std::optional<ScenarioKind> scenario_from_string(const std::string& s) {
  const std::string v = lower(s);
  if (v == "temporal-nochange") return ScenarioKind::TemporalNoChange;
  if (v == "temporal-abrupt") return ScenarioKind::TemporalAbrupt;
  if (v == "spatial") return ScenarioKind::Spatial;
  if (v == "combined") return ScenarioKind::Combined;
  return std::nullopt;
}

struct SimulateSettings {
  ScenarioConfig config;
  double bandwidth = 0.0;  // 0 = auto
  bool bandwidth_set = false;
  bool truncate = false;
  std::vector<std::string> method_filter;
  std::string population_file;
};

struct SimulateOverrides {
  std::optional<std::vector<int>> sample_sizes;
  std::optional<int> replications;
  std::optional<std::uint64_t> seed;
  std::optional<double> bandwidth;
  bool truncate = false;
  std::vector<std::string> method_filter;
  std::string population_file;
  bool redraw_population = false;
  int threads = 0;
};

SimulateSettings preset_settings(const std::string& name) {
  SimulateSettings s;
  const std::string v = lower(name);
  if (v == "table1") {
    s.config.scenario = ScenarioKind::TemporalNoChange;
  } else if (v == "table2") {
    s.config.scenario = ScenarioKind::TemporalAbrupt;
  } else if (v == "table3") {
    s.config.scenario = ScenarioKind::Spatial;
  } else if (v == "table4") {
    s.config.scenario = ScenarioKind::Combined;
  } else {
    throw ConfigError("unknown preset '" + name +
                      "': expected table1, table2, table3, table4, or a "
                      "config file path");
  }
  s.config.sample_sizes = {25, 50, 100};
  s.config.replications = 1000;
  s.bandwidth = kReferenceBandwidth;
  s.bandwidth_set = true;
  return s;
}

SimulateSettings config_file_settings(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file '" + path + "'");
  }
  SimulateSettings s;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto comment = line.find('#');
    if (comment != std::string::npos) {
      line = line.substr(0, comment);
    }
    line = trim(line);
    if (line.empty()) {
      continue;
    }
    const auto eq = line.find('=');
    const std::string where = path + ":" + std::to_string(lineno);
    if (eq == std::string::npos) {
      throw ConfigError(where + ": expected 'key = value'");
    }
    const std::string key = lower(trim(line.substr(0, eq)));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "scenario") {
      const auto kind = scenario_from_string(value);
      if (!kind) {
        throw ConfigError(where + ": unknown scenario '" + value + "'");
      }
      s.config.scenario = *kind;
    } else if (key == "m") {
      s.config.sample_sizes = parse_int_list(value, where);
    } else if (key == "replications") {
      s.config.replications = static_cast<int>(
          parse_int_list(value, where).at(0));
    } else if (key == "seed") {
      try {
        s.config.seed = std::stoull(value);
      } catch (const std::exception&) {
        throw ConfigError(where + ": expected an unsigned seed, got '" +
                          value + "'");
      }
    } else if (key == "methods") {
      s.method_filter = split(value, ',');
    } else if (key == "bandwidth") {
      if (lower(value) == "auto") {
        s.bandwidth = 0.0;
      } else {
        try {
          s.bandwidth = std::stod(value);
        } catch (const std::exception&) {
          throw ConfigError(where + ": expected a bandwidth or 'auto'");
        }
      }
      s.bandwidth_set = true;
    } else if (key == "truncate") {
      s.truncate = parse_bool(value, where);
    } else if (key == "population_file") {
      s.population_file = value;
    } else if (key == "redraw_population") {
      s.config.redraw_population = parse_bool(value, where);
    } else if (key == "threads") {
      s.config.threads = static_cast<int>(parse_int_list(value, where).at(0));
    } else if (key == "n_areas") {
      s.config.population.n = static_cast<int>(
          parse_int_list(value, where).at(0));
    } else if (key == "mean") {
      s.config.population.mean = std::stod(value);
    } else if (key == "sd") {
      s.config.population.sd = std::stod(value);
    } else if (key == "intraclass_share") {
      s.config.population.intraclass_share = std::stod(value);
    } else {
      throw ConfigError(where + ": unknown key '" + key + "'");
    }
  }
  return s;
}

std::vector<MethodSpec> resolve_methods(const SimulateSettings& s,
                                        Eigen::Index n_areas) {
  const double h = s.bandwidth > 0.0 ? s.bandwidth : default_bandwidth(n_areas);
  std::vector<MethodSpec> roster =
      default_methods(s.config.scenario, h, s.truncate);
  roster.push_back(npeb_identity_method(h, s.truncate));

  if (s.method_filter.empty()) {
    roster.pop_back();  // NPEB0 joins only on request
    return roster;
  }

  std::vector<MethodSpec> chosen;
  for (const std::string& want : s.method_filter) {
    const std::string token = lower(want);
    const auto it = std::find_if(roster.begin(), roster.end(),
                                 [&](const MethodSpec& m) {
                                   return lower(m.label) == token;
                                 });
    if (it == roster.end()) {
      std::string known;
      for (const auto& m : roster) {
        known += (known.empty() ? "" : ", ") + lower(m.label);
      }
      throw ConfigError("unknown method '" + want + "' for scenario " +
                        to_string(s.config.scenario) + "; available: " + known);
    }
    chosen.push_back(*it);
  }
  return chosen;
}

void write_output(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path);
  if (!out) {
    throw ValidationError("cannot write to '" + out_path + "'");
  }
  out << text;
}

std::string format_double(double value, const char* fmt) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, value);
  return buf;
}

int run_simulate(const std::string& target, const SimulateOverrides& overrides,
                 const std::string& format, const std::string& out_path) {
  SimulateSettings s;
  static const std::vector<std::string> kPresets = {"table1", "table2",
                                                    "table3", "table4"};
  std::error_code ec;
  if (std::find(kPresets.begin(), kPresets.end(), lower(target)) !=
      kPresets.end()) {
    s = preset_settings(target);
  } else if (std::filesystem::is_regular_file(target, ec)) {
    s = config_file_settings(target);
  } else {
    throw ConfigError("unknown preset '" + target +
                      "': expected table1, table2, table3, table4, or a "
                      "config file path");
  }

  // Command-line flags win over preset/config values.
  if (overrides.sample_sizes) {
    s.config.sample_sizes = *overrides.sample_sizes;
  }
  if (overrides.replications) {
    s.config.replications = *overrides.replications;
  }
  if (overrides.seed) {
    s.config.seed = *overrides.seed;
  }
  if (overrides.bandwidth) {
    if (!(*overrides.bandwidth > 0.0)) {
      throw ConfigError("bandwidth must be positive");
    }
    s.bandwidth = *overrides.bandwidth;
    s.bandwidth_set = true;
  }
  if (overrides.truncate) {
    s.truncate = true;
  }
  if (!overrides.method_filter.empty()) {
    s.method_filter = overrides.method_filter;
  }
  if (!overrides.population_file.empty()) {
    s.population_file = overrides.population_file;
  }
  if (overrides.redraw_population) {
    s.config.redraw_population = true;
  }
  if (overrides.threads > 0) {
    s.config.threads = overrides.threads;
  }

  if (s.config.replications < 1) {
    throw ConfigError("replications must be at least 1, got " +
                      std::to_string(s.config.replications));
  }
  for (int m : s.config.sample_sizes) {
    if (m < 1) {
      throw ConfigError("sample sizes must be at least 1");
    }
  }
  if (s.bandwidth_set && s.bandwidth < 0.0) {
    throw ConfigError("bandwidth must be positive or 'auto'");
  }

  if (!s.population_file.empty()) {
    if (s.config.redraw_population) {
      throw ConfigError("redraw_population cannot be combined with a "
                        "population file");
    }
    s.config.fixed_population = read_population(s.population_file);
  }

  const Eigen::Index n = s.config.fixed_population
                             ? s.config.fixed_population->n()
                             : s.config.population.n;
  s.config.methods = resolve_methods(s, n);
  s.config.bandwidth = s.bandwidth;
  s.config.truncate = s.truncate;

  const RiskTable table = run_scenario(s.config);
  write_output(format == "markdown" ? to_markdown(table) : to_csv(table),
               out_path);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// estimate
// ---------------------------------------------------------------------------

int resolve_common_m(const LabeledDataset& dataset, int m_flag,
                     const std::string& method) {
  const auto& sizes = dataset.data.sample_sizes;
  const bool uniform =
      (sizes.array() == sizes[0]).all();
  if (!uniform) {
    throw ValidationError("method '" + method + "' needs a common sample "
                          "size per area, but the dataset's sizes vary");
  }
  if (m_flag > 0 && m_flag != sizes[0]) {
    throw ConfigError("--m " + std::to_string(m_flag) +
                      " does not match the dataset's sample size " +
                      std::to_string(sizes[0]));
  }
  return sizes[0];
}

Matrix design_with_intercept(const AreaDataset& data) {
  Matrix x(data.n(), data.num_covariates() + 1);
  x.col(0).setOnes();
  if (data.num_covariates() > 0) {
    x.rightCols(data.num_covariates()) = data.covariates;
  }
  return x;
}

int run_estimate(const std::string& path, const std::string& method_flag,
                 int m_flag, double bandwidth_flag, bool truncate,
                 const std::string& out_path) {
  const std::string method = lower(method_flag);
  static const std::vector<std::string> kMethods = {"naive",  "reg",
                                                    "peb",    "npeb1",
                                                    "npeb2",  "npeb0"};
  if (std::find(kMethods.begin(), kMethods.end(), method) == kMethods.end()) {
    throw ConfigError("unknown method '" + method_flag +
                      "'; available: naive, reg, peb, npeb1, npeb2, npeb0");
  }

  const LabeledDataset dataset = read_area_dataset(path);
  const Eigen::Index n = dataset.data.n();

  Vector p_hat;
  std::string diag;
  if (method == "naive") {
    p_hat = naive_estimate(dataset.data);
    diag = "method=naive n=" + std::to_string(n);
  } else {
    const int m = resolve_common_m(dataset, m_flag, method);
    const NormalVector y = arcsin_forward(dataset.data.counts, m, 1);
    const double h =
        bandwidth_flag > 0.0 ? bandwidth_flag : default_bandwidth(n);

    AffineTransform transform;
    std::optional<EstimatorKind> estimator;
    if (method == "reg") {
      const NormalVector mu =
          regression_estimate(design_with_intercept(dataset.data), y);
      p_hat = arcsin_inverse(mu, m);
      diag = "method=reg n=" + std::to_string(n) + " m=" + std::to_string(m);
    } else if (method == "peb" || method == "npeb1") {
      transform = ols_residual_transform(design_with_intercept(dataset.data),
                                         y);
      estimator = method == "peb" ? EstimatorKind::peb()
                                  : EstimatorKind::npeb(h, truncate);
    } else if (method == "npeb2") {
      if (dataset.data.num_covariates() < 1) {
        throw ValidationError("method npeb2 shifts by the first covariate "
                              "column, but the dataset has none");
      }
      transform = AffineTransform::shift(dataset.data.covariates.col(0));
      estimator = EstimatorKind::npeb(h, truncate);
    } else if (method == "npeb0") {
      transform = AffineTransform::identity(n);
      estimator = EstimatorKind::npeb(h, truncate);
    }

    if (estimator) {
      const NormalVector z = transform.apply(y);
      NormalVector shrunk;
      double risk = 0.0;
      if (estimator->tag == EstimatorKind::Tag::Peb) {
        shrunk = peb_shrink(z);
        risk = peb_risk_estimate(z);
      } else {
        shrunk = npeb_estimate(z, estimator->bandwidth, estimator->truncate);
        risk = npeb_risk_estimate(z, estimator->bandwidth).value;
      }
      p_hat = arcsin_inverse(transform.invert(shrunk), m);
      diag = "method=" + method + " n=" + std::to_string(n) +
             " m=" + std::to_string(m);
      if (estimator->tag == EstimatorKind::Tag::Npeb) {
        diag += " bandwidth=" + format_double(estimator->bandwidth, "%.6g");
      }
      diag += " risk_estimate=" + format_double(risk, "%.6g");
    }
  }

  std::string out = "area_id,p_hat\n";
  for (Eigen::Index i = 0; i < n; ++i) {
    out += dataset.area_ids[static_cast<std::size_t>(i)] + "," +
           format_double(p_hat[i], "%.6f") + "\n";
  }
  write_output(out, out_path);
  std::cerr << diag << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// risk-scan
// ---------------------------------------------------------------------------

int run_risk_scan(const std::string& path, int m_flag, double bandwidth_flag,
                  bool truncate, const std::string& format,
                  const std::string& out_path) {
  const LabeledDataset dataset = read_area_dataset(path);
  const Eigen::Index n = dataset.data.n();
  const int m = resolve_common_m(dataset, m_flag, "risk-scan");
  const NormalVector y = arcsin_forward(dataset.data.counts, m, 1);
  const double h = bandwidth_flag > 0.0 ? bandwidth_flag : default_bandwidth(n);

  std::vector<NamedTransform> candidates;
  candidates.push_back({"identity", AffineTransform::identity(n)});
  for (Eigen::Index k = 0; k < dataset.data.num_covariates(); ++k) {
    candidates.push_back({"shift-cov" + std::to_string(k + 1),
                          AffineTransform::shift(dataset.data.covariates.col(k))});
  }
  if (dataset.data.num_covariates() > 0) {
    candidates.push_back(
        {"ols-residual",
         ols_residual_transform(design_with_intercept(dataset.data), y)});
  }
  const CandidateSet set = CandidateSet::explicit_list(candidates);

  const Selection peb_sel = select_transform(set, y, EstimatorKind::peb());
  const Selection npeb_sel =
      select_transform(set, y, EstimatorKind::npeb(h, truncate));

  std::string out;
  if (format == "markdown") {
    out += "| estimator | transform | risk | raw_risk | selected |\n";
    out += "|---|---|---|---|---|\n";
  } else {
    out += "estimator,transform,risk,raw_risk,selected\n";
  }
  const auto emit = [&](const Selection& sel, const std::string& name) {
    for (std::size_t i = 0; i < sel.report.entries.size(); ++i) {
      const RiskEntry& e = sel.report.entries[i];
      const char* selected = i == sel.report.selected ? "1" : "0";
      if (format == "markdown") {
        out += "| " + name + " | " + e.transform_id + " | " +
               format_double(e.risk, "%.6g") + " | " +
               format_double(e.raw_risk, "%.6g") + " | " + selected + " |\n";
      } else {
        out += name + "," + e.transform_id + "," +
               format_double(e.risk, "%.6g") + "," +
               format_double(e.raw_risk, "%.6g") + "," + selected + "\n";
      }
    }
  };
  emit(peb_sel, "peb");
  emit(npeb_sel, "npeb");

  write_output(out, out_path);
  std::cerr << "risk-scan n=" << n << " m=" << m << " bandwidth="
            << format_double(h, "%.6g")
            << " peb_selected=" << peb_sel.chosen.id
            << " npeb_selected=" << npeb_sel.chosen.id << "\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Empirical-Bayes estimation of many proportions with "
               "covariate proxies"};
  app.name("ebproxy");
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand(
      "simulate", "Run a Monte Carlo scenario preset or config file");
  std::string sim_target;
  sim->add_option("target", sim_target,
                  "preset (table1|table2|table3|table4) or config file")
      ->required();
  std::string sim_m;
  std::int64_t sim_reps = -1;
  std::uint64_t sim_seed = 0;
  std::string sim_methods;
  std::string sim_format = "csv";
  std::string sim_out;
  double sim_bandwidth = -1.0;
  bool sim_truncate = false;
  std::string sim_population;
  bool sim_redraw = false;
  int sim_threads = 0;
  sim->add_option("--m", sim_m, "comma-separated sample sizes");
  sim->add_option("--reps", sim_reps, "Monte Carlo replications");
  sim->add_option("--seed", sim_seed, "master seed");
  sim->add_option("--method", sim_methods, "comma-separated method labels");
  sim->add_option("--format", sim_format, "csv or markdown")
      ->check(CLI::IsMember({"csv", "markdown"}));
  sim->add_option("--out", sim_out, "write the table to this file");
  sim->add_option("--bandwidth", sim_bandwidth, "NPEB kernel bandwidth");
  sim->add_flag("--truncate", sim_truncate, "truncate NPEB moves at 2 log n");
  sim->add_option("--population", sim_population,
                  "population file (area_id,p,subquarter_id)");
  sim->add_flag("--redraw-population", sim_redraw,
                "re-draw the population every replication");
  sim->add_option("--threads", sim_threads, "worker threads (0 = auto)");

  // estimate
  auto* est = app.add_subcommand(
      "estimate", "Estimate proportions for a dataset file");
  std::string est_path;
  est->add_option("data", est_path, "CSV dataset "
                  "(area_id,count,sample_size[,cov...])")
      ->required();
  std::string est_method;
  est->add_option("--method", est_method,
                  "naive, reg, peb, npeb1, npeb2 or npeb0")
      ->required();
  int est_m = 0;
  est->add_option("--m", est_m, "common per-area sample size (checked)");
  double est_bandwidth = -1.0;
  bool est_truncate = false;
  std::string est_out;
  est->add_option("--bandwidth", est_bandwidth, "NPEB kernel bandwidth");
  est->add_flag("--truncate", est_truncate, "truncate NPEB moves at 2 log n");
  est->add_option("--out", est_out, "write estimates to this file");

  // risk-scan
  auto* scan = app.add_subcommand(
      "risk-scan", "Evaluate estimated risk over candidate transforms");
  std::string scan_path;
  scan->add_option("data", scan_path, "CSV dataset")->required();
  int scan_m = 0;
  double scan_bandwidth = -1.0;
  bool scan_truncate = false;
  std::string scan_format = "csv";
  std::string scan_out;
  scan->add_option("--m", scan_m, "common per-area sample size (checked)");
  scan->add_option("--bandwidth", scan_bandwidth, "NPEB kernel bandwidth");
  scan->add_flag("--truncate", scan_truncate,
                 "truncate NPEB moves at 2 log n");
  scan->add_option("--format", scan_format, "csv or markdown")
      ->check(CLI::IsMember({"csv", "markdown"}));
  scan->add_option("--out", scan_out, "write the scan to this file");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      return app.exit(e);  // --help and friends
    }
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfigError;
  }

  try {
    if (app.got_subcommand(sim)) {
      SimulateOverrides overrides;
      if (sim->count("--m") > 0) {
        overrides.sample_sizes = parse_int_list(sim_m, "--m");
      }
      if (sim->count("--reps") > 0) {
        overrides.replications = static_cast<int>(sim_reps);
      }
      if (sim->count("--seed") > 0) {
        overrides.seed = sim_seed;
      }
      if (!sim_methods.empty()) {
        overrides.method_filter = split(sim_methods, ',');
      }
      if (sim->count("--bandwidth") > 0) {
        overrides.bandwidth = sim_bandwidth;
      }
      overrides.truncate = sim_truncate;
      overrides.population_file = sim_population;
      overrides.redraw_population = sim_redraw;
      overrides.threads = sim_threads;
      return run_simulate(sim_target, overrides, sim_format, sim_out);
    }
    if (app.got_subcommand(est)) {
      if (est->count("--m") > 0 && est_m < 1) {
        throw ConfigError("--m must be at least 1");
      }
      return run_estimate(est_path, est_method, est_m, est_bandwidth,
                          est_truncate, est_out);
    }
    if (app.got_subcommand(scan)) {
      return run_risk_scan(scan_path, scan_m, scan_bandwidth, scan_truncate,
                           scan_format, scan_out);
    }
    throw ConfigError("no subcommand given");
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDataError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDataError;
  }
}

}  // namespace ebproxy::cli
