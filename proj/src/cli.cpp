#include "tailmoment/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "tailmoment/errors.hpp"
#include "tailmoment/moment_test.hpp"
#include "tailmoment/parallel.hpp"

namespace tailmoment {
namespace {

constexpr std::size_t kMaxReportedOffenders = 20;

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  std::string out(s.substr(first, last - first + 1));
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
      field += c;
    } else if (c == ',' && !quoted) {
      out.push_back(trim(field));
      field.clear();
    } else {
      field += c;
    }
  }
  out.push_back(trim(field));
  return out;
}

bool parse_number(const std::string& cell, double& value) {
  if (cell.empty()) return false;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  if (*begin == '+') ++begin;
  const auto res = std::from_chars(begin, end, value);
  return res.ec == std::errc() && res.ptr == end && std::isfinite(value);
}

std::size_t column_index(const std::vector<std::string>& header, const std::string& name) {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw ConfigError("column '" + name + "' not found in CSV header");
  return static_cast<std::size_t>(it - header.begin());
}

Eigen::MatrixXd assemble(const std::vector<std::vector<double>>& rows, const std::vector<std::size_t>& cols,
                         bool intercept) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto offset = intercept ? 1 : 0;
  Eigen::MatrixXd m(n, static_cast<Eigen::Index>(cols.size()) + offset);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (intercept) m(i, 0) = 1.0;
    for (std::size_t j = 0; j < cols.size(); ++j) {
      m(i, static_cast<Eigen::Index>(j) + offset) = rows[static_cast<std::size_t>(i)][cols[j]];
    }
  }
  return m;
}

std::vector<double> effective_alphas(const RunConfig& cfg) {
  if (!cfg.alphas.empty()) return cfg.alphas;
  if (cfg.command == Command::kTest) return {std::begin(kAlphaGrid), std::end(kAlphaGrid)};
  return {cfg.decision_alpha};
}

CalibrationConfig calibration_config(const RunConfig& cfg, double alpha) {
  CalibrationConfig c;
  c.k = cfg.k;
  c.alpha = alpha;
  c.epsilon = cfg.epsilon;
  c.xi_bar = cfg.xi_bar;
  c.grid_size = cfg.grid_size;
  c.n_draws = cfg.n_draws;
  c.iterations = cfg.iterations;
  c.eta = cfg.eta;
  c.seed = cfg.seed;
  c.fine_grid_size = cfg.fine_grid;
  c.draws_per_point = cfg.verify_draws;
  return c;
}

// Writes to cfg.output when set, else to out.
template <typename Writer>
void emit(const RunConfig& cfg, std::ostream& out, Writer&& write) {
  if (cfg.output.empty()) {
    write(out);
    return;
  }
  if (cfg.output.has_parent_path()) std::filesystem::create_directories(cfg.output.parent_path());
  std::ofstream file(cfg.output);
  if (!file) throw ConfigError("cannot write " + cfg.output.string());
  write(file);
}

std::vector<LfdTable> load_bundle(const RunConfig& cfg, std::ostream& err) {
  const auto dir = resolve_table_dir(cfg);
  std::vector<LfdTable> bundle;
  std::vector<double> missing;
  for (double alpha : effective_alphas(cfg)) {
    const auto path = table_path(dir, cfg.k, alpha);
    if (std::filesystem::exists(path)) {
      bundle.push_back(load_table(path));
      if (bundle.back().k != cfg.k || bundle.back().alpha != alpha) {
        throw ConfigError("table " + path.string() + " does not match its file name");
      }
    } else {
      missing.push_back(alpha);
    }
  }
  const bool have_decision = std::any_of(bundle.begin(), bundle.end(),
                                         [&](const LfdTable& t) { return t.alpha == cfg.decision_alpha; });
  if (cfg.calibrate_if_missing) {
    for (double alpha : missing) {
      err << "calibrating missing table " << table_id(cfg.k, alpha) << '\n';
      LfdTable t = calibrate_lfd(calibration_config(cfg, alpha));
      save_table(t, table_path(dir, cfg.k, alpha));
      bundle.push_back(std::move(t));
    }
  } else if (!have_decision) {
    throw ConfigError("no calibrated table " + table_path(dir, cfg.k, cfg.decision_alpha).string() +
                      "; run calibrate first or pass --calibrate-if-missing");
  } else if (!missing.empty() && cfg.command == Command::kTest) {
    err << "warning: " << missing.size() << " table(s) of the alpha grid are missing; p-value is coarser\n";
  }
  return bundle;
}

int run_calibrate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto dir = cfg.output.empty() ? resolve_table_dir(cfg) : cfg.output;
  for (double alpha : effective_alphas(cfg)) {
    const LfdTable t = calibrate_lfd(calibration_config(cfg, alpha));
    const auto path = table_path(dir, cfg.k, alpha);
    save_table(t, path);
    out << t.id() << ": verified=" << (t.meta.verified ? "yes" : "no");
    if (t.meta.verified_max_rejection) {
      out << " max_null_rejection=" << *t.meta.verified_max_rejection
          << " threshold=" << t.alpha + t.meta.size_slack;
    }
    out << " -> " << path.string() << '\n';
    if (!t.meta.verified) err << "warning: " << t.id() << " was not verified (iterations=0)\n";
  }
  return kExitOk;
}

int run_test(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const ModelData data = parse_csv(cfg.data_path, cfg.columns, cfg.model);
  const auto bundle = load_bundle(cfg, err);
  const TestOptions options{cfg.decision_alpha, cfg.allow_unverified};
  const TestOutcome outcome = run_full_test(data, ScoreConfig{cfg.r, cfg.k}, bundle, options);

  std::ostringstream p;
  if (outcome.p_value >= 1.0) {
    p << "p>" << format_alpha(outcome.alphas.back());
  } else {
    p << "p<=" << format_alpha(outcome.p_value);
  }
  out << "decision=" << (outcome.decision ? "reject" : "accept") << " " << p.str() << " k=" << outcome.k
      << " r=" << outcome.r << " alpha=" << format_alpha(outcome.alpha) << " n=" << outcome.n << '\n';
  for (const auto& w : outcome.warnings) err << "warning: " << w << '\n';
  if (cfg.output.empty()) {
    out << to_json(outcome).dump(2) << '\n';
  } else {
    emit(cfg, out, [&](std::ostream& os) { os << to_json(outcome).dump(2) << '\n'; });
  }
  return kExitOk;
}

int run_simulate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto bundle = load_bundle(cfg, err);
  std::vector<SimDesign> designs;
  const std::vector<double> xis = cfg.xi_u.empty() ? std::vector<double>{0.5} : cfg.xi_u;
  for (double xi : xis) {
    SimDesign d;
    d.family = cfg.design;
    d.n = cfg.n;
    d.xi_u = xi;
    d.seed = cfg.seed;
    designs.push_back(d);
  }
  const int reps = cfg.replications.value_or(cfg.profile == Profile::kFull ? 5000 : 1000);
  const auto reports = mc_rejection_table(designs, ScoreConfig{cfg.r, cfg.k}, bundle, reps, cfg.seed,
                                          cfg.decision_alpha, cfg.allow_unverified);
  emit(cfg, out, [&](std::ostream& os) { write_mc_csv(os, reports); });
  if (!cfg.output.empty()) out << format_mc_table(reports);
  return kExitOk;
}

int run_power(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto bundle = load_bundle(cfg, err);
  const LfdTable* table = nullptr;
  for (const auto& t : bundle) {
    if (t.alpha == cfg.decision_alpha) table = &t;
  }
  const auto grid = cfg.xi_grid.empty() ? linspace(0.0, cfg.xi_bar, 41) : cfg.xi_grid;
  const int draws = cfg.power_draws.value_or(cfg.profile == Profile::kFull ? 10000 : 2000);
  const auto curve = power_curve(cfg.k, grid, *table, draws, cfg.seed, cfg.allow_unverified);
  emit(cfg, out, [&](std::ostream& os) { write_power_csv(os, curve); });
  if (!cfg.output.empty()) out << "wrote " << curve.size() << " points to " << cfg.output.string() << '\n';
  return kExitOk;
}

}  // namespace

ModelData parse_csv(const std::filesystem::path& path, const ColumnMapping& mapping, ModelTag tag) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path.string() + " has no header row");
  const auto header = split_csv_line(line);

  std::vector<std::size_t> cols;  // response or score first, then design, then instruments
  std::size_t n_design = 0;
  std::size_t n_instruments = 0;
  if (tag == ModelTag::kRawScores) {
    cols.push_back(mapping.score.empty() ? 0 : column_index(header, mapping.score));
  } else {
    const std::size_t response = mapping.response.empty() ? 0 : column_index(header, mapping.response);
    cols.push_back(response);
    std::vector<std::size_t> instruments;
    for (const auto& name : mapping.instruments) instruments.push_back(column_index(header, name));
    std::vector<std::size_t> design;
    if (mapping.design.empty()) {
      for (std::size_t j = 0; j < header.size(); ++j) {
        if (j != response && std::find(instruments.begin(), instruments.end(), j) == instruments.end()) {
          design.push_back(j);
        }
      }
    } else {
      for (const auto& name : mapping.design) design.push_back(column_index(header, name));
    }
    if (design.empty() && !mapping.intercept) throw ConfigError("no design columns");
    if (tag == ModelTag::kIv && instruments.empty()) throw ConfigError("IV model requires --instruments");
    n_design = design.size();
    n_instruments = instruments.size();
    cols.insert(cols.end(), design.begin(), design.end());
    cols.insert(cols.end(), instruments.begin(), instruments.end());
  }

  std::vector<std::vector<double>> rows;
  std::vector<std::string> offenders;
  std::size_t bad_rows = 0;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto cells = split_csv_line(line);
    std::vector<double> values(cols.size());
    std::string problem;
    for (std::size_t j = 0; j < cols.size() && problem.empty(); ++j) {
      if (cols[j] >= cells.size()) {
        problem = "missing column '" + header[cols[j]] + "'";
      } else if (!parse_number(cells[cols[j]], values[j])) {
        problem = "column '" + header[cols[j]] + "' has non-numeric value '" + cells[cols[j]] + "'";
      }
    }
    if (!problem.empty()) {
      ++bad_rows;
      if (offenders.size() < kMaxReportedOffenders) offenders.push_back("row " + std::to_string(row) + ": " + problem);
      continue;
    }
    rows.push_back(std::move(values));
  }
  if (bad_rows > 0) {
    std::ostringstream os;
    os << path.string() << ": " << bad_rows << " row(s) rejected";
    for (const auto& o : offenders) os << "\n  " << o;
    if (bad_rows > offenders.size()) os << "\n  ...";
    throw IngestionError(os.str(), offenders);
  }
  if (rows.empty()) throw IngestionError(path.string() + " has no data rows", {});

  ModelData data;
  data.tag = tag;
  const auto n = static_cast<Eigen::Index>(rows.size());
  if (tag == ModelTag::kRawScores) {
    Eigen::VectorXd scores(n);
    for (Eigen::Index i = 0; i < n; ++i) scores[i] = rows[static_cast<std::size_t>(i)][0];
    data.raw_scores = std::move(scores);
    return data;
  }
  data.response.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) data.response[i] = rows[static_cast<std::size_t>(i)][0];
  std::vector<std::size_t> design_idx, instrument_idx;
  for (std::size_t j = 0; j < n_design; ++j) design_idx.push_back(1 + j);
  for (std::size_t j = 0; j < n_instruments; ++j) instrument_idx.push_back(1 + n_design + j);
  data.design = assemble(rows, design_idx, mapping.intercept);
  if (n_instruments > 0) data.instruments = assemble(rows, instrument_idx, mapping.intercept);
  return data;
}

void RunConfig::validate() const {
  if (k < 3) throw ConfigError("k must be >= 3");
  if (r != 1 && r != 2) throw ConfigError("r must be 1 or 2");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("epsilon must lie in (0, 1)");
  if (!(xi_bar > 1.0 - epsilon)) throw ConfigError("xi-max must exceed 1 - epsilon");
  for (double a : alphas) {
    if (!(a > 0.0 && a < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  }
  if (command == Command::kTest && data_path.empty()) throw ConfigError("test requires --data");
}

std::filesystem::path resolve_table_dir(const RunConfig& cfg) {
  if (!cfg.table_dir.empty()) return cfg.table_dir;
  if (const char* env = std::getenv(kTableDirEnv); env != nullptr && *env != '\0') return env;
  return "tables";
}

std::filesystem::path table_path(const std::filesystem::path& dir, int k, double alpha) {
  return dir / (table_id(k, alpha) + ".json");
}

int dispatch(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    cfg.validate();
    if (cfg.threads > 0) set_max_threads(cfg.threads);
    switch (cfg.command) {
      case Command::kCalibrate: return run_calibrate(cfg, out, err);
      case Command::kTest: return run_test(cfg, out, err);
      case Command::kSimulate: return run_simulate(cfg, out, err);
      case Command::kPower: return run_power(cfg, out, err);
    }
    return kExitInputError;
  } catch (const UnverifiedTable& e) {
    err << "refused: " << e.what() << '\n';
    return kExitRefused;
  } catch (const CalibrationFailed& e) {
    err << "refused: " << e.what() << '\n';
    return kExitRefused;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInputError;
  }
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fixed-k extreme value test of finite moments of estimating-equation scores", "tailmoment"};
  app.require_subcommand(1);
  RunConfig cfg;
  std::string profile = "desk";
  std::string model = "ols";
  std::string design = "regression";
  bool all_alphas = false;
  bool no_intercept = false;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--k", cfg.k, "Number of upper order statistics")->capture_default_str();
    sub->add_option("--alpha", cfg.alphas, "Significance level(s)")->delimiter(',');
    sub->add_option("--epsilon", cfg.epsilon, "Width of the null boundary band")->capture_default_str();
    sub->add_option("--xi-max", cfg.xi_bar, "Upper end of the tail-index space")->capture_default_str();
    sub->add_option("--tables", cfg.table_dir, "Table directory (default $TAILMOMENT_TABLES or ./tables)");
    sub->add_option("--seed", cfg.seed, "Master seed")->capture_default_str();
    sub->add_option("--threads", cfg.threads, "Worker thread cap");
    sub->add_option("--profile", profile, "desk or full")->check(CLI::IsMember({"desk", "full"}));
  };

  auto* cal = app.add_subcommand("calibrate", "Calibrate least favorable tables and write them as JSON");
  common(cal);
  cal->add_flag("--alpha-grid", all_alphas, "Calibrate every level of the default alpha grid");
  cal->add_option("--grid", cfg.grid_size, "Null grid size")->capture_default_str();
  cal->add_option("--draws", cfg.n_draws, "Proposal pool size")->capture_default_str();
  cal->add_option("--iters", cfg.iterations, "Iterations")->capture_default_str();
  cal->add_option("--eta", cfg.eta, "Step length")->capture_default_str();
  cal->add_option("--fine-grid", cfg.fine_grid, "Verification grid size")->capture_default_str();
  cal->add_option("--verify-draws", cfg.verify_draws, "Verification draws per point")->capture_default_str();
  cal->add_option("--out", cfg.output, "Output directory (default: the table directory)");

  auto* test = app.add_subcommand("test", "Test a data set");
  common(test);
  test->add_option("--data", cfg.data_path, "CSV file with a header row")->required();
  test->add_option("--model", model, "ols, iv or scores")->capture_default_str();
  test->add_option("--r", cfg.r, "Moment order, 1 or 2")->capture_default_str();
  test->add_option("--decision-alpha", cfg.decision_alpha, "Level of the reported decision")->capture_default_str();
  test->add_option("--response", cfg.columns.response, "Response column (default: first)");
  test->add_option("--regressors", cfg.columns.design, "Regressor columns (default: all others)")->delimiter(',');
  test->add_option("--instruments", cfg.columns.instruments, "Instrument columns")->delimiter(',');
  test->add_option("--score-column", cfg.columns.score, "Score column for --model scores (default: first)");
  test->add_flag("--no-intercept", no_intercept, "Do not prepend a constant column");
  test->add_flag("--calibrate-if-missing", cfg.calibrate_if_missing, "Calibrate tables that are not on disk");
  test->add_flag("--allow-unverified", cfg.allow_unverified, "Use tables that never passed verification");
  test->add_option("--out", cfg.output, "Outcome JSON path (default: standard output)");

  auto* sim = app.add_subcommand("simulate", "Monte Carlo rejection frequencies");
  common(sim);
  sim->add_option("--design", design, "regression or iv")->capture_default_str();
  sim->add_option("--n", cfg.n, "Sample size")->capture_default_str();
  sim->add_option("--xi-u", cfg.xi_u, "Error tail index (repeatable)")->delimiter(',');
  sim->add_option("--r", cfg.r, "Moment order, 1 or 2")->capture_default_str();
  sim->add_option("--reps", cfg.replications, "Replications (default 1000 desk, 5000 full)");
  sim->add_flag("--calibrate-if-missing", cfg.calibrate_if_missing, "Calibrate tables that are not on disk");
  sim->add_flag("--allow-unverified", cfg.allow_unverified, "Use tables that never passed verification");
  sim->add_option("--out", cfg.output, "CSV path (default: standard output)");

  auto* pow = app.add_subcommand("power", "Rejection curve under the limit law");
  common(pow);
  pow->add_option("--xi", cfg.xi_grid, "Tail-index grid (default 41 points on [0, xi-max])")->delimiter(',');
  pow->add_option("--draws", cfg.power_draws, "Draws per point (default 2000 desk, 10000 full)");
  pow->add_flag("--calibrate-if-missing", cfg.calibrate_if_missing, "Calibrate tables that are not on disk");
  pow->add_flag("--allow-unverified", cfg.allow_unverified, "Use tables that never passed verification");
  pow->add_option("--out", cfg.output, "CSV path (default: standard output)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInputError;
  }

  try {
    if (*cal) cfg.command = Command::kCalibrate;
    if (*test) cfg.command = Command::kTest;
    if (*sim) cfg.command = Command::kSimulate;
    if (*pow) cfg.command = Command::kPower;
    cfg.profile = profile == "full" ? Profile::kFull : Profile::kDesk;
    cfg.model = parse_model_tag(model);
    cfg.design = parse_design_family(design);
    cfg.columns.intercept = !no_intercept;
    if (all_alphas) cfg.alphas.assign(std::begin(kAlphaGrid), std::end(kAlphaGrid));
    if (cfg.command != Command::kTest && cfg.command != Command::kCalibrate && cfg.alphas.size() == 1) {
      cfg.decision_alpha = cfg.alphas.front();
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInputError;
  }
  return dispatch(cfg, out, err);
}

}  // namespace tailmoment
