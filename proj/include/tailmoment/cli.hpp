#pragma once

// CSV ingestion, run configuration, table lookup and the four command-line
// workflows: calibrate, test, simulate, power.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "tailmoment/lfd.hpp"
#include "tailmoment/scores.hpp"
#include "tailmoment/sim_lab.hpp"

namespace tailmoment {

enum class Command { kCalibrate, kTest, kSimulate, kPower };
enum class Profile { kDesk, kFull };

// Exit statuses of dispatch.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRefused = 1;
inline constexpr int kExitInputError = 2;

// Environment variable naming the default table directory.
inline constexpr const char* kTableDirEnv = "TAILMOMENT_TABLES";

struct ColumnMapping {
  std::string response;                  // empty: first column
  std::vector<std::string> design;       // empty: every column not otherwise mapped
  std::vector<std::string> instruments;  // required for IV
  std::string score;                     // RAW_SCORES; empty: first column
  bool intercept = true;                 // prepend a constant to design and instruments
};

// Rows keep file order. Rows with a missing, non-numeric or non-finite mapped
// cell raise IngestionError naming the first 20 offenders; unknown columns
// raise ConfigError.
ModelData parse_csv(const std::filesystem::path& path, const ColumnMapping& mapping, ModelTag tag);

struct RunConfig {
  Command command = Command::kTest;
  Profile profile = Profile::kDesk;

  // test
  std::filesystem::path data_path;
  ModelTag model = ModelTag::kOls;
  ColumnMapping columns;
  bool calibrate_if_missing = false;
  bool allow_unverified = false;

  int r = 1;
  int k = 50;
  std::vector<double> alphas;  // empty: the default grid for test, {0.05} otherwise
  double decision_alpha = 0.05;
  double epsilon = kDefaultEpsilon;
  double xi_bar = kDefaultXiBar;
  std::filesystem::path table_dir;  // empty: $TAILMOMENT_TABLES, then ./tables
  std::filesystem::path output;     // empty: standard output
  std::uint64_t seed = 1;
  int threads = 0;

  // calibrate
  int grid_size = 50;
  int n_draws = 10000;
  int iterations = 500;
  double eta = 1.0;
  int fine_grid = 200;
  int verify_draws = 10000;

  // simulate
  DesignFamily design = DesignFamily::kRegression;
  std::size_t n = 10000;
  std::vector<double> xi_u;
  std::optional<int> replications;  // default by profile: 1000 desk, 5000 full

  // power
  std::vector<double> xi_grid;      // empty: 41 points on [0, xi_bar]
  std::optional<int> power_draws;   // default by profile: 2000 desk, 10000 full

  void validate() const;
};

std::filesystem::path resolve_table_dir(const RunConfig& cfg);
std::filesystem::path table_path(const std::filesystem::path& dir, int k, double alpha);

// Writes artifacts, prints a summary to out and diagnostics to err, and maps
// failures to exit statuses.
int dispatch(const RunConfig& cfg, std::ostream& out, std::ostream& err);

// Parses a command line into a RunConfig and dispatches it.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace tailmoment
