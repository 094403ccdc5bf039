#pragma once

// Least favorable null weights by iterative importance sampling, uniform size
// verification, and the Neyman-Pearson bound on weighted average power.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tailmoment/evt.hpp"
#include "tailmoment/likelihood_ratio.hpp"

namespace tailmoment {

inline constexpr double kDefaultAlpha = 0.05;
inline constexpr double kDefaultEpsilon = 0.01;
inline constexpr double kMassFloor = 1e-8;
inline constexpr double kMinEffectiveSampleSize = 50.0;

struct ProposalPool {
  int k = 0;
  std::uint64_t seed = 0;
  std::vector<double> grid;                // mixture components
  std::vector<SelfNormalizedTail> draws;
  std::vector<double> source_xi;
  std::vector<double> log_proposal;        // log of the equal mixture density
  std::vector<double> grid_log_density;    // draws x grid, row-major

  std::size_t size() const noexcept { return draws.size(); }
};

// Draw d uses its own substream, so the pool does not depend on thread count.
ProposalPool draw_proposal_pool(int k, std::span<const double> grid, int n_draws,
                                std::uint64_t seed, double xi_bar = kDefaultXiBar);

struct RejectionEstimate {
  std::vector<double> xi;
  std::vector<double> probability;
  std::vector<double> standard_error;
  std::vector<double> effective_sample_size;
  std::vector<std::string> warnings;
};

// Importance-sampled P_xi(LR > 1) for each xi in eval_grid.
RejectionEstimate rejection_probs(const ProposalPool& pool, const GridWeights& lambda,
                                  const GridWeights& w, std::span<const double> eval_grid);

struct SizeReport {
  std::vector<double> xi;
  std::vector<double> rejection;
  std::vector<double> standard_error;
  double max_rejection = 0.0;
  double argmax_xi = 0.0;
  double max_standard_error = 0.0;
  double threshold = 0.0;  // alpha + 2 * max_standard_error
  int draws_per_point = 0;
  std::uint64_t seed = 0;
  bool passed = false;
};

struct LfdTable {
  struct Meta {
    int n_draws = 0;
    int iterations = 0;
    double eta = 1.0;
    std::uint64_t seed = 0;
    int grid_size = 0;
    double mass_floor = kMassFloor;
    bool verified = false;
    std::optional<double> verified_max_rejection;
    int fine_grid = 0;
    int draws_per_point = 0;
    double size_slack = 0.0;  // threshold - alpha of the verification run
    int retries = 0;
    double se_margin = 0.0;
  };

  int k = 0;
  double alpha = kDefaultAlpha;
  double epsilon = kDefaultEpsilon;
  double xi_bar = kDefaultXiBar;
  GridWeights null_grid;   // unnormalized Lambda, critical value absorbed
  GridWeights alt_weight;  // W, sums to 1
  Meta meta;

  // "lfd_k50_a0.05"
  std::string id() const;
  void validate() const;
};

// Canonical alpha formatting used in table ids and file names.
std::string format_alpha(double alpha);
std::string table_id(int k, double alpha);

nlohmann::json to_json(const LfdTable& table);
LfdTable table_from_json(const nlohmann::json& j);
void save_table(const LfdTable& table, const std::filesystem::path& path);
LfdTable load_table(const std::filesystem::path& path);

// W: uniform on (1 - epsilon, xi_bar] on n points.
GridWeights default_alt_weight(double epsilon, double xi_bar, int n = 50);

struct CalibrationConfig {
  int k = 50;
  double alpha = kDefaultAlpha;
  double epsilon = kDefaultEpsilon;
  double xi_bar = kDefaultXiBar;
  int grid_size = 50;
  int alt_grid_size = 50;
  int n_draws = 10000;
  int iterations = 500;
  double eta = 1.0;
  double mass_floor = kMassFloor;
  std::uint64_t seed = 1;
  int fine_grid_size = 200;
  int draws_per_point = 10000;
  int max_retries = 1;
  // Each step targets P + se_margin * SE(P) <= alpha, SE the importance
  // sampling standard error. A retry doubles the grid, multiplies the pool by
  // retry_pool_factor and uses at least retry_se_margin.
  double se_margin = 0.0;
  double retry_se_margin = 2.0;
  int retry_pool_factor = 4;

  void validate() const;
};

// The fixed-pool iteration Lambda <- max(Lambda + eta (P - alpha), floor),
// started from equal masses 1/|grid| on pool.grid. Returns the final masses.
std::vector<double> iterate_lambda(const ProposalPool& pool, const GridWeights& w,
                                   const CalibrationConfig& cfg);

// Throws CalibrationFailed when verification fails on the last attempt.
// iterations == 0 returns the uniform starting Lambda, flagged unverified.
LfdTable calibrate_lfd(const CalibrationConfig& cfg);

// Direct sampling on fine_grid_size points of [0, 1 - epsilon]. Draw d reuses
// one arrival sequence across every grid point.
SizeReport verify_size(const LfdTable& table, int fine_grid_size, int draws_per_point,
                       std::uint64_t seed);

struct PowerBound {
  double upper_bound = 0.0;
  double achieved_wap = 0.0;
  double achieved_se = 0.0;
  double critical_log_ratio = 0.0;
  bool near_optimal = false;  // achieved_wap >= (1 - epsilon) * upper_bound
  std::vector<std::string> warnings;
};

PowerBound np_power_bound(const ProposalPool& pool, const GridWeights& lambda_tilde,
                          const GridWeights& w, double alpha, const LfdTable& test);
// Uses the table's own normalized Lambda, W and alpha.
PowerBound np_power_bound(const ProposalPool& pool, const LfdTable& table);

}  // namespace tailmoment
