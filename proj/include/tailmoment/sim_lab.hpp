#pragma once

// Simulation designs with symmetric Pareto errors, the Monte Carlo rejection
// harness, and rejection curves of the test under the limit law.

#include <array>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tailmoment/lfd.hpp"
#include "tailmoment/moment_test.hpp"
#include "tailmoment/rng.hpp"
#include "tailmoment/scores.hpp"

namespace tailmoment {

enum class DesignFamily { kRegression, kIv };

std::string_view to_string(DesignFamily family);
DesignFamily parse_design_family(std::string_view name);

struct SimDesign {
  DesignFamily family = DesignFamily::kRegression;
  std::size_t n = 10000;
  double xi_u = 0.5;
  std::array<double, 2> theta{1.0, 1.0};
  std::array<double, 2> pi{1.0, 1.0};
  Eigen::Matrix2d endogeneity_cov = (Eigen::Matrix2d() << 1.0, 0.5, 0.5, 1.0).finished();
  double noise_scale = 1.0;  // multiplies U and V; 0 gives noiseless data
  std::uint64_t seed = 0;

  void validate() const;
};

// S * (1 - u)^(-xi_u) with S = +1 when positive.
double sym_pareto_from_uniform(double u, bool positive, double xi_u);
std::vector<double> sym_pareto_sample(double xi_u, std::size_t n, Rng& rng);

// Regression: X ~ N(0,1), Y = theta1 + theta2 X + U.
// IV: Z ~ N(0,1), (V, R) ~ N(0, endogeneity_cov), X = pi1 + pi2 Z + R,
// Y = theta1 + theta2 X + U + V. Designs carry an intercept column.
ModelData simulate_design(const SimDesign& design, Rng& rng);
// Uses a stream seeded by design.seed.
ModelData simulate_design(const SimDesign& design);

struct McReport {
  SimDesign design;
  int k = 0;
  int r = 1;
  double alpha = 0.05;
  int replications = 0;
  int rejections = 0;
  int failures = 0;  // replications whose tail was degenerate
  double rejection_frequency = 0.0;
  double standard_error = 0.0;
};

// Replication i of designs[d] draws from the substream (master_seed, d, i).
// The decision uses the bundle's table at alpha.
std::vector<McReport> mc_rejection_table(std::span<const SimDesign> designs, const ScoreConfig& cfg,
                                         std::span<const LfdTable> bundle, int replications,
                                         std::uint64_t master_seed, double alpha = 0.05,
                                         bool allow_unverified = false);

struct PowerPoint {
  double xi = 0.0;
  double rejection = 0.0;
  double standard_error = 0.0;
  int draws = 0;
};

// Rejection frequency of the table's test under the limit law at each xi.
// Draw d reuses one arrival sequence across the whole grid.
std::vector<PowerPoint> power_curve(int k, std::span<const double> xi_grid, const LfdTable& table,
                                    int draws_per_point, std::uint64_t seed,
                                    bool allow_unverified = false);

void write_mc_csv(std::ostream& out, std::span<const McReport> reports);
void write_power_csv(std::ostream& out, std::span<const PowerPoint> curve);
// Fixed-width table with one row per design and one column per (k, r) cell.
std::string format_mc_table(std::span<const McReport> reports);

}  // namespace tailmoment
