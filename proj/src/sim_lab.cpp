#include "tailmoment/sim_lab.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <utility>

#include "tailmoment/errors.hpp"
#include "tailmoment/parallel.hpp"

namespace tailmoment {
namespace {

const LfdTable& table_at(std::span<const LfdTable> bundle, double alpha) {
  for (const auto& t : bundle) {
    if (t.alpha == alpha) return t;
  }
  throw InvalidArgument("bundle has no table at alpha=" + format_alpha(alpha));
}

std::string cell_label(int k, int r) { return "k=" + std::to_string(k) + ",r=" + std::to_string(r); }

}  // namespace

std::string_view to_string(DesignFamily family) {
  return family == DesignFamily::kRegression ? "regression" : "iv";
}

DesignFamily parse_design_family(std::string_view name) {
  if (name == "regression" || name == "ols") return DesignFamily::kRegression;
  if (name == "iv") return DesignFamily::kIv;
  throw InvalidArgument("unknown design family '" + std::string(name) + "'");
}

void SimDesign::validate() const {
  if (!(xi_u > 0.0) || !std::isfinite(xi_u)) throw InvalidArgument("xi_u must be positive");
  if (n < 3) throw InvalidArgument("design needs n >= 3");
  if (!(noise_scale >= 0.0) || !std::isfinite(noise_scale)) throw InvalidArgument("noise_scale must be non-negative");
  if (family == DesignFamily::kIv) {
    if (!endogeneity_cov.allFinite() || endogeneity_cov(0, 1) != endogeneity_cov(1, 0)) {
      throw InvalidArgument("endogeneity covariance must be symmetric");
    }
    if (endogeneity_cov.llt().info() != Eigen::Success) {
      throw InvalidArgument("endogeneity covariance must be positive definite");
    }
  }
}

double sym_pareto_from_uniform(double u, bool positive, double xi_u) {
  if (!(u >= 0.0 && u < 1.0)) throw InvalidArgument("u must lie in [0, 1)");
  if (!(xi_u > 0.0)) throw InvalidArgument("xi_u must be positive");
  const double p = std::pow(1.0 - u, -xi_u);
  return positive ? p : -p;
}

std::vector<double> sym_pareto_sample(double xi_u, std::size_t n, Rng& rng) {
  if (!(xi_u > 0.0) || !std::isfinite(xi_u)) throw InvalidArgument("xi_u must be positive");
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::bernoulli_distribution sign(0.5);
  std::vector<double> out(n);
  for (auto& x : out) {
    const bool positive = sign(rng);
    x = sym_pareto_from_uniform(uniform(rng), positive, xi_u);
  }
  return out;
}

ModelData simulate_design(const SimDesign& d, Rng& rng) {
  d.validate();
  const auto n = static_cast<Eigen::Index>(d.n);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto u = sym_pareto_sample(d.xi_u, d.n, rng);

  ModelData data;
  data.response.resize(n);
  data.design.resize(n, 2);
  data.design.col(0).setOnes();
  if (d.family == DesignFamily::kRegression) {
    data.tag = ModelTag::kOls;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double x = normal(rng);
      data.design(i, 1) = x;
      data.response[i] = d.theta[0] + d.theta[1] * x + d.noise_scale * u[static_cast<std::size_t>(i)];
    }
    return data;
  }

  data.tag = ModelTag::kIv;
  const Eigen::Matrix2d chol = d.endogeneity_cov.llt().matrixL();
  Eigen::MatrixXd z(n, 2);
  z.col(0).setOnes();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double zi = normal(rng);
    const double e1 = normal(rng);
    const double e2 = normal(rng);
    const double v = chol(0, 0) * e1;
    const double r = chol(1, 0) * e1 + chol(1, 1) * e2;
    const double x = d.pi[0] + d.pi[1] * zi + r;
    z(i, 1) = zi;
    data.design(i, 1) = x;
    data.response[i] = d.theta[0] + d.theta[1] * x + d.noise_scale * (u[static_cast<std::size_t>(i)] + v);
  }
  data.instruments = std::move(z);
  return data;
}

ModelData simulate_design(const SimDesign& design) {
  Rng rng(design.seed);
  return simulate_design(design, rng);
}

std::vector<McReport> mc_rejection_table(std::span<const SimDesign> designs, const ScoreConfig& cfg,
                                         std::span<const LfdTable> bundle, int replications,
                                         std::uint64_t master_seed, double alpha,
                                         bool allow_unverified) {
  cfg.validate();
  if (replications < 1) throw InvalidArgument("replications must be positive");
  const LfdTable& table = table_at(bundle, alpha);
  if (table.k != cfg.k) throw InvalidArgument("table k does not match the score configuration");
  if (!table.meta.verified && !allow_unverified) {
    throw UnverifiedTable("table " + table.id() + " has not passed size verification");
  }
  for (const auto& d : designs) {
    d.validate();
    if (d.n < static_cast<std::size_t>(cfg.k)) throw InvalidArgument("design n is smaller than k");
  }

  const std::span<const LfdTable> single(&table, 1);
  const TestOptions options{alpha, allow_unverified};
  const auto reps = static_cast<std::size_t>(replications);
  std::vector<McReport> out;
  for (std::size_t di = 0; di < designs.size(); ++di) {
    // 0 no rejection, 1 rejection, 2 degenerate tail
    std::vector<char> result(reps);
    parallel_for(reps, [&](std::size_t i) {
      Rng rng = substream(tagged(master_seed, StreamTag::kReplication, di), i);
      const ModelData data = simulate_design(designs[di], rng);
      try {
        result[i] = run_full_test(data, cfg, single, options).decision ? 1 : 0;
      } catch (const DegenerateTail&) {
        result[i] = 2;
      }
    });
    McReport rep;
    rep.design = designs[di];
    rep.k = cfg.k;
    rep.r = cfg.r;
    rep.alpha = alpha;
    rep.replications = replications;
    rep.rejections = static_cast<int>(std::count(result.begin(), result.end(), 1));
    rep.failures = static_cast<int>(std::count(result.begin(), result.end(), 2));
    rep.rejection_frequency = static_cast<double>(rep.rejections) / replications;
    const double p = rep.rejection_frequency;
    rep.standard_error = std::sqrt(p * (1.0 - p) / replications);
    out.push_back(rep);
  }
  return out;
}

std::vector<PowerPoint> power_curve(int k, std::span<const double> xi_grid, const LfdTable& table,
                                    int draws_per_point, std::uint64_t seed, bool allow_unverified) {
  if (table.k != k) throw InvalidArgument("table k does not match");
  if (draws_per_point < 1) throw InvalidArgument("draws_per_point must be positive");
  if (xi_grid.empty()) throw InvalidArgument("empty tail-index grid");
  for (double xi : xi_grid) {
    if (!std::isfinite(xi) || xi < 0.0) throw InvalidArgument("tail indices must be finite and non-negative");
  }
  if (!table.meta.verified && !allow_unverified) {
    throw UnverifiedTable("table " + table.id() + " has not passed size verification");
  }
  const LikelihoodRatio lr(table.null_grid, table.alt_weight);
  const auto n = static_cast<std::size_t>(draws_per_point);
  const std::size_t g = xi_grid.size();
  const std::uint64_t stream = tagged(seed, StreamTag::kPowerCurve);

  std::vector<char> reject(n * g);
  parallel_for(n, [&](std::size_t d) {
    Rng rng = substream(stream, d);
    const auto arrivals = sample_arrivals(k, rng);
    for (std::size_t j = 0; j < g; ++j) {
      reject[d * g + j] = lr.log_ratio(self_normalize(top_k_from_arrivals(arrivals, xi_grid[j]))) > 0.0;
    }
  });

  std::vector<PowerPoint> out;
  for (std::size_t j = 0; j < g; ++j) {
    std::size_t hits = 0;
    for (std::size_t d = 0; d < n; ++d) hits += reject[d * g + j] ? 1 : 0;
    PowerPoint p;
    p.xi = xi_grid[j];
    p.draws = draws_per_point;
    p.rejection = static_cast<double>(hits) / static_cast<double>(n);
    p.standard_error = std::sqrt(p.rejection * (1.0 - p.rejection) / static_cast<double>(n));
    out.push_back(p);
  }
  return out;
}

void write_mc_csv(std::ostream& out, std::span<const McReport> reports) {
  out << "family,n,xi_u,theta1,theta2,k,r,alpha,replications,rejection_frequency,standard_error,failures\n";
  out << std::setprecision(17);
  for (const auto& r : reports) {
    out << to_string(r.design.family) << ',' << r.design.n << ',' << r.design.xi_u << ','
        << r.design.theta[0] << ',' << r.design.theta[1] << ',' << r.k << ',' << r.r << ','
        << r.alpha << ',' << r.replications << ',' << r.rejection_frequency << ','
        << r.standard_error << ',' << r.failures << '\n';
  }
}

void write_power_csv(std::ostream& out, std::span<const PowerPoint> curve) {
  out << "xi,rejection,standard_error,draws\n";
  out << std::setprecision(17);
  for (const auto& p : curve) {
    out << p.xi << ',' << p.rejection << ',' << p.standard_error << ',' << p.draws << '\n';
  }
}

std::string format_mc_table(std::span<const McReport> reports) {
  std::vector<std::pair<int, int>> cells;
  std::vector<std::tuple<DesignFamily, std::size_t, double>> rows;
  for (const auto& r : reports) {
    const std::pair cell{r.k, r.r};
    if (std::find(cells.begin(), cells.end(), cell) == cells.end()) cells.push_back(cell);
    const std::tuple row{r.design.family, r.design.n, r.design.xi_u};
    if (std::find(rows.begin(), rows.end(), row) == rows.end()) rows.push_back(row);
  }

  std::ostringstream os;
  os << std::left << std::setw(12) << "family" << std::setw(10) << "n" << std::setw(8) << "xi_U";
  for (const auto& [k, r] : cells) os << std::right << std::setw(16) << cell_label(k, r);
  os << '\n';
  for (const auto& [family, n, xi_u] : rows) {
    os << std::left << std::setw(12) << to_string(family) << std::setw(10) << n << std::setw(8)
       << std::fixed << std::setprecision(2) << xi_u;
    for (const auto& [k, r] : cells) {
      std::string entry = "-";
      for (const auto& rep : reports) {
        if (rep.design.family == family && rep.design.n == n && rep.design.xi_u == xi_u && rep.k == k &&
            rep.r == r) {
          std::ostringstream e;
          e << std::fixed << std::setprecision(2) << rep.rejection_frequency << " (" << std::setprecision(3)
            << rep.standard_error << ")";
          entry = e.str();
        }
      }
      os << std::right << std::setw(16) << entry;
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace tailmoment
