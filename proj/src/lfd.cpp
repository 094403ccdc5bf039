#include "tailmoment/lfd.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "tailmoment/errors.hpp"
#include "tailmoment/parallel.hpp"
#include "tailmoment/rng.hpp"

namespace tailmoment {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void validate_grid(std::span<const double> grid, double xi_bar, const char* what) {
  if (grid.empty()) throw InvalidArgument(std::string(what) + " is empty");
  for (double x : grid) {
    if (!std::isfinite(x) || x < 0.0 || x > xi_bar) {
      throw InvalidArgument(std::string(what) + " must lie in [0, xi_bar]");
    }
  }
}

std::string ess_warning(double xi, double ess) {
  std::ostringstream os;
  os << "unreliable importance weights at xi=" << xi << " (effective sample size " << ess << ")";
  return os.str();
}

// Weighted mean of a 0/1 outcome with its delta-method standard error and the
// effective sample size of the weights.
struct WeightedRate {
  double rate = 0.0;
  double se = 0.0;
  double ess = 0.0;
};

WeightedRate weighted_rate(std::span<const double> log_weights, std::span<const char> outcome) {
  double peak = -kInf;
  for (double lw : log_weights) peak = std::max(peak, lw);
  WeightedRate out;
  if (!std::isfinite(peak)) return out;
  double sum = 0.0, sum_sq = 0.0, hit = 0.0;
  for (std::size_t d = 0; d < log_weights.size(); ++d) {
    const double w = std::exp(log_weights[d] - peak);
    sum += w;
    sum_sq += w * w;
    if (outcome[d]) hit += w;
  }
  out.rate = hit / sum;
  double var = 0.0;
  for (std::size_t d = 0; d < log_weights.size(); ++d) {
    const double w = std::exp(log_weights[d] - peak);
    const double dev = (outcome[d] ? 1.0 : 0.0) - out.rate;
    var += w * w * dev * dev;
  }
  out.se = std::sqrt(var) / sum;
  out.ess = sum * sum / sum_sq;
  return out;
}

std::vector<double> positive_points(const GridWeights& g) {
  std::vector<double> out;
  for (std::size_t i = 0; i < g.points.size(); ++i) {
    if (g.masses[i] > 0.0) out.push_back(g.points[i]);
  }
  return out;
}

std::vector<double> positive_log_masses(const GridWeights& g) {
  std::vector<double> out;
  for (double m : g.masses) {
    if (m > 0.0) out.push_back(std::log(m));
  }
  return out;
}

double mixture_log(std::span<const double> log_masses, std::span<const double> log_f) {
  std::vector<double> terms(log_f.size());
  for (std::size_t i = 0; i < log_f.size(); ++i) terms[i] = log_masses[i] + log_f[i];
  return log_sum_exp(terms);
}

nlohmann::json grid_to_json(const GridWeights& g) {
  return {{"points", g.points}, {"masses", g.masses}};
}

GridWeights grid_from_json(const nlohmann::json& j) {
  GridWeights g;
  g.points = j.at("points").get<std::vector<double>>();
  g.masses = j.at("masses").get<std::vector<double>>();
  g.validate();
  return g;
}

}  // namespace

ProposalPool draw_proposal_pool(int k, std::span<const double> grid, int n_draws,
                                std::uint64_t seed, double xi_bar) {
  if (k < 3) throw InvalidArgument("k must be >= 3");
  if (n_draws < 1000) throw InvalidArgument("proposal pool needs at least 1000 draws");
  validate_grid(grid, xi_bar, "proposal grid");

  ProposalPool pool;
  pool.k = k;
  pool.seed = seed;
  pool.grid.assign(grid.begin(), grid.end());
  const auto n = static_cast<std::size_t>(n_draws);
  const std::size_t m = grid.size();
  pool.draws.resize(n);
  pool.source_xi.resize(n);
  pool.log_proposal.resize(n);
  pool.grid_log_density.resize(n * m);
  const double log_m = std::log(static_cast<double>(m));

  parallel_for(n, [&](std::size_t d) {
    Rng rng = substream(tagged(seed, StreamTag::kProposalPool), d);
    std::uniform_int_distribution<std::size_t> pick(0, m - 1);
    const double xi = grid[pick(rng)];
    pool.source_xi[d] = xi;
    pool.draws[d] = self_normalize(sample_top_k(xi, k, rng));
    const auto lf = selfnorm_logdensity_batch(pool.draws[d], grid);
    std::copy(lf.begin(), lf.end(), pool.grid_log_density.begin() + static_cast<std::ptrdiff_t>(d * m));
    pool.log_proposal[d] = log_sum_exp(lf) - log_m;
  });

  for (double lp : pool.log_proposal) {
    if (!std::isfinite(lp)) throw NumericFailure("non-finite proposal density in pool");
  }
  return pool;
}

RejectionEstimate rejection_probs(const ProposalPool& pool, const GridWeights& lambda,
                                  const GridWeights& w, std::span<const double> eval_grid) {
  if (pool.size() == 0) throw InvalidArgument("empty proposal pool");
  for (double x : eval_grid) {
    if (!std::isfinite(x) || x < 0.0) throw InvalidArgument("evaluation grid must be finite and non-negative");
  }
  lambda.validate();
  w.validate();

  // An all-zero Lambda always rejects; the LikelihoodRatio drops zero masses.
  const LikelihoodRatio lr(lambda, w);
  const auto lr_xis = lr.xis();
  std::vector<double> xis(lr_xis.begin(), lr_xis.end());
  xis.insert(xis.end(), eval_grid.begin(), eval_grid.end());
  const std::size_t n = pool.size();
  const std::size_t g = eval_grid.size();
  const std::size_t offset = lr_xis.size();

  std::vector<char> reject(n);
  std::vector<double> log_weight(n * g);  // eval point major
  parallel_for(n, [&](std::size_t d) {
    const auto lf = selfnorm_logdensity_batch(pool.draws[d], xis);
    reject[d] = lr.log_ratio_from(std::span(lf).first(offset)) > 0.0;
    for (std::size_t j = 0; j < g; ++j) log_weight[j * n + d] = lf[offset + j] - pool.log_proposal[d];
  });

  RejectionEstimate out;
  out.xi.assign(eval_grid.begin(), eval_grid.end());
  for (std::size_t j = 0; j < g; ++j) {
    const auto r = weighted_rate(std::span(log_weight).subspan(j * n, n), reject);
    out.probability.push_back(r.rate);
    out.standard_error.push_back(r.se);
    out.effective_sample_size.push_back(r.ess);
    if (r.ess < kMinEffectiveSampleSize) out.warnings.push_back(ess_warning(eval_grid[j], r.ess));
  }
  return out;
}

std::string format_alpha(double alpha) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), alpha);
  return std::string(buf, res.ptr);
}

std::string table_id(int k, double alpha) {
  return "lfd_k" + std::to_string(k) + "_a" + format_alpha(alpha);
}

std::string LfdTable::id() const { return table_id(k, alpha); }

void LfdTable::validate() const {
  if (k < 3) throw InvalidArgument("table k must be >= 3");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("table alpha must lie in (0, 1]");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw InvalidArgument("table epsilon must lie in (0, 1)");
  if (!(xi_bar > 1.0 - epsilon) || !std::isfinite(xi_bar)) {
    throw InvalidArgument("xi_bar must exceed 1 - epsilon");
  }
  null_grid.validate();
  alt_weight.validate();
  if (std::abs(alt_weight.total_mass() - 1.0) > 1e-9) throw InvalidArgument("alternative weight must sum to 1");
}

nlohmann::json to_json(const LfdTable& t) {
  nlohmann::json meta = {
      {"n_draws", t.meta.n_draws},
      {"iterations", t.meta.iterations},
      {"eta", t.meta.eta},
      {"seed", t.meta.seed},
      {"verified_max_rejection", nullptr},
      {"fine_grid", t.meta.fine_grid},
      {"grid_size", t.meta.grid_size},
      {"mass_floor", t.meta.mass_floor},
      {"verified", t.meta.verified},
      {"draws_per_point", t.meta.draws_per_point},
      {"size_slack", t.meta.size_slack},
      {"retries", t.meta.retries},
      {"se_margin", t.meta.se_margin},
  };
  if (t.meta.verified_max_rejection) meta["verified_max_rejection"] = *t.meta.verified_max_rejection;
  return {
      {"k", t.k},
      {"alpha", t.alpha},
      {"epsilon", t.epsilon},
      {"xi_bar", t.xi_bar},
      {"null_grid", grid_to_json(t.null_grid)},
      {"alt_weight", grid_to_json(t.alt_weight)},
      {"meta", meta},
  };
}

LfdTable table_from_json(const nlohmann::json& j) {
  try {
    LfdTable t;
    t.k = j.at("k").get<int>();
    t.alpha = j.at("alpha").get<double>();
    t.epsilon = j.at("epsilon").get<double>();
    t.xi_bar = j.at("xi_bar").get<double>();
    t.null_grid = grid_from_json(j.at("null_grid"));
    t.alt_weight = grid_from_json(j.at("alt_weight"));
    const auto& m = j.at("meta");
    t.meta.n_draws = m.at("n_draws").get<int>();
    t.meta.iterations = m.at("iterations").get<int>();
    t.meta.eta = m.at("eta").get<double>();
    t.meta.seed = m.at("seed").get<std::uint64_t>();
    if (!m.at("verified_max_rejection").is_null()) {
      t.meta.verified_max_rejection = m.at("verified_max_rejection").get<double>();
    }
    t.meta.fine_grid = m.at("fine_grid").get<int>();
    t.meta.grid_size = m.value("grid_size", static_cast<int>(t.null_grid.points.size()));
    t.meta.mass_floor = m.value("mass_floor", kMassFloor);
    t.meta.verified = m.value("verified", t.meta.verified_max_rejection.has_value());
    t.meta.draws_per_point = m.value("draws_per_point", 0);
    t.meta.size_slack = m.value("size_slack", 0.0);
    t.meta.retries = m.value("retries", 0);
    t.meta.se_margin = m.value("se_margin", 0.0);
    t.validate();
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed LFD table: ") + e.what());
  }
}

void save_table(const LfdTable& table, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write table to " + path.string());
  out << to_json(table).dump(2) << '\n';
}

LfdTable load_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read table " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed JSON in " + path.string() + ": " + e.what());
  }
  return table_from_json(j);
}

GridWeights default_alt_weight(double epsilon, double xi_bar, int n) {
  return GridWeights::uniform_left_open(1.0 - epsilon, xi_bar, n);
}

void CalibrationConfig::validate() const {
  if (k < 3) throw InvalidArgument("k must be >= 3");
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in (0, 1)");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw InvalidArgument("epsilon must lie in (0, 1)");
  if (!(xi_bar > 1.0 - epsilon) || !std::isfinite(xi_bar)) throw InvalidArgument("xi_bar must exceed 1 - epsilon");
  if (grid_size < 1 || alt_grid_size < 1) throw InvalidArgument("grid sizes must be positive");
  if (n_draws < 1000) throw InvalidArgument("n_draws must be >= 1000");
  if (iterations < 0) throw InvalidArgument("iterations must be non-negative");
  if (!(eta > 0.0) || !std::isfinite(eta)) throw InvalidArgument("eta must be positive");
  if (!(mass_floor > 0.0)) throw InvalidArgument("mass floor must be positive");
  if (iterations > 0) {
    if (fine_grid_size <= grid_size) throw InvalidArgument("fine grid must be larger than the calibration grid");
    if (draws_per_point < 1) throw InvalidArgument("draws_per_point must be positive");
  }
  if (max_retries < 0) throw InvalidArgument("max_retries must be non-negative");
  if (retry_pool_factor < 1) throw InvalidArgument("retry_pool_factor must be >= 1");
  if (!(se_margin >= 0.0) || !(retry_se_margin >= 0.0)) throw InvalidArgument("margins must be non-negative");
}

// Each draw's densities are scaled by its own maximum so a step costs two dot
// products per draw.
std::vector<double> iterate_lambda(const ProposalPool& pool, const GridWeights& w,
                                   const CalibrationConfig& cfg) {
  const std::size_t n = pool.size();
  const std::size_t m = pool.grid.size();
  const auto alt_log_mass = positive_log_masses(w);
  const auto alt_points = positive_points(w);

  std::vector<double> scaled(n * m);
  std::vector<double> alt_scaled(n);
  std::vector<double> log_is(n * m);  // importance log-weights, grid point major
  parallel_for(n, [&](std::size_t d) {
    const auto lf_alt = selfnorm_logdensity_batch(pool.draws[d], alt_points);
    const double* lf = pool.grid_log_density.data() + d * m;
    double peak = -kInf;
    for (std::size_t j = 0; j < m; ++j) peak = std::max(peak, lf[j]);
    for (std::size_t j = 0; j < lf_alt.size(); ++j) peak = std::max(peak, lf_alt[j] + alt_log_mass[j]);
    if (!std::isfinite(peak)) throw NumericFailure("non-finite density during calibration");
    for (std::size_t j = 0; j < m; ++j) {
      scaled[d * m + j] = std::exp(lf[j] - peak);
      log_is[j * n + d] = lf[j] - pool.log_proposal[d];
    }
    double num = 0.0;
    for (std::size_t j = 0; j < lf_alt.size(); ++j) num += std::exp(lf_alt[j] + alt_log_mass[j] - peak);
    alt_scaled[d] = num;
  });

  // Normalized importance weights do not change across iterations.
  std::vector<double> is_weight(n * m);
  std::vector<double> sum_sq(m, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    const double* lw = log_is.data() + j * n;
    const double peak = *std::max_element(lw, lw + n);
    double sum = 0.0;
    for (std::size_t d = 0; d < n; ++d) sum += (is_weight[j * n + d] = std::exp(lw[d] - peak));
    for (std::size_t d = 0; d < n; ++d) {
      is_weight[j * n + d] /= sum;
      sum_sq[j] += is_weight[j * n + d] * is_weight[j * n + d];
    }
  }

  std::vector<double> lambda(m, 1.0 / static_cast<double>(m));
  std::vector<char> reject(n);
  for (int it = 0; it < cfg.iterations; ++it) {
    for (std::size_t d = 0; d < n; ++d) {
      const double* f = scaled.data() + d * m;
      double den = 0.0;
      for (std::size_t j = 0; j < m; ++j) den += lambda[j] * f[j];
      reject[d] = alt_scaled[d] > den;
    }
    for (std::size_t j = 0; j < m; ++j) {
      const double* wj = is_weight.data() + j * n;
      double p = 0.0, hit_sq = 0.0;
      for (std::size_t d = 0; d < n; ++d) {
        if (reject[d]) {
          p += wj[d];
          hit_sq += wj[d] * wj[d];
        }
      }
      if (cfg.se_margin > 0.0) {
        const double var = hit_sq * (1.0 - 2.0 * p) + p * p * sum_sq[j];
        p += cfg.se_margin * std::sqrt(std::max(var, 0.0));
      }
      lambda[j] = std::max(lambda[j] + cfg.eta * (p - cfg.alpha), cfg.mass_floor);
    }
  }
  return lambda;
}

LfdTable calibrate_lfd(const CalibrationConfig& cfg) {
  cfg.validate();
  const double null_hi = 1.0 - cfg.epsilon;
  const GridWeights w = default_alt_weight(cfg.epsilon, cfg.xi_bar, cfg.alt_grid_size);
  std::vector<double> diagnostics;

  for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    const int grid_size = cfg.grid_size << attempt;
    const auto grid = linspace(0.0, null_hi, grid_size);
    int n_draws = cfg.n_draws;
    for (int r = 0; r < attempt; ++r) n_draws *= cfg.retry_pool_factor;
    const ProposalPool pool =
        draw_proposal_pool(cfg.k, grid, n_draws, derive_seed(cfg.seed, static_cast<std::uint64_t>(attempt)),
                           cfg.xi_bar);

    LfdTable table;
    table.k = cfg.k;
    table.alpha = cfg.alpha;
    table.epsilon = cfg.epsilon;
    table.xi_bar = cfg.xi_bar;
    table.null_grid.points = grid;
    CalibrationConfig step = cfg;
    if (attempt > 0) step.se_margin = std::max(cfg.se_margin, cfg.retry_se_margin);
    table.null_grid.masses = iterate_lambda(pool, w, step);
    table.alt_weight = w;
    table.meta.n_draws = n_draws;
    table.meta.iterations = cfg.iterations;
    table.meta.eta = cfg.eta;
    table.meta.seed = cfg.seed;
    table.meta.grid_size = grid_size;
    table.meta.mass_floor = cfg.mass_floor;
    table.meta.retries = attempt;
    table.meta.se_margin = step.se_margin;
    if (cfg.iterations == 0) return table;

    const int fine = std::max(cfg.fine_grid_size, grid_size + 1);
    const SizeReport report = verify_size(
        table, fine, cfg.draws_per_point, tagged(cfg.seed, StreamTag::kVerification, static_cast<std::uint64_t>(attempt)));
    table.meta.fine_grid = fine;
    table.meta.draws_per_point = cfg.draws_per_point;
    table.meta.verified_max_rejection = report.max_rejection;
    table.meta.size_slack = report.threshold - cfg.alpha;
    diagnostics.insert(diagnostics.end(), {report.max_rejection, report.threshold, report.argmax_xi});
    if (report.passed) {
      table.meta.verified = true;
      return table;
    }
  }
  std::ostringstream os;
  os << "size verification failed for k=" << cfg.k << ", alpha=" << cfg.alpha << " after "
     << cfg.max_retries + 1 << " attempt(s): max rejection " << diagnostics[diagnostics.size() - 3]
     << " exceeds threshold " << diagnostics[diagnostics.size() - 2];
  throw CalibrationFailed(os.str(), std::move(diagnostics));
}

SizeReport verify_size(const LfdTable& table, int fine_grid_size, int draws_per_point,
                       std::uint64_t seed) {
  table.validate();
  if (fine_grid_size < 2) throw InvalidArgument("fine grid needs at least two points");
  if (draws_per_point < 1) throw InvalidArgument("draws_per_point must be positive");

  const auto grid = linspace(0.0, 1.0 - table.epsilon, fine_grid_size);
  const LikelihoodRatio lr(table.null_grid, table.alt_weight);
  const auto n = static_cast<std::size_t>(draws_per_point);
  const std::size_t g = grid.size();

  std::vector<char> reject(n * g);
  parallel_for(n, [&](std::size_t d) {
    Rng rng = substream(seed, d);
    const auto arrivals = sample_arrivals(table.k, rng);
    for (std::size_t j = 0; j < g; ++j) {
      const auto a = self_normalize(top_k_from_arrivals(arrivals, grid[j]));
      reject[d * g + j] = lr.log_ratio(a) > 0.0;
    }
  });

  SizeReport report;
  report.xi = grid;
  report.draws_per_point = draws_per_point;
  report.seed = seed;
  report.max_rejection = -1.0;
  for (std::size_t j = 0; j < g; ++j) {
    std::size_t hits = 0;
    for (std::size_t d = 0; d < n; ++d) hits += reject[d * g + j] ? 1 : 0;
    const double p = static_cast<double>(hits) / static_cast<double>(n);
    const double se = std::sqrt(p * (1.0 - p) / static_cast<double>(n));
    report.rejection.push_back(p);
    report.standard_error.push_back(se);
    report.max_standard_error = std::max(report.max_standard_error, se);
    if (p > report.max_rejection) {
      report.max_rejection = p;
      report.argmax_xi = grid[j];
    }
  }
  report.threshold = table.alpha + 2.0 * report.max_standard_error;
  report.passed = report.max_rejection <= report.threshold;
  return report;
}

PowerBound np_power_bound(const ProposalPool& pool, const GridWeights& lambda_tilde,
                          const GridWeights& w, double alpha, const LfdTable& test) {
  if (pool.size() == 0) throw InvalidArgument("empty proposal pool");
  if (pool.k != test.k) throw InvalidArgument("pool and table differ in k");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("alpha must lie in (0, 1]");
  lambda_tilde.validate();
  w.validate();
  if (std::abs(lambda_tilde.total_mass() - 1.0) > 1e-9) throw InvalidArgument("lambda_tilde must be normalized");
  if (w.all_zero()) throw InvalidArgument("alternative weight has no mass");

  const auto null_points = positive_points(lambda_tilde);
  const auto null_log_mass = positive_log_masses(lambda_tilde);
  const auto alt_points = positive_points(w);
  const auto alt_log_mass = positive_log_masses(w);
  const LikelihoodRatio lr(test.null_grid, test.alt_weight);
  std::vector<double> xis = null_points;
  xis.insert(xis.end(), alt_points.begin(), alt_points.end());
  const std::size_t test_offset = xis.size();
  xis.insert(xis.end(), lr.xis().begin(), lr.xis().end());

  const std::size_t n = pool.size();
  std::vector<double> log_ratio(n), log_null_w(n), log_alt_w(n);
  std::vector<char> reject(n);
  parallel_for(n, [&](std::size_t d) {
    const auto lf = selfnorm_logdensity_batch(pool.draws[d], xis);
    const std::span<const double> all(lf);
    const double ln = mixture_log(null_log_mass, all.first(null_points.size()));
    const double la = mixture_log(alt_log_mass, all.subspan(null_points.size(), alt_points.size()));
    log_ratio[d] = ln == -kInf ? kInf : la - ln;
    log_null_w[d] = ln - pool.log_proposal[d];
    log_alt_w[d] = la - pool.log_proposal[d];
    reject[d] = lr.log_ratio_from(all.subspan(test_offset)) > 0.0;
  });

  PowerBound out;
  const auto achieved = weighted_rate(log_alt_w, reject);
  out.achieved_wap = achieved.rate;
  out.achieved_se = achieved.se;
  if (achieved.ess < kMinEffectiveSampleSize) out.warnings.push_back("unreliable importance weights under W");

  auto normalized = [](const std::vector<double>& lw) {
    const double peak = *std::max_element(lw.begin(), lw.end());
    std::vector<double> w(lw.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < lw.size(); ++i) sum += (w[i] = std::exp(lw[i] - peak));
    double sum_sq = 0.0;
    for (auto& x : w) {
      x /= sum;
      sum_sq += x * x;
    }
    return std::pair{w, 1.0 / sum_sq};
  };
  const auto [u, ess_null] = normalized(log_null_w);
  const auto [v, ess_alt] = normalized(log_alt_w);
  if (ess_null < kMinEffectiveSampleSize) out.warnings.push_back("unreliable importance weights under Lambda");
  (void)ess_alt;

  // Randomized Neyman-Pearson test: reject above the critical ratio and with
  // the probability that exhausts alpha at it.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return log_ratio[a] > log_ratio[b] || (log_ratio[a] == log_ratio[b] && a < b);
  });
  double null_mass = 0.0, power = 0.0;
  out.upper_bound = 1.0;
  out.critical_log_ratio = -kInf;
  for (std::size_t i = 0; i < n;) {
    std::size_t end = i;
    double group_u = 0.0, group_v = 0.0;
    while (end < n && log_ratio[order[end]] == log_ratio[order[i]]) {
      group_u += u[order[end]];
      group_v += v[order[end]];
      ++end;
    }
    if (null_mass + group_u > alpha) {
      const double gamma = group_u > 0.0 ? (alpha - null_mass) / group_u : 0.0;
      out.upper_bound = std::min(1.0, power + gamma * group_v);
      out.critical_log_ratio = log_ratio[order[i]];
      break;
    }
    null_mass += group_u;
    power += group_v;
    i = end;
    if (i == n) out.upper_bound = std::min(1.0, power);
  }
  out.near_optimal = out.achieved_wap >= (1.0 - test.epsilon) * out.upper_bound;
  return out;
}

PowerBound np_power_bound(const ProposalPool& pool, const LfdTable& table) {
  return np_power_bound(pool, table.null_grid.normalized(), table.alt_weight, table.alpha, table);
}

}  // namespace tailmoment
