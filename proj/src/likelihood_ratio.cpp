#include "tailmoment/likelihood_ratio.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "tailmoment/errors.hpp"

namespace tailmoment {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double weighted_log_sum(std::span<const double> log_masses, std::span<const double> log_f) {
  double peak = -kInf;
  for (std::size_t i = 0; i < log_f.size(); ++i) {
    const double term = log_masses[i] + log_f[i];
    if (term == kInf) return kInf;
    peak = std::max(peak, term);
  }
  if (peak == -kInf) return -kInf;
  double acc = 0.0;
  for (std::size_t i = 0; i < log_f.size(); ++i) acc += std::exp(log_masses[i] + log_f[i] - peak);
  return peak + std::log(acc);
}

}  // namespace

void GridWeights::validate() const {
  if (points.size() != masses.size()) throw InvalidArgument("grid points and masses differ in length");
  if (points.empty()) throw InvalidArgument("grid weights are empty");
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!std::isfinite(points[i]) || points[i] < 0.0) {
      throw InvalidArgument("grid points must be finite and non-negative");
    }
    if (!std::isfinite(masses[i]) || masses[i] < 0.0) {
      throw InvalidArgument("grid masses must be finite and non-negative");
    }
    if (i > 0 && !(points[i] > points[i - 1])) {
      throw InvalidArgument("grid points must be strictly ascending");
    }
  }
}

double GridWeights::total_mass() const { return std::accumulate(masses.begin(), masses.end(), 0.0); }

bool GridWeights::all_zero() const {
  return std::all_of(masses.begin(), masses.end(), [](double m) { return m == 0.0; });
}

GridWeights GridWeights::normalized() const {
  const double total = total_mass();
  if (!(total > 0.0)) throw InvalidArgument("cannot normalize a zero measure");
  GridWeights out = *this;
  for (auto& m : out.masses) m /= total;
  return out;
}

std::vector<double> linspace(double lo, double hi, int n) {
  if (n < 1) throw InvalidArgument("linspace needs at least one point");
  if (n == 1) return {lo};
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (n - 1);
  out.back() = hi;
  return out;
}

GridWeights GridWeights::uniform_closed(double lo, double hi, int n) {
  GridWeights out;
  out.points = linspace(lo, hi, n);
  out.masses.assign(out.points.size(), 1.0 / static_cast<double>(n));
  return out;
}

GridWeights GridWeights::uniform_left_open(double lo, double hi, int n) {
  if (n < 1) throw InvalidArgument("grid needs at least one point");
  GridWeights out;
  for (int j = 1; j <= n; ++j) out.points.push_back(lo + (hi - lo) * j / n);
  out.points.back() = hi;
  out.masses.assign(out.points.size(), 1.0 / static_cast<double>(n));
  return out;
}

double log_sum_exp(std::span<const double> x) {
  double peak = -kInf;
  for (double v : x) {
    if (v == kInf) return kInf;
    peak = std::max(peak, v);
  }
  if (peak == -kInf) return -kInf;
  double acc = 0.0;
  for (double v : x) acc += std::exp(v - peak);
  return peak + std::log(acc);
}

LikelihoodRatio::LikelihoodRatio(const GridWeights& null_weights, const GridWeights& alt_weights) {
  null_weights.validate();
  alt_weights.validate();
  if (alt_weights.all_zero()) throw InvalidArgument("alternative weight has no mass");
  for (std::size_t i = 0; i < null_weights.points.size(); ++i) {
    if (null_weights.masses[i] > 0.0) {
      xis_.push_back(null_weights.points[i]);
      log_masses_.push_back(std::log(null_weights.masses[i]));
    }
  }
  null_count_ = xis_.size();
  for (std::size_t i = 0; i < alt_weights.points.size(); ++i) {
    if (alt_weights.masses[i] > 0.0) {
      xis_.push_back(alt_weights.points[i]);
      log_masses_.push_back(std::log(alt_weights.masses[i]));
    }
  }
}

double LikelihoodRatio::log_null(std::span<const double> log_densities) const {
  return weighted_log_sum(std::span(log_masses_).first(null_count_), log_densities.first(null_count_));
}

double LikelihoodRatio::log_alt(std::span<const double> log_densities) const {
  return weighted_log_sum(std::span(log_masses_).subspan(null_count_),
                          log_densities.subspan(null_count_));
}

double LikelihoodRatio::log_ratio_from(std::span<const double> log_densities) const {
  if (log_densities.size() != xis_.size()) throw InvalidArgument("density vector has the wrong length");
  const double num = log_alt(log_densities);
  const double den = log_null(log_densities);
  if (num == kInf && den == kInf) {
    throw DegenerateTail("tail density diverges under both hypotheses");
  }
  if (den == -kInf) return kInf;
  return num - den;
}

double LikelihoodRatio::log_ratio(const SelfNormalizedTail& a) const {
  return log_ratio_from(selfnorm_logdensity_batch(a, xis_));
}

}  // namespace tailmoment
