#pragma once

// Generalized extreme value primitives, the joint limit law of the k largest
// order statistics, exact sampling from it, and the density of the
// location/scale self-normalized tail vector.

#include <span>
#include <vector>

#include "tailmoment/rng.hpp"

namespace tailmoment {

// Default upper end of the tail-index parameter space.
inline constexpr double kDefaultXiBar = 2.0;

// Below this |xi| the self-normalized density uses its closed-form xi -> 0 limit.
inline constexpr double kSelfNormLimitThreshold = 1e-4;

// Below this |xi| the GEV primitives use a second-order series about the
// Gumbel case.
inline constexpr double kGevSeriesThreshold = 1e-6;

struct QuadratureConfig {
  int nodes = 200;   // Gauss-Legendre order per panel at the first pass
  int panels = 8;    // minimum; small tail entries add panels
  double rel_tol = 1e-8;
  int max_doublings = 7;

  void validate() const;
};

// The k largest values of a sample, in descending order.
class TopKVector {
 public:
  TopKVector() = default;
  // Throws InvalidArgument if empty, non-finite or not weakly descending.
  explicit TopKVector(std::vector<double> values);

  std::span<const double> values() const noexcept { return values_; }
  std::size_t k() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }

 private:
  std::vector<double> values_;
};

// (A - A_(k)) / (A_(1) - A_(k)): first entry exactly 1, last exactly 0.
class SelfNormalizedTail {
 public:
  SelfNormalizedTail() = default;
  // Throws InvalidArgument unless k >= 3, values[0] == 1, values[k-1] == 0 and
  // the entries descend weakly inside [0, 1].
  explicit SelfNormalizedTail(std::vector<double> values);

  std::span<const double> values() const noexcept { return values_; }
  std::size_t k() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }

 private:
  std::vector<double> values_;
};

double gev_cdf(double v, double xi);

// log g_xi(v). Returns -infinity outside the support.
double gev_logpdf(double v, double xi);

// log of G(v_k) * prod_i g(v_i) / G(v_i). Returns -infinity when v is not
// weakly descending or any entry lies outside the support.
double joint_ev_logdensity(std::span<const double> v, double xi);

// log f_{V*}(a; xi) by Gauss-Legendre quadrature on u = s / (1 + s).
// Returns +infinity when the defining integral diverges, which can only happen
// when many entries tie at zero. Throws NumericFailure if the node-doubling
// loop does not reach q.rel_tol.
double selfnorm_logdensity(const SelfNormalizedTail& a, double xi,
                           const QuadratureConfig& q = {});

// Closed-form xi -> 0 limit: log Gamma(k) + log Gamma(k-1) - (k-1) log(sum a).
double selfnorm_logdensity_limit(const SelfNormalizedTail& a);

// log f_{V*}(a; xi_j) for every xi_j at once. Substituting x = xi * s makes
// the sum over the tail a function of x alone, so it is tabulated once on a
// uniform grid in log x and reused for every xi; the integral in log x is
// evaluated with the trapezoidal rule, which converges geometrically for this
// smooth log-concave integrand.
std::vector<double> selfnorm_logdensity_batch(const SelfNormalizedTail& a,
                                              std::span<const double> xis);

// Exact draw from the joint limit law: Gamma_i = E_1 + ... + E_i and
// V_i = (Gamma_i^{-xi} - 1) / xi, or -log Gamma_i at xi = 0.
TopKVector sample_top_k(double xi, int k, Rng& rng);

// The first k arrival times Gamma_1 < ... < Gamma_k of a unit Poisson process.
std::vector<double> sample_arrivals(int k, Rng& rng);

// The deterministic map used by sample_top_k, exposed for injected arrivals.
TopKVector top_k_from_arrivals(std::span<const double> arrivals, double xi);

// Throws DegenerateTail when v[0] == v[k-1]; InvalidArgument when k < 3.
SelfNormalizedTail self_normalize(const TopKVector& v);

}  // namespace tailmoment
