#pragma once

// Discrete weight measures over a tail-index grid and the weighted-average
// likelihood ratio built from them.

#include <span>
#include <vector>

#include "tailmoment/evt.hpp"

namespace tailmoment {

struct GridWeights {
  std::vector<double> points;  // strictly ascending, non-negative
  std::vector<double> masses;  // non-negative, same length

  // Throws InvalidArgument on any violated invariant.
  void validate() const;
  double total_mass() const;
  bool all_zero() const;
  GridWeights normalized() const;

  // n equally spaced points on [lo, hi] with equal masses summing to 1.
  static GridWeights uniform_closed(double lo, double hi, int n);
  // n equally spaced points on (lo, hi]: lo + (hi - lo) j / n, j = 1..n.
  static GridWeights uniform_left_open(double lo, double hi, int n);
};

// n equally spaced points on [lo, hi].
std::vector<double> linspace(double lo, double hi, int n);

// log of sum_j exp(x_j); -infinity for an empty input, +infinity if any term is.
double log_sum_exp(std::span<const double> x);

// log( int f dW / int f dLambda ) for a fixed pair of weight measures, with the
// densities of all support points obtained from one batched evaluation.
//
// Zero-mass points are dropped. When every null mass is zero the ratio is
// +infinity; a tail whose density diverges on both sides raises DegenerateTail.
class LikelihoodRatio {
 public:
  LikelihoodRatio(const GridWeights& null_weights, const GridWeights& alt_weights);

  // Tail-index points whose densities log_ratio_from expects, null first.
  std::span<const double> xis() const noexcept { return xis_; }
  std::size_t null_count() const noexcept { return null_count_; }

  double log_ratio(const SelfNormalizedTail& a) const;
  double log_ratio_from(std::span<const double> log_densities) const;

  // log sum_j m_j f_j over the null and alternative supports separately.
  double log_null(std::span<const double> log_densities) const;
  double log_alt(std::span<const double> log_densities) const;

 private:
  std::vector<double> xis_;
  std::vector<double> log_masses_;
  std::size_t null_count_ = 0;
};

}  // namespace tailmoment
