#include "tailmoment/evt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "gauss_legendre.hpp"
#include "tailmoment/errors.hpp"

namespace tailmoment {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Terms further than this below the running maximum of a log-integrand are
// dropped; e^-40 is below double resolution relative to the peak.
constexpr double kLogCutoff = 40.0;

void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) throw InvalidArgument(std::string(what) + " must be finite");
}

void require_tail_index(double xi) {
  require_finite(xi, "tail index");
  if (xi < 0.0) throw InvalidArgument("tail index must be non-negative");
}

// log(1 + xi v) / xi, continuous through xi = 0. Requires 1 + xi v > 0.
double scaled_log1p(double xi, double v) {
  if (xi == 0.0) return v;
  const double z = xi * v;
  if (std::abs(xi) < kGevSeriesThreshold && std::abs(z) < 1e-3) {
    return v * (1.0 - z / 2.0 + z * z / 3.0);
  }
  return std::log1p(z) / xi;
}

bool in_support(double v, double xi) { return xi == 0.0 || 1.0 + xi * v > 0.0; }

// log G_xi(v) inside the support.
double log_gev_cdf_inside(double v, double xi) { return -std::exp(-scaled_log1p(xi, v)); }

}  // namespace

void QuadratureConfig::validate() const {
  if (nodes < 16) throw InvalidArgument("quadrature nodes must be >= 16");
  if (panels < 1) throw InvalidArgument("quadrature panels must be >= 1");
  if (!(rel_tol > 0.0)) throw InvalidArgument("quadrature rel_tol must be positive");
  if (max_doublings < 1) throw InvalidArgument("quadrature max_doublings must be >= 1");
}

TopKVector::TopKVector(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw InvalidArgument("top-k vector must be non-empty");
  for (double v : values_) require_finite(v, "top-k entry");
  if (!std::is_sorted(values_.begin(), values_.end(), std::greater<>{})) {
    throw InvalidArgument("top-k vector must be in descending order");
  }
}

SelfNormalizedTail::SelfNormalizedTail(std::vector<double> values) : values_(std::move(values)) {
  if (values_.size() < 3) throw InvalidArgument("self-normalized tail needs k >= 3");
  if (values_.front() != 1.0) throw InvalidArgument("self-normalized tail must start at exactly 1");
  if (values_.back() != 0.0) throw InvalidArgument("self-normalized tail must end at exactly 0");
  for (double v : values_) {
    if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument("self-normalized entries must lie in [0, 1]");
  }
  if (!std::is_sorted(values_.begin(), values_.end(), std::greater<>{})) {
    throw InvalidArgument("self-normalized tail must be in descending order");
  }
}

double gev_cdf(double v, double xi) {
  require_finite(v, "v");
  require_finite(xi, "tail index");
  if (!in_support(v, xi)) return xi > 0.0 ? 0.0 : 1.0;
  return std::exp(log_gev_cdf_inside(v, xi));
}

double gev_logpdf(double v, double xi) {
  require_finite(v, "v");
  require_finite(xi, "tail index");
  if (!in_support(v, xi)) return -kInf;
  const double l = scaled_log1p(xi, v);
  return -(1.0 + xi) * l - std::exp(-l);
}

double joint_ev_logdensity(std::span<const double> v, double xi) {
  require_finite(xi, "tail index");
  if (v.empty()) throw InvalidArgument("joint density needs at least one value");
  for (double x : v) require_finite(x, "v");
  for (std::size_t i = 0; i + 1 < v.size(); ++i) {
    if (v[i] < v[i + 1]) return -kInf;
  }
  for (double x : v) {
    if (!in_support(x, xi)) return -kInf;
  }
  double total = log_gev_cdf_inside(v.back(), xi);
  for (double x : v) total += gev_logpdf(x, xi) - log_gev_cdf_inside(x, xi);
  return total;
}

double selfnorm_logdensity_limit(const SelfNormalizedTail& a) {
  const auto k = static_cast<double>(a.k());
  const double sum = std::accumulate(a.values().begin(), a.values().end(), 0.0);
  return std::lgamma(k) + std::lgamma(k - 1.0) - (k - 1.0) * std::log(sum);
}

namespace {

// The integral over s diverges at infinity iff (k-1) - (1 + 1/xi) m >= 0,
// where m counts the strictly positive entries.
bool density_diverges(std::size_t k, std::size_t positive, double xi) {
  return static_cast<double>(k - 1) - (1.0 + 1.0 / xi) * static_cast<double>(positive) >= 0.0;
}

std::vector<double> positive_entries(const SelfNormalizedTail& a) {
  std::vector<double> out;
  out.reserve(a.k());
  for (double v : a.values()) {
    if (v > 0.0) out.push_back(v);
  }
  return out;
}

// log of the u-integral on a panelled Gauss-Legendre rule with `order` nodes
// per panel.
double gl_log_integral(std::span<const double> positive, std::size_t k, double xi, int order,
                       int panels) {
  const auto& rule = detail::gauss_legendre(order);
  const double c = 1.0 + 1.0 / xi;
  const double km2 = static_cast<double>(k) - 2.0;

  std::vector<double> logs;
  logs.reserve(static_cast<std::size_t>(order) * panels);
  double peak = -kInf;
  for (int p = 0; p < panels; ++p) {
    // Panels halve in width towards u = 1, where the integrand can carry an
    // algebraic endpoint singularity. Nodes are placed in v = 1 - u so that
    // v keeps full precision deep into the tail.
    const double v_hi = std::ldexp(1.0, -p);
    const double v_lo = p + 1 == panels ? 0.0 : std::ldexp(1.0, -(p + 1));
    const double width = v_hi - v_lo;
    for (int i = 0; i < order; ++i) {
      const double v = v_lo + 0.5 * width * (rule.nodes[i] + 1.0);
      const double s = (1.0 - v) / v;
      double sum = 0.0;
      for (double a : positive) sum += std::log1p(xi * a * s);
      const double value = km2 * std::log(s) - c * sum - 2.0 * std::log(v) + std::log(0.5 * width * rule.weights[i]);
      logs.push_back(value);
      peak = std::max(peak, value);
    }
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < logs.size(); ++i) {
    const double d = logs[i] - peak;
    if (d > -kLogCutoff) acc += std::exp(d);
  }
  return peak + std::log(acc);
}

}  // namespace

double selfnorm_logdensity(const SelfNormalizedTail& a, double xi, const QuadratureConfig& q) {
  require_tail_index(xi);
  q.validate();
  if (a.k() < 3) throw InvalidArgument("self-normalized density needs k >= 3");
  if (xi < kSelfNormLimitThreshold) return selfnorm_logdensity_limit(a);

  const auto positive = positive_entries(a);
  if (density_diverges(a.k(), positive.size(), xi)) return kInf;

  const double log_gamma_k = std::lgamma(static_cast<double>(a.k()));
  // Panels reach past s = 1 / (xi * smallest positive entry), the last scale of the integrand.
  const double smallest = *std::min_element(positive.begin(), positive.end());
  const int panels = std::clamp(static_cast<int>(std::ceil(std::log2(1.0 / (xi * smallest)))) + 6, q.panels, 1000);
  int order = q.nodes;
  double previous = gl_log_integral(positive, a.k(), xi, order, panels);
  for (int d = 0; d < q.max_doublings; ++d) {
    order *= 2;
    const double current = gl_log_integral(positive, a.k(), xi, order, panels);
    if (std::abs(std::expm1(previous - current)) <= q.rel_tol) return log_gamma_k + current;
    previous = current;
  }
  throw NumericFailure("self-normalized density quadrature did not converge",
                       {xi, static_cast<double>(a.k()), static_cast<double>(order), previous});
}

namespace {

// sum_i log1p(b_i x), multiplying factors in blocks to save logarithms.
double log_tail_sum(std::span<const double> b, double x) {
  constexpr std::size_t kBlock = 8;
  double total = 0.0;
  if (x > 1e30) {
    for (double v : b) total += std::log1p(v * x);
    return total;
  }
  std::size_t i = 0;
  for (; i + kBlock <= b.size(); i += kBlock) {
    double prod = 1.0;
    for (std::size_t j = 0; j < kBlock; ++j) prod *= 1.0 + b[i + j] * x;
    total += std::log(prod);
  }
  for (; i < b.size(); ++i) total += std::log1p(b[i] * x);
  return total;
}

// sum_i b_i x / (1 + b_i x); increasing in x from 0 to b.size().
double tail_slope(std::span<const double> b, double x) {
  double total = 0.0;
  for (double v : b) total += v * x / (1.0 + v * x);
  return total;
}

// Mode in t = log x of (k-1) t - c H(e^t): where tail_slope = (k-1) / c.
double mode_log_x(std::span<const double> b, double target, double sum_b) {
  double lo = std::log(target / sum_b) - 1.0;  // tail_slope(x) <= x * sum_b
  double step = 1.0;
  double hi = lo + step;
  while (tail_slope(b, std::exp(hi)) < target) {
    lo = hi;
    step *= 2.0;
    hi += step;
    if (hi > 1e4) throw NumericFailure("could not bracket the density mode", {target});
  }
  for (int i = 0; i < 200 && hi - lo > 1e-6; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (tail_slope(b, std::exp(mid)) < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

std::vector<double> selfnorm_logdensity_batch(const SelfNormalizedTail& a,
                                              std::span<const double> xis) {
  if (a.k() < 3) throw InvalidArgument("self-normalized density needs k >= 3");
  for (double xi : xis) require_tail_index(xi);

  const std::size_t k = a.k();
  const double km1 = static_cast<double>(k - 1);
  const auto b = positive_entries(a);
  const double sum_b = std::accumulate(b.begin(), b.end(), 0.0);

  std::vector<double> out(xis.size(), 0.0);
  double xi_lo = kInf;
  double xi_hi = -kInf;
  const double limit = selfnorm_logdensity_limit(a);
  for (std::size_t j = 0; j < xis.size(); ++j) {
    const double xi = xis[j];
    if (xi < kSelfNormLimitThreshold) {
      out[j] = limit;
    } else if (density_diverges(k, b.size(), xi)) {
      out[j] = kInf;
    } else {
      xi_lo = std::min(xi_lo, xi);
      xi_hi = std::max(xi_hi, xi);
    }
  }
  if (!(xi_lo <= xi_hi)) return out;

  // Trapezoid step; the log-integrand has curvature at most k - 1 at its mode.
  const double h = std::min(0.25, 0.75 / std::sqrt(km1));
  const double c_lo = 1.0 + 1.0 / xi_lo;
  const double c_hi = 1.0 + 1.0 / xi_hi;
  const double t_lo_mode = mode_log_x(b, km1 / c_lo, sum_b);
  const double t_hi_mode = mode_log_x(b, km1 / c_hi, sum_b);

  // Grid t_i = t_lo_mode + i h. Walk down until the smallest-xi integrand has
  // dropped kLogCutoff below its maximum, and up past the largest-xi mode
  // until that one has. Concavity in t makes the window cover every xi in
  // between.
  constexpr std::size_t kMaxPoints = 4'000'000;
  std::vector<double> below;  // i = -1, -2, ...
  std::vector<double> above;  // i = 0, 1, ...
  auto exponent = [&](double t, double hval, double c) { return km1 * t - c * hval; };

  {
    const double h0 = log_tail_sum(b, std::exp(t_lo_mode));
    above.push_back(h0);
    double best = exponent(t_lo_mode, h0, c_lo);
    for (std::size_t i = 1;; ++i) {
      const double t = t_lo_mode - static_cast<double>(i) * h;
      const double hv = log_tail_sum(b, std::exp(t));
      below.push_back(hv);
      const double e = exponent(t, hv, c_lo);
      best = std::max(best, e);
      if (e < best - kLogCutoff) break;
      if (below.size() > kMaxPoints) throw NumericFailure("density grid too wide", {xi_lo});
    }
  }
  {
    double best = exponent(t_lo_mode, above.front(), c_hi);
    for (std::size_t i = 1;; ++i) {
      const double t = t_lo_mode + static_cast<double>(i) * h;
      const double hv = log_tail_sum(b, std::exp(t));
      above.push_back(hv);
      const double e = exponent(t, hv, c_hi);
      best = std::max(best, e);
      if (t > t_hi_mode && e < best - kLogCutoff) break;
      if (above.size() > kMaxPoints) throw NumericFailure("density grid too wide", {xi_hi});
    }
  }

  const std::size_t n_below = below.size();
  std::vector<double> ts(n_below + above.size());
  std::vector<double> hs(ts.size());
  for (std::size_t i = 0; i < n_below; ++i) {
    ts[i] = t_lo_mode - static_cast<double>(n_below - i) * h;
    hs[i] = below[n_below - 1 - i];
  }
  for (std::size_t i = 0; i < above.size(); ++i) {
    ts[n_below + i] = t_lo_mode + static_cast<double>(i) * h;
    hs[n_below + i] = above[i];
  }

  // Modes move right as xi grows; each integrand is log-concave in t, so a
  // hill climb from the previous mode finds the next one and the sum can stop
  // once terms fall kLogCutoff below the peak on either side.
  std::vector<std::size_t> order(xis.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto l, auto r) { return xis[l] < xis[r]; });

  const double log_gamma_k = std::lgamma(static_cast<double>(k));
  const std::size_t n = ts.size();
  std::size_t mode = 0;
  for (std::size_t j : order) {
    const double xi = xis[j];
    if (xi < kSelfNormLimitThreshold || std::isinf(out[j])) continue;
    const double c = 1.0 + 1.0 / xi;
    auto at = [&](std::size_t i) { return km1 * ts[i] - c * hs[i]; };
    double peak = at(mode);
    while (mode + 1 < n && at(mode + 1) >= peak) peak = at(++mode);
    while (mode > 0 && at(mode - 1) > peak) peak = at(--mode);
    double acc = 1.0;
    for (std::size_t i = mode + 1; i < n; ++i) {
      const double d = at(i) - peak;
      if (d < -kLogCutoff) break;
      acc += std::exp(d);
    }
    for (std::size_t i = mode; i-- > 0;) {
      const double d = at(i) - peak;
      if (d < -kLogCutoff) break;
      acc += std::exp(d);
    }
    out[j] = log_gamma_k - km1 * std::log(xi) + peak + std::log(h * acc);
  }
  return out;
}

TopKVector top_k_from_arrivals(std::span<const double> arrivals, double xi) {
  require_finite(xi, "tail index");
  if (arrivals.empty()) throw InvalidArgument("need at least one arrival");
  std::vector<double> v(arrivals.size());
  double previous = 0.0;
  for (std::size_t i = 0; i < arrivals.size(); ++i) {
    const double g = arrivals[i];
    if (!(g > 0.0) || !std::isfinite(g) || g < previous) {
      throw InvalidArgument("arrivals must be positive, finite and ascending");
    }
    previous = g;
    const double lg = std::log(g);
    v[i] = xi == 0.0 ? -lg : std::expm1(-xi * lg) / xi;
  }
  return TopKVector(std::move(v));
}

std::vector<double> sample_arrivals(int k, Rng& rng) {
  if (k < 1) throw InvalidArgument("k must be >= 1");
  std::exponential_distribution<double> exponential(1.0);
  std::vector<double> arrivals(static_cast<std::size_t>(k));
  double total = 0.0;
  for (auto& g : arrivals) {
    double e = exponential(rng);
    while (total == 0.0 && e == 0.0) e = exponential(rng);
    total += e;
    g = total;
  }
  return arrivals;
}

TopKVector sample_top_k(double xi, int k, Rng& rng) {
  require_finite(xi, "tail index");
  return top_k_from_arrivals(sample_arrivals(k, rng), xi);
}

SelfNormalizedTail self_normalize(const TopKVector& v) {
  const std::size_t k = v.k();
  if (k < 3) throw InvalidArgument("self-normalization needs k >= 3");
  const double last = v[k - 1];
  const double range = v[0] - last;
  if (!(range > 0.0)) throw DegenerateTail("largest and k-th largest values coincide");
  std::vector<double> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = (v[i] - last) / range;
  out.front() = 1.0;
  out.back() = 0.0;
  return SelfNormalizedTail(std::move(out));
}

}  // namespace tailmoment
