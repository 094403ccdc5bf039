#include <doctest.h>

#include <cmath>
#include <limits>
#include <numeric>

#include "helpers.hpp"
#include "tailmoment/errors.hpp"
#include "tailmoment/evt.hpp"

using namespace tailmoment;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
const double kLogEightNinths = std::log(8.0 / 9.0);
const double kLogXiOne = std::log(24.0 * std::log(2.0) - 16.0);
}  // namespace

TEST_SUITE("evt") {
  TEST_CASE("gev_cdf closed forms") {
    CHECK(gev_cdf(0.0, 0.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
    CHECK(gev_cdf(0.0, 1.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
    CHECK(gev_cdf(2.0, 0.5) == doctest::Approx(std::exp(-0.25)).epsilon(1e-15));
    CHECK(gev_cdf(-3.0, 0.5) == 0.0);
    CHECK_THROWS_AS(gev_cdf(std::nan(""), 0.5), InvalidArgument);
    CHECK_THROWS_AS(gev_cdf(1.0, kInf), InvalidArgument);
  }

  TEST_CASE("gev primitives are continuous through the Gumbel case") {
    for (double v : {-1.5, -0.3, 0.0, 0.7, 2.5}) {
      CHECK(gev_cdf(v, 5e-7) == doctest::Approx(gev_cdf(v, 0.0)).epsilon(1e-6));
      CHECK(gev_cdf(v, 2e-6) == doctest::Approx(gev_cdf(v, 0.0)).epsilon(1e-5));
      CHECK(gev_logpdf(v, 5e-7) == doctest::Approx(gev_logpdf(v, 0.0)).epsilon(1e-5));
      CHECK(gev_logpdf(v, 0.0) == doctest::Approx(-v - std::exp(-v)).epsilon(1e-15));
    }
  }

  TEST_CASE("gev_logpdf matches finite differences of the cdf") {
    CHECK(gev_logpdf(0.0, 0.0) == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(gev_logpdf(0.0, 1.0) == doctest::Approx(-1.0).epsilon(1e-15));
    const double h = 1e-6;
    for (auto [v, xi] : {std::pair{1.0, 0.5}, {0.2, 1.7}, {-0.4, 0.3}, {3.0, 0.0}}) {
      const double fd = (gev_cdf(v + h, xi) - gev_cdf(v - h, xi)) / (2 * h);
      CHECK(std::exp(gev_logpdf(v, xi)) == doctest::Approx(fd).epsilon(1e-6));
    }
    CHECK(gev_logpdf(-3.0, 0.5) == -kInf);
  }

  TEST_CASE("joint_ev_logdensity") {
    const std::vector<double> one{0.0};
    CHECK(joint_ev_logdensity(one, 0.0) == doctest::Approx(-1.0).epsilon(1e-15));
    const std::vector<double> two{1.0, 0.0};
    CHECK(joint_ev_logdensity(two, 0.0) == doctest::Approx(-2.0).epsilon(1e-14));
    const std::vector<double> rising{0.0, 1.0};
    CHECK(joint_ev_logdensity(rising, 0.0) == -kInf);
    const std::vector<double> outside{1.0, -5.0};
    CHECK(joint_ev_logdensity(outside, 0.5) == -kInf);
  }

  TEST_CASE("joint density integrates to one for k = 2") {
    for (double xi : {0.0, 0.5}) {
      const double lo = xi > 0 ? -1.0 / xi : -12.0;
      auto inner = [&](double v1) {
        return testing::integrate(
            [&](double v2) {
              const std::vector<double> v{v1, v2};
              return std::exp(joint_ev_logdensity(v, xi));
            },
            lo + 1e-12, v1, 1e-10);
      };
      const double total = testing::integrate(inner, lo + 1e-12, 60.0, 1e-8) + 1.0 - gev_cdf(60.0, xi);
      CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
    }
  }

  TEST_CASE("selfnorm_logdensity closed forms on both routes") {
    const SelfNormalizedTail a({1.0, 0.5, 0.0});
    CHECK(selfnorm_logdensity(a, 0.0) == doctest::Approx(kLogEightNinths).epsilon(1e-10));
    CHECK(std::abs(selfnorm_logdensity(a, 1.0) - kLogXiOne) < 1e-8);
    CHECK(std::abs(selfnorm_logdensity_limit(a) - kLogEightNinths) < 1e-14);
    const std::vector<double> xis{0.0, 1.0};
    const auto batch = selfnorm_logdensity_batch(a, xis);
    CHECK(std::abs(batch[0] - kLogEightNinths) < 1e-8);
    CHECK(std::abs(batch[1] - kLogXiOne) < 1e-8);
  }

  TEST_CASE("selfnorm_logdensity agrees with brute-force quadrature") {
    const std::vector<std::vector<double>> tails{
        {1.0, 0.8, 0.35, 0.1, 0.0},
        {1.0, 0.5, 0.0},
        {1.0, 0.9, 0.85, 0.7, 0.6, 0.41, 0.4, 0.2, 0.05, 0.0},
    };
    for (const auto& values : tails) {
      const SelfNormalizedTail a(values);
      for (double xi : {0.05, 0.3, 0.99, 1.5, 2.0}) {
        const double oracle = std::log(testing::selfnorm_density_oracle(values, xi));
        CHECK(selfnorm_logdensity(a, xi) == doctest::Approx(oracle).epsilon(1e-8));
      }
    }
  }

  TEST_CASE("batched and quadrature routes agree") {
    Rng rng(11);
    const std::vector<double> xis{0.0, 5e-5, 2e-4, 0.1, 0.5, 0.98, 1.0, 1.3, 1.99, 2.0};
    for (int k : {3, 4, 10, 50}) {
      for (double source : {0.0, 0.7, 1.8}) {
        const auto a = self_normalize(sample_top_k(source, k, rng));
        const auto batch = selfnorm_logdensity_batch(a, xis);
        for (std::size_t j = 0; j < xis.size(); ++j) {
          CHECK(std::abs(batch[j] - selfnorm_logdensity(a, xis[j])) < 1e-7);
        }
      }
    }
  }

  TEST_CASE("routes agree on tails with tiny entries") {
    const std::vector<double> xis{0.3, 1.0, 2.0};
    for (double tiny : {1e-6, 1e-12, 1e-17}) {
      const SelfNormalizedTail a({1.0, 10.0 * tiny, tiny, 0.0});
      const auto batch = selfnorm_logdensity_batch(a, xis);
      for (std::size_t j = 0; j < xis.size(); ++j) CHECK(std::abs(batch[j] - selfnorm_logdensity(a, xis[j])) < 1e-7);
    }
  }

  TEST_CASE("small tail indices approach the limit") {
    const SelfNormalizedTail a({1.0, 0.6, 0.3, 0.0});
    const double limit = selfnorm_logdensity_limit(a);
    CHECK(selfnorm_logdensity(a, 5e-5) == limit);
    CHECK(std::abs(selfnorm_logdensity(a, 2e-4) - limit) < 1e-2);
    CHECK(std::abs(selfnorm_logdensity(a, 2e-4) - limit) > 0.0);
  }

  TEST_CASE("divergent density at tied zeros") {
    const SelfNormalizedTail a({1.0, 0.0, 0.0, 0.0, 0.0});
    CHECK(selfnorm_logdensity(a, 1.0) == kInf);
    CHECK(std::isfinite(selfnorm_logdensity(a, 0.2)));
    const std::vector<double> xis{0.2, 1.0};
    const auto batch = selfnorm_logdensity_batch(a, xis);
    CHECK(std::isfinite(batch[0]));
    CHECK(batch[1] == kInf);
  }

  TEST_CASE("argument validation") {
    CHECK_THROWS_AS(SelfNormalizedTail({0.9, 0.5, 0.0}), InvalidArgument);
    CHECK_THROWS_AS(SelfNormalizedTail({1.0, 0.5, 0.1}), InvalidArgument);
    CHECK_THROWS_AS(SelfNormalizedTail({1.0, 0.0}), InvalidArgument);
    CHECK_THROWS_AS(SelfNormalizedTail({1.0, 0.2, 0.5, 0.0}), InvalidArgument);
    CHECK_THROWS_AS(TopKVector({1.0, 2.0}), InvalidArgument);
    CHECK_THROWS_AS(TopKVector(std::vector<double>{}), InvalidArgument);
    QuadratureConfig q;
    q.nodes = 8;
    CHECK_THROWS_AS(selfnorm_logdensity(SelfNormalizedTail({1.0, 0.5, 0.0}), 0.5, q), InvalidArgument);
  }

  TEST_CASE("sampler maps injected arrivals") {
    const std::vector<double> arrivals{1.0, 2.0, 3.0};
    const auto v1 = top_k_from_arrivals(arrivals, 1.0);
    CHECK(v1[0] == 0.0);
    CHECK(v1[1] == doctest::Approx(-0.5).epsilon(1e-15));
    CHECK(v1[2] == doctest::Approx(-2.0 / 3.0).epsilon(1e-15));
    const auto v0 = top_k_from_arrivals(arrivals, 0.0);
    CHECK(v0[1] == doctest::Approx(-std::log(2.0)).epsilon(1e-15));
    CHECK(v0[2] == doctest::Approx(-std::log(3.0)).epsilon(1e-15));
  }

  TEST_CASE("sampled tails descend strictly and the maximum is GEV") {
    for (double xi : {0.0, 0.4, 1.5}) {
      Rng rng(derive_seed(3, static_cast<std::uint64_t>(xi * 10)));
      std::vector<double> maxima;
      for (int i = 0; i < 20000; ++i) {
        const auto v = sample_top_k(xi, 6, rng);
        for (std::size_t j = 1; j < v.k(); ++j) REQUIRE(v[j] < v[j - 1]);
        maxima.push_back(v[0]);
      }
      const double d = testing::ks_distance(maxima, [&](double x) { return gev_cdf(x, xi); });
      CHECK(d < 0.015);
    }
  }

  TEST_CASE("sampling is reproducible from the seed") {
    Rng a(42), b(42);
    const auto x = sample_top_k(0.7, 20, a);
    const auto y = sample_top_k(0.7, 20, b);
    CHECK(std::equal(x.values().begin(), x.values().end(), y.values().begin()));
  }

  TEST_CASE("self_normalize") {
    const auto a = self_normalize(TopKVector({5.0, 4.0, 3.5, 1.0}));
    CHECK(a[0] == 1.0);
    CHECK(a[3] == 0.0);
    CHECK(a[1] == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(a[2] == doctest::Approx(0.625).epsilon(1e-15));
    CHECK_THROWS_AS(self_normalize(TopKVector({2.0, 2.0, 2.0})), DegenerateTail);
    CHECK_THROWS_AS(self_normalize(TopKVector({2.0, 1.0})), InvalidArgument);
    const auto tied = self_normalize(TopKVector({3.0, 2.0, 2.0, 1.0}));
    CHECK(tied[1] == tied[2]);
  }

  TEST_CASE("self_normalize is invariant to positive affine maps") {
    Rng rng(9);
    const auto v = sample_top_k(0.8, 12, rng);
    std::vector<double> shifted;
    for (double x : v.values()) shifted.push_back(3.0 * x + 7.0);
    const auto a = self_normalize(v);
    const auto b = self_normalize(TopKVector(shifted));
    for (std::size_t i = 0; i < a.k(); ++i) CHECK(std::abs(a[i] - b[i]) < 1e-14);
  }
}
