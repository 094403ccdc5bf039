#include <doctest.h>

#include <cmath>
#include <limits>

#include "tailmoment/errors.hpp"
#include "tailmoment/moment_test.hpp"

using namespace tailmoment;

namespace {

const SelfNormalizedTail kExample({1.0, 0.5, 0.0});
const double kExampleLr = -0.335509275252;

LfdTable table_at(int k, double alpha, const GridWeights& lambda, bool verified = true) {
  LfdTable t;
  t.k = k;
  t.alpha = alpha;
  t.null_grid = lambda;
  t.alt_weight = GridWeights{{1.0}, {1.0}};
  t.meta.verified = verified;
  return t;
}

GridWeights scaled(GridWeights g, double c) {
  for (auto& m : g.masses) m *= c;
  return g;
}

const GridWeights kNull{{0.0}, {1.0}};

}  // namespace

TEST_SUITE("moment_test") {
  TEST_CASE("statistic on the worked example") {
    const GridWeights w{{1.0}, {1.0}};
    CHECK(std::abs(lr_statistic(kExample, kNull, w) - kExampleLr) < 1e-8);
    CHECK(std::abs(lr_statistic(kExample, kNull, w, QuadratureConfig{}) - kExampleLr) < 1e-8);
    CHECK(std::abs(lr_statistic(kExample, w, w)) < 1e-14);
    CHECK(std::abs(lr_statistic(kExample, scaled(w, 2.0), w) + std::log(2.0)) < 1e-12);
    CHECK_THROWS_AS(lr_statistic(kExample, GridWeights{{0.0}, {0.0}}, w), InvalidArgument);
  }

  TEST_CASE("mixture weights") {
    const GridWeights lambda{{0.0, 0.5}, {0.3, 0.7}};
    const GridWeights w{{1.0, 2.0}, {0.5, 0.5}};
    const double f0 = std::exp(selfnorm_logdensity(kExample, 0.0));
    const double f05 = std::exp(selfnorm_logdensity(kExample, 0.5));
    const double f1 = std::exp(selfnorm_logdensity(kExample, 1.0));
    const double f2 = std::exp(selfnorm_logdensity(kExample, 2.0));
    const double expect = std::log((0.5 * f1 + 0.5 * f2) / (0.3 * f0 + 0.7 * f05));
    CHECK(std::abs(lr_statistic(kExample, lambda, w) - expect) < 1e-8);
  }

  TEST_CASE("decide") {
    const auto reject = table_at(3, 0.05, scaled(kNull, 0.5 * std::exp(kExampleLr)));
    const auto accept = table_at(3, 0.05, scaled(kNull, 2.0 * std::exp(kExampleLr)));
    CHECK(decide(kExample, reject));
    CHECK_FALSE(decide(kExample, accept));
    const auto unverified = table_at(3, 0.05, kNull, false);
    CHECK_THROWS_AS(decide(kExample, unverified), UnverifiedTable);
    CHECK_NOTHROW(decide(kExample, unverified, true));
    const auto wrong_k = table_at(4, 0.05, kNull);
    CHECK_THROWS_AS(decide(kExample, wrong_k), InvalidArgument);
  }

  TEST_CASE("p-value is the smallest rejecting level") {
    const double c = std::exp(kExampleLr);
    const std::vector<LfdTable> bundle{
        table_at(3, 0.10, scaled(kNull, 0.5 * c)),
        table_at(3, 0.01, scaled(kNull, 2.0 * c)),
        table_at(3, 0.05, scaled(kNull, 0.5 * c)),
    };
    const auto report = p_value_report(kExample, bundle);
    CHECK(report.alphas == std::vector<double>{0.01, 0.05, 0.10});
    CHECK(report.reject == std::vector<bool>{false, true, true});
    CHECK(report.p_value == 0.05);
    CHECK(report.warnings.empty());
    CHECK(p_value(kExample, bundle) == 0.05);
  }

  TEST_CASE("non-monotone bundles warn and no rejection gives one") {
    const double c = std::exp(kExampleLr);
    const std::vector<LfdTable> odd{
        table_at(3, 0.01, scaled(kNull, 0.5 * c)),
        table_at(3, 0.05, scaled(kNull, 2.0 * c)),
    };
    const auto report = p_value_report(kExample, odd);
    CHECK(report.p_value == 0.01);
    CHECK_FALSE(report.warnings.empty());

    const std::vector<LfdTable> none{table_at(3, 0.05, scaled(kNull, 2.0 * c))};
    CHECK(p_value(kExample, none) == 1.0);
  }

  TEST_CASE("bundle checks") {
    CHECK_THROWS_AS(bundle_order({}), InvalidArgument);
    const std::vector<LfdTable> mixed{table_at(3, 0.05, kNull), table_at(4, 0.1, kNull)};
    CHECK_THROWS_AS(bundle_order(mixed), InvalidArgument);
    const std::vector<LfdTable> dup{table_at(3, 0.05, kNull), table_at(3, 0.05, kNull)};
    CHECK_THROWS_AS(bundle_order(dup), InvalidArgument);
  }

  TEST_CASE("full test on raw scores is affine invariant") {
    const int k = 5;
    const std::vector<LfdTable> bundle{table_at(k, 0.05, GridWeights::uniform_closed(0.0, 0.99, 5))};
    Rng rng(21);
    std::exponential_distribution<double> e;
    Eigen::VectorXd s(400);
    for (auto& x : s) x = std::pow(e(rng), 1.3);
    ModelData a;
    a.tag = ModelTag::kRawScores;
    a.raw_scores = s;
    ModelData b = a;
    b.raw_scores = (3.0 * s.array() + 7.0).matrix();
    const auto oa = run_full_test(a, ScoreConfig{1, k}, bundle);
    const auto ob = run_full_test(b, ScoreConfig{1, k}, bundle);
    CHECK(std::abs(oa.lr_log_ratio - ob.lr_log_ratio) < 1e-10);
    CHECK(oa.decision == ob.decision);
    CHECK(oa.n == 400);
    CHECK(oa.model == "scores");
    CHECK(oa.table_ids == std::vector<std::string>{"lfd_k5_a0.05"});

    ModelData tiny = a;
    tiny.raw_scores = Eigen::VectorXd::LinSpaced(4, 1.0, 4.0);
    CHECK_THROWS_AS(run_full_test(tiny, ScoreConfig{1, k}, bundle), InvalidArgument);
    ModelData flat = a;
    flat.raw_scores = Eigen::VectorXd::Ones(20);
    CHECK_THROWS_AS(run_full_test(flat, ScoreConfig{1, k}, bundle), DegenerateTail);
  }

  TEST_CASE("ols scores are invariant to rescaling the response") {
    const int k = 5;
    const std::vector<LfdTable> bundle{table_at(k, 0.05, GridWeights::uniform_closed(0.0, 0.99, 5))};
    Rng rng(22);
    std::normal_distribution<double> z;
    ModelData d;
    d.tag = ModelTag::kOls;
    d.design = Eigen::MatrixXd(300, 2);
    d.response = Eigen::VectorXd(300);
    for (int i = 0; i < 300; ++i) {
      d.design(i, 0) = 1.0;
      d.design(i, 1) = z(rng);
      d.response(i) = 1.0 + d.design(i, 1) + z(rng) * z(rng);
    }
    ModelData scaled_data = d;
    scaled_data.response = 5.0 * d.response + d.design.col(1) * 2.0;
    const auto a = run_full_test(d, ScoreConfig{2, k}, bundle);
    const auto b = run_full_test(scaled_data, ScoreConfig{2, k}, bundle);
    CHECK(std::abs(a.lr_log_ratio - b.lr_log_ratio) < 1e-8);
  }

  TEST_CASE("outcome json round trip") {
    const double c = std::exp(kExampleLr);
    const std::vector<LfdTable> bundle{
        table_at(3, 0.01, GridWeights{{0.0}, {1e-12}}),
        table_at(3, 0.05, scaled(kNull, 0.5 * c)),
    };
    TestOptions opts;
    opts.decision_alpha = 0.05;
    const auto out = test_tail(kExample, bundle, opts);
    CHECK(out.decision);
    CHECK(out.p_value == 0.01);
    const auto j = to_json(out);
    CHECK(to_json(outcome_from_json(j)).dump() == j.dump());
    CHECK(j.contains("lr_log_ratio"));
    CHECK(j.contains("p_value"));

    auto infinite = out;
    infinite.log_ratios[0] = std::numeric_limits<double>::infinity();
    infinite.lr_log_ratio = -std::numeric_limits<double>::infinity();
    const auto back = outcome_from_json(to_json(infinite));
    CHECK(back.log_ratios[0] == std::numeric_limits<double>::infinity());
    CHECK(back.lr_log_ratio == -std::numeric_limits<double>::infinity());

    TestOptions missing;
    missing.decision_alpha = 0.1;
    CHECK_THROWS_AS(test_tail(kExample, bundle, missing), InvalidArgument);
  }
}
