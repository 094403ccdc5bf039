#include "tailmoment/moment_test.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "tailmoment/errors.hpp"

namespace tailmoment {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_mass(const GridWeights& lambda, const GridWeights& w) {
  lambda.validate();
  w.validate();
  if (lambda.all_zero()) throw InvalidArgument("null weight has no mass");
  if (w.all_zero()) throw InvalidArgument("alternative weight has no mass");
}

nlohmann::json real_to_json(double x) {
  if (std::isfinite(x)) return x;
  if (std::isnan(x)) return "nan";
  return x > 0 ? "inf" : "-inf";
}

double real_from_json(const nlohmann::json& j) {
  if (j.is_number()) return j.get<double>();
  const auto s = j.get<std::string>();
  if (s == "inf") return kInf;
  if (s == "-inf") return -kInf;
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  throw ConfigError("not a number: " + s);
}

}  // namespace

double lr_statistic(const SelfNormalizedTail& a, const GridWeights& lambda, const GridWeights& w) {
  require_mass(lambda, w);
  return LikelihoodRatio(lambda, w).log_ratio(a);
}

double lr_statistic(const SelfNormalizedTail& a, const GridWeights& lambda, const GridWeights& w,
                    const QuadratureConfig& q) {
  require_mass(lambda, w);
  const LikelihoodRatio lr(lambda, w);
  std::vector<double> lf;
  for (double xi : lr.xis()) lf.push_back(selfnorm_logdensity(a, xi, q));
  return lr.log_ratio_from(lf);
}

bool decide(const SelfNormalizedTail& a, const LfdTable& table, bool allow_unverified) {
  if (static_cast<int>(a.k()) != table.k) {
    throw InvalidArgument("tail has k=" + std::to_string(a.k()) + " but table " + table.id() +
                          " expects k=" + std::to_string(table.k));
  }
  if (!table.meta.verified && !allow_unverified) {
    throw UnverifiedTable("table " + table.id() + " has not passed size verification");
  }
  return lr_statistic(a, table.null_grid, table.alt_weight) > 0.0;
}

std::vector<std::size_t> bundle_order(std::span<const LfdTable> bundle) {
  if (bundle.empty()) throw InvalidArgument("empty table bundle");
  std::vector<std::size_t> order(bundle.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return bundle[i].alpha < bundle[j].alpha; });
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (bundle[order[i]].k != bundle[order[0]].k) throw InvalidArgument("bundle mixes tables of different k");
    if (i > 0 && bundle[order[i]].alpha == bundle[order[i - 1]].alpha) {
      throw InvalidArgument("bundle holds two tables at alpha=" + format_alpha(bundle[order[i]].alpha));
    }
  }
  return order;
}

PValueReport p_value_report(const SelfNormalizedTail& a, std::span<const LfdTable> bundle,
                            bool allow_unverified) {
  const auto order = bundle_order(bundle);
  PValueReport out;
  for (std::size_t i : order) {
    const LfdTable& t = bundle[i];
    if (static_cast<int>(a.k()) != t.k) throw InvalidArgument("tail length does not match bundle k");
    if (!t.meta.verified && !allow_unverified) {
      throw UnverifiedTable("table " + t.id() + " has not passed size verification");
    }
    const double lr = lr_statistic(a, t.null_grid, t.alt_weight);
    out.alphas.push_back(t.alpha);
    out.log_ratio.push_back(lr);
    out.reject.push_back(lr > 0.0);
  }
  // Smallest rejecting level of the upward closure.
  const auto first = std::find(out.reject.begin(), out.reject.end(), true);
  if (first != out.reject.end()) {
    out.p_value = out.alphas[static_cast<std::size_t>(first - out.reject.begin())];
    if (std::find(first, out.reject.end(), false) != out.reject.end()) {
      out.warnings.push_back("rejection is not monotone across the alpha grid; p-value uses the smallest rejecting level");
    }
  }
  return out;
}

double p_value(const SelfNormalizedTail& a, std::span<const LfdTable> bundle, bool allow_unverified) {
  return p_value_report(a, bundle, allow_unverified).p_value;
}

TestOutcome test_tail(const SelfNormalizedTail& a, std::span<const LfdTable> bundle,
                      const TestOptions& options) {
  const auto pv = p_value_report(a, bundle, options.allow_unverified);
  const auto order = bundle_order(bundle);
  TestOutcome out;
  out.k = static_cast<int>(a.k());
  out.alpha = options.decision_alpha;
  out.alphas = pv.alphas;
  out.log_ratios = pv.log_ratio;
  out.reject = pv.reject;
  out.p_value = pv.p_value;
  out.warnings = pv.warnings;
  bool found = false;
  for (std::size_t i = 0; i < pv.alphas.size(); ++i) {
    const LfdTable& t = bundle[order[i]];
    out.table_ids.push_back(t.id());
    if (!t.meta.verified) out.warnings.push_back("table " + t.id() + " is unverified");
    if (pv.alphas[i] == options.decision_alpha) {
      out.lr_log_ratio = pv.log_ratio[i];
      out.decision = pv.reject[i];
      found = true;
    }
  }
  if (!found) {
    throw InvalidArgument("bundle has no table at the decision level alpha=" + format_alpha(options.decision_alpha));
  }
  return out;
}

TestOutcome run_full_test(const ModelData& data, const ScoreConfig& cfg,
                          std::span<const LfdTable> bundle, const TestOptions& options) {
  cfg.validate();
  data.validate();
  if (data.n() < static_cast<std::size_t>(cfg.k)) {
    throw InvalidArgument("sample size " + std::to_string(data.n()) + " is smaller than k=" + std::to_string(cfg.k));
  }
  const FitResult fit = fit_model(data);
  const auto norms = score_norms(fit, data, cfg);
  const auto tail = self_normalize(top_k_order_stats(norms, cfg.k));
  TestOutcome out = test_tail(tail, bundle, options);
  out.r = cfg.r;
  out.model = std::string(to_string(data.tag));
  out.n = data.n();
  out.warnings.insert(out.warnings.begin(), fit.warnings.begin(), fit.warnings.end());
  return out;
}

nlohmann::json to_json(const TestOutcome& o) {
  nlohmann::json reject = nlohmann::json::object();
  nlohmann::json ratios = nlohmann::json::object();
  for (std::size_t i = 0; i < o.alphas.size(); ++i) {
    reject[format_alpha(o.alphas[i])] = static_cast<bool>(o.reject[i]);
    ratios[format_alpha(o.alphas[i])] = real_to_json(o.log_ratios[i]);
  }
  return {
      {"lr_log_ratio", real_to_json(o.lr_log_ratio)},
      {"decision", o.decision},
      {"reject", reject},
      {"lr_log_ratio_by_alpha", ratios},
      {"alphas", o.alphas},
      {"p_value", o.p_value},
      {"k", o.k},
      {"r", o.r},
      {"alpha", o.alpha},
      {"model", o.model},
      {"n", o.n},
      {"table_ids", o.table_ids},
      {"warnings", o.warnings},
  };
}

TestOutcome outcome_from_json(const nlohmann::json& j) {
  try {
    TestOutcome o;
    o.lr_log_ratio = real_from_json(j.at("lr_log_ratio"));
    o.decision = j.at("decision").get<bool>();
    o.alphas = j.at("alphas").get<std::vector<double>>();
    for (double a : o.alphas) {
      const auto key = format_alpha(a);
      o.reject.push_back(j.at("reject").at(key).get<bool>());
      o.log_ratios.push_back(real_from_json(j.at("lr_log_ratio_by_alpha").at(key)));
    }
    o.p_value = j.at("p_value").get<double>();
    o.k = j.at("k").get<int>();
    o.r = j.at("r").get<int>();
    o.alpha = j.at("alpha").get<double>();
    o.model = j.at("model").get<std::string>();
    o.n = j.at("n").get<std::size_t>();
    o.table_ids = j.at("table_ids").get<std::vector<std::string>>();
    o.warnings = j.at("warnings").get<std::vector<std::string>>();
    return o;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed test outcome: ") + e.what());
  }
}

}  // namespace tailmoment
