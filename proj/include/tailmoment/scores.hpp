#pragma once

// Closed-form OLS / 2SLS fits, per-observation score norms A_i^r, and
// extraction of the k largest of them.

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "tailmoment/evt.hpp"

namespace tailmoment {

enum class ModelTag { kOls, kIv, kRawScores };

std::string_view to_string(ModelTag tag);
// Accepts "ols", "iv" and "scores" (also "raw_scores").
ModelTag parse_model_tag(std::string_view name);

struct ModelData {
  ModelTag tag = ModelTag::kOls;
  Eigen::VectorXd response;
  Eigen::MatrixXd design;                      // n x p
  std::optional<Eigen::MatrixXd> instruments;  // n x q, q >= p
  std::optional<Eigen::VectorXd> raw_scores;   // n, non-negative

  std::size_t n() const;
  void validate() const;
};

struct ScoreConfig {
  int r = 1;  // 1: finite mean of the score norm (consistency); 2: finite variance
  int k = 50;

  void validate() const;
};

struct FitResult {
  Eigen::VectorXd theta_hat;
  Eigen::VectorXd residuals;
  std::vector<std::string> warnings;
};

// Condition-number estimate above which fits carry a warning.
inline constexpr double kConditionWarning = 1e12;

// Throws SingularDesign when the design is column-rank deficient.
FitResult ols_fit(const ModelData& data);

// Just-identified: solves Z'X theta = Z'Y. Over-identified: 2SLS with weight
// (Z'Z)^{-1}. Throws InvalidArgument when q < p and WeakInstrumentSingularity
// when the projected design is rank deficient.
FitResult iv_fit(const ModelData& data);

// Dispatches on data.tag. RAW_SCORES yields an empty fit.
FitResult fit_model(const ModelData& data);

// OLS: |u_i|^r ||X_i||^r. IV: |u_i|^r ||Z_i||^r. RAW_SCORES: raw_i^r.
std::vector<double> score_norms(const FitResult& fit, const ModelData& data,
                                const ScoreConfig& cfg);

// The k largest values in descending order. Throws InvalidArgument when
// k > values.size(), k < 1, or any value is negative or non-finite.
TopKVector top_k_order_stats(std::span<const double> values, int k);

}  // namespace tailmoment
