#include "tailmoment/scores.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

#include "tailmoment/errors.hpp"

namespace tailmoment {
namespace {

// |R_11| / |R_pp| from a column-pivoted QR; cheap lower bound on cond_2.
template <typename Qr>
double condition_estimate(const Qr& qr) {
  const auto r = qr.matrixQR().diagonal().cwiseAbs();
  if (r.size() == 0) return 1.0;
  const double smallest = r.minCoeff();
  return smallest == 0.0 ? std::numeric_limits<double>::infinity() : r.maxCoeff() / smallest;
}

void warn_if_ill_conditioned(double cond, const char* what, std::vector<std::string>& warnings) {
  if (cond > kConditionWarning) {
    std::ostringstream os;
    os << what << " condition number estimate " << cond << " exceeds " << kConditionWarning;
    warnings.push_back(os.str());
  }
}

void require_finite(const Eigen::MatrixXd& m, const char* what) {
  if (!m.allFinite()) throw InvalidArgument(std::string(what) + " contains non-finite values");
}

}  // namespace

std::string_view to_string(ModelTag tag) {
  switch (tag) {
    case ModelTag::kOls: return "ols";
    case ModelTag::kIv: return "iv";
    case ModelTag::kRawScores: return "scores";
  }
  return "unknown";
}

ModelTag parse_model_tag(std::string_view name) {
  if (name == "ols") return ModelTag::kOls;
  if (name == "iv" || name == "2sls") return ModelTag::kIv;
  if (name == "scores" || name == "raw_scores") return ModelTag::kRawScores;
  throw InvalidArgument("unknown model tag '" + std::string(name) + "'");
}

std::size_t ModelData::n() const {
  if (tag == ModelTag::kRawScores) return raw_scores ? static_cast<std::size_t>(raw_scores->size()) : 0;
  return static_cast<std::size_t>(response.size());
}

void ModelData::validate() const {
  if (tag == ModelTag::kRawScores) {
    if (!raw_scores) throw InvalidArgument("RAW_SCORES model requires raw scores");
    require_finite(*raw_scores, "raw scores");
    if ((raw_scores->array() < 0.0).any()) throw InvalidArgument("raw scores must be non-negative");
    return;
  }
  const auto n = response.size();
  if (n == 0) throw InvalidArgument("empty response");
  if (design.rows() != n) throw InvalidArgument("design rows do not match response length");
  if (design.cols() == 0) throw InvalidArgument("design has no columns");
  require_finite(response, "response");
  require_finite(design, "design");
  if (tag == ModelTag::kIv) {
    if (!instruments) throw InvalidArgument("IV model requires instruments");
    if (instruments->rows() != n) throw InvalidArgument("instrument rows do not match response length");
    if (instruments->cols() < design.cols()) {
      throw InvalidArgument("under-identified: fewer instruments than regressors");
    }
    require_finite(*instruments, "instruments");
  }
}

void ScoreConfig::validate() const {
  if (r != 1 && r != 2) throw InvalidArgument("r must be 1 or 2");
  if (k < 3) throw InvalidArgument("k must be >= 3");
}

FitResult ols_fit(const ModelData& data) {
  data.validate();
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(data.design);
  if (qr.rank() < data.design.cols()) throw SingularDesign("design matrix is column-rank deficient");
  FitResult out;
  out.theta_hat = qr.solve(data.response);
  out.residuals = data.response - data.design * out.theta_hat;
  warn_if_ill_conditioned(condition_estimate(qr), "design", out.warnings);
  return out;
}

FitResult iv_fit(const ModelData& data) {
  if (data.tag != ModelTag::kIv && !data.instruments) {
    throw InvalidArgument("IV fit requires instruments");
  }
  ModelData checked = data;
  checked.tag = ModelTag::kIv;
  checked.validate();
  const Eigen::MatrixXd& x = data.design;
  const Eigen::MatrixXd& z = *data.instruments;

  FitResult out;
  if (z.cols() == x.cols()) {
    const Eigen::MatrixXd zx = z.transpose() * x;
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(zx);
    if (qr.rank() < zx.cols()) throw WeakInstrumentSingularity("Z'X is rank deficient");
    out.theta_hat = qr.solve(z.transpose() * data.response);
    warn_if_ill_conditioned(condition_estimate(qr), "Z'X", out.warnings);
  } else {
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> zqr(z);
    if (zqr.rank() < z.cols()) throw WeakInstrumentSingularity("instrument matrix is rank deficient");
    const Eigen::MatrixXd x_hat = z * zqr.solve(x);
    const Eigen::MatrixXd xhx = x_hat.transpose() * x;
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xhx);
    if (qr.rank() < xhx.cols()) throw WeakInstrumentSingularity("projected design is rank deficient");
    out.theta_hat = qr.solve(x_hat.transpose() * data.response);
    warn_if_ill_conditioned(condition_estimate(qr), "X'P_Z X", out.warnings);
  }
  out.residuals = data.response - x * out.theta_hat;
  return out;
}

FitResult fit_model(const ModelData& data) {
  switch (data.tag) {
    case ModelTag::kOls: return ols_fit(data);
    case ModelTag::kIv: return iv_fit(data);
    case ModelTag::kRawScores: data.validate(); return {};
  }
  throw InvalidArgument("unknown model tag");
}

std::vector<double> score_norms(const FitResult& fit, const ModelData& data,
                                const ScoreConfig& cfg) {
  if (cfg.r != 1 && cfg.r != 2) throw InvalidArgument("r must be 1 or 2");
  const auto n = data.n();
  std::vector<double> out(n);

  if (data.tag == ModelTag::kRawScores) {
    data.validate();
    for (std::size_t i = 0; i < n; ++i) {
      const double a = (*data.raw_scores)[static_cast<Eigen::Index>(i)];
      out[i] = cfg.r == 1 ? a : a * a;
    }
    return out;
  }

  if (static_cast<std::size_t>(fit.residuals.size()) != n) {
    throw InvalidArgument("fit residuals do not match the data");
  }
  const Eigen::MatrixXd& weights = data.tag == ModelTag::kIv ? *data.instruments : data.design;
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const double u = fit.residuals[row];
    const double squared = u * u * weights.row(row).squaredNorm();
    out[i] = cfg.r == 2 ? squared : std::sqrt(squared);
  }
  return out;
}

TopKVector top_k_order_stats(std::span<const double> values, int k) {
  if (k < 1) throw InvalidArgument("k must be >= 1");
  if (static_cast<std::size_t>(k) > values.size()) {
    throw InvalidArgument("k exceeds the number of observations");
  }
  for (double v : values) {
    if (!std::isfinite(v) || v < 0.0) throw InvalidArgument("score norms must be finite and non-negative");
  }
  std::vector<double> top(static_cast<std::size_t>(k));
  std::partial_sort_copy(values.begin(), values.end(), top.begin(), top.end(), std::greater<>{});
  return TopKVector(std::move(top));
}

}  // namespace tailmoment
