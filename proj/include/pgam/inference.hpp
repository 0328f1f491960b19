#ifndef PGAM_INFERENCE_HPP_
#define PGAM_INFERENCE_HPP_

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pgam/fit.hpp"

namespace pgam {

struct PredictionRequest {
  Dataset newdata;
  std::vector<std::string> exclude_terms;
  bool response_scale = false;
  double level = 0.95;
  bool clamp = false;
};

struct PredictionResult {
  Eigen::VectorXd fit;
  Eigen::VectorXd se;        // link-scale delta-method standard error
  Eigen::VectorXd ci_lower;  // on the requested scale
  Eigen::VectorXd ci_upper;
};

/// X* beta with excluded term columns zeroed; se = sqrt(diag(X* V X*')).
/// Response-scale intervals map the link-scale bounds through the inverse
/// link (monotone).
PredictionResult predict(const FittedModel& model, const PredictionRequest& req);

struct SlopeEstimate {
  double slope = 0.0;
  double se = 0.0;
};

/// Central finite difference of the response-scale mean with
/// h = (training range of wrt)/1000, delta-method standard error.
SlopeEstimate slope(const FittedModel& model, const Dataset& at,
                    const std::string& wrt,
                    const std::vector<std::string>& exclude_terms);

enum class ContrastQuantity { mean, slope };

struct ContrastResult {
  std::string within_level;  // stratifying level label, empty when unused
  std::string hypothesis;    // "A - B"
  double estimate = 0.0;
  double se = 0.0;
  double z = 0.0;
  double p_raw = 1.0;
  double p_adjusted = 1.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
};

struct ContrastRequest {
  std::string factor;                     // compared factor
  std::string within;                     // optional stratifying factor
  std::map<std::string, double> at;       // fixed numeric covariates, e.g. day=20
  ContrastQuantity quantity = ContrastQuantity::mean;
  std::string wrt;                        // slope covariate (slope quantity)
  std::vector<std::string> exclude_terms;
  double level = 0.95;
};

/// All pairwise comparisons of `factor` levels (within each `within` level),
/// on the response scale, Benjamini-Yekutieli adjusted over the full set
/// reported by this one invocation.
std::vector<ContrastResult> pairwise_contrasts(const FittedModel& model,
                                               const ContrastRequest& req);

/// Benjamini-Yekutieli step-up adjustment, valid under arbitrary dependence:
/// q_(i) = min(1, p_(i) m c(m) / i), c(m) = sum_{j<=m} 1/j, then a cumulative
/// minimum from the largest rank down. Returned in the input order.
Eigen::VectorXd adjust_by(const Eigen::VectorXd& p);

struct TermTest {
  double statistic = 0.0;  // T / r, F-like
  int rank = 0;            // r
  double ref_df2 = 0.0;    // n - total EDF
  double p = 1.0;
};

/// Wald-type test of a flat (zero) function for one term's coefficient
/// block, using a rank-r pseudo-inverse of the block posterior covariance,
/// r = min(ceil(edf)+1, block width); parametric blocks use the full rank.
/// Smoothing parameters are treated as fixed, so the p values are
/// approximate.
TermTest term_test(const FittedModel& model, int term_index);

struct BasisCheckRow {
  std::string label;
  int k_per_level = 0;   // columns per level after transforms
  double edf = 0.0;
  double ratio = 0.0;    // lag-1 squared-difference ratio of ordered residuals
  double p = 1.0;        // permutation p, small = residual pattern along x
  bool flagged = false;  // edf near the ceiling AND pattern detected
};

/// Basis-dimension diagnostic for univariate smooths: deviance residuals
/// ordered by the covariate, permutation null with the given seed.
std::vector<BasisCheckRow> kcheck(const FittedModel& model, std::uint64_t seed,
                                  int n_permutations = 1000);

struct SummaryRow {
  std::string label;
  std::string kind;
  int k_pre = 0;          // per-level basis columns before constraints
  int k_per_level = 0;    // per-level columns in the design
  int levels = 1;
  double edf = 0.0;
  double statistic = 0.0;
  int rank = 0;
  double p = 1.0;
  bool parametric = false;
};

struct ModelSummary {
  std::vector<SummaryRow> rows;
  double edf_total = 0.0;
  double aic = 0.0;
  double deviance = 0.0;
  double null_deviance = 0.0;
  double dev_explained = 0.0;
  double rmse = 0.0;
  double phi = 0.0;
  double power = 0.0;       // NaN unless tweedie
  Eigen::VectorXd lambdas;
  std::string criterion;
  double criterion_value = 0.0;
  Eigen::Index n = 0;
  std::string family;
  std::string formula;
};

ModelSummary summarize(const FittedModel& model);
std::string summary_text(const ModelSummary& s);

/// Deviance residuals sign(y - mu) sqrt(w d(y, mu)).
Eigen::VectorXd deviance_residuals(const FittedModel& model);

}  // namespace pgam

#endif  // PGAM_INFERENCE_HPP_
