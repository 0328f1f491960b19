#ifndef PGAM_FIT_HPP_
#define PGAM_FIT_HPP_

#include <Eigen/Core>
#include <string>
#include <vector>

#include "pgam/dataset.hpp"
#include "pgam/design.hpp"
#include "pgam/family.hpp"
#include "pgam/formula.hpp"
#include "pgam/pirls.hpp"

namespace pgam {

enum class Criterion { reml, gcv };

Criterion parse_criterion(const std::string& text);
std::string criterion_name(Criterion c);

struct FittedModel {
  Formula formula;
  Family family;
  Criterion criterion = Criterion::reml;
  ModelMatrices M;
  Dataset data;

  Eigen::VectorXd beta;
  Eigen::VectorXd lambdas;
  double phi = 1.0;              // Pearson scale estimate
  Eigen::MatrixXd Vbeta;         // phi * (X'WX + S_lambda)^{-1}
  Eigen::VectorXd edf_col;       // diag of the EDF matrix, per column
  double edf_total = 0.0;
  std::vector<double> edf_by_term;

  double aic = 0.0;
  double deviance_value = 0.0;
  double null_deviance = 0.0;
  double dev_explained = 0.0;
  double rmse = 0.0;
  double criterion_value = 0.0;
  double max_abs_grad = 0.0;     // criterion gradient at the optimum (interior)
  double log_lik = 0.0;

  InnerFit inner;

  Eigen::VectorXd y() const { return data.response(); }
  Eigen::VectorXd w() const { return data.weights(); }
};

/// Criterion value at fixed lambdas; both run a full PIRLS.
/// GCV = n D / (n - tau)^2, error when tau >= n.
double gcv_criterion(const ModelMatrices& M, const Family& family,
                     const Eigen::VectorXd& lambdas, const Eigen::VectorXd& y,
                     const Eigen::VectorXd& w);
/// Profiled-scale restricted criterion; exact REML for gaussian identity.
double reml_criterion(const ModelMatrices& M, const Family& family,
                      const Eigen::VectorXd& lambdas, const Eigen::VectorXd& y,
                      const Eigen::VectorXd& w);

/// log|S_lambda|+ decomposed over penalty groups (exact in lambda).
double penalty_logdet(const ModelMatrices& M, const Eigen::VectorXd& lambdas);

/// EDF vector diag(F), F = I - (X'WX + S_lambda)^{-1} S_lambda.
Eigen::VectorXd edf_diagonal(const ModelMatrices& M, const Eigen::VectorXd& W,
                             const Eigen::VectorXd& lambdas);

struct FitOptions {
  Criterion criterion = Criterion::reml;
  int max_eval_per_restart = 4000;
  bool profile_tweedie_power = true;  // ignored unless family is tweedie
};

/// Minimise the criterion over log-lambda (Nelder-Mead, 3 restarts, bounds
/// [-12,12]), then assemble scale, posterior covariance, EDF and fit
/// statistics. Models without penalties skip the search.
FittedModel optimize_smoothness(const Formula& formula, const Dataset& data,
                                const Family& family, const FitOptions& opts);

/// Parse + assemble + fit, including the Tweedie power profile when the
/// power was not fixed: grid p in {1.05,...,1.95} maximising the series
/// log-likelihood at each p's optimal fit, then one golden-section pass to
/// 0.005.
FittedModel fit_gam(const std::string& formula_text, const Dataset& data,
                    const Family& family, const FitOptions& opts);

}  // namespace pgam

#endif  // PGAM_FIT_HPP_
