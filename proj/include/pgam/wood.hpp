#ifndef PGAM_WOOD_HPP_
#define PGAM_WOOD_HPP_

#include <Eigen/Core>

#include "pgam/dataset.hpp"

namespace pgam {

/// Gamma-type parametric lactation curve alpha * t^delta * exp(kappa t) with
/// gaussian errors, fitted by Levenberg-Marquardt with an analytic Jacobian.
struct WoodFit {
  double alpha = 0.0;
  double delta = 0.0;
  double kappa = 0.0;
  double sigma2 = 0.0;          // residual variance, RSS/(n-3)
  Eigen::Matrix3d covariance;   // sigma2 * (J'J)^{-1}
  int df = 4;                   // three curve parameters plus the error variance
  double aic = 0.0;             // gaussian likelihood at the MLE variance RSS/n
  double rmse = 0.0;
  double rss = 0.0;
  int iterations = 0;
  Eigen::Index n = 0;
};

/// Start values come from the log-linear regression
/// log(y) ~ 1 + log(t) + t, whose coefficients are (log alpha, delta, kappa).
WoodFit fit_wood_lactation(const Eigen::VectorXd& t, const Eigen::VectorXd& y);
WoodFit fit_wood_lactation(const Dataset& data, const std::string& time_column);

}  // namespace pgam

#endif  // PGAM_WOOD_HPP_
