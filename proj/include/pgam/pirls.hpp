#ifndef PGAM_PIRLS_HPP_
#define PGAM_PIRLS_HPP_

#include <Eigen/Core>

#include "pgam/design.hpp"
#include "pgam/family.hpp"

namespace pgam {

struct InnerFit {
  Eigen::VectorXd beta;
  Eigen::VectorXd W;        // final IRLS weights (prior * (dmu/deta)^2 / V)
  Eigen::VectorXd eta;
  Eigen::VectorXd mu;
  double deviance = 0.0;    // weighted deviance at beta
  double penalty = 0.0;     // beta' S_lambda beta
  bool converged = false;
  int iterations = 0;
};

/// Penalized IRLS at fixed smoothing parameters. Converges on
/// |delta deviance| / (deviance + 0.1) < 1e-9 with step halving whenever the
/// penalized deviance increases; 200 iterations at most. `warm_start`
/// seeds the linear predictor from a previous fit at nearby lambdas.
InnerFit pirls_fit(const ModelMatrices& M, const Family& family,
                   const Eigen::VectorXd& lambdas, const Eigen::VectorXd& y,
                   const Eigen::VectorXd& prior_w,
                   const Eigen::VectorXd* warm_start_beta = nullptr);

}  // namespace pgam

#endif  // PGAM_PIRLS_HPP_
