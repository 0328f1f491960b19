#include "pgam/pirls.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "pgam/error.hpp"

namespace pgam {

namespace {

Eigen::VectorXd initial_mu(const Family& family, const Eigen::VectorXd& y) {
  if (family.link == Link::identity) return y;
  const double ybar = std::max(y.mean(), 1e-8);
  Eigen::VectorXd mu(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    mu[i] = 0.5 * (std::max(y[i], 0.0) + ybar);
  }
  return mu;
}

}  // namespace

InnerFit pirls_fit(const ModelMatrices& M, const Family& family,
                   const Eigen::VectorXd& lambdas, const Eigen::VectorXd& y,
                   const Eigen::VectorXd& prior_w,
                   const Eigen::VectorXd* warm_start_beta) {
  const Eigen::Index n = M.n();
  const Eigen::Index P = M.p();
  if (lambdas.size() != static_cast<Eigen::Index>(M.penalties.size())) {
    throw Error("fitter", "lambda", "wrong number of smoothing parameters");
  }
  for (Eigen::Index g = 0; g < lambdas.size(); ++g) {
    if (!(lambdas[g] >= 0.0)) {
      throw Error("fitter", "lambda", "smoothing parameters must be >= 0");
    }
  }
  check_support(family, y);

  const Eigen::MatrixXd S_lambda = M.total_penalty(lambdas);
  const bool gaussian_identity =
      family.kind == FamilyKind::gaussian && family.link == Link::identity;

  InnerFit fit;
  fit.eta.resize(n);
  fit.mu.resize(n);

  if (warm_start_beta && warm_start_beta->size() == P) {
    fit.beta = *warm_start_beta;
    fit.eta = M.X * fit.beta;
    for (Eigen::Index i = 0; i < n; ++i) fit.mu[i] = link_invert(family, fit.eta[i]);
  } else {
    fit.mu = initial_mu(family, y);
    for (Eigen::Index i = 0; i < n; ++i) fit.eta[i] = link_apply(family, fit.mu[i]);
    fit.beta = Eigen::VectorXd::Zero(P);
  }

  double dev_old = deviance(family, y, fit.mu, prior_w) +
                   fit.beta.dot(S_lambda * fit.beta);

  Eigen::VectorXd W(n), z(n);
  const int max_iter = 200;
  for (int iter = 1; iter <= max_iter; ++iter) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double dmu = link_derivative(family, fit.eta[i]);
      const double V = variance_function(family, fit.mu[i]);
      W[i] = prior_w[i] * dmu * dmu / V;
      z[i] = fit.eta[i] + (y[i] - fit.mu[i]) / dmu;
      if (!std::isfinite(W[i]) || !std::isfinite(z[i])) {
        throw Error("fitter", "weights", "non-finite working weights; fit diverged",
                    ErrorCode::numeric);
      }
    }

    Eigen::MatrixXd H = M.X.transpose() * W.asDiagonal() * M.X;
    H += S_lambda;
    const Eigen::VectorXd rhs = M.X.transpose() * (W.asDiagonal() * z);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
    if (ldlt.info() != Eigen::Success) {
      throw Error("fitter", "rank", "penalized system is singular", ErrorCode::numeric);
    }
    Eigen::VectorXd beta_new = ldlt.solve(rhs);
    if (!beta_new.allFinite()) {
      throw Error("fitter", "rank", "penalized solve produced non-finite coefficients",
                  ErrorCode::numeric);
    }
    // residual check of the normal equations; catches a semi-definite H that
    // LDLT "solved" inconsistently
    const double rel = (H * beta_new - rhs).norm() / std::max(1e-300, rhs.norm());
    if (rel > 1e-6) {
      throw Error("fitter", "rank",
                  "penalized normal equations inconsistent (design rank deficient?)",
                  ErrorCode::numeric);
    }

    // step halving against the penalized deviance
    const Eigen::VectorXd beta_prev = fit.beta;
    double step = 1.0;
    double dev_new = 0.0;
    for (int half = 0; half < 30; ++half) {
      fit.beta = beta_prev + step * (beta_new - beta_prev);
      fit.eta = M.X * fit.beta;
      bool ok = true;
      for (Eigen::Index i = 0; i < n; ++i) {
        fit.mu[i] = link_invert(family, fit.eta[i]);
        if (!std::isfinite(fit.mu[i]) ||
            (family.kind != FamilyKind::gaussian && fit.mu[i] <= 0.0)) {
          ok = false;
          break;
        }
      }
      if (ok) {
        dev_new = deviance(family, y, fit.mu, prior_w) +
                  fit.beta.dot(S_lambda * fit.beta);
        if (iter == 1 || dev_new <= dev_old * (1.0 + 1e-12) || step < 1e-8) break;
      }
      step *= 0.5;
      if (half == 29) {
        throw Error("fitter", "convergence",
                    "step halving failed to reduce the penalized deviance",
                    ErrorCode::numeric);
      }
    }

    fit.W = W;
    fit.iterations = iter;
    fit.penalty = fit.beta.dot(S_lambda * fit.beta);
    fit.deviance = dev_new - fit.penalty;

    if (gaussian_identity) {
      // exact weighted least squares; nothing to iterate
      fit.converged = true;
      return fit;
    }
    if (std::abs(dev_new - dev_old) / (std::abs(dev_new) + 0.1) < 1e-9) {
      fit.converged = true;
      return fit;
    }
    dev_old = dev_new;
  }

  throw Error("fitter", "convergence",
              "PIRLS did not converge in 200 iterations (deviance " +
                  std::to_string(fit.deviance) + ")",
              ErrorCode::numeric);
}

}  // namespace pgam
