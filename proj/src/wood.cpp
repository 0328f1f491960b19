#include "pgam/wood.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "pgam/error.hpp"

namespace pgam {

namespace {

Eigen::VectorXd curve(const Eigen::VectorXd& t, double a, double d, double k) {
  Eigen::VectorXd f(t.size());
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    f[i] = a * std::pow(t[i], d) * std::exp(k * t[i]);
  }
  return f;
}

}  // namespace

WoodFit fit_wood_lactation(const Eigen::VectorXd& t, const Eigen::VectorXd& y) {
  const Eigen::Index n = t.size();
  if (n < 4) {
    throw Error("fitter", "data", "lactation fit needs at least 4 observations");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(t[i] > 0.0) || !(y[i] > 0.0)) {
      throw Error("fitter", "domain",
                  "lactation fit needs positive time and response values (row " +
                      std::to_string(i + 1) + ")");
    }
  }

  // start values from the log-linear regression
  Eigen::MatrixXd Xl(n, 3);
  Eigen::VectorXd yl(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Xl(i, 0) = 1.0;
    Xl(i, 1) = std::log(t[i]);
    Xl(i, 2) = t[i];
    yl[i] = std::log(y[i]);
  }
  const Eigen::Vector3d start = Xl.colPivHouseholderQr().solve(yl);
  double a = std::exp(start[0]);
  double d = start[1];
  double k = start[2];

  double lm_mu = 1e-3;
  double rss = (y - curve(t, a, d, k)).squaredNorm();
  Eigen::MatrixXd J(n, 3);
  int iter = 0;
  const int max_iter = 500;
  for (; iter < max_iter; ++iter) {
    const Eigen::VectorXd f = curve(t, a, d, k);
    const Eigen::VectorXd r = y - f;
    for (Eigen::Index i = 0; i < n; ++i) {
      J(i, 0) = f[i] / a;
      J(i, 1) = f[i] * std::log(t[i]);
      J(i, 2) = f[i] * t[i];
    }
    const Eigen::Vector3d g = J.transpose() * r;
    const Eigen::Matrix3d JtJ = J.transpose() * J;

    // relative gradient convergence
    const double gnorm = g.norm() / std::max(1.0, std::sqrt(rss));
    if (gnorm < 1e-8) break;

    bool stepped = false;
    for (int damp = 0; damp < 60; ++damp) {
      Eigen::Matrix3d A = JtJ;
      A.diagonal() += lm_mu * JtJ.diagonal();
      const Eigen::Vector3d step = A.ldlt().solve(g);
      const double a2 = a + step[0], d2 = d + step[1], k2 = k + step[2];
      if (a2 > 0.0) {
        const double rss2 = (y - curve(t, a2, d2, k2)).squaredNorm();
        if (std::isfinite(rss2) && rss2 < rss) {
          a = a2;
          d = d2;
          k = k2;
          rss = rss2;
          lm_mu = std::max(1e-12, lm_mu / 3.0);
          stepped = true;
          break;
        }
      }
      lm_mu *= 4.0;
    }
    if (!stepped) break;  // damping exhausted at a stationary point
  }
  if (iter >= max_iter) {
    throw Error("fitter", "convergence",
                "lactation curve fit did not converge in 500 iterations (rss " +
                    std::to_string(rss) + ")",
                ErrorCode::numeric);
  }

  WoodFit fit;
  fit.alpha = a;
  fit.delta = d;
  fit.kappa = k;
  fit.rss = rss;
  fit.n = n;
  fit.iterations = iter;
  fit.sigma2 = rss / static_cast<double>(n - 3);
  {
    const Eigen::VectorXd f = curve(t, a, d, k);
    for (Eigen::Index i = 0; i < n; ++i) {
      J(i, 0) = f[i] / a;
      J(i, 1) = f[i] * std::log(t[i]);
      J(i, 2) = f[i] * t[i];
    }
    fit.covariance = fit.sigma2 * (J.transpose() * J).inverse();
  }
  const double sigma2_mle = rss / static_cast<double>(n);
  fit.aic = static_cast<double>(n) * (std::log(2.0 * M_PI * sigma2_mle) + 1.0) +
            2.0 * fit.df;
  fit.rmse = std::sqrt(sigma2_mle);
  return fit;
}

WoodFit fit_wood_lactation(const Dataset& data, const std::string& time_column) {
  const Column& tc = data.column(time_column);
  if (tc.kind != Column::Kind::numeric) {
    throw Error("fitter", "type", "time column '" + time_column + "' must be numeric");
  }
  return fit_wood_lactation(tc.values, data.response());
}

}  // namespace pgam
