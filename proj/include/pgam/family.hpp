#ifndef PGAM_FAMILY_HPP_
#define PGAM_FAMILY_HPP_

#include <Eigen/Core>
#include <string>

namespace pgam {

enum class FamilyKind { gaussian, gamma, tweedie };
enum class Link { identity, log };

/**
 * Response distribution D(mu, phi) with link, variance function, unit
 * deviance and log density. The Tweedie power p lives strictly in (1,2);
 * its log density is the compound Poisson-gamma series, summed adaptively
 * in log space around the dominant index.
 */
struct Family {
  FamilyKind kind = FamilyKind::gaussian;
  Link link = Link::identity;
  double power = 1.5;        // tweedie only
  bool power_fixed = false;  // true when p was given rather than profiled

  static Family gaussian();
  static Family gamma_log();
  static Family tweedie_log(double power = 1.5);

  /// Parse "gaussian", "gamma(link=log)", "tweedie(link=log,p=1.5)".
  static Family parse(const std::string& text);
  std::string name() const;
};

double link_apply(const Family& f, double mu);
double link_invert(const Family& f, double eta);
/// d mu / d eta evaluated at eta.
double link_derivative(const Family& f, double eta);

double variance_function(const Family& f, double mu);

/// Nonnegative, zero iff y == mu.
double unit_deviance(const Family& f, double y, double mu);
double deviance(const Family& f, const Eigen::VectorXd& y, const Eigen::VectorXd& mu,
                const Eigen::VectorXd& w);

/// log f(y; mu, phi). `series_window_scale` widens the Tweedie truncation
/// window (tests use it to confirm the adaptive window has converged).
double log_density(const Family& f, double y, double mu, double phi,
                   double series_window_scale = 1.0);

/// Sum of weighted log densities with per-observation dispersion phi / w_i.
double log_likelihood(const Family& f, const Eigen::VectorXd& y,
                      const Eigen::VectorXd& mu, double phi, const Eigen::VectorXd& w);

/// Support check used by the fitters: y >= 0 for tweedie, y > 0 for gamma.
void check_support(const Family& f, const Eigen::VectorXd& y);

}  // namespace pgam

#endif  // PGAM_FAMILY_HPP_
