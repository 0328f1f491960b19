#ifndef PGAM_BSPLINE_HPP_
#define PGAM_BSPLINE_HPP_

#include <Eigen/Core>
#include <vector>

namespace pgam {

/// Clamped B-spline basis of a given degree: boundary knots repeated
/// degree+1 times, interior knots at evenly spaced quantiles of the unique
/// covariate values (type-7). The full knot vector has k + degree + 1 entries
/// for k basis functions.
std::vector<double> bspline_knots(const Eigen::VectorXd& x, int k, int degree);

/// Cox-de Boor evaluation: n x k matrix of basis values. `derivative` = 0, 1
/// or 2 selects the basis functions themselves or their derivatives. Points
/// outside [knots.front(), knots.back()] throw.
Eigen::MatrixXd bspline_eval(const Eigen::VectorXd& x,
                             const std::vector<double>& knots, int k, int degree,
                             int derivative = 0);

/// Exact Gram matrix of second derivatives over the knot span. The second
/// derivatives are piecewise polynomials of degree-2, so two-point
/// Gauss-Legendre per knot interval integrates the products exactly for
/// degree <= 3.
Eigen::MatrixXd bspline_second_derivative_penalty(const std::vector<double>& knots,
                                                  int k, int degree);

/// Type-7 empirical quantile of sorted values.
double quantile_type7(const std::vector<double>& sorted, double prob);

}  // namespace pgam

#endif  // PGAM_BSPLINE_HPP_
