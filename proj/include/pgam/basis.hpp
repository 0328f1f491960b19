#ifndef PGAM_BASIS_HPP_
#define PGAM_BASIS_HPP_

#include <Eigen/Core>
#include <string>
#include <vector>

#include "pgam/bspline.hpp"

namespace pgam {

enum class BasisKind { bspline, tprs, random_intercept };

struct BasisSpec {
  BasisKind kind = BasisKind::bspline;
  int k = 10;             // basis dimension before any constraint
  int degree = 3;         // bspline only
  std::string covariate;
  std::vector<double> knots;  // optional explicit knot vector (bspline)
};

struct PenaltyMatrix {
  Eigen::MatrixXd values;
  int rank = 0;
  int null_space_dim = 0;
};

struct ConstraintTransform {
  Eigen::MatrixXd Z;             // k x (k-1), orthonormal columns
  bool already_centered = false; // column sums were ~0; Z is a column drop
};

/// Low-rank thin plate artifacts: radial kernel |x - c|^3/12 at the unique
/// training values, eigen-truncated to the dominant k-2 components, with the
/// span-of-{1,x} part of the wiggly columns shifted into the null columns for
/// conditioning (a pure reparameterisation; fitted functions are unchanged).
struct TprsArtifacts {
  Eigen::VectorXd centers;    // sorted unique training x
  Eigen::MatrixXd eigvecs;    // m x (k-2)
  Eigen::VectorXd eigvals;    // k-2, ordered by |value| descending
  Eigen::MatrixXd null_proj;  // 2 x (k-2), least-squares coefficients removed
};

/// A basis fitted to training covariate values: evaluation artifacts plus the
/// unconstrained penalty. The sum-to-zero constraint is applied on top by
/// absorb_constraint.
class Basis {
 public:
  static Basis build(const Eigen::VectorXd& x, const BasisSpec& spec);

  /// n x k matrix of unconstrained basis values. Out-of-support points throw
  /// unless `clamp` is set.
  Eigen::MatrixXd matrix(const Eigen::VectorXd& x, bool clamp = false) const;

  PenaltyMatrix penalty() const;

  const BasisSpec& spec() const { return spec_; }
  const std::vector<double>& knots() const { return knots_; }
  const TprsArtifacts& tprs() const { return tprs_; }
  double support_lo() const { return lo_; }
  double support_hi() const { return hi_; }

  // Archive round-trip support.
  static Basis restore(const BasisSpec& spec, std::vector<double> knots,
                       TprsArtifacts tprs, double lo, double hi);

 private:
  BasisSpec spec_;
  std::vector<double> knots_;
  TprsArtifacts tprs_;
  double lo_ = 0.0, hi_ = 0.0;
};

/// Absorb the sum-to-zero-over-observations constraint: Z spans the null
/// space of the column-sum row vector of B. Returns B*Z, Z'SZ, and Z itself.
/// The penalty's null space dimension drops by one (the constant).
ConstraintTransform absorb_constraint(const Eigen::MatrixXd& B,
                                      const PenaltyMatrix& S,
                                      Eigen::MatrixXd* B_out,
                                      PenaltyMatrix* S_out);

}  // namespace pgam

#endif  // PGAM_BASIS_HPP_
