#ifndef PGAM_DESIGN_HPP_
#define PGAM_DESIGN_HPP_

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "pgam/basis.hpp"
#include "pgam/dataset.hpp"
#include "pgam/formula.hpp"

namespace pgam {

/// Factor metadata frozen at assembly so that new data are encoded against
/// the training levels.
struct FactorInfo {
  std::string name;
  std::vector<std::string> levels;
};

/// One term's slice of the design plus everything needed to rebuild its
/// prediction rows: the fitted basis, constraint transforms, the fs
/// eigen-reparameterisation, and the sz cross-level map.
struct TermBlock {
  TermSpec spec;
  int col_start = 0;
  int width = 0;

  std::optional<Basis> basis;           // smooth-like terms
  Eigen::MatrixXd Z;                    // sum-to-zero transform (smooth, sz)
  std::vector<Eigen::MatrixXd> Z_level; // per-level transforms (by_smooth)
  Eigen::MatrixXd reparam;              // fs: k x k eigenvectors of the penalty
  Eigen::MatrixXd cross;                // sz: (L*m) x width cross-level map
  std::vector<FactorInfo> factors;
  bool centered_warning = false;        // absorb hit an already-centered basis

  int per_level_cols = 0;               // post-transform columns per level
  int levels_total = 1;                 // product of factor level counts
};

/// One smoothing parameter: a symmetric PSD block S embedded at col_start.
/// Blocks of distinct groups never overlap columns, which keeps REML's
/// log|S_lambda|+ separable and exact.
struct PenaltyGroup {
  int term_index = 0;
  int col_start = 0;
  Eigen::MatrixXd S;
  int rank = 0;
  double logdet_plus = 0.0;  // sum of log positive eigenvalues of S
  std::string label;
};

struct ModelMatrices {
  Eigen::MatrixXd X;
  std::vector<TermBlock> terms;
  std::vector<PenaltyGroup> penalties;
  int n_parametric = 0;  // intercept + linear + factor columns
  int total_penalty_null_dim = 0;

  Eigen::Index n() const { return X.rows(); }
  Eigen::Index p() const { return X.cols(); }

  /// Sum_g lambda_g S_g embedded into a P x P matrix.
  Eigen::MatrixXd total_penalty(const Eigen::VectorXd& lambdas) const;

  int term_index_of(const std::string& label) const;  // -1 when absent
};

/// Compile parsed terms against the data into the concatenated design and
/// penalty list. Bare column terms resolve to parametric linear or factor
/// blocks here.
ModelMatrices assemble_design(const Formula& formula, const Dataset& data);

/// Prediction rows in the training column layout. Excluded terms contribute
/// zero columns and their covariates/factors need not be present in
/// `newdata`. `clamp` permits out-of-support covariate values by clamping to
/// the training range.
Eigen::MatrixXd build_rows(const ModelMatrices& M, const Dataset& newdata,
                           const std::vector<bool>& exclude, bool clamp = false);

/// Exclusion mask from term labels; unknown labels throw a request error.
std::vector<bool> exclusion_mask(const ModelMatrices& M,
                                 const std::vector<std::string>& labels);

}  // namespace pgam

#endif  // PGAM_DESIGN_HPP_
