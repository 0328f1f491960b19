#include "pgam/basis.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "pgam/error.hpp"

namespace pgam {

namespace {

void validate_spec(const BasisSpec& spec) {
  if (spec.kind == BasisKind::bspline) {
    if (spec.k < spec.degree + 1) {
      throw Error("basis_engine", "dimension",
                  "bspline '" + spec.covariate + "': k must be >= degree+1");
    }
    if (spec.degree < 1) {
      throw Error("basis_engine", "dimension", "bspline degree must be >= 1");
    }
  } else if (spec.kind == BasisKind::tprs) {
    if (spec.k < 3) {
      throw Error("basis_engine", "dimension", "tprs needs k >= 3");
    }
  }
}

}  // namespace

Basis Basis::build(const Eigen::VectorXd& x, const BasisSpec& spec) {
  validate_spec(spec);
  if (!x.allFinite()) {
    throw Error("basis_engine", "domain", "covariate '" + spec.covariate +
                                              "' has non-finite values");
  }
  Basis b;
  b.spec_ = spec;
  b.lo_ = x.minCoeff();
  b.hi_ = x.maxCoeff();

  if (spec.kind == BasisKind::bspline) {
    if (!spec.knots.empty()) {
      if (!std::is_sorted(spec.knots.begin(), spec.knots.end())) {
        throw Error("basis_engine", "knots", "explicit knots must be non-decreasing");
      }
      if (spec.knots.front() > b.lo_ || spec.knots.back() < b.hi_) {
        throw Error("basis_engine", "knots", "explicit knots must span the covariate range");
      }
      if (static_cast<int>(spec.knots.size()) != spec.k + spec.degree + 1) {
        throw Error("basis_engine", "knots",
                    "explicit knot vector must have k+degree+1 entries");
      }
      b.knots_ = spec.knots;
      b.lo_ = spec.knots.front();
      b.hi_ = spec.knots.back();
    } else {
      b.knots_ = bspline_knots(x, spec.k, spec.degree);
    }
    return b;
  }

  if (spec.kind == BasisKind::tprs) {
    std::vector<double> uniq(x.data(), x.data() + x.size());
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    const Eigen::Index m = static_cast<Eigen::Index>(uniq.size());
    if (m < spec.k) {
      throw Error("basis_engine", "rank",
                  "tprs '" + spec.covariate + "' needs at least k unique values (" +
                      std::to_string(spec.k) + "), got " + std::to_string(m));
    }
    Eigen::Map<const Eigen::VectorXd> c(uniq.data(), m);
    Eigen::MatrixXd E(m, m);
    for (Eigen::Index u = 0; u < m; ++u) {
      for (Eigen::Index v = 0; v <= u; ++v) {
        const double r = std::abs(c[u] - c[v]);
        E(u, v) = E(v, u) = r * r * r / 12.0;
      }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(E);
    if (eig.info() != Eigen::Success) {
      throw Error("basis_engine", "eigen", "tprs eigendecomposition failed",
                  ErrorCode::numeric);
    }
    // dominant |eigenvalue| components span the retained wiggly space
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(m));
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index bidx) {
      return std::abs(eig.eigenvalues()[a]) > std::abs(eig.eigenvalues()[bidx]);
    });
    const Eigen::Index kw = spec.k - 2;
    TprsArtifacts art;
    art.centers = c;
    art.eigvecs.resize(m, kw);
    art.eigvals.resize(kw);
    for (Eigen::Index j = 0; j < kw; ++j) {
      Eigen::VectorXd v = eig.eigenvectors().col(idx[static_cast<std::size_t>(j)]);
      Eigen::Index imax;
      v.cwiseAbs().maxCoeff(&imax);
      if (v[imax] < 0.0) v = -v;  // deterministic sign
      art.eigvecs.col(j) = v;
      art.eigvals[j] = eig.eigenvalues()[idx[static_cast<std::size_t>(j)]];
    }
    // Shift the span-of-{1,x} part of the wiggly columns into the null
    // columns; pure reparameterisation, improves conditioning at small
    // lambda. Computed over the training rows.
    Eigen::MatrixXd T(x.size(), 2);
    T.col(0).setOnes();
    T.col(1) = x;
    Eigen::MatrixXd W(x.size(), kw);
    {
      Eigen::RowVectorXd eta(m);
      for (Eigen::Index i = 0; i < x.size(); ++i) {
        for (Eigen::Index u = 0; u < m; ++u) {
          const double r = std::abs(x[i] - c[u]);
          eta[u] = r * r * r / 12.0;
        }
        W.row(i) = eta * art.eigvecs;
      }
    }
    art.null_proj = T.colPivHouseholderQr().solve(W);
    b.tprs_ = std::move(art);
    return b;
  }

  throw Error("basis_engine", "kind", "random_intercept bases are built by the design assembler");
}

Basis Basis::restore(const BasisSpec& spec, std::vector<double> knots,
                     TprsArtifacts tprs, double lo, double hi) {
  Basis b;
  b.spec_ = spec;
  b.knots_ = std::move(knots);
  b.tprs_ = std::move(tprs);
  b.lo_ = lo;
  b.hi_ = hi;
  return b;
}

Eigen::MatrixXd Basis::matrix(const Eigen::VectorXd& x, bool clamp) const {
  Eigen::VectorXd xe = x;
  const double slack = 1e-10 * std::max(1.0, hi_ - lo_);
  for (Eigen::Index i = 0; i < xe.size(); ++i) {
    if (xe[i] < lo_ - slack || xe[i] > hi_ + slack) {
      if (!clamp) {
        throw Error("basis_engine", "extrapolation",
                    "value " + std::to_string(xe[i]) + " of '" + spec_.covariate +
                        "' outside training support [" + std::to_string(lo_) + ", " +
                        std::to_string(hi_) + "]",
                    ErrorCode::request);
      }
    }
    xe[i] = std::clamp(xe[i], lo_, hi_);
  }

  if (spec_.kind == BasisKind::bspline) {
    return bspline_eval(xe, knots_, spec_.k, spec_.degree);
  }

  const Eigen::Index kw = tprs_.eigvecs.cols();
  Eigen::MatrixXd out(xe.size(), spec_.k);
  Eigen::MatrixXd T(xe.size(), 2);
  T.col(0).setOnes();
  T.col(1) = xe;
  Eigen::RowVectorXd eta(tprs_.centers.size());
  for (Eigen::Index i = 0; i < xe.size(); ++i) {
    for (Eigen::Index u = 0; u < tprs_.centers.size(); ++u) {
      const double r = std::abs(xe[i] - tprs_.centers[u]);
      eta[u] = r * r * r / 12.0;
    }
    out.row(i).head(kw) = eta * tprs_.eigvecs - T.row(i) * tprs_.null_proj;
  }
  out.col(kw) = T.col(0);
  out.col(kw + 1) = T.col(1);
  return out;
}

PenaltyMatrix Basis::penalty() const {
  PenaltyMatrix S;
  if (spec_.kind == BasisKind::bspline) {
    S.values = bspline_second_derivative_penalty(knots_, spec_.k, spec_.degree);
    S.rank = spec_.k - 2;
    S.null_space_dim = 2;
    return S;
  }
  const Eigen::Index kw = tprs_.eigvecs.cols();
  S.values = Eigen::MatrixXd::Zero(spec_.k, spec_.k);
  for (Eigen::Index j = 0; j < kw; ++j) {
    S.values(j, j) = std::abs(tprs_.eigvals[j]);
  }
  S.rank = static_cast<int>(kw);
  S.null_space_dim = 2;
  return S;
}

ConstraintTransform absorb_constraint(const Eigen::MatrixXd& B,
                                      const PenaltyMatrix& S,
                                      Eigen::MatrixXd* B_out,
                                      PenaltyMatrix* S_out) {
  const Eigen::Index k = B.cols();
  if (k < 2) {
    throw Error("basis_engine", "dimension", "constraint absorption needs >= 2 columns");
  }
  Eigen::VectorXd c = B.colwise().sum().transpose();
  ConstraintTransform ct;
  if (c.norm() <= 1e-10 * std::max<double>(1.0, B.rows())) {
    // already centered: drop the first coordinate, flagged for the caller
    ct.already_centered = true;
    ct.Z = Eigen::MatrixXd::Zero(k, k - 1);
    ct.Z.bottomRows(k - 1).setIdentity();
  } else {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(c);
    Eigen::MatrixXd Q = qr.householderQ();
    ct.Z = Q.rightCols(k - 1);
  }
  if (B_out) {
    B_out->noalias() = B * ct.Z;
  }
  if (S_out) {
    S_out->values = ct.Z.transpose() * S.values * ct.Z;
    S_out->values = 0.5 * (S_out->values + S_out->values.transpose().eval());
    S_out->rank = S.rank;
    S_out->null_space_dim = S.null_space_dim - 1;
  }
  return ct;
}

}  // namespace pgam
