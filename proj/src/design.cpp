#include "pgam/design.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "pgam/error.hpp"

namespace pgam {

namespace {

double positive_logdet(const Eigen::MatrixXd& S, int* rank_out = nullptr) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(S);
  const double thresh = 1e-10 * std::max(1e-300, eig.eigenvalues().cwiseAbs().maxCoeff());
  double logdet = 0.0;
  int rank = 0;
  for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i) {
    if (eig.eigenvalues()[i] > thresh) {
      logdet += std::log(eig.eigenvalues()[i]);
      ++rank;
    }
  }
  if (rank_out) *rank_out = rank;
  return logdet;
}

// Orthonormal basis of the null space of the all-ones row vector of length L.
Eigen::MatrixXd sum_zero_null(int L) {
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(L);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(ones);
  Eigen::MatrixXd Q = qr.householderQ();
  return Q.rightCols(L - 1);
}

const Column& factor_column(const Dataset& data, const std::string& name,
                            const std::string& term_label) {
  const Column& col = data.column(name);
  if (col.kind != Column::Kind::factor) {
    throw Error("model_spec", "type",
                "'" + name + "' in " + term_label + " must be a factor column");
  }
  return col;
}

const Eigen::VectorXd& numeric_column(const Dataset& data, const std::string& name,
                                      const std::string& term_label) {
  const Column& col = data.column(name);
  if (col.kind != Column::Kind::numeric) {
    throw Error("model_spec", "type",
                "'" + name + "' in " + term_label + " must be numeric");
  }
  return col.values;
}

BasisSpec make_basis_spec(const TermSpec& t, int k_pre) {
  BasisSpec bs;
  bs.kind = t.basis_kind == "tp" ? BasisKind::tprs : BasisKind::bspline;
  bs.k = k_pre;
  bs.degree = 3;
  bs.covariate = t.covariate;
  return bs;
}

// Recode new data against training levels.
std::vector<int> encode_levels(const Column& col, const FactorInfo& info,
                               const std::string& term_label) {
  std::vector<int> codes(col.size());
  if (col.kind != Column::Kind::factor) {
    throw Error("inference", "request",
                "'" + info.name + "' for " + term_label + " must be a factor",
                ErrorCode::request);
  }
  for (Eigen::Index i = 0; i < col.size(); ++i) {
    const std::string& label = col.levels[col.codes[i]];
    auto it = std::find(info.levels.begin(), info.levels.end(), label);
    if (it == info.levels.end()) {
      throw Error("inference", "request",
                  "unknown level '" + label + "' of '" + info.name + "' in " + term_label,
                  ErrorCode::request);
    }
    codes[i] = static_cast<int>(it - info.levels.begin());
  }
  return codes;
}

}  // namespace

Eigen::MatrixXd ModelMatrices::total_penalty(const Eigen::VectorXd& lambdas) const {
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(p(), p());
  for (std::size_t g = 0; g < penalties.size(); ++g) {
    const PenaltyGroup& pg = penalties[g];
    S.block(pg.col_start, pg.col_start, pg.S.rows(), pg.S.cols()) +=
        lambdas[static_cast<Eigen::Index>(g)] * pg.S;
  }
  return S;
}

int ModelMatrices::term_index_of(const std::string& label) const {
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (terms[i].spec.label == label) return static_cast<int>(i);
  }
  return -1;
}

ModelMatrices assemble_design(const Formula& formula, const Dataset& data) {
  ModelMatrices M;
  const Eigen::Index n = data.n_rows();

  struct Piece {
    TermBlock block;
    Eigen::MatrixXd cols;
    std::vector<Eigen::MatrixXd> penalty_blocks;  // local, one lambda each
    std::vector<int> penalty_offsets;             // within the term
    std::vector<int> penalty_ranks;
    std::vector<std::string> penalty_labels;
  };
  std::vector<Piece> pieces;

  int intercepts = 0;
  for (const TermSpec& parsed : formula.terms) {
    TermSpec t = parsed;
    Piece piece;

    switch (t.kind) {
      case TermKind::intercept: {
        ++intercepts;
        piece.cols = Eigen::MatrixXd::Ones(n, 1);
        break;
      }
      case TermKind::main: {
        if (!data.has_column(t.covariate)) {
          throw Error("model_spec", "column",
                      "unknown column '" + t.covariate + "' in formula");
        }
        const Column& col = data.column(t.covariate);
        if (col.kind == Column::Kind::numeric) {
          t.kind = TermKind::linear;
          piece.cols = col.values;
        } else {
          t.kind = TermKind::factor;
          const int L = static_cast<int>(col.levels.size());
          if (L < 2) {
            throw Error("model_spec", "levels",
                        "factor '" + t.covariate + "' needs >= 2 levels");
          }
          // treatment contrasts, first level is the reference
          piece.cols = Eigen::MatrixXd::Zero(n, L - 1);
          for (Eigen::Index i = 0; i < n; ++i) {
            if (col.codes[i] > 0) piece.cols(i, col.codes[i] - 1) = 1.0;
          }
          piece.block.factors.push_back({t.covariate, col.levels});
        }
        break;
      }
      case TermKind::smooth: {
        const Eigen::VectorXd& x = numeric_column(data, t.covariate, t.label);
        const int k_pre = t.k + 1;  // grammar k is the post-constraint size
        Basis basis = Basis::build(x, make_basis_spec(t, k_pre));
        Eigen::MatrixXd B = basis.matrix(x);
        PenaltyMatrix S = basis.penalty();
        Eigen::MatrixXd Bt;
        PenaltyMatrix St;
        ConstraintTransform ct = absorb_constraint(B, S, &Bt, &St);
        piece.cols = Bt;
        piece.block.basis = std::move(basis);
        piece.block.Z = ct.Z;
        piece.block.centered_warning = ct.already_centered;
        piece.block.per_level_cols = static_cast<int>(Bt.cols());
        piece.penalty_blocks.push_back(St.values);
        piece.penalty_offsets.push_back(0);
        piece.penalty_ranks.push_back(St.rank);
        piece.penalty_labels.push_back(t.label);
        break;
      }
      case TermKind::by_smooth: {
        const Eigen::VectorXd& x = numeric_column(data, t.covariate, t.label);
        const Column& fac = factor_column(data, t.factors[0], t.label);
        const int L = static_cast<int>(fac.levels.size());
        if (L < 2) {
          throw Error("model_spec", "levels",
                      "factor '" + t.factors[0] + "' needs >= 2 levels");
        }
        const int k_pre = t.k + 1;
        Basis basis = Basis::build(x, make_basis_spec(t, k_pre));
        Eigen::MatrixXd B = basis.matrix(x);
        PenaltyMatrix S = basis.penalty();
        const int m = k_pre - 1;
        piece.cols = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(L) * m);
        for (int lev = 0; lev < L; ++lev) {
          // level rows only; the padded block's column sums match them
          std::vector<Eigen::Index> rows;
          for (Eigen::Index i = 0; i < n; ++i) {
            if (fac.codes[i] == lev) rows.push_back(i);
          }
          if (rows.empty()) {
            throw Error("model_spec", "levels",
                        "level '" + fac.levels[lev] + "' of '" + t.factors[0] +
                            "' has no observations");
          }
          Eigen::MatrixXd Bl(static_cast<Eigen::Index>(rows.size()), k_pre);
          for (std::size_t r = 0; r < rows.size(); ++r) Bl.row(r) = B.row(rows[r]);
          Eigen::MatrixXd Blt;
          PenaltyMatrix St;
          ConstraintTransform ct = absorb_constraint(Bl, S, &Blt, &St);
          piece.block.Z_level.push_back(ct.Z);
          for (std::size_t r = 0; r < rows.size(); ++r) {
            piece.cols.block(rows[r], static_cast<Eigen::Index>(lev) * m, 1, m) =
                Blt.row(static_cast<Eigen::Index>(r));
          }
          piece.penalty_blocks.push_back(St.values);
          piece.penalty_offsets.push_back(lev * m);
          piece.penalty_ranks.push_back(St.rank);
          piece.penalty_labels.push_back(t.label + ":" + fac.levels[lev]);
        }
        piece.block.basis = std::move(basis);
        piece.block.factors.push_back({t.factors[0], fac.levels});
        piece.block.per_level_cols = m;
        piece.block.levels_total = L;
        break;
      }
      case TermKind::random_smooth: {
        const Eigen::VectorXd& x = numeric_column(data, t.covariate, t.label);
        const Column& fac = factor_column(data, t.factors[0], t.label);
        const int L = static_cast<int>(fac.levels.size());
        if (L < 2) {
          throw Error("model_spec", "levels",
                      "factor '" + t.factors[0] + "' needs >= 2 levels");
        }
        const int k = t.k;  // unconstrained: grammar k is the raw size
        Basis basis = Basis::build(x, make_basis_spec(t, k));
        Eigen::MatrixXd B = basis.matrix(x);
        PenaltyMatrix S = basis.penalty();

        // Diagonalise the penalty so the wiggly part and its null space get
        // separate shared ridges: B V has penalty diag(ev) with the trailing
        // null_space_dim entries zero.
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(S.values);
        Eigen::VectorXd ev = eig.eigenvalues().reverse();
        Eigen::MatrixXd V = eig.eigenvectors().rowwise().reverse();
        const double thresh = 1e-10 * std::max(1e-300, ev.cwiseAbs().maxCoeff());
        for (Eigen::Index j = 0; j < ev.size(); ++j) {
          if (ev[j] < thresh) ev[j] = 0.0;
        }
        const int null_dim = S.null_space_dim;
        Eigen::MatrixXd Bv = B * V;

        piece.cols = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(L) * k);
        for (Eigen::Index i = 0; i < n; ++i) {
          piece.cols.block(i, static_cast<Eigen::Index>(fac.codes[i]) * k, 1, k) =
              Bv.row(i);
        }
        // group 1: wiggliness, shared across levels
        Eigen::MatrixXd S1 = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(L) * k,
                                                   static_cast<Eigen::Index>(L) * k);
        // group 2: ridge on each level's penalty null space
        Eigen::MatrixXd S2 = S1;
        for (int lev = 0; lev < L; ++lev) {
          for (int j = 0; j < k; ++j) {
            const Eigen::Index c = static_cast<Eigen::Index>(lev) * k + j;
            if (ev[j] > 0.0) {
              S1(c, c) = ev[j];
            } else {
              S2(c, c) = 1.0;
            }
          }
        }
        piece.penalty_blocks.push_back(S1);
        piece.penalty_offsets.push_back(0);
        piece.penalty_ranks.push_back(L * (k - null_dim));
        piece.penalty_labels.push_back(t.label + ":wiggle");
        piece.penalty_blocks.push_back(S2);
        piece.penalty_offsets.push_back(0);
        piece.penalty_ranks.push_back(L * null_dim);
        piece.penalty_labels.push_back(t.label + ":null");

        piece.block.basis = std::move(basis);
        piece.block.reparam = V;
        piece.block.factors.push_back({t.factors[0], fac.levels});
        piece.block.per_level_cols = k;
        piece.block.levels_total = L;
        break;
      }
      case TermKind::fs_interaction: {
        const Eigen::VectorXd& x = numeric_column(data, t.covariate, t.label);
        std::vector<const Column*> facs;
        std::vector<int> sizes;
        for (const auto& fname : t.factors) {
          const Column& fc = factor_column(data, fname, t.label);
          if (static_cast<int>(fc.levels.size()) < 2) {
            throw Error("model_spec", "levels",
                        "factor '" + fname + "' needs >= 2 levels");
          }
          facs.push_back(&fc);
          sizes.push_back(static_cast<int>(fc.levels.size()));
          piece.block.factors.push_back({fname, fc.levels});
        }
        const int k_pre = t.k + 1;
        Basis basis = Basis::build(x, make_basis_spec(t, k_pre));
        Eigen::MatrixXd B = basis.matrix(x);
        PenaltyMatrix S = basis.penalty();
        Eigen::MatrixXd Bt;
        PenaltyMatrix St;
        ConstraintTransform ct = absorb_constraint(B, S, &Bt, &St);
        const int m = k_pre - 1;

        // cross-level sum-to-zero for every basis function:
        // null space of the per-basis-function level sums is
        // (H_1 kron H_2 ...) kron I_m with H_j the sum-zero null of factor j
        Eigen::MatrixXd H = sum_zero_null(sizes[0]);
        int L = sizes[0];
        for (std::size_t j = 1; j < sizes.size(); ++j) {
          const Eigen::MatrixXd Hj = sum_zero_null(sizes[j]);
          Eigen::MatrixXd K(static_cast<Eigen::Index>(L) * sizes[j],
                            H.cols() * Hj.cols());
          for (Eigen::Index a = 0; a < H.rows(); ++a) {
            for (Eigen::Index b = 0; b < Hj.rows(); ++b) {
              for (Eigen::Index c = 0; c < H.cols(); ++c) {
                for (Eigen::Index d = 0; d < Hj.cols(); ++d) {
                  K(a * Hj.rows() + b, c * Hj.cols() + d) = H(a, c) * Hj(b, d);
                }
              }
            }
          }
          H = std::move(K);
          L *= sizes[j];
        }
        const int width = static_cast<int>(H.cols()) * m;

        // combo code of row i: mixed radix over the factors
        auto combo_of = [&](Eigen::Index i) {
          int code = 0;
          for (std::size_t j = 0; j < facs.size(); ++j) {
            code = code * sizes[j] + facs[j]->codes[i];
          }
          return code;
        };

        // cross map: (L*m) x width, rows grouped by combo then basis index
        Eigen::MatrixXd C = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(L) * m, width);
        for (int combo = 0; combo < L; ++combo) {
          for (Eigen::Index h = 0; h < H.cols(); ++h) {
            C.block(static_cast<Eigen::Index>(combo) * m, h * m, m, m) =
                H(combo, h) * Eigen::MatrixXd::Identity(m, m);
          }
        }

        piece.cols = Eigen::MatrixXd::Zero(n, width);
        for (Eigen::Index i = 0; i < n; ++i) {
          const int combo = combo_of(i);
          for (Eigen::Index h = 0; h < H.cols(); ++h) {
            piece.cols.block(i, h * m, 1, m) += H(combo, h) * Bt.row(i);
          }
        }

        // penalty I kron St via the orthonormal cross map
        Eigen::MatrixXd Ssz = Eigen::MatrixXd::Zero(width, width);
        for (Eigen::Index h = 0; h < H.cols(); ++h) {
          Ssz.block(h * m, h * m, m, m) = St.values;
        }
        piece.penalty_blocks.push_back(Ssz);
        piece.penalty_offsets.push_back(0);
        piece.penalty_ranks.push_back(static_cast<int>(H.cols()) * St.rank);
        piece.penalty_labels.push_back(t.label);

        piece.block.basis = std::move(basis);
        piece.block.Z = ct.Z;
        piece.block.cross = C;
        piece.block.centered_warning = ct.already_centered;
        piece.block.per_level_cols = m;
        piece.block.levels_total = L;
        break;
      }
      case TermKind::random_intercept: {
        const Column& fac = factor_column(data, t.factors[0], t.label);
        const int L = static_cast<int>(fac.levels.size());
        if (L < 2) {
          throw Error("model_spec", "levels",
                      "factor '" + t.factors[0] + "' needs >= 2 levels");
        }
        piece.cols = Eigen::MatrixXd::Zero(n, L);
        for (Eigen::Index i = 0; i < n; ++i) piece.cols(i, fac.codes[i]) = 1.0;
        piece.penalty_blocks.push_back(Eigen::MatrixXd::Identity(L, L));
        piece.penalty_offsets.push_back(0);
        piece.penalty_ranks.push_back(L);
        piece.penalty_labels.push_back(t.label);
        piece.block.factors.push_back({t.factors[0], fac.levels});
        piece.block.per_level_cols = 1;
        piece.block.levels_total = L;
        break;
      }
      default:
        throw Error("model_spec", "internal", "unresolved term kind");
    }

    piece.block.spec = t;
    piece.block.width = static_cast<int>(piece.cols.cols());
    pieces.push_back(std::move(piece));
  }

  if (intercepts != 1) {
    throw Error("model_spec", "parse", "model needs exactly one intercept term");
  }

  // concatenate
  int P = 0;
  for (const auto& piece : pieces) P += static_cast<int>(piece.cols.cols());
  M.X.resize(n, P);
  int at = 0;
  for (auto& piece : pieces) {
    const int w = static_cast<int>(piece.cols.cols());
    M.X.middleCols(at, w) = piece.cols;
    piece.block.col_start = at;
    const int term_index = static_cast<int>(M.terms.size());
    if (piece.block.spec.kind == TermKind::intercept ||
        piece.block.spec.kind == TermKind::linear ||
        piece.block.spec.kind == TermKind::factor) {
      M.n_parametric += w;
    }
    for (std::size_t g = 0; g < piece.penalty_blocks.size(); ++g) {
      PenaltyGroup pg;
      pg.term_index = term_index;
      pg.col_start = at + piece.penalty_offsets[g];
      pg.S = piece.penalty_blocks[g];
      pg.rank = piece.penalty_ranks[g];
      pg.label = piece.penalty_labels[g];
      int eff_rank = 0;
      pg.logdet_plus = positive_logdet(pg.S, &eff_rank);
      if (eff_rank != pg.rank) {
        throw Error("model_spec", "rank",
                    "penalty '" + pg.label + "' has numerical rank " +
                        std::to_string(eff_rank) + ", expected " + std::to_string(pg.rank),
                    ErrorCode::numeric);
      }
      M.penalties.push_back(std::move(pg));
    }
    M.terms.push_back(std::move(piece.block));
    at += w;
  }

  int total_rank = 0;
  for (const auto& pg : M.penalties) total_rank += pg.rank;
  M.total_penalty_null_dim = P - total_rank;
  return M;
}

std::vector<bool> exclusion_mask(const ModelMatrices& M,
                                 const std::vector<std::string>& labels) {
  std::vector<bool> mask(M.terms.size(), false);
  for (const auto& label : labels) {
    const int idx = M.term_index_of(label);
    if (idx < 0) {
      throw Error("inference", "request", "unknown term '" + label + "' in exclude list",
                  ErrorCode::request);
    }
    mask[static_cast<std::size_t>(idx)] = true;
  }
  return mask;
}

Eigen::MatrixXd build_rows(const ModelMatrices& M, const Dataset& newdata,
                           const std::vector<bool>& exclude, bool clamp) {
  const Eigen::Index n = newdata.n_rows();
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(n, M.p());

  for (std::size_t ti = 0; ti < M.terms.size(); ++ti) {
    if (ti < exclude.size() && exclude[ti]) continue;
    const TermBlock& term = M.terms[ti];
    const TermSpec& t = term.spec;
    const int at = term.col_start;

    switch (t.kind) {
      case TermKind::intercept:
        X.col(at).setOnes();
        break;
      case TermKind::linear:
        X.col(at) = numeric_column(newdata, t.covariate, t.label);
        break;
      case TermKind::factor: {
        const std::vector<int> codes =
            encode_levels(newdata.column(t.covariate), term.factors[0], t.label);
        for (Eigen::Index i = 0; i < n; ++i) {
          if (codes[i] > 0) X(i, at + codes[i] - 1) = 1.0;
        }
        break;
      }
      case TermKind::smooth: {
        const Eigen::VectorXd& x = numeric_column(newdata, t.covariate, t.label);
        X.middleCols(at, term.width) = term.basis->matrix(x, clamp) * term.Z;
        break;
      }
      case TermKind::by_smooth: {
        const Eigen::VectorXd& x = numeric_column(newdata, t.covariate, t.label);
        const std::vector<int> codes =
            encode_levels(newdata.column(t.factors[0]), term.factors[0], t.label);
        const Eigen::MatrixXd B = term.basis->matrix(x, clamp);
        const int m = term.per_level_cols;
        for (Eigen::Index i = 0; i < n; ++i) {
          X.block(i, at + codes[i] * m, 1, m) =
              B.row(i) * term.Z_level[static_cast<std::size_t>(codes[i])];
        }
        break;
      }
      case TermKind::random_smooth: {
        const Eigen::VectorXd& x = numeric_column(newdata, t.covariate, t.label);
        const std::vector<int> codes =
            encode_levels(newdata.column(t.factors[0]), term.factors[0], t.label);
        const Eigen::MatrixXd Bv = term.basis->matrix(x, clamp) * term.reparam;
        const int k = term.per_level_cols;
        for (Eigen::Index i = 0; i < n; ++i) {
          X.block(i, at + codes[i] * k, 1, k) = Bv.row(i);
        }
        break;
      }
      case TermKind::fs_interaction: {
        const Eigen::VectorXd& x = numeric_column(newdata, t.covariate, t.label);
        std::vector<std::vector<int>> codes;
        std::vector<int> sizes;
        for (const auto& info : term.factors) {
          codes.push_back(encode_levels(newdata.column(info.name), info, t.label));
          sizes.push_back(static_cast<int>(info.levels.size()));
        }
        const Eigen::MatrixXd Bt = term.basis->matrix(x, clamp) * term.Z;
        const int m = term.per_level_cols;
        for (Eigen::Index i = 0; i < n; ++i) {
          int combo = 0;
          for (std::size_t j = 0; j < codes.size(); ++j) {
            combo = combo * sizes[j] + codes[j][i];
          }
          // row through the cross map: C rows for this combo
          X.row(i).segment(at, term.width) +=
              Bt.row(i) * term.cross.middleRows(static_cast<Eigen::Index>(combo) * m, m);
        }
        break;
      }
      case TermKind::random_intercept: {
        const std::vector<int> codes =
            encode_levels(newdata.column(t.factors[0]), term.factors[0], t.label);
        for (Eigen::Index i = 0; i < n; ++i) X(i, at + codes[i]) = 1.0;
        break;
      }
      default:
        throw Error("model_spec", "internal", "unresolved term kind in prediction");
    }
  }
  return X;
}

}  // namespace pgam
