#include "pgam/inference.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "pgam/error.hpp"
#include "pgam/mathutil.hpp"
#include "pgam/rng.hpp"

namespace pgam {

namespace {

Eigen::VectorXd se_rows(const Eigen::MatrixXd& Xs, const Eigen::MatrixXd& V) {
  const Eigen::MatrixXd A = Xs * V;
  return A.cwiseProduct(Xs).rowwise().sum().cwiseMax(0.0).cwiseSqrt();
}

}  // namespace

PredictionResult predict(const FittedModel& model, const PredictionRequest& req) {
  const std::vector<bool> mask = exclusion_mask(model.M, req.exclude_terms);
  const Eigen::MatrixXd Xs = build_rows(model.M, req.newdata, mask, req.clamp);
  PredictionResult out;
  out.fit = Xs * model.beta;
  out.se = se_rows(Xs, model.Vbeta);
  const double q = normal_quantile(0.5 * (1.0 + req.level));
  out.ci_lower = out.fit - q * out.se;
  out.ci_upper = out.fit + q * out.se;
  if (req.response_scale) {
    for (Eigen::Index i = 0; i < out.fit.size(); ++i) {
      out.fit[i] = link_invert(model.family, out.fit[i]);
      out.ci_lower[i] = link_invert(model.family, out.ci_lower[i]);
      out.ci_upper[i] = link_invert(model.family, out.ci_upper[i]);
    }
  }
  return out;
}

namespace {

// Response-scale value and delta-method gradient row at a single point.
struct PointLinearisation {
  double mu = 0.0;
  Eigen::RowVectorXd grad;  // d mu / d beta
};

PointLinearisation linearize_point(const FittedModel& model, const Dataset& at,
                                   const std::vector<bool>& mask) {
  if (at.n_rows() != 1) {
    throw Error("inference", "request", "expected a single evaluation row",
                ErrorCode::request);
  }
  const Eigen::MatrixXd Xs = build_rows(model.M, at, mask, false);
  PointLinearisation out;
  const double eta = (Xs * model.beta)(0);
  out.mu = link_invert(model.family, eta);
  out.grad = link_derivative(model.family, eta) * Xs.row(0);
  return out;
}

Dataset shift_covariate(const Dataset& at, const std::string& wrt, double delta) {
  Dataset d = at;
  Column col = at.column(wrt);
  col.values[0] += delta;
  d.add_column(wrt, std::move(col));
  return d;
}

double covariate_range(const FittedModel& model, const std::string& wrt) {
  const Column& col = model.data.column(wrt);
  if (col.kind != Column::Kind::numeric) {
    throw Error("inference", "request", "'" + wrt + "' is not a numeric covariate",
                ErrorCode::request);
  }
  return col.values.maxCoeff() - col.values.minCoeff();
}

struct SlopeLinearisation {
  double slope = 0.0;
  Eigen::RowVectorXd grad;
};

SlopeLinearisation linearize_slope(const FittedModel& model, const Dataset& at,
                                   const std::string& wrt,
                                   const std::vector<bool>& mask) {
  const double range = covariate_range(model, wrt);
  if (!(range > 0.0)) {
    throw Error("inference", "request", "'" + wrt + "' has zero training range",
                ErrorCode::request);
  }
  const double h = range / 1000.0;
  const PointLinearisation hi =
      linearize_point(model, shift_covariate(at, wrt, +h), mask);
  const PointLinearisation lo =
      linearize_point(model, shift_covariate(at, wrt, -h), mask);
  SlopeLinearisation out;
  out.slope = (hi.mu - lo.mu) / (2.0 * h);
  out.grad = (hi.grad - lo.grad) / (2.0 * h);
  return out;
}

}  // namespace

SlopeEstimate slope(const FittedModel& model, const Dataset& at,
                    const std::string& wrt,
                    const std::vector<std::string>& exclude_terms) {
  const std::vector<bool> mask = exclusion_mask(model.M, exclude_terms);
  const SlopeLinearisation lin = linearize_slope(model, at, wrt, mask);
  SlopeEstimate out;
  out.slope = lin.slope;
  out.se = std::sqrt(std::max(0.0, (lin.grad * model.Vbeta).dot(lin.grad)));
  return out;
}

Eigen::VectorXd adjust_by(const Eigen::VectorXd& p) {
  const Eigen::Index m = p.size();
  if (m == 0) return p;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!(p[i] >= 0.0 && p[i] <= 1.0)) {
      throw Error("inference", "domain", "p values must lie in [0,1]");
    }
  }
  double cm = 0.0;
  for (Eigen::Index j = 1; j <= m; ++j) cm += 1.0 / static_cast<double>(j);

  std::vector<Eigen::Index> idx(static_cast<std::size_t>(m));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return p[a] < p[b]; });

  Eigen::VectorXd adjusted(m);
  double running_min = 1.0;
  for (Eigen::Index r = m; r >= 1; --r) {
    const Eigen::Index orig = idx[static_cast<std::size_t>(r - 1)];
    const double q =
        std::min(1.0, p[orig] * static_cast<double>(m) * cm / static_cast<double>(r));
    running_min = std::min(running_min, q);
    adjusted[orig] = running_min;
  }
  return adjusted;
}

std::vector<ContrastResult> pairwise_contrasts(const FittedModel& model,
                                               const ContrastRequest& req) {
  const std::vector<bool> mask = exclusion_mask(model.M, req.exclude_terms);

  auto factor_levels = [&](const std::string& name) -> std::vector<std::string> {
    const Column& col = model.data.column(name);
    if (col.kind != Column::Kind::factor) {
      throw Error("inference", "request", "'" + name + "' is not a factor",
                  ErrorCode::request);
    }
    return col.levels;
  };
  const std::vector<std::string> levels = factor_levels(req.factor);
  if (levels.size() < 2) {
    throw Error("inference", "request",
                "factor '" + req.factor + "' has a single level; nothing to compare",
                ErrorCode::request);
  }
  std::vector<std::string> within_levels{""};
  if (!req.within.empty()) within_levels = factor_levels(req.within);

  auto point_dataset = [&](const std::string& lev, const std::string& wlev) {
    Dataset d;
    for (const auto& [name, value] : req.at) {
      Column c;
      c.kind = Column::Kind::numeric;
      c.values = Eigen::VectorXd::Constant(1, value);
      d.add_column(name, std::move(c));
    }
    auto add_factor = [&](const std::string& fname, const std::string& flevel) {
      Column c;
      c.kind = Column::Kind::factor;
      c.levels = factor_levels(fname);
      auto it = std::find(c.levels.begin(), c.levels.end(), flevel);
      c.codes = {static_cast<int>(it - c.levels.begin())};
      d.add_column(fname, std::move(c));
    };
    add_factor(req.factor, lev);
    if (!req.within.empty()) add_factor(req.within, wlev);
    // any other retained factors keep their first level as a placeholder;
    // retained-term factors beyond these are unusual for contrast grids
    for (std::size_t ti = 0; ti < model.M.terms.size(); ++ti) {
      if (mask[ti]) continue;
      for (const auto& info : model.M.terms[ti].factors) {
        if (!d.has_column(info.name)) add_factor(info.name, info.levels.front());
      }
    }
    return d;
  };

  auto linearize = [&](const std::string& lev, const std::string& wlev)
      -> std::pair<double, Eigen::RowVectorXd> {
    const Dataset d = point_dataset(lev, wlev);
    if (req.quantity == ContrastQuantity::mean) {
      const PointLinearisation lin = linearize_point(model, d, mask);
      return {lin.mu, lin.grad};
    }
    if (req.wrt.empty()) {
      throw Error("inference", "request", "slope contrasts need a wrt covariate",
                  ErrorCode::request);
    }
    const SlopeLinearisation lin = linearize_slope(model, d, req.wrt, mask);
    return {lin.slope, lin.grad};
  };

  std::vector<ContrastResult> results;
  const double q = normal_quantile(0.5 * (1.0 + req.level));
  for (const auto& wlev : within_levels) {
    for (std::size_t j = 0; j < levels.size(); ++j) {
      for (std::size_t i = j + 1; i < levels.size(); ++i) {
        const auto [qa, ga] = linearize(levels[i], wlev);
        const auto [qb, gb] = linearize(levels[j], wlev);
        ContrastResult r;
        r.within_level = wlev;
        r.hypothesis = levels[i] + " - " + levels[j];
        r.estimate = qa - qb;
        const Eigen::RowVectorXd d = ga - gb;
        r.se = std::sqrt(std::max(0.0, (d * model.Vbeta).dot(d)));
        r.z = r.se > 0.0 ? r.estimate / r.se : 0.0;
        r.p_raw = std::min(1.0, 2.0 * normal_cdf(-std::abs(r.z)));
        r.ci_lower = r.estimate - q * r.se;
        r.ci_upper = r.estimate + q * r.se;
        results.push_back(std::move(r));
      }
    }
  }

  Eigen::VectorXd praw(static_cast<Eigen::Index>(results.size()));
  for (std::size_t i = 0; i < results.size(); ++i) {
    praw[static_cast<Eigen::Index>(i)] = results[i].p_raw;
  }
  const Eigen::VectorXd padj = adjust_by(praw);
  for (std::size_t i = 0; i < results.size(); ++i) {
    results[i].p_adjusted = padj[static_cast<Eigen::Index>(i)];
  }
  return results;
}

TermTest term_test(const FittedModel& model, int term_index) {
  if (term_index < 0 || term_index >= static_cast<int>(model.M.terms.size())) {
    throw Error("inference", "request", "term index out of range", ErrorCode::request);
  }
  const TermBlock& term = model.M.terms[static_cast<std::size_t>(term_index)];
  const int at = term.col_start;
  const int w = term.width;
  const Eigen::VectorXd b = model.beta.segment(at, w);
  const Eigen::MatrixXd V = model.Vbeta.block(at, at, w, w);

  const bool parametric = term.spec.kind == TermKind::intercept ||
                          term.spec.kind == TermKind::linear ||
                          term.spec.kind == TermKind::factor;
  const double edf = model.edf_by_term[static_cast<std::size_t>(term_index)];
  int r = parametric
              ? w
              : std::min(static_cast<int>(std::ceil(edf)) + 1, w);
  r = std::max(r, 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(V);
  // eigenvalues ascending; use the top r
  double T = 0.0;
  const double floor_ev = 1e-12 * std::max(1e-300, eig.eigenvalues().cwiseAbs().maxCoeff());
  int used = 0;
  for (int j = 0; j < r; ++j) {
    const Eigen::Index col = V.rows() - 1 - j;
    const double ev = eig.eigenvalues()[col];
    if (ev <= floor_ev) break;
    const double proj = eig.eigenvectors().col(col).dot(b);
    T += proj * proj / ev;
    ++used;
  }
  TermTest out;
  out.rank = used > 0 ? used : 1;
  out.ref_df2 = static_cast<double>(model.M.n()) - model.edf_total;
  out.statistic = T / out.rank;
  out.p = f_survival(out.statistic, out.rank, out.ref_df2);
  return out;
}

Eigen::VectorXd deviance_residuals(const FittedModel& model) {
  const Eigen::VectorXd y = model.data.response();
  const Eigen::VectorXd w = model.data.weights();
  Eigen::VectorXd r(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double d = unit_deviance(model.family, y[i], model.inner.mu[i]);
    r[i] = (y[i] >= model.inner.mu[i] ? 1.0 : -1.0) * std::sqrt(std::max(0.0, w[i] * d));
  }
  return r;
}

namespace {

double lag1_ratio(const std::vector<double>& r) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i + 1 < r.size(); ++i) {
    const double d = r[i + 1] - r[i];
    num += d * d;
  }
  for (double v : r) den += v * v;
  if (den <= 0.0) return 1.0;
  return num / (2.0 * den);
}

}  // namespace

std::vector<BasisCheckRow> kcheck(const FittedModel& model, std::uint64_t seed,
                                  int n_permutations) {
  const Eigen::VectorXd resid = deviance_residuals(model);
  std::vector<BasisCheckRow> rows;

  for (std::size_t ti = 0; ti < model.M.terms.size(); ++ti) {
    const TermBlock& term = model.M.terms[ti];
    if (term.spec.kind != TermKind::smooth) continue;

    const Eigen::VectorXd& x = model.data.column(term.spec.covariate).values;
    std::vector<Eigen::Index> order(static_cast<std::size_t>(x.size()));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return x[a] < x[b]; });
    std::vector<double> r_sorted(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) r_sorted[i] = resid[order[i]];

    BasisCheckRow row;
    row.label = term.spec.label;
    row.k_per_level = term.per_level_cols;
    row.edf = model.edf_by_term[ti];
    row.ratio = lag1_ratio(r_sorted);

    Rng rng(seed);
    std::vector<double> shuffled = r_sorted;
    int at_or_below = 0;
    for (int b = 0; b < n_permutations; ++b) {
      rng.shuffle(shuffled);
      if (lag1_ratio(shuffled) <= row.ratio) ++at_or_below;
    }
    row.p = (1.0 + at_or_below) / (1.0 + n_permutations);
    row.flagged = row.edf > 0.9 * term.per_level_cols && row.p < 0.05;
    rows.push_back(std::move(row));
  }
  return rows;
}

ModelSummary summarize(const FittedModel& model) {
  ModelSummary s;
  s.edf_total = model.edf_total;
  s.aic = model.aic;
  s.deviance = model.deviance_value;
  s.null_deviance = model.null_deviance;
  s.dev_explained = model.dev_explained;
  s.rmse = model.rmse;
  s.phi = model.phi;
  s.power = model.family.kind == FamilyKind::tweedie
                ? model.family.power
                : std::numeric_limits<double>::quiet_NaN();
  s.lambdas = model.lambdas;
  s.criterion = criterion_name(model.criterion);
  s.criterion_value = model.criterion_value;
  s.n = model.M.n();
  s.family = model.family.name();
  s.formula = model.formula.text;

  for (std::size_t ti = 0; ti < model.M.terms.size(); ++ti) {
    const TermBlock& term = model.M.terms[ti];
    SummaryRow row;
    row.label = term.spec.label;
    row.levels = term.levels_total;
    row.k_per_level = term.per_level_cols;
    row.edf = model.edf_by_term[ti];
    switch (term.spec.kind) {
      case TermKind::intercept:
        row.kind = "intercept";
        row.parametric = true;
        break;
      case TermKind::linear:
        row.kind = "linear";
        row.parametric = true;
        break;
      case TermKind::factor:
        row.kind = "factor";
        row.parametric = true;
        break;
      case TermKind::smooth:
        row.kind = "smooth";
        row.k_pre = term.spec.k + 1;
        break;
      case TermKind::by_smooth:
        row.kind = "by-smooth";
        row.k_pre = term.spec.k + 1;
        break;
      case TermKind::fs_interaction:
        row.kind = "sz-interaction";
        row.k_pre = term.spec.k + 1;
        break;
      case TermKind::random_smooth:
        row.kind = "random-smooth";
        row.k_pre = term.spec.k;
        break;
      case TermKind::random_intercept:
        row.kind = "random-intercept";
        row.k_pre = term.levels_total;
        break;
      default:
        row.kind = "?";
        break;
    }
    if (term.spec.kind != TermKind::intercept) {
      const TermTest tt = term_test(model, static_cast<int>(ti));
      row.statistic = tt.statistic;
      row.rank = tt.rank;
      row.p = tt.p;
    }
    s.rows.push_back(std::move(row));
  }
  return s;
}

std::string summary_text(const ModelSummary& s) {
  std::ostringstream os;
  os << "Family:    " << s.family << "\n";
  os << "Formula:   " << s.formula << "\n";
  os << "Criterion: " << s.criterion;
  if (std::isfinite(s.criterion_value)) os << " = " << s.criterion_value;
  os << "\n\n";

  os << "Terms:\n";
  char buf[256];
  std::snprintf(buf, sizeof buf, "  %-24s %-16s %6s %6s %7s %10s %9s %8s\n", "term",
                "kind", "k", "levels", "edf", "stat", "rank", "p");
  os << buf;
  for (const auto& row : s.rows) {
    std::string pstr = "-";
    std::string tstr = "-";
    std::string rstr = "-";
    if (row.kind != "intercept") {
      std::snprintf(buf, sizeof buf, "%.3g", row.p);
      pstr = row.p < 0.001 ? "<0.001" : buf;
      std::snprintf(buf, sizeof buf, "%.3f", row.statistic);
      tstr = buf;
      rstr = std::to_string(row.rank);
    }
    std::snprintf(buf, sizeof buf, "  %-24s %-16s %6d %6d %7.3f %10s %9s %8s\n",
                  row.label.c_str(), row.kind.c_str(), row.k_per_level, row.levels,
                  row.edf, tstr.c_str(), rstr.c_str(), pstr.c_str());
    os << buf;
  }
  os << "\n";
  std::snprintf(buf, sizeof buf,
                "n = %lld   total EDF = %.3f   AIC = %.3f\n"
                "deviance = %.6g   null deviance = %.6g   deviance explained = %.4f\n"
                "RMSE = %.4g   scale (phi) = %.6g\n",
                static_cast<long long>(s.n), s.edf_total, s.aic, s.deviance,
                s.null_deviance, s.dev_explained, s.rmse, s.phi);
  os << buf;
  if (std::isfinite(s.power)) {
    std::snprintf(buf, sizeof buf, "tweedie power p = %.4g\n", s.power);
    os << buf;
  }
  if (s.lambdas.size() > 0) {
    os << "lambda = [";
    for (Eigen::Index i = 0; i < s.lambdas.size(); ++i) {
      if (i) os << ", ";
      std::snprintf(buf, sizeof buf, "%.6g", s.lambdas[i]);
      os << buf;
    }
    os << "]\n";
  }
  return os.str();
}

}  // namespace pgam
