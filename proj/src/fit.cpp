#include "pgam/fit.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "pgam/error.hpp"

namespace pgam {

Criterion parse_criterion(const std::string& text) {
  if (text == "reml") return Criterion::reml;
  if (text == "gcv") return Criterion::gcv;
  throw Error("fitter", "criterion", "unknown criterion '" + text + "' (reml|gcv)");
}

std::string criterion_name(Criterion c) {
  return c == Criterion::reml ? "reml" : "gcv";
}

double penalty_logdet(const ModelMatrices& M, const Eigen::VectorXd& lambdas) {
  double logdet = 0.0;
  for (std::size_t g = 0; g < M.penalties.size(); ++g) {
    const PenaltyGroup& pg = M.penalties[g];
    const double lg = lambdas[static_cast<Eigen::Index>(g)];
    if (!(lg > 0.0)) {
      throw Error("fitter", "lambda", "REML needs strictly positive lambdas",
                  ErrorCode::numeric);
    }
    logdet += pg.rank * std::log(lg) + pg.logdet_plus;
  }
  return logdet;
}

Eigen::VectorXd edf_diagonal(const ModelMatrices& M, const Eigen::VectorXd& W,
                             const Eigen::VectorXd& lambdas) {
  const Eigen::Index P = M.p();
  Eigen::MatrixXd H = M.X.transpose() * W.asDiagonal() * M.X;
  const Eigen::MatrixXd S = M.total_penalty(lambdas);
  H += S;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
  if (ldlt.info() != Eigen::Success) {
    throw Error("fitter", "rank", "EDF system is singular", ErrorCode::numeric);
  }
  const Eigen::MatrixXd HinvS = ldlt.solve(S);
  return Eigen::VectorXd::Ones(P) - HinvS.diagonal();
}

namespace {

struct CriterionState {
  double value = 0.0;
  InnerFit fit;
  double tau = 0.0;  // total EDF, only filled for GCV
};

double logdet_ldlt(const Eigen::LDLT<Eigen::MatrixXd>& ldlt) {
  double s = 0.0;
  const auto d = ldlt.vectorD();
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (d[i] <= 0.0) {
      throw Error("fitter", "rank", "penalized information matrix is not positive definite",
                  ErrorCode::numeric);
    }
    s += std::log(d[i]);
  }
  return s;
}

CriterionState evaluate_criterion(const ModelMatrices& M, const Family& family,
                                  const Eigen::VectorXd& lambdas,
                                  const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                                  Criterion crit, const Eigen::VectorXd* warm) {
  CriterionState st;
  st.fit = pirls_fit(M, family, lambdas, y, w, warm);
  const Eigen::Index n = M.n();

  if (crit == Criterion::gcv) {
    const Eigen::VectorXd edf = edf_diagonal(M, st.fit.W, lambdas);
    st.tau = edf.sum();
    if (st.tau >= static_cast<double>(n) - 1e-8) {
      throw Error("fitter", "gcv-degenerate",
                  "GCV undefined: effective degrees of freedom reach n",
                  ErrorCode::numeric);
    }
    const double denom = static_cast<double>(n) - st.tau;
    st.value = static_cast<double>(n) * st.fit.deviance / (denom * denom);
    return st;
  }

  // Restricted criterion with the scale profiled out on the deviance scale:
  //   (n - Mp)/2 * (1 + log(2 pi Dp/(n - Mp))) + log|X'WX + S|/2 - log|S|+/2
  // For gaussian identity responses this is exact REML.
  Eigen::MatrixXd H = M.X.transpose() * st.fit.W.asDiagonal() * M.X;
  H += M.total_penalty(lambdas);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
  if (ldlt.info() != Eigen::Success) {
    throw Error("fitter", "rank", "penalized information matrix is singular",
                ErrorCode::numeric);
  }
  const double dp = st.fit.deviance + st.fit.penalty;
  const double nmp = static_cast<double>(n) - M.total_penalty_null_dim;
  if (nmp <= 0.0) {
    throw Error("fitter", "rank", "more unpenalized coefficients than observations",
                ErrorCode::numeric);
  }
  st.value = 0.5 * nmp * (1.0 + std::log(2.0 * M_PI * dp / nmp)) +
             0.5 * logdet_ldlt(ldlt) - 0.5 * penalty_logdet(M, lambdas);
  return st;
}

// ---------------------------------------------------------------------------
// Nelder-Mead over rho = log(lambda), box [-12, 12] enforced by clamping plus
// a quadratic pull-back outside the box.

constexpr double kRhoLo = -12.0;
constexpr double kRhoHi = 12.0;

struct NmResult {
  Eigen::VectorXd x;
  double f = std::numeric_limits<double>::infinity();
  int evals = 0;
};

template <typename F>
NmResult nelder_mead(F&& func, const Eigen::VectorXd& x0, double step, int max_eval) {
  const int d = static_cast<int>(x0.size());
  std::vector<Eigen::VectorXd> xs;
  std::vector<double> fs;
  xs.reserve(static_cast<std::size_t>(d) + 1);
  xs.push_back(x0);
  for (int i = 0; i < d; ++i) {
    Eigen::VectorXd v = x0;
    v[i] += step;
    xs.push_back(v);
  }
  int evals = 0;
  for (const auto& v : xs) {
    fs.push_back(func(v));
    ++evals;
  }

  auto order = [&] {
    std::vector<int> idx(xs.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return fs[a] < fs[b]; });
    std::vector<Eigen::VectorXd> x2;
    std::vector<double> f2;
    for (int i : idx) {
      x2.push_back(xs[static_cast<std::size_t>(i)]);
      f2.push_back(fs[static_cast<std::size_t>(i)]);
    }
    xs = std::move(x2);
    fs = std::move(f2);
  };

  const double alpha = 1.0, gamma = 2.0, rho_c = 0.5, sigma = 0.5;
  while (evals < max_eval) {
    order();
    // convergence: function spread and simplex size
    double xspread = 0.0;
    for (std::size_t i = 1; i < xs.size(); ++i) {
      xspread = std::max(xspread, (xs[i] - xs[0]).lpNorm<Eigen::Infinity>());
    }
    if (std::abs(fs.back() - fs.front()) < 1e-10 * (1.0 + std::abs(fs.front())) &&
        xspread < 1e-7) {
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(d);
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) centroid += xs[i];
    centroid /= static_cast<double>(d);

    const Eigen::VectorXd& worst = xs.back();
    Eigen::VectorXd xr = centroid + alpha * (centroid - worst);
    const double fr = func(xr);
    ++evals;
    if (fr < fs.front()) {
      Eigen::VectorXd xe = centroid + gamma * (centroid - worst);
      const double fe = func(xe);
      ++evals;
      if (fe < fr) {
        xs.back() = xe;
        fs.back() = fe;
      } else {
        xs.back() = xr;
        fs.back() = fr;
      }
    } else if (fr < fs[fs.size() - 2]) {
      xs.back() = xr;
      fs.back() = fr;
    } else {
      Eigen::VectorXd xc = centroid + rho_c * (worst - centroid);
      const double fc = func(xc);
      ++evals;
      if (fc < fs.back()) {
        xs.back() = xc;
        fs.back() = fc;
      } else {
        for (std::size_t i = 1; i < xs.size(); ++i) {
          xs[i] = xs[0] + sigma * (xs[i] - xs[0]);
          fs[i] = func(xs[i]);
          ++evals;
        }
      }
    }
  }
  order();
  NmResult r;
  r.x = xs.front();
  r.f = fs.front();
  r.evals = evals;
  return r;
}

}  // namespace

double gcv_criterion(const ModelMatrices& M, const Family& family,
                     const Eigen::VectorXd& lambdas, const Eigen::VectorXd& y,
                     const Eigen::VectorXd& w) {
  return evaluate_criterion(M, family, lambdas, y, w, Criterion::gcv, nullptr).value;
}

double reml_criterion(const ModelMatrices& M, const Family& family,
                      const Eigen::VectorXd& lambdas, const Eigen::VectorXd& y,
                      const Eigen::VectorXd& w) {
  return evaluate_criterion(M, family, lambdas, y, w, Criterion::reml, nullptr).value;
}

namespace {

double null_deviance_of(const Dataset& data, const Family& family) {
  ModelMatrices M0;
  M0.X = Eigen::MatrixXd::Ones(data.n_rows(), 1);
  M0.n_parametric = 1;
  M0.total_penalty_null_dim = 1;
  TermBlock tb;
  tb.spec.kind = TermKind::intercept;
  tb.spec.label = "(Intercept)";
  tb.width = 1;
  M0.terms.push_back(tb);
  const InnerFit fit = pirls_fit(M0, family, Eigen::VectorXd(), data.response(),
                                 data.weights(), nullptr);
  return fit.deviance;
}

FittedModel finalize_fit(const Formula& formula, const Dataset& data,
                         const Family& family, Criterion crit, ModelMatrices&& M,
                         const Eigen::VectorXd& lambdas, CriterionState&& st,
                         double max_abs_grad) {
  FittedModel fm;
  fm.formula = formula;
  fm.family = family;
  fm.criterion = crit;
  fm.M = std::move(M);
  fm.data = data;
  fm.beta = st.fit.beta;
  fm.lambdas = lambdas;
  fm.inner = std::move(st.fit);
  fm.criterion_value = st.value;
  fm.max_abs_grad = max_abs_grad;

  const Eigen::VectorXd y = data.response();
  const Eigen::VectorXd w = data.weights();
  const Eigen::Index n = fm.M.n();
  const Eigen::Index P = fm.M.p();

  fm.edf_col = edf_diagonal(fm.M, fm.inner.W, lambdas);
  fm.edf_total = fm.edf_col.sum();
  fm.edf_by_term.resize(fm.M.terms.size());
  for (std::size_t t = 0; t < fm.M.terms.size(); ++t) {
    const TermBlock& tb = fm.M.terms[t];
    fm.edf_by_term[t] = fm.edf_col.segment(tb.col_start, tb.width).sum();
  }

  // Pearson scale
  double pearson = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double r = y[i] - fm.inner.mu[i];
    pearson += w[i] * r * r / variance_function(family, fm.inner.mu[i]);
  }
  const double resid_df = static_cast<double>(n) - fm.edf_total;
  if (resid_df <= 0.0) {
    throw Error("fitter", "rank", "no residual degrees of freedom for the scale estimate",
                ErrorCode::numeric);
  }
  fm.phi = pearson / resid_df;

  // Bayesian posterior covariance, with a tiny ridge fallback
  Eigen::MatrixXd H = fm.M.X.transpose() * fm.inner.W.asDiagonal() * fm.M.X;
  H += fm.M.total_penalty(lambdas);
  Eigen::LLT<Eigen::MatrixXd> llt(H);
  if (llt.info() != Eigen::Success) {
    const double ridge = 1e-10 * H.diagonal().maxCoeff();
    H.diagonal().array() += ridge;
    llt.compute(H);
    if (llt.info() != Eigen::Success) {
      throw Error("fitter", "rank", "posterior covariance is not positive definite",
                  ErrorCode::numeric);
    }
  }
  fm.Vbeta = fm.phi * llt.solve(Eigen::MatrixXd::Identity(P, P));
  fm.Vbeta = 0.5 * (fm.Vbeta + fm.Vbeta.transpose().eval());

  fm.deviance_value = fm.inner.deviance;
  fm.null_deviance = null_deviance_of(data, family);
  fm.dev_explained = fm.null_deviance > 0.0
                         ? 1.0 - fm.deviance_value / fm.null_deviance
                         : 0.0;
  fm.rmse = std::sqrt((y - fm.inner.mu).squaredNorm() / static_cast<double>(n));
  fm.log_lik = log_likelihood(family, y, fm.inner.mu, fm.phi, w);
  const double n_scale = family.kind == FamilyKind::tweedie ? 2.0 : 1.0;
  fm.aic = -2.0 * fm.log_lik + 2.0 * (fm.edf_total + n_scale);
  return fm;
}

Eigen::VectorXd rho_clamp(const Eigen::VectorXd& rho) {
  Eigen::VectorXd r = rho;
  for (Eigen::Index i = 0; i < r.size(); ++i) r[i] = std::clamp(r[i], kRhoLo, kRhoHi);
  return r;
}

}  // namespace

FittedModel optimize_smoothness(const Formula& formula, const Dataset& data,
                                const Family& family, const FitOptions& opts) {
  ModelMatrices M = assemble_design(formula, data);
  const Eigen::VectorXd y = data.response();
  const Eigen::VectorXd w = data.weights();
  const int n_pen = static_cast<int>(M.penalties.size());

  if (n_pen == 0) {
    // degenerate GAM (pure GLM): a single PIRLS, no smoothness search
    CriterionState st;
    st.fit = pirls_fit(M, family, Eigen::VectorXd(), y, w, nullptr);
    st.value = std::numeric_limits<double>::quiet_NaN();
    return finalize_fit(formula, data, family, opts.criterion, std::move(M),
                        Eigen::VectorXd(), std::move(st), 0.0);
  }

  Eigen::VectorXd warm;
  bool have_warm = false;
  int bad_evals = 0;
  auto objective = [&](const Eigen::VectorXd& rho) {
    const Eigen::VectorXd rc = rho_clamp(rho);
    double penalty_out = 1e3 * (rho - rc).squaredNorm();
    try {
      CriterionState st =
          evaluate_criterion(M, family, rc.array().exp().matrix(), y, w,
                             opts.criterion, have_warm ? &warm : nullptr);
      warm = st.fit.beta;
      have_warm = true;
      return st.value + penalty_out;
    } catch (const Error&) {
      ++bad_evals;
      return 1e30 + penalty_out;  // treat numerical failures as very poor
    }
  };

  // three deterministic restarts, lightly perturbed per coordinate
  std::vector<Eigen::VectorXd> starts;
  for (const double base : {-3.0, 0.0, 6.0}) {
    Eigen::VectorXd s = Eigen::VectorXd::Constant(n_pen, base);
    for (int i = 0; i < n_pen; ++i) s[i] += 0.05 * ((i % 3) - 1);
    starts.push_back(s);
  }

  NmResult best;
  Eigen::VectorXd best_rho;
  for (const auto& s0 : starts) {
    have_warm = false;
    NmResult r = nelder_mead(objective, s0, 1.0, opts.max_eval_per_restart);
    const bool better =
        r.f < best.f - 1e-12 ||
        (std::abs(r.f - best.f) <= 1e-12 && best_rho.size() > 0 &&
         rho_clamp(r.x).norm() < best_rho.norm());
    if (best_rho.size() == 0 || better) {
      best = r;
      best_rho = rho_clamp(r.x);
    }
  }
  if (!(best.f < 1e29)) {
    throw Error("fitter", "optimization",
                "all smoothness-selection restarts failed (criterion " +
                    criterion_name(opts.criterion) + ", " + std::to_string(bad_evals) +
                    " failed evaluations)",
                ErrorCode::numeric);
  }

  // polish until the finite-difference gradient settles
  auto fd_gradient = [&](const Eigen::VectorXd& rho) {
    const double h = 1e-4;
    double gmax = 0.0;
    for (int i = 0; i < n_pen; ++i) {
      if (rho[i] <= kRhoLo + 1e-6 || rho[i] >= kRhoHi - 1e-6) continue;  // boundary
      Eigen::VectorXd hi = rho, lo = rho;
      hi[i] += h;
      lo[i] -= h;
      gmax = std::max(gmax, std::abs(objective(hi) - objective(lo)) / (2.0 * h));
    }
    return gmax;
  };

  double gmax = fd_gradient(best_rho);
  for (double step : {0.1, 0.02, 0.005}) {
    if (gmax < 1e-3) break;
    have_warm = true;
    NmResult r = nelder_mead(objective, best_rho, step, opts.max_eval_per_restart);
    if (r.f <= best.f) {
      best = r;
      best_rho = rho_clamp(r.x);
      gmax = fd_gradient(best_rho);
    }
  }

  const Eigen::VectorXd lambdas = best_rho.array().exp().matrix();
  CriterionState st =
      evaluate_criterion(M, family, lambdas, y, w, opts.criterion, &warm);
  return finalize_fit(formula, data, family, opts.criterion, std::move(M), lambdas,
                      std::move(st), gmax);
}

namespace {

double profile_log_lik(const FittedModel& fm) {
  return log_likelihood(fm.family, fm.data.response(), fm.inner.mu, fm.phi,
                        fm.data.weights());
}

}  // namespace

FittedModel fit_gam(const std::string& formula_text, const Dataset& data,
                    const Family& family, const FitOptions& opts) {
  const Formula formula = parse_formula(formula_text);
  if (formula.response != data.response_name()) {
    throw Error("model_spec", "response",
                "formula response '" + formula.response +
                    "' does not match the dataset response '" + data.response_name() + "'");
  }

  if (family.kind != FamilyKind::tweedie || family.power_fixed ||
      !opts.profile_tweedie_power) {
    return optimize_smoothness(formula, data, family, opts);
  }

  // profile the Tweedie power over a fixed grid, then one golden-section pass
  auto fit_at = [&](double p) {
    Family f = family;
    f.power = p;
    f.power_fixed = true;
    return optimize_smoothness(formula, data, f, opts);
  };

  double best_p = 0.0;
  double best_ll = -std::numeric_limits<double>::infinity();
  std::vector<double> grid;
  for (int i = 1; i <= 19; ++i) grid.push_back(1.0 + 0.05 * i);
  for (double p : grid) {
    const FittedModel fm = fit_at(p);
    const double ll = profile_log_lik(fm);
    if (ll > best_ll) {
      best_ll = ll;
      best_p = p;
    }
  }

  // golden section on the bracketing interval, tolerance 0.005 in p
  double lo = std::max(1.001, best_p - 0.05);
  double hi = std::min(1.999, best_p + 0.05);
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
  double f1 = profile_log_lik(fit_at(x1));
  double f2 = profile_log_lik(fit_at(x2));
  while (b - a > 0.005) {
    if (f1 > f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - gr * (b - a);
      f1 = profile_log_lik(fit_at(x1));
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + gr * (b - a);
      f2 = profile_log_lik(fit_at(x2));
    }
  }
  const double p_hat = 0.5 * (a + b);
  return fit_at(p_hat);
}

}  // namespace pgam
