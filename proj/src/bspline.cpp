#include "pgam/bspline.hpp"

#include <algorithm>
#include <cmath>

#include "pgam/error.hpp"

namespace pgam {

double quantile_type7(const std::vector<double>& sorted, double prob) {
  const std::size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double h = (static_cast<double>(n) - 1.0) * prob;
  const std::size_t lo = std::min(static_cast<std::size_t>(std::floor(h)), n - 2);
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

std::vector<double> bspline_knots(const Eigen::VectorXd& x, int k, int degree) {
  if (k < degree + 1) {
    throw Error("basis_engine", "dimension",
                "bspline basis needs k >= degree+1 (k=" + std::to_string(k) +
                    ", degree=" + std::to_string(degree) + ")");
  }
  std::vector<double> uniq(x.data(), x.data() + x.size());
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());

  const int n_interior = k - degree - 1;
  if (static_cast<int>(uniq.size()) < n_interior + 2) {
    throw Error("basis_engine", "dimension",
                "need at least " + std::to_string(n_interior + 2) +
                    " unique covariate values for k=" + std::to_string(k) +
                    " basis functions, got " + std::to_string(uniq.size()));
  }

  std::vector<double> knots;
  knots.reserve(static_cast<std::size_t>(k + degree + 1));
  for (int i = 0; i <= degree; ++i) knots.push_back(uniq.front());
  for (int j = 1; j <= n_interior; ++j) {
    knots.push_back(quantile_type7(uniq, static_cast<double>(j) / (n_interior + 1)));
  }
  for (int i = 0; i <= degree; ++i) knots.push_back(uniq.back());
  return knots;
}

namespace {

// Index of a non-degenerate span [t[i], t[i+1]) containing x, i in [degree, k-1].
int find_span(double x, const std::vector<double>& t, int k, int degree) {
  if (x >= t[static_cast<std::size_t>(k)]) {
    int i = k - 1;
    while (i > degree && t[static_cast<std::size_t>(i)] == t[static_cast<std::size_t>(i + 1)]) --i;
    return i;
  }
  auto it = std::upper_bound(t.begin(), t.end(), x);
  int i = static_cast<int>(it - t.begin()) - 1;
  return std::clamp(i, degree, k - 1);
}

// Triangular scheme: values of the deg-degree basis functions that are
// nonzero on span i, i.e. B_{i-deg..i, deg}(x).
void basis_funs(int span, double x, int deg, const std::vector<double>& t,
                double* out) {
  std::vector<double> left(static_cast<std::size_t>(deg) + 1);
  std::vector<double> right(static_cast<std::size_t>(deg) + 1);
  out[0] = 1.0;
  for (int j = 1; j <= deg; ++j) {
    left[static_cast<std::size_t>(j)] = x - t[static_cast<std::size_t>(span + 1 - j)];
    right[static_cast<std::size_t>(j)] = t[static_cast<std::size_t>(span + j)] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double denom = right[static_cast<std::size_t>(r + 1)] + left[static_cast<std::size_t>(j - r)];
      const double temp = denom != 0.0 ? out[r] / denom : 0.0;
      out[r] = saved + right[static_cast<std::size_t>(r + 1)] * temp;
      saved = left[static_cast<std::size_t>(j - r)] * temp;
    }
    out[j] = saved;
  }
}

// Full row of the k + (degree - deg) basis functions of degree `deg` over the
// shared knot vector.
Eigen::RowVectorXd basis_row(double x, const std::vector<double>& t, int k,
                             int degree, int deg) {
  const int count = k + (degree - deg);
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(count);
  const int span = find_span(x, t, k, degree);
  std::vector<double> vals(static_cast<std::size_t>(deg) + 1);
  basis_funs(span, x, deg, t, vals.data());
  for (int r = 0; r <= deg; ++r) {
    const int idx = span - deg + r;
    if (idx >= 0 && idx < count) row[idx] = vals[static_cast<std::size_t>(r)];
  }
  return row;
}

// One derivative ladder step: values of degree-m functions become first
// derivatives of the degree-(m+1) functions.
Eigen::RowVectorXd derivative_step(const Eigen::RowVectorXd& in,
                                   const std::vector<double>& t, int m) {
  const int count = static_cast<int>(in.size()) - 1;
  Eigen::RowVectorXd out(count);
  for (int i = 0; i < count; ++i) {
    double a = 0.0, b = 0.0;
    const double d1 = t[static_cast<std::size_t>(i + m + 1)] - t[static_cast<std::size_t>(i)];
    const double d2 = t[static_cast<std::size_t>(i + m + 2)] - t[static_cast<std::size_t>(i + 1)];
    if (d1 != 0.0) a = in[i] / d1;
    if (d2 != 0.0) b = in[i + 1] / d2;
    out[i] = (m + 1) * (a - b);
  }
  return out;
}

Eigen::RowVectorXd eval_row(double x, const std::vector<double>& t, int k,
                            int degree, int derivative) {
  Eigen::RowVectorXd row = basis_row(x, t, k, degree, degree - derivative);
  for (int r = 0; r < derivative; ++r) {
    row = derivative_step(row, t, degree - derivative + r);
  }
  return row;
}

}  // namespace

Eigen::MatrixXd bspline_eval(const Eigen::VectorXd& x,
                             const std::vector<double>& knots, int k, int degree,
                             int derivative) {
  if (derivative < 0 || derivative > degree) {
    throw Error("basis_engine", "domain", "unsupported derivative order");
  }
  const double lo = knots.front();
  const double hi = knots.back();
  const double slack = 1e-10 * std::max(1.0, hi - lo);
  Eigen::MatrixXd out(x.size(), k);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double xi = x[i];
    if (!std::isfinite(xi)) {
      throw Error("basis_engine", "domain", "non-finite covariate value");
    }
    if (xi < lo - slack || xi > hi + slack) {
      throw Error("basis_engine", "extrapolation",
                  "value " + std::to_string(xi) + " outside basis support [" +
                      std::to_string(lo) + ", " + std::to_string(hi) + "]",
                  ErrorCode::request);
    }
    xi = std::clamp(xi, lo, hi);
    out.row(i) = eval_row(xi, knots, k, degree, derivative);
  }
  return out;
}

Eigen::MatrixXd bspline_second_derivative_penalty(const std::vector<double>& knots,
                                                  int k, int degree) {
  if (degree < 2) {
    throw Error("basis_engine", "unsupported-penalty",
                "second-derivative penalty needs degree >= 2");
  }
  // Gauss-Legendre points are interior, so knot discontinuities of the
  // second derivative never get sampled.
  const double g = 0.5 / std::sqrt(3.0);
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(k, k);
  for (int i = degree; i < k; ++i) {
    const double a = knots[static_cast<std::size_t>(i)];
    const double b = knots[static_cast<std::size_t>(i + 1)];
    const double h = b - a;
    if (h <= 0.0) continue;
    const double mid = 0.5 * (a + b);
    for (int q = 0; q < 2; ++q) {
      const double xg = mid + (q == 0 ? -g : g) * h;
      const Eigen::RowVectorXd d2 = eval_row(xg, knots, k, degree, 2);
      S.noalias() += (0.5 * h) * d2.transpose() * d2;
    }
  }
  return S;
}

}  // namespace pgam
