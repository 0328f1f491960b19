#ifndef PGAM_FORMULA_HPP_
#define PGAM_FORMULA_HPP_

#include <string>
#include <vector>

namespace pgam {

/// Term kinds of the model grammar. `main` is a bare column reference that
/// the design assembler resolves into a parametric linear or factor term once
/// the data are visible.
enum class TermKind {
  intercept,
  main,
  linear,          // resolved numeric main effect
  factor,          // resolved categorical main effect (treatment contrasts)
  smooth,          // s(x[, k=, bs=])
  by_smooth,       // s(x, by=f[, k=]): one sum-to-zero smooth per level, own lambda each
  fs_interaction,  // sz(x, f[, f2][, k=]): deviation smooths orthogonal to the mean curve
  random_smooth,   // fs(x, f[, k=]): fully penalised per-level smooths, shared lambdas
  random_intercept // ri(f)
};

struct TermSpec {
  TermKind kind = TermKind::main;
  std::string covariate;              // numeric covariate (smooth-like terms)
  std::vector<std::string> factors;   // by/fs/sz/ri factor names
  int k = 10;                         // grammar k; post-constraint size for
                                      // constrained terms, raw size for fs
  bool k_given = false;
  std::string basis_kind = "bs";      // "bs" (B-spline) or "tp" (thin plate)
  std::string label;
  std::size_t position = 0;           // char offset in the formula text
};

struct Formula {
  std::string response;
  std::vector<TermSpec> terms;
  std::string text;
};

/// Parse "y ~ 1 + treat + s(day, k=9) + sz(day, treat, sex) + fs(day, egg, k=6)
/// + ri(mother)". Exactly one intercept term is required. Errors carry the
/// character position of the offending term.
Formula parse_formula(const std::string& text);

}  // namespace pgam

#endif  // PGAM_FORMULA_HPP_
