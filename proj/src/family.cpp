#include "pgam/family.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "pgam/error.hpp"

namespace pgam {

Family Family::gaussian() { return Family{FamilyKind::gaussian, Link::identity, 1.5, false}; }
Family Family::gamma_log() { return Family{FamilyKind::gamma, Link::log, 1.5, false}; }
Family Family::tweedie_log(double power) {
  Family f{FamilyKind::tweedie, Link::log, power, true};
  if (!(power > 1.0 && power < 2.0)) {
    throw Error("families", "domain", "tweedie power must lie strictly in (1,2)");
  }
  return f;
}

namespace {

std::string strip(std::string s) {
  s.erase(std::remove_if(s.begin(), s.end(),
                         [](unsigned char c) { return std::isspace(c); }),
          s.end());
  return s;
}

}  // namespace

Family Family::parse(const std::string& text) {
  const std::string s = strip(text);
  std::string head = s;
  std::string args;
  const auto paren = s.find('(');
  if (paren != std::string::npos) {
    if (s.back() != ')') {
      throw Error("families", "parse", "malformed family '" + text + "'");
    }
    head = s.substr(0, paren);
    args = s.substr(paren + 1, s.size() - paren - 2);
  }

  Family f;
  if (head == "gaussian") {
    f.kind = FamilyKind::gaussian;
    f.link = Link::identity;
  } else if (head == "gamma") {
    f.kind = FamilyKind::gamma;
    f.link = Link::log;
  } else if (head == "tweedie") {
    f.kind = FamilyKind::tweedie;
    f.link = Link::log;
  } else {
    throw Error("families", "parse", "unknown family '" + head + "'");
  }

  std::size_t pos = 0;
  while (pos < args.size()) {
    auto comma = args.find(',', pos);
    if (comma == std::string::npos) comma = args.size();
    const std::string kv = args.substr(pos, comma - pos);
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw Error("families", "parse", "expected key=value in family arguments: '" + kv + "'");
    }
    const std::string key = kv.substr(0, eq);
    const std::string val = kv.substr(eq + 1);
    if (key == "link") {
      if (val == "log") {
        f.link = Link::log;
      } else if (val == "identity") {
        f.link = Link::identity;
      } else {
        throw Error("families", "parse", "unknown link '" + val + "'");
      }
    } else if (key == "p" || key == "power") {
      try {
        f.power = std::stod(val);
      } catch (...) {
        throw Error("families", "parse", "bad tweedie power '" + val + "'");
      }
      if (!(f.power > 1.0 && f.power < 2.0)) {
        throw Error("families", "domain", "tweedie power must lie strictly in (1,2)");
      }
      f.power_fixed = true;
    } else {
      throw Error("families", "parse", "unknown family argument '" + key + "'");
    }
    pos = comma + 1;
  }
  if (f.kind != FamilyKind::gaussian && f.link != Link::log) {
    throw Error("families", "parse", "gamma/tweedie support only the log link here");
  }
  return f;
}

std::string Family::name() const {
  switch (kind) {
    case FamilyKind::gaussian:
      return "gaussian";
    case FamilyKind::gamma:
      return "gamma(link=log)";
    case FamilyKind::tweedie:
      return "tweedie(link=log)";
  }
  return "?";
}

double link_apply(const Family& f, double mu) {
  if (f.link == Link::identity) return mu;
  if (mu <= 0.0) {
    throw Error("families", "domain", "log link needs mu > 0", ErrorCode::numeric);
  }
  return std::log(mu);
}

double link_invert(const Family& f, double eta) {
  return f.link == Link::identity ? eta : std::exp(eta);
}

double link_derivative(const Family& f, double eta) {
  return f.link == Link::identity ? 1.0 : std::exp(eta);
}

double variance_function(const Family& f, double mu) {
  switch (f.kind) {
    case FamilyKind::gaussian:
      return 1.0;
    case FamilyKind::gamma:
      return mu * mu;
    case FamilyKind::tweedie:
      return std::pow(mu, f.power);
  }
  return 1.0;
}

double unit_deviance(const Family& f, double y, double mu) {
  switch (f.kind) {
    case FamilyKind::gaussian: {
      const double r = y - mu;
      return r * r;
    }
    case FamilyKind::gamma: {
      if (y <= 0.0) {
        throw Error("families", "domain", "gamma deviance needs y > 0", ErrorCode::numeric);
      }
      return 2.0 * ((y - mu) / mu - std::log(y / mu));
    }
    case FamilyKind::tweedie: {
      if (y < 0.0) {
        throw Error("families", "domain", "tweedie deviance needs y >= 0", ErrorCode::numeric);
      }
      const double p = f.power;
      const double t1 = y > 0.0 ? std::pow(y, 2.0 - p) / ((1.0 - p) * (2.0 - p)) : 0.0;
      const double t2 = y * std::pow(mu, 1.0 - p) / (1.0 - p);
      const double t3 = std::pow(mu, 2.0 - p) / (2.0 - p);
      return 2.0 * (t1 - t2 + t3);
    }
  }
  return 0.0;
}

double deviance(const Family& f, const Eigen::VectorXd& y, const Eigen::VectorXd& mu,
                const Eigen::VectorXd& w) {
  double d = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    d += w[i] * unit_deviance(f, y[i], mu[i]);
  }
  return d;
}

namespace {

// Compound Poisson-gamma series for 1 < p < 2 and y > 0:
//   log f = log(sum_j W_j) - log y + [y mu^{1-p}/(1-p) - mu^{2-p}/(2-p)]/phi
// with log W_j = j log z - lgamma(1+j) - lgamma(alpha j),
//      alpha = (2-p)/(p-1),
//      log z = alpha log y - alpha log(p-1) - log(2-p) - log(phi)/(p-1).
// The sum runs outward from the dominant index until terms fall below 1e-17
// of the peak term.
double tweedie_log_series(double y, double phi, double p, double window_scale) {
  const double alpha = (2.0 - p) / (p - 1.0);
  const double logz = alpha * std::log(y) - alpha * std::log(p - 1.0) -
                      std::log(2.0 - p) - (1.0 + alpha) * std::log(phi);
  auto logw = [&](double j) {
    return j * logz - std::lgamma(1.0 + j) - std::lgamma(alpha * j);
  };
  const double jmax = std::max(1.0, std::pow(y, 2.0 - p) / (phi * (2.0 - p)));
  long jc = std::max<long>(1, static_cast<long>(std::llround(jmax)));
  const long hard_cap = 1000000;

  // logw is concave in j, so the analytic index estimate is polished by a
  // local uphill walk to the exact discrete peak.
  long steps = 0;
  while (logw(static_cast<double>(jc + 1)) > logw(static_cast<double>(jc))) {
    ++jc;
    if (++steps > hard_cap) {
      throw Error("families", "series", "tweedie series peak search failed",
                  ErrorCode::numeric);
    }
  }
  while (jc > 1 && logw(static_cast<double>(jc - 1)) > logw(static_cast<double>(jc))) {
    --jc;
  }

  const double wpeak = logw(static_cast<double>(jc));
  const double drop = (std::log(1e17) + 2.0) * window_scale;
  double sum = 1.0;  // exp(wpeak - wpeak)
  for (long j = jc + 1;; ++j) {
    const double w = logw(static_cast<double>(j));
    sum += std::exp(w - wpeak);
    if (w < wpeak - drop) break;
    if (j - jc > hard_cap) {
      throw Error("families", "series", "tweedie series failed to converge (upper tail)",
                  ErrorCode::numeric);
    }
  }
  for (long j = jc - 1; j >= 1; --j) {
    const double w = logw(static_cast<double>(j));
    sum += std::exp(w - wpeak);
    if (w < wpeak - drop) break;
  }
  return wpeak + std::log(sum);
}

}  // namespace

double log_density(const Family& f, double y, double mu, double phi,
                   double series_window_scale) {
  if (phi <= 0.0 || !(mu > 0.0 || f.kind == FamilyKind::gaussian)) {
    throw Error("families", "domain", "log density needs phi > 0 and mu in range",
                ErrorCode::numeric);
  }
  switch (f.kind) {
    case FamilyKind::gaussian: {
      const double r = y - mu;
      return -0.5 * (std::log(2.0 * M_PI * phi) + r * r / phi);
    }
    case FamilyKind::gamma: {
      if (y <= 0.0) {
        throw Error("families", "domain", "gamma density needs y > 0", ErrorCode::numeric);
      }
      const double shape = 1.0 / phi;
      const double scale = mu * phi;
      return -std::lgamma(shape) - shape * std::log(scale) + (shape - 1.0) * std::log(y) -
             y / scale;
    }
    case FamilyKind::tweedie: {
      if (y < 0.0) {
        throw Error("families", "domain", "tweedie density needs y >= 0", ErrorCode::numeric);
      }
      const double p = f.power;
      const double theta_part = y * std::pow(mu, 1.0 - p) / (1.0 - p) -
                                std::pow(mu, 2.0 - p) / (2.0 - p);
      if (y == 0.0) {
        return theta_part / phi;  // point mass: exp(-mu^{2-p}/(phi (2-p)))
      }
      return tweedie_log_series(y, phi, p, series_window_scale) - std::log(y) +
             theta_part / phi;
    }
  }
  return 0.0;
}

double log_likelihood(const Family& f, const Eigen::VectorXd& y,
                      const Eigen::VectorXd& mu, double phi, const Eigen::VectorXd& w) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    ll += log_density(f, y[i], mu[i], phi / w[i]);
  }
  return ll;
}

void check_support(const Family& f, const Eigen::VectorXd& y) {
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (f.kind == FamilyKind::gamma && y[i] <= 0.0) {
      throw Error("families", "support",
                  "gamma response must be positive (row " + std::to_string(i + 1) + ")");
    }
    if (f.kind == FamilyKind::tweedie && y[i] < 0.0) {
      throw Error("families", "support",
                  "tweedie response must be nonnegative (row " + std::to_string(i + 1) + ")");
    }
  }
}

}  // namespace pgam
