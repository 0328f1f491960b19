#include "pgam/simulate.hpp"

#include <cmath>

#include "pgam/error.hpp"
#include "pgam/rng.hpp"

namespace pgam {

namespace {

Column numeric_col(Eigen::VectorXd v) {
  Column c;
  c.kind = Column::Kind::numeric;
  c.values = std::move(v);
  return c;
}

Dataset simulate_sin(Eigen::Index n, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::VectorXd x(n), y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x[i] = rng.uniform();
    y[i] = std::sin(2.0 * M_PI * x[i]) + rng.normal(0.0, 0.2);
  }
  Dataset d;
  d.add_column("x", numeric_col(std::move(x)));
  d.add_column("y", numeric_col(std::move(y)));
  d.set_response("y");
  return d;
}

Dataset simulate_lactation(Eigen::Index n, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::VectorXd week(n), fat(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    week[i] = static_cast<double>(i + 1);
    const double mu = 4.2 * std::pow(week[i], -0.25) * std::exp(0.004 * week[i]) + 1.0;
    fat[i] = std::max(0.05, mu + rng.normal(0.0, 0.15));
  }
  Dataset d;
  d.add_column("week", numeric_col(std::move(week)));
  d.add_column("fat", numeric_col(std::move(fat)));
  d.set_response("fat");
  return d;
}

Dataset simulate_growth(Eigen::Index n, std::uint64_t seed) {
  Rng rng(seed);
  const int n_animals = 6;
  const Eigen::Index per = std::max<Eigen::Index>(4, n / n_animals);
  const Eigen::Index total = per * n_animals;

  Eigen::VectorXd day(total), weight(total), count(total);
  std::vector<int> codes(static_cast<std::size_t>(total));
  std::vector<std::string> levels;
  for (int a = 0; a < n_animals; ++a) levels.push_back("A" + std::to_string(a + 1));

  for (int a = 0; a < n_animals; ++a) {
    const double rate = 0.045 + 0.01 * rng.normal();
    const double base = 28.0 + 4.0 * rng.normal();
    for (Eigen::Index i = 0; i < per; ++i) {
      const Eigen::Index row = a * per + i;
      day[row] = 1.0 + (90.0 - 1.0) * static_cast<double>(i) / static_cast<double>(per - 1);
      const double mu = base * std::exp(rate * day[row] / (1.0 + day[row] / 120.0));
      // gamma noise with shape ~ mean/scale; weights mimic per-day counts
      const double shape = 250.0;
      weight[row] = rng.gamma(shape, mu / shape);
      count[row] = 1.0 + static_cast<double>(rng.below(12));
      codes[static_cast<std::size_t>(row)] = a;
    }
  }

  Dataset d;
  d.add_column("day", numeric_col(std::move(day)));
  Column animal;
  animal.kind = Column::Kind::factor;
  animal.levels = levels;
  animal.codes = std::move(codes);
  d.add_column("animal", std::move(animal));
  d.add_column("count", numeric_col(std::move(count)));
  d.add_column("weight", numeric_col(std::move(weight)));
  d.set_response("weight");
  d.set_weight("count");
  return d;
}

}  // namespace

Dataset simulate_dataset(const std::string& kind, Eigen::Index n, std::uint64_t seed) {
  if (n < 4) {
    throw Error("cli", "simulate", "need n >= 4");
  }
  if (kind == "sin") return simulate_sin(n, seed);
  if (kind == "lactation") return simulate_lactation(n, seed);
  if (kind == "growth") return simulate_growth(n, seed);
  throw Error("cli", "simulate", "unknown kind '" + kind + "' (sin|lactation|growth)");
}

}  // namespace pgam
