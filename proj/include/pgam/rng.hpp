#ifndef PGAM_RNG_HPP_
#define PGAM_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace pgam {

// Deterministic random source. The standard distributions are
// implementation-defined, so every variate is generated here from raw
// mt19937_64 draws; results are identical across platforms and stdlibs.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform() {
    // 53-bit mantissa in [0, 1)
    return (gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n) by rejection.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v = gen_();
    while (v >= limit) v = gen_();
    return v % n;
  }

  double normal() {
    // Marsaglia polar method, cached second deviate.
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  // Marsaglia-Tsang for shape >= 1, boost trick below 1.
  double gamma(double shape, double scale) {
    if (shape < 1.0) {
      const double u = uniform();
      return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v * scale;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v * scale;
    }
  }

  // Knuth multiplication for small means, rejection elsewhere is not needed
  // at the mean values used here.
  int poisson(double mean) {
    if (mean <= 0.0) return 0;
    if (mean < 30.0) {
      const double limit = std::exp(-mean);
      int k = 0;
      double prod = uniform();
      while (prod > limit) {
        ++k;
        prod *= uniform();
      }
      return k;
    }
    // Split recursively; counts stay exact.
    const int half = poisson(mean / 2.0);
    return half + poisson(mean - mean / 2.0);
  }

  // Compound Poisson-gamma draw with mean mu, dispersion phi, power p in (1,2).
  double tweedie(double mu, double phi, double p) {
    const double lambda = std::pow(mu, 2.0 - p) / (phi * (2.0 - p));
    const double alpha = (2.0 - p) / (p - 1.0);
    const double gscale = phi * (p - 1.0) * std::pow(mu, p - 1.0);
    const int n = poisson(lambda);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += gamma(alpha, gscale);
    return sum;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace pgam

#endif  // PGAM_RNG_HPP_
