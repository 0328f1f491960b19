#ifndef PGAM_MATHUTIL_HPP_
#define PGAM_MATHUTIL_HPP_

#include <cstdint>
#include <string>

namespace pgam {

// Standard normal CDF and its inverse (Acklam initialisation polished with
// one Halley step; accurate to ~1e-15 over (0,1)).
double normal_cdf(double z);
double normal_quantile(double prob);

// Regularised incomplete beta I_x(a, b) via Lentz continued fraction.
double incomplete_beta(double a, double b, double x);

// Upper tail of the F distribution with (d1, d2) degrees of freedom.
double f_survival(double f, double d1, double d2);

// FNV-1a 64-bit over a byte string, hex-encoded.
std::uint64_t fnv1a64(const std::string& bytes);
std::string to_hex(std::uint64_t value);

// Format a double with enough digits to round-trip exactly.
std::string format_double(double value);

}  // namespace pgam

#endif  // PGAM_MATHUTIL_HPP_
