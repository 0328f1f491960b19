#ifndef PGAM_SIMULATE_HPP_
#define PGAM_SIMULATE_HPP_

#include <cstdint>
#include <string>

#include "pgam/dataset.hpp"

namespace pgam {

/// Seeded synthetic datasets used by the test and acceptance suites.
///   sin:       y = sin(2 pi x) + N(0, 0.2^2), x uniform on [0,1]
///   lactation: weekly fat content from a gamma-type curve with gaussian noise
///   growth:    multi-animal gamma-distributed growth curves with
///              animal-specific deviations and measurement-count weights
Dataset simulate_dataset(const std::string& kind, Eigen::Index n, std::uint64_t seed);

}  // namespace pgam

#endif  // PGAM_SIMULATE_HPP_
