#ifndef PGAM_ARCHIVE_HPP_
#define PGAM_ARCHIVE_HPP_

#include <string>

#include "pgam/fit.hpp"

namespace pgam {

inline constexpr int kArchiveFormatVersion = 1;

/// Write the fitted model as a versioned JSON archive: formula, family,
/// smoothing parameters, coefficients, posterior covariance, basis
/// artifacts, term layout, fit statistics, the training data and its
/// fingerprint. Numbers round-trip exactly.
void save_model(const FittedModel& model, const std::string& path);

/// Load an archive; the format version is checked before the body is
/// touched. The training design is rebuilt from the stored artifacts, so
/// predictions from a loaded model are bit-identical to the original.
FittedModel load_model(const std::string& path);

}  // namespace pgam

#endif  // PGAM_ARCHIVE_HPP_
