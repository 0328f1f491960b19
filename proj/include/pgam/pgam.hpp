#ifndef PGAM_PGAM_HPP_
#define PGAM_PGAM_HPP_

#include "pgam/archive.hpp"
#include "pgam/basis.hpp"
#include "pgam/bspline.hpp"
#include "pgam/dataset.hpp"
#include "pgam/design.hpp"
#include "pgam/error.hpp"
#include "pgam/family.hpp"
#include "pgam/fit.hpp"
#include "pgam/formula.hpp"
#include "pgam/inference.hpp"
#include "pgam/mathutil.hpp"
#include "pgam/pirls.hpp"
#include "pgam/rng.hpp"
#include "pgam/simulate.hpp"
#include "pgam/wood.hpp"

#endif  // PGAM_PGAM_HPP_
