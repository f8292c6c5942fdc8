#pragma once

#include <cstddef>

#include "tempcal/calibrators.hpp"
#include "tempcal/optimize.hpp"

namespace tempcal {

// Mean-NLL objectives with analytic gradients, exactly as used by the fitting
// routines. Each factory copies what it needs from the dataset, so the
// returned closure is self-contained.

// Parameters: slope, intercept. Features the class-1 logit.
Objective platt_objective(const Dataset& cal);

// One-vs-rest variant on the class margin against the indicator of
// class_index. Parameters: slope, intercept.
Objective class_margin_objective(const Dataset& cal, std::size_t class_index);

// Parameters: slope_pos, slope_neg, intercept.
Objective beta_objective(const Dataset& cal);

// Parameters: weight matrix row-major, then bias. A diagonal structure zeroes
// the off-diagonal gradient entries.
Objective affine_objective(const Dataset& cal, AffineStructure structure, AffineInput input);

// Parameters: scale, decay_raw, limit, offset of the gain schedule, with times
// normalized by t_max.
Objective schedule_objective(const Dataset& cal, double t_max);

}  // namespace tempcal
