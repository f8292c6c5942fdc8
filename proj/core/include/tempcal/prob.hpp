#pragma once

#include <span>
#include <vector>

#include "tempcal/types.hpp"

namespace tempcal {

/// Probability floor used when taking logarithms inside NLL.
inline constexpr double kNllClampEps = 1e-12;

/// Probability floor used for log-probability features (beta scaling and
/// log-probability affine inputs), where near-boundary logs are a larger
/// hazard than inside NLL.
inline constexpr double kLogFeatureClampEps = 1e-6;

/// Numerically stable softmax (max subtraction). Throws InvalidInputError on
/// non-finite input or fewer than one entry.
ProbabilityVector softmax(std::span<const double> logits);

/// Stable log-softmax; same preconditions as softmax.
std::vector<double> log_softmax(std::span<const double> logits);

/// 1 / (1 + exp(-z)), stable for large |z|. Throws on non-finite z.
double binary_sigmoid(double z);

/// Indicator vector with a single 1 at `label`. Throws on out-of-range label.
std::vector<double> to_onehot(int label, int num_classes);

/// Clips p into [eps, 1-eps]. Requires 0 < eps < 0.5.
double clamp_probability(double p, double eps);

/// Index of the largest entry; ties break to the lowest index.
std::size_t argmax_index(std::span<const double> values);

}  // namespace tempcal
