#pragma once

#include <cstddef>
#include <vector>

#include "tempcal/types.hpp"

namespace tempcal {

enum class BinStrategy { equal_width, equal_frequency };

struct BinningSpec {
  BinStrategy strategy = BinStrategy::equal_width;
  int num_bins = 10;
};

// Per-bin confidence/accuracy aggregates. Empty bins keep count 0 and are
// skipped by the calibration-error sums.
struct BinStats {
  std::size_t count = 0;
  double confidence = 0.0;
  double accuracy = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

struct MetricsReport {
  double nll = 0.0;
  double brier = 0.0;
  double ece = 0.0;
  double classwise_ece = 0.0;
  double accuracy = 0.0;
  std::size_t n = 0;
  BinningSpec binning;
};

double nll(const std::vector<ProbabilityVector>& probs, const std::vector<int>& labels);
double brier(const std::vector<ProbabilityVector>& probs, const std::vector<int>& labels);
double accuracy(const std::vector<ProbabilityVector>& probs, const std::vector<int>& labels);

// Bins the given scores (confidence values in [0,1]) and aggregates hit rates.
std::vector<BinStats> bin_stats(const std::vector<double>& scores,
                                const std::vector<double>& hits,
                                const BinningSpec& spec);

// Confidence = max-class probability, hit = argmax matches label.
std::vector<BinStats> bin_stats(const std::vector<ProbabilityVector>& probs,
                                const std::vector<int>& labels, const BinningSpec& spec);

double ece(const std::vector<ProbabilityVector>& probs, const std::vector<int>& labels,
           const BinningSpec& spec = {});
double classwise_ece(const std::vector<ProbabilityVector>& probs, const std::vector<int>& labels,
                     const BinningSpec& spec = {});

MetricsReport evaluate_probs(const std::vector<ProbabilityVector>& probs,
                             const std::vector<int>& labels, const BinningSpec& spec = {});

std::vector<int> labels_of(const Dataset& ds);
std::vector<ProbabilityVector> softmax_probs(const Dataset& ds);

MetricsReport evaluate(const Dataset& ds, const BinningSpec& spec = {});

}  // namespace tempcal
