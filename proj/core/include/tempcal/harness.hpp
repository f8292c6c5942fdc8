#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "tempcal/temporal.hpp"

namespace tempcal {

struct TruncationPlan {
  int draws_per_sequence = 5;
  std::uint64_t rng_seed = 0;
};

// For each sequence length L, draws_per_sequence cut points sampled uniformly
// with replacement from {1..L}.
std::vector<std::vector<int>> truncate_augment(const std::vector<int>& sequence_lengths,
                                               const TruncationPlan& plan);

// Planted ground truths for synthetic datasets. Labels are drawn so the truth
// is the optimum of the corresponding fit.
struct PlantedTemperature {
  double tau = 1.0;
};

struct PlantedStepTable {
  std::vector<double> taus;  // step k (1-based, t = k) uses taus[k-1]
};

// gain(u) = limit - scale * exp(-decay * u - offset) on normalized progress
// u in [0, 1]; records carry t = u * t_span.
struct PlantedSchedule {
  double scale = 1.0;
  double decay = 3.0;
  double limit = 2.0;
  double offset = 0.0;
};

using PlantedTruth = std::variant<PlantedTemperature, PlantedStepTable, PlantedSchedule>;

struct SyntheticSpec {
  std::size_t n = 1000;  // total records; per step for PlantedStepTable
  double logit_range = 4.0;
  double t_span = 30.0;  // ignored for PlantedStepTable (t is the step index)
  PlantedTruth truth = PlantedTemperature{1.0};
  std::uint64_t seed = 0;
};

// Two-class records: logits {0, z} with z uniform in [-logit_range,
// logit_range]; labels Bernoulli with the truth-implied probability; measure
// carries |z|.
Dataset generate_synthetic(const SyntheticSpec& spec);

struct LengthBin {
  double t_lo = 0.0;
  double t_hi = 0.0;
  std::size_t count = 0;
  double ece = 0.0;
  double nll = 0.0;
};

struct LengthBinnedCurve {
  std::vector<LengthBin> bins;
};

// Equal-frequency bins over t; ECE and NLL per bin on calibrated outputs.
LengthBinnedCurve ece_by_length(const Dataset& ds, const Calibrator& cal,
                                int n_length_bins = 10, const BinningSpec& ece_spec = {});

struct ReliabilityData {
  std::vector<BinStats> bins;  // equal-frequency over confidence
};

ReliabilityData reliability_data(const Dataset& ds, const Calibrator& cal, int num_bins = 10);

struct RankComparison {
  std::vector<std::string> methods;
  std::vector<double> avg_ranks;
  std::vector<double> mean_values;
  std::vector<double> stddev_values;
  std::vector<bool> best_group;
  double critical_difference = 0.0;
  double friedman_statistic = 0.0;
  std::size_t n_runs = 0;
};

// Average-rank comparison over n runs x k methods (lower value = better),
// with the critical difference at significance 0.05; other levels are
// rejected. Ties within a run receive average ranks.
RankComparison friedman_nemenyi(const std::vector<std::string>& methods,
                                const std::vector<std::vector<double>>& values,
                                double alpha = 0.05);

struct MethodSpec {
  std::string name;
  enum class Kind { global, temporal_discrete, temporal_continuous } kind = Kind::global;
  GlobalMethod global = GlobalMethod::identity;  // also the per-step method for discrete tables
  TemporalKey key = TemporalKey::time;
  int min_bin = 50;
};

struct ExperimentConfig {
  std::vector<MethodSpec> methods;
  std::vector<std::uint64_t> seeds;
  TruncationPlan truncation;  // draws used when resampling grouped records
  BinningSpec ece_binning;
};

struct ExperimentRun {
  std::uint64_t seed = 0;
  std::vector<MetricsReport> per_method;
};

struct ExperimentReport {
  std::vector<std::string> methods;
  std::vector<ExperimentRun> runs;
  RankComparison nll_ranks;
};

// Per seed: resample the calibration set (per-group draws when every record
// has a group_id, bootstrap otherwise), fit each method, evaluate on the test
// set. Ranks are computed on test NLL.
ExperimentReport run_experiment(const Dataset& cal, const Dataset& test,
                                const ExperimentConfig& config);

Calibrator fit_method(const Dataset& cal, const MethodSpec& method, std::uint64_t seed,
                      const BinningSpec& spec = {});

}  // namespace tempcal
