#pragma once

#include <cstdint>
#include <map>
#include <optional>

#include "tempcal/calibrators.hpp"

namespace tempcal {

// What a discrete table indexes on: elapsed time/length, or the record's
// alternative progress measure (used as an absolute value).
enum class TemporalKey { time, measure };

TemporalKey parse_temporal_key(const std::string& name);  // "time" | "measure"
std::string temporal_key_name(TemporalKey key);

// Raw key value for a record: t, or |measure| (measure must be present).
double key_value(TemporalKey key, const PredictionRecord& r);

struct DiscreteTemporalCalibrator {
  TemporalKey key = TemporalKey::time;
  std::map<long long, CalibratorModel> table;
  CalibratorModel fallback = IdentityCalibrator{};
};

// Inverse-temperature schedule gain(t) = limit - scale * exp(-decay_raw^2 *
// t_norm - offset), with t_norm = min(t / t_max, 1). decay_raw is stored
// unsquared so the effective decay rate is nonnegative by construction.
struct ExponentialTemperature {
  double scale = 0.0;
  double decay_raw = 1.0;
  double limit = 1.0;
  double offset = 0.0;
  double t_max = 1.0;

  double gain(double t) const;
};

struct ContinuousTemporalCalibrator {
  ExponentialTemperature schedule;
};

// softmax(gain(t) * logits). A nonpositive gain is legal but can flip the
// argmax; the flag reports it when requested.
ProbabilityVector apply_continuous(const ContinuousTemporalCalibrator& cal,
                                   std::span<const double> logits, double t,
                                   bool* nonpositive_gain = nullptr);

// Table lookup at the rounded key value; unseen keys use the nearest seen key
// (ties toward the smaller key); an empty table uses the fallback.
ProbabilityVector apply_discrete(const DiscreteTemporalCalibrator& cal,
                                 std::span<const double> logits, double key_value);

Fitted<ContinuousTemporalCalibrator> fit_continuous(
    const Dataset& cal, std::optional<ExponentialTemperature> init = std::nullopt,
    std::uint64_t seed = 0);

// Groups records by rounded key value and fits the selected global method per
// group; groups below min_bin records or failing to fit use the fallback
// (the same method fitted on all records).
Fitted<DiscreteTemporalCalibrator> fit_discrete(const Dataset& cal,
                                                TemporalKey key = TemporalKey::time,
                                                GlobalMethod method = GlobalMethod::temperature,
                                                int min_bin = 50,
                                                const BinningSpec& spec = {});

// Any fitted calibrator, global or temporal, applied uniformly to records.
using Calibrator = std::variant<CalibratorModel, DiscreteTemporalCalibrator,
                                ContinuousTemporalCalibrator>;

struct ApplyStats {
  std::size_t nonpositive_gain = 0;
};

ProbabilityVector apply_record(const Calibrator& cal, const PredictionRecord& r,
                               ApplyStats* stats = nullptr);
std::vector<ProbabilityVector> apply_dataset(const Calibrator& cal, const Dataset& ds,
                                             ApplyStats* stats = nullptr);
double calibrator_nll(const Calibrator& cal, const Dataset& ds);

}  // namespace tempcal
