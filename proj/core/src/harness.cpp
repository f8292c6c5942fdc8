#include "tempcal/harness.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "tempcal/prob.hpp"

namespace tempcal {

namespace {

double unit_uniform(std::mt19937_64& rng) {
  return (rng() >> 11) * 0x1.0p-53;
}

double uniform_in(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * unit_uniform(rng);
}

// Tabulated studentized-range quantiles q_{0.05}(k) / sqrt(2) for the Nemenyi
// critical difference, k = 2..10.
constexpr double kNemenyiQ05[] = {1.959964, 2.343701, 2.569032, 2.727774, 2.849705,
                                  2.948320, 3.030879, 3.101730, 3.163684};

}  // namespace

std::vector<std::vector<int>> truncate_augment(const std::vector<int>& sequence_lengths,
                                               const TruncationPlan& plan) {
  if (plan.draws_per_sequence < 1) {
    throw InvalidInputError("truncate_augment: draws_per_sequence must be >= 1");
  }
  for (int len : sequence_lengths) {
    if (len < 1) throw InvalidInputError("truncate_augment: sequence lengths must be >= 1");
  }
  std::mt19937_64 rng(plan.rng_seed);
  std::vector<std::vector<int>> out(sequence_lengths.size());
  for (std::size_t i = 0; i < sequence_lengths.size(); ++i) {
    const auto len = static_cast<std::uint64_t>(sequence_lengths[i]);
    out[i].resize(static_cast<std::size_t>(plan.draws_per_sequence));
    for (int d = 0; d < plan.draws_per_sequence; ++d) {
      out[i][static_cast<std::size_t>(d)] = static_cast<int>(1 + rng() % len);
    }
  }
  return out;
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.n == 0) throw InvalidInputError("generate_synthetic: n must be positive");
  if (!(spec.logit_range > 0.0)) {
    throw InvalidInputError("generate_synthetic: logit_range must be positive");
  }
  std::mt19937_64 rng(spec.seed);
  Dataset ds;
  ds.num_classes = 2;

  auto push_record = [&](double z, double label_prob, double t, double total_len) {
    PredictionRecord r;
    r.logits = {0.0, z};
    r.label = unit_uniform(rng) < label_prob ? 1 : 0;
    r.t = t;
    r.total_len = total_len;
    r.measure = std::abs(z);
    ds.records.push_back(std::move(r));
  };

  if (const auto* planted = std::get_if<PlantedTemperature>(&spec.truth)) {
    if (!(planted->tau > 0.0)) throw InvalidInputError("generate_synthetic: tau must be positive");
    for (std::size_t i = 0; i < spec.n; ++i) {
      const double z = uniform_in(rng, -spec.logit_range, spec.logit_range);
      const double t = uniform_in(rng, 0.0, spec.t_span);
      push_record(z, binary_sigmoid(z / planted->tau), t, spec.t_span);
    }
  } else if (const auto* table = std::get_if<PlantedStepTable>(&spec.truth)) {
    if (table->taus.empty()) throw InvalidInputError("generate_synthetic: empty step table");
    for (std::size_t step = 0; step < table->taus.size(); ++step) {
      const double tau = table->taus[step];
      if (!(tau > 0.0)) throw InvalidInputError("generate_synthetic: tau must be positive");
      for (std::size_t i = 0; i < spec.n; ++i) {
        const double z = uniform_in(rng, -spec.logit_range, spec.logit_range);
        push_record(z, binary_sigmoid(z / tau), static_cast<double>(step + 1),
                    static_cast<double>(table->taus.size()));
      }
    }
  } else {
    const auto& sched = std::get<PlantedSchedule>(spec.truth);
    for (std::size_t i = 0; i < spec.n; ++i) {
      const double z = uniform_in(rng, -spec.logit_range, spec.logit_range);
      const double u = unit_uniform(rng);
      const double gain = sched.limit - sched.scale * std::exp(-sched.decay * u - sched.offset);
      push_record(z, binary_sigmoid(gain * z), u * spec.t_span, spec.t_span);
    }
  }
  validate_dataset(ds);
  return ds;
}

LengthBinnedCurve ece_by_length(const Dataset& ds, const Calibrator& cal, int n_length_bins,
                                const BinningSpec& ece_spec) {
  if (n_length_bins < 1) throw InvalidInputError("ece_by_length: need at least one bin");
  if (ds.size() < static_cast<std::size_t>(n_length_bins)) {
    throw InvalidInputError("ece_by_length: fewer records than length bins");
  }

  const std::vector<ProbabilityVector> probs = apply_dataset(cal, ds);
  const std::vector<int> labels = labels_of(ds);

  const std::size_t n = ds.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return ds.records[a].t < ds.records[b].t;
  });

  LengthBinnedCurve curve;
  const auto k = static_cast<std::size_t>(n_length_bins);
  for (std::size_t b = 0; b < k; ++b) {
    const std::size_t lo = b * n / k;
    const std::size_t hi = (b + 1) * n / k;
    std::vector<ProbabilityVector> bin_probs;
    std::vector<int> bin_labels;
    bin_probs.reserve(hi - lo);
    for (std::size_t i = lo; i < hi; ++i) {
      bin_probs.push_back(probs[order[i]]);
      bin_labels.push_back(labels[order[i]]);
    }
    LengthBin bin;
    bin.count = hi - lo;
    bin.t_lo = ds.records[order[lo]].t;
    bin.t_hi = ds.records[order[hi - 1]].t;
    bin.ece = ece(bin_probs, bin_labels, ece_spec);
    bin.nll = nll(bin_probs, bin_labels);
    curve.bins.push_back(bin);
  }
  return curve;
}

ReliabilityData reliability_data(const Dataset& ds, const Calibrator& cal, int num_bins) {
  if (ds.empty()) throw InvalidInputError("reliability_data: empty dataset");
  if (num_bins < 1) throw InvalidInputError("reliability_data: need at least one bin");
  const std::vector<ProbabilityVector> probs = apply_dataset(cal, ds);
  const std::vector<int> labels = labels_of(ds);
  ReliabilityData out;
  out.bins = bin_stats(probs, labels, BinningSpec{BinStrategy::equal_frequency, num_bins});
  return out;
}

RankComparison friedman_nemenyi(const std::vector<std::string>& methods,
                                const std::vector<std::vector<double>>& values, double alpha) {
  if (alpha != 0.05) {
    throw InvalidInputError("friedman_nemenyi: only significance level 0.05 is supported");
  }
  const std::size_t k = methods.size();
  const std::size_t n = values.size();
  if (k < 2 || k > 10) {
    throw InvalidInputError("friedman_nemenyi: method count must be between 2 and 10");
  }
  if (n < 2) throw InvalidInputError("friedman_nemenyi: need at least 2 runs");
  for (const auto& row : values) {
    if (row.size() != k) throw InvalidInputError("friedman_nemenyi: ragged value grid");
  }

  RankComparison out;
  out.methods = methods;
  out.n_runs = n;
  out.avg_ranks.assign(k, 0.0);
  out.mean_values.assign(k, 0.0);
  out.stddev_values.assign(k, 0.0);

  std::vector<std::size_t> order(k);
  for (const auto& row : values) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return row[a] < row[b]; });
    std::size_t i = 0;
    while (i < k) {
      std::size_t j = i;
      while (j < k && row[order[j]] == row[order[i]]) ++j;
      const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
      for (std::size_t m = i; m < j; ++m) out.avg_ranks[order[m]] += avg_rank;
      i = j;
    }
  }
  for (double& r : out.avg_ranks) r /= static_cast<double>(n);

  for (std::size_t m = 0; m < k; ++m) {
    double sum = 0.0;
    for (const auto& row : values) sum += row[m];
    const double mean = sum / static_cast<double>(n);
    double sq = 0.0;
    for (const auto& row : values) sq += (row[m] - mean) * (row[m] - mean);
    out.mean_values[m] = mean;
    out.stddev_values[m] = std::sqrt(sq / static_cast<double>(n - 1));
  }

  const double kd = static_cast<double>(k);
  double rank_sq = 0.0;
  for (double r : out.avg_ranks) rank_sq += r * r;
  out.friedman_statistic =
      12.0 * static_cast<double>(n) / (kd * (kd + 1.0)) * (rank_sq - kd * (kd + 1.0) * (kd + 1.0) / 4.0);

  out.critical_difference = kNemenyiQ05[k - 2] * std::sqrt(kd * (kd + 1.0) / (6.0 * static_cast<double>(n)));

  const double best_rank = *std::min_element(out.avg_ranks.begin(), out.avg_ranks.end());
  out.best_group.resize(k);
  for (std::size_t m = 0; m < k; ++m) {
    out.best_group[m] = out.avg_ranks[m] <= best_rank + out.critical_difference;
  }
  return out;
}

Calibrator fit_method(const Dataset& cal, const MethodSpec& method, std::uint64_t seed,
                      const BinningSpec& spec) {
  switch (method.kind) {
    case MethodSpec::Kind::global:
      return Calibrator{fit_global(cal, method.global, spec).model};
    case MethodSpec::Kind::temporal_discrete:
      return Calibrator{
          fit_discrete(cal, method.key, method.global, method.min_bin, spec).model};
    case MethodSpec::Kind::temporal_continuous:
      return Calibrator{fit_continuous(cal, std::nullopt, seed).model};
  }
  throw InvalidInputError("fit_method: unknown method kind");
}

namespace {

Dataset resample_calibration(const Dataset& cal, const TruncationPlan& plan,
                             std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Dataset out;
  out.num_classes = cal.num_classes;

  bool all_grouped = !cal.empty();
  for (const auto& r : cal.records) {
    if (!r.group_id) {
      all_grouped = false;
      break;
    }
  }

  if (all_grouped) {
    // Group structure stands in for the source sequences: redraw the same
    // number of truncation points per sequence.
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < cal.size(); ++i) {
      groups[*cal.records[i].group_id].push_back(i);
    }
    for (const auto& [name, idxs] : groups) {
      for (int d = 0; d < plan.draws_per_sequence; ++d) {
        out.records.push_back(cal.records[idxs[rng() % idxs.size()]]);
      }
    }
  } else {
    const std::size_t n = cal.size();
    out.records.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      out.records.push_back(cal.records[rng() % n]);
    }
  }
  return out;
}

}  // namespace

ExperimentReport run_experiment(const Dataset& cal, const Dataset& test,
                                const ExperimentConfig& config) {
  if (cal.empty() || test.empty()) throw InvalidInputError("run_experiment: empty dataset");
  if (config.methods.empty()) throw InvalidInputError("run_experiment: no methods");
  if (config.seeds.empty()) throw InvalidInputError("run_experiment: no seeds");

  ExperimentReport report;
  for (const auto& m : config.methods) report.methods.push_back(m.name);

  const std::vector<int> test_labels = labels_of(test);
  std::vector<std::vector<double>> nll_grid;

  for (std::uint64_t seed : config.seeds) {
    Dataset resampled = resample_calibration(cal, config.truncation, seed);
    ExperimentRun run;
    run.seed = seed;
    std::vector<double> row;
    for (const auto& method : config.methods) {
      const Calibrator fitted = fit_method(resampled, method, seed, config.ece_binning);
      const std::vector<ProbabilityVector> probs = apply_dataset(fitted, test);
      MetricsReport rep = evaluate_probs(probs, test_labels, config.ece_binning);
      row.push_back(rep.nll);
      run.per_method.push_back(std::move(rep));
    }
    nll_grid.push_back(std::move(row));
    report.runs.push_back(std::move(run));
  }

  if (report.methods.size() >= 2 && nll_grid.size() >= 2) {
    report.nll_ranks = friedman_nemenyi(report.methods, nll_grid);
  } else {
    report.nll_ranks.methods = report.methods;
    report.nll_ranks.avg_ranks.assign(report.methods.size(), 1.0);
    report.nll_ranks.n_runs = nll_grid.size();
  }
  return report;
}

}  // namespace tempcal
