#include "tempcal/temporal.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "tempcal/metrics.hpp"
#include "tempcal/objectives.hpp"
#include "tempcal/prob.hpp"

namespace tempcal {

TemporalKey parse_temporal_key(const std::string& name) {
  if (name == "time") return TemporalKey::time;
  if (name == "measure") return TemporalKey::measure;
  throw InvalidInputError("unknown temporal key: " + name);
}

std::string temporal_key_name(TemporalKey key) {
  return key == TemporalKey::time ? "time" : "measure";
}

double key_value(TemporalKey key, const PredictionRecord& r) {
  if (key == TemporalKey::time) return r.t;
  if (!r.measure) throw InvalidInputError("record has no measure value");
  return std::abs(*r.measure);
}

double ExponentialTemperature::gain(double t) const {
  if (!(t_max > 0.0)) throw InvalidInputError("schedule: t_max must be positive");
  const double t_norm = std::min(t / t_max, 1.0);
  return limit - scale * std::exp(-decay_raw * decay_raw * t_norm - offset);
}

ProbabilityVector apply_continuous(const ContinuousTemporalCalibrator& cal,
                                   std::span<const double> logits, double t,
                                   bool* nonpositive_gain) {
  if (t < 0.0) throw InvalidInputError("apply_continuous: negative t");
  const double g = cal.schedule.gain(t);
  if (nonpositive_gain) *nonpositive_gain = (g <= 0.0);
  std::vector<double> scaled(logits.begin(), logits.end());
  for (double& z : scaled) z *= g;
  return softmax(scaled);
}

ProbabilityVector apply_discrete(const DiscreteTemporalCalibrator& cal,
                                 std::span<const double> logits, double key_value) {
  if (cal.table.empty()) return tempcal::apply(cal.fallback, logits);
  const long long k = std::llround(key_value);
  auto it = cal.table.lower_bound(k);
  if (it != cal.table.end() && it->first == k) return tempcal::apply(it->second, logits);
  if (it == cal.table.begin()) return tempcal::apply(it->second, logits);
  if (it == cal.table.end()) return tempcal::apply(std::prev(it)->second, logits);
  auto below = std::prev(it);
  // Ties go to the smaller key.
  if (k - below->first <= it->first - k) return tempcal::apply(below->second, logits);
  return tempcal::apply(it->second, logits);
}

namespace {

double dataset_nll_under_schedule(const Dataset& ds, const ExponentialTemperature& sched) {
  double sum = 0.0;
  std::vector<double> scaled;
  for (const auto& r : ds.records) {
    const double g = sched.gain(r.t);
    scaled.assign(r.logits.begin(), r.logits.end());
    for (double& z : scaled) z *= g;
    sum += -log_softmax(scaled)[static_cast<std::size_t>(r.label)];
  }
  return sum / static_cast<double>(ds.size());
}

void require_two_labels(const Dataset& ds, const char* what) {
  for (const auto& r : ds.records) {
    if (r.label != ds.records.front().label) return;
  }
  throw FitError(std::string(what) + ": degenerate fit, single-class dataset");
}

}  // namespace

// Parameters: scale, decay_raw, limit, offset.
Objective schedule_objective(const Dataset& cal, double t_max) {
  if (cal.empty()) throw InvalidInputError("schedule_objective: empty dataset");
  if (!(t_max > 0.0)) throw InvalidInputError("schedule_objective: t_max must be positive");

  const std::size_t n = cal.size();
  std::vector<std::vector<double>> zs(n);
  std::vector<std::size_t> ys(n);
  std::vector<double> t_norm(n);
  for (std::size_t i = 0; i < n; ++i) {
    zs[i] = cal.records[i].logits;
    ys[i] = static_cast<std::size_t>(cal.records[i].label);
    t_norm[i] = std::min(cal.records[i].t / t_max, 1.0);
  }

  return [zs = std::move(zs), ys = std::move(ys), t_norm = std::move(t_norm),
          n](const std::vector<double>& params, std::vector<double>& grad) {
    const double scale = params[0], decay_raw = params[1], limit = params[2], offset = params[3];
    std::fill(grad.begin(), grad.end(), 0.0);
    double loss = 0.0;
    std::vector<double> scaled;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& z = zs[i];
      const double u = std::exp(-decay_raw * decay_raw * t_norm[i] - offset);
      const double g = limit - scale * u;
      scaled.assign(z.begin(), z.end());
      for (double& v : scaled) v *= g;
      const std::vector<double> logp = log_softmax(scaled);
      loss += -logp[ys[i]];
      // d(loss)/d(gain) = sum_j p_j z_j - z_y
      double dg = -z[ys[i]];
      for (std::size_t j = 0; j < z.size(); ++j) dg += std::exp(logp[j]) * z[j];
      grad[0] += dg * (-u);
      grad[1] += dg * (2.0 * scale * decay_raw * t_norm[i] * u);
      grad[2] += dg;
      grad[3] += dg * (scale * u);
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    loss *= inv_n;
    for (double& g : grad) g *= inv_n;
    return loss;
  };
}

Fitted<ContinuousTemporalCalibrator> fit_continuous(const Dataset& cal,
                                                    std::optional<ExponentialTemperature> init,
                                                    std::uint64_t seed) {
  if (cal.empty()) throw InvalidInputError("fit_continuous: empty dataset");
  require_two_labels(cal, "fit_continuous");

  double t_max = 0.0;
  for (const auto& r : cal.records) t_max = std::max(t_max, r.t);
  FitDiagnostics diag;
  if (t_max <= 0.0) {
    t_max = 1.0;
    diag.warnings.push_back("all records have t = 0; the schedule degenerates to a constant");
  }

  Objective obj = schedule_objective(cal, t_max);

  OptimizerConfig config;
  config.keep_trace = true;

  std::vector<std::vector<double>> starts;
  if (init) {
    starts.push_back({init->scale, init->decay_raw, init->limit, init->offset});
  } else {
    starts.push_back({0.0, 1.0, 1.0, 0.0});  // gain identically 1
  }
  std::mt19937_64 rng(seed);
  auto unit = [&rng]() { return (rng() >> 11) * 0x1.0p-53; };
  for (int r = 0; r < 5; ++r) {
    const double scale = -2.0 + 4.0 * unit();
    const double decay_raw = 0.1 + 2.9 * unit();
    const double limit = 0.5 + 2.5 * unit();
    const double offset = -1.0 + 2.0 * unit();
    starts.push_back({scale, decay_raw, limit, offset});
  }

  OptimizeResult best;
  bool have_best = false;
  for (const auto& start : starts) {
    OptimizeResult res = minimize(obj, start, config);
    if (!have_best || res.value < best.value) {
      best = std::move(res);
      have_best = true;
    }
  }

  Fitted<ContinuousTemporalCalibrator> out;
  out.model.schedule.scale = best.params[0];
  out.model.schedule.decay_raw = best.params[1];
  out.model.schedule.limit = best.params[2];
  out.model.schedule.offset = best.params[3];
  out.model.schedule.t_max = t_max;

  diag.iterations = best.iterations;
  diag.converged = best.converged;
  diag.gradient_norm = best.gradient_norm;
  diag.nll_trace = std::move(best.trace);
  diag.initial_nll = model_nll(CalibratorModel{IdentityCalibrator{}}, cal);
  diag.final_nll = dataset_nll_under_schedule(cal, out.model.schedule);
  if (diag.final_nll > diag.initial_nll) {
    diag.warnings.push_back("calibration-set NLL exceeds the constant unit-gain baseline ("
                            + std::to_string(diag.final_nll) + " > "
                            + std::to_string(diag.initial_nll)
                            + "); keeping fitted parameters");
  }
  out.diagnostics = std::move(diag);
  return out;
}

Fitted<DiscreteTemporalCalibrator> fit_discrete(const Dataset& cal, TemporalKey key,
                                                GlobalMethod method, int min_bin,
                                                const BinningSpec& spec) {
  if (cal.empty()) throw InvalidInputError("fit_discrete: empty dataset");
  if (min_bin < 2) throw InvalidInputError("fit_discrete: min_bin must be >= 2");

  Fitted<CalibratorModel> fallback = fit_global(cal, method, spec);

  std::map<long long, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < cal.size(); ++i) {
    groups[std::llround(key_value(key, cal.records[i]))].push_back(i);
  }

  Fitted<DiscreteTemporalCalibrator> out;
  out.model.key = key;
  out.model.fallback = fallback.model;
  out.diagnostics.warnings = fallback.diagnostics.warnings;

  for (const auto& [k, idxs] : groups) {
    if (idxs.size() < static_cast<std::size_t>(min_bin)) {
      out.model.table[k] = fallback.model;
      out.diagnostics.warnings.push_back("key " + std::to_string(k) + ": group of "
                                         + std::to_string(idxs.size())
                                         + " records is below the minimum, using the global fit");
      continue;
    }
    Dataset group;
    group.num_classes = cal.num_classes;
    group.records.reserve(idxs.size());
    for (std::size_t i : idxs) group.records.push_back(cal.records[i]);
    try {
      Fitted<CalibratorModel> fitted = fit_global(group, method, spec);
      // The global fit is in each group's feasible set; never do worse than it.
      if (model_nll(fallback.model, group) < model_nll(fitted.model, group)) {
        out.model.table[k] = fallback.model;
      } else {
        out.model.table[k] = std::move(fitted.model);
      }
      out.diagnostics.iterations += fitted.diagnostics.iterations;
      out.diagnostics.converged = out.diagnostics.converged && fitted.diagnostics.converged;
    } catch (const FitError&) {
      out.model.table[k] = fallback.model;
      out.diagnostics.warnings.push_back("key " + std::to_string(k)
                                         + ": degenerate group, using the global fit");
    }
  }

  out.diagnostics.initial_nll = model_nll(CalibratorModel{IdentityCalibrator{}}, cal);
  out.diagnostics.final_nll = calibrator_nll(Calibrator{out.model}, cal);
  if (out.diagnostics.final_nll > out.diagnostics.initial_nll) {
    out.diagnostics.warnings.push_back(
        "calibration-set NLL exceeds the uncalibrated baseline; keeping fitted parameters");
  }
  return out;
}

ProbabilityVector apply_record(const Calibrator& cal, const PredictionRecord& r,
                               ApplyStats* stats) {
  if (const auto* global = std::get_if<CalibratorModel>(&cal)) {
    return tempcal::apply(*global, r.logits);
  }
  if (const auto* discrete = std::get_if<DiscreteTemporalCalibrator>(&cal)) {
    return apply_discrete(*discrete, r.logits, key_value(discrete->key, r));
  }
  const auto& continuous = std::get<ContinuousTemporalCalibrator>(cal);
  bool flag = false;
  ProbabilityVector p = apply_continuous(continuous, r.logits, r.t, &flag);
  if (flag && stats) ++stats->nonpositive_gain;
  return p;
}

std::vector<ProbabilityVector> apply_dataset(const Calibrator& cal, const Dataset& ds,
                                             ApplyStats* stats) {
  std::vector<ProbabilityVector> out(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) out[i] = apply_record(cal, ds.records[i], stats);
  return out;
}

double calibrator_nll(const Calibrator& cal, const Dataset& ds) {
  if (ds.empty()) throw InvalidInputError("calibrator_nll: empty dataset");
  return nll(apply_dataset(cal, ds), labels_of(ds));
}

}  // namespace tempcal
