#include "tempcal/calibrators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tempcal/objectives.hpp"
#include "tempcal/prob.hpp"

namespace tempcal {

namespace {

void require_nonempty(const Dataset& ds, const char* what) {
  if (ds.empty()) throw InvalidInputError(std::string(what) + ": empty dataset");
}

void require_binary(const Dataset& ds, const char* what) {
  if (ds.num_classes != 2) {
    throw InvalidInputError(std::string(what) + ": requires exactly 2 classes");
  }
}

void require_two_distinct_labels(const Dataset& ds, const char* what) {
  for (const auto& r : ds.records) {
    if (r.label != ds.records.front().label) return;
  }
  throw FitError(std::string(what) + ": degenerate fit, single-class dataset");
}

void require_all_classes(const Dataset& ds, const char* what) {
  std::vector<bool> seen(static_cast<std::size_t>(ds.num_classes), false);
  for (const auto& r : ds.records) seen[static_cast<std::size_t>(r.label)] = true;
  for (std::size_t c = 0; c < seen.size(); ++c) {
    if (!seen[c]) {
      throw FitError(std::string(what) + ": degenerate fit, class " + std::to_string(c) +
                     " absent");
    }
  }
}

double class1_probability(std::span<const double> logits) {
  return softmax(logits)[1];
}

// log(1 + e^s), stable for large |s|.
double softplus(double s) {
  if (s > 0.0) return s + std::log1p(std::exp(-s));
  return std::log1p(std::exp(s));
}

double identity_nll(const Dataset& ds) {
  return model_nll(CalibratorModel{IdentityCalibrator{}}, ds);
}

void attach_baseline_check(FitDiagnostics& diag, const CalibratorModel& fitted,
                           const Dataset& cal) {
  diag.initial_nll = identity_nll(cal);
  diag.final_nll = model_nll(fitted, cal);
  if (diag.final_nll > diag.initial_nll) {
    diag.warnings.push_back("calibration-set NLL exceeds the uncalibrated baseline ("
                            + std::to_string(diag.final_nll) + " > "
                            + std::to_string(diag.initial_nll)
                            + "); keeping fitted parameters");
  }
}

// Shared binary logistic regression: minimizes the mean NLL of
// sigmoid(w . x + c) against 0/1 targets. Feature rows exclude the intercept.
Objective logistic_objective(std::vector<std::vector<double>> features,
                             std::vector<double> targets) {
  const std::size_t n = features.size();
  const std::size_t d = features.front().size();
  return [features = std::move(features), targets = std::move(targets), n,
          d](const std::vector<double>& params, std::vector<double>& grad) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double s = params[d];
      for (std::size_t j = 0; j < d; ++j) s += params[j] * features[i][j];
      loss += softplus(s) - targets[i] * s;
      const double e = binary_sigmoid(s) - targets[i];
      for (std::size_t j = 0; j < d; ++j) grad[j] += e * features[i][j];
      grad[d] += e;
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    loss *= inv_n;
    for (double& g : grad) g *= inv_n;
    return loss;
  };
}

std::vector<double> labels01(const Dataset& ds) {
  std::vector<double> ys(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) ys[i] = ds.records[i].label == 1 ? 1.0 : 0.0;
  return ys;
}

struct LogisticFit {
  std::vector<double> params;  // feature weights then intercept
  OptimizeResult opt;
};

LogisticFit fit_binary_logistic(std::vector<std::vector<double>> features,
                                std::vector<double> targets,
                                std::vector<double> init) {
  LogisticFit out;
  out.opt = minimize(logistic_objective(std::move(features), std::move(targets)),
                     std::move(init));
  out.params = out.opt.params;
  return out;
}

double mean_nll_at_tau(const Dataset& ds, double tau) {
  double sum = 0.0;
  std::vector<double> scaled;
  for (const auto& r : ds.records) {
    scaled.assign(r.logits.begin(), r.logits.end());
    for (double& z : scaled) z /= tau;
    sum += -log_softmax(scaled)[static_cast<std::size_t>(r.label)];
  }
  return sum / static_cast<double>(ds.size());
}

}  // namespace

double binary_logit(std::span<const double> logits) {
  if (logits.size() != 2) throw InvalidInputError("binary_logit: requires exactly 2 logits");
  return logits[1] - logits[0];
}

double class_margin(std::span<const double> logits, std::size_t m) {
  if (m >= logits.size() || logits.size() < 2) {
    throw InvalidInputError("class_margin: class index out of range");
  }
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < logits.size(); ++j) {
    if (j != m) mx = std::max(mx, logits[j]);
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    if (j != m) sum += std::exp(logits[j] - mx);
  }
  return logits[m] - (mx + std::log(sum));
}

namespace {

struct ApplyVisitor {
  std::span<const double> logits;

  ProbabilityVector operator()(const IdentityCalibrator&) const { return softmax(logits); }

  ProbabilityVector operator()(const TemperatureCalibrator& m) const {
    if (!(m.tau > 0.0)) throw InvalidInputError("apply: temperature must be positive");
    std::vector<double> scaled(logits.begin(), logits.end());
    for (double& z : scaled) z /= m.tau;
    return softmax(scaled);
  }

  ProbabilityVector operator()(const PlattCalibrator& m) const {
    const double q = binary_sigmoid(m.slope * binary_logit(logits) + m.intercept);
    return ProbabilityVector{{1.0 - q, q}};
  }

  ProbabilityVector operator()(const PlattOvrCalibrator& m) const {
    if (logits.size() != m.per_class.size()) {
      throw InvalidInputError("apply: logits length does not match per-class model count");
    }
    ProbabilityVector out;
    out.p.resize(logits.size());
    double sum = 0.0;
    for (std::size_t c = 0; c < logits.size(); ++c) {
      const double margin = class_margin(logits, c);
      out.p[c] = binary_sigmoid(m.per_class[c].slope * margin + m.per_class[c].intercept);
      sum += out.p[c];
    }
    for (double& q : out.p) q /= sum;
    return out;
  }

  ProbabilityVector operator()(const AffineCalibrator& m) const {
    const std::size_t mm = static_cast<std::size_t>(m.num_classes);
    if (logits.size() != mm) throw InvalidInputError("apply: logits length mismatch");
    if (m.weight.size() != mm * mm || m.bias.size() != mm) {
      throw InvalidInputError("apply: malformed affine calibrator");
    }
    std::vector<double> x(logits.begin(), logits.end());
    if (m.input == AffineInput::log_probabilities) {
      const ProbabilityVector p = softmax(logits);
      for (std::size_t j = 0; j < mm; ++j) {
        x[j] = std::log(clamp_probability(p[j], kLogFeatureClampEps));
      }
    }
    std::vector<double> s(mm);
    for (std::size_t j = 0; j < mm; ++j) {
      double acc = m.bias[j];
      for (std::size_t k = 0; k < mm; ++k) acc += m.weight[j * mm + k] * x[k];
      s[j] = acc;
    }
    return softmax(s);
  }

  ProbabilityVector operator()(const BetaCalibrator& m) const {
    const double p = clamp_probability(class1_probability(logits), kLogFeatureClampEps);
    const double s = m.slope_pos * std::log(p) - m.slope_neg * std::log(1.0 - p) + m.intercept;
    const double q = binary_sigmoid(s);
    return ProbabilityVector{{1.0 - q, q}};
  }

  ProbabilityVector operator()(const HistogramCalibrator& m) const {
    if (m.edges.size() < 2 || m.values.size() + 1 != m.edges.size()) {
      throw InvalidInputError("apply: malformed histogram calibrator");
    }
    const double p = class1_probability(logits);
    auto it = std::upper_bound(m.edges.begin(), m.edges.end(), p);
    std::size_t idx = (it == m.edges.begin()) ? 0 : static_cast<std::size_t>(it - m.edges.begin()) - 1;
    idx = std::min(idx, m.values.size() - 1);
    const double q = m.values[idx];
    return ProbabilityVector{{1.0 - q, q}};
  }

  ProbabilityVector operator()(const IsotonicCalibrator& m) const {
    if (m.breakpoints.empty() || m.breakpoints.size() != m.levels.size()) {
      throw InvalidInputError("apply: malformed isotonic calibrator");
    }
    const double p = class1_probability(logits);
    auto it = std::upper_bound(m.breakpoints.begin(), m.breakpoints.end(), p);
    const std::size_t idx =
        (it == m.breakpoints.begin()) ? 0 : static_cast<std::size_t>(it - m.breakpoints.begin()) - 1;
    const double q = m.levels[idx];
    return ProbabilityVector{{1.0 - q, q}};
  }
};

}  // namespace

ProbabilityVector apply(const CalibratorModel& model, std::span<const double> logits) {
  if (logits.size() < 2) throw InvalidInputError("apply: fewer than 2 logits");
  const bool binary_only = std::holds_alternative<PlattCalibrator>(model) ||
                           std::holds_alternative<BetaCalibrator>(model) ||
                           std::holds_alternative<HistogramCalibrator>(model) ||
                           std::holds_alternative<IsotonicCalibrator>(model);
  if (binary_only && logits.size() != 2) {
    throw InvalidInputError("apply: binary-only calibrator applied to more than 2 classes");
  }
  return std::visit(ApplyVisitor{logits}, model);
}

std::vector<ProbabilityVector> apply_all(const CalibratorModel& model, const Dataset& ds) {
  std::vector<ProbabilityVector> out(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) out[i] = tempcal::apply(model, ds.records[i].logits);
  return out;
}

double model_nll(const CalibratorModel& model, const Dataset& ds) {
  if (ds.empty()) throw InvalidInputError("model_nll: empty dataset");
  return nll(apply_all(model, ds), labels_of(ds));
}

Fitted<TemperatureCalibrator> fit_temperature(const Dataset& cal) {
  require_nonempty(cal, "fit_temperature");
  require_two_distinct_labels(cal, "fit_temperature");

  auto value_at = [&](double log_tau) { return mean_nll_at_tau(cal, std::exp(log_tau)); };

  const double lo = std::log(kTauMin);
  const double hi = std::log(kTauMax);
  const int grid_points = 201;
  double best_theta = 0.0;
  double best_value = std::numeric_limits<double>::infinity();
  int best_idx = 0;
  for (int i = 0; i < grid_points; ++i) {
    const double theta = lo + (hi - lo) * i / (grid_points - 1);
    const double v = value_at(theta);
    if (v < best_value) {
      best_value = v;
      best_theta = theta;
      best_idx = i;
    }
  }

  // Golden-section refinement inside the bracketing grid cells.
  double a = lo + (hi - lo) * std::max(0, best_idx - 1) / (grid_points - 1);
  double b = lo + (hi - lo) * std::min(grid_points - 1, best_idx + 1) / (grid_points - 1);
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = value_at(c);
  double fd = value_at(d);
  int iters = 0;
  while (b - a > 1e-12) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = value_at(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = value_at(d);
    }
    ++iters;
  }
  const double refined = 0.5 * (a + b);
  const double refined_value = value_at(refined);

  // Candidate set guarantees the fit never loses to the coarse grid or to the
  // untouched temperature.
  double theta_hat = refined;
  double value_hat = refined_value;
  if (best_value < value_hat) {
    theta_hat = best_theta;
    value_hat = best_value;
  }
  const double unit_value = value_at(0.0);
  if (unit_value < value_hat) {
    theta_hat = 0.0;
    value_hat = unit_value;
  }

  Fitted<TemperatureCalibrator> out;
  out.model.tau = std::exp(theta_hat);
  out.diagnostics.iterations = iters;
  out.diagnostics.converged = true;
  attach_baseline_check(out.diagnostics, CalibratorModel{out.model}, cal);
  return out;
}

Fitted<PlattCalibrator> fit_platt(const Dataset& cal) {
  require_nonempty(cal, "fit_platt");
  require_binary(cal, "fit_platt");
  require_two_distinct_labels(cal, "fit_platt");

  const std::size_t n = cal.size();
  std::vector<std::vector<double>> feats(n);
  double zmin = std::numeric_limits<double>::infinity();
  double zmax = -zmin;
  for (std::size_t i = 0; i < n; ++i) {
    const double z = binary_logit(cal.records[i].logits);
    feats[i] = {z};
    zmin = std::min(zmin, z);
    zmax = std::max(zmax, z);
  }

  LogisticFit lf = fit_binary_logistic(std::move(feats), labels01(cal), {1.0, 0.0});

  Fitted<PlattCalibrator> out;
  out.model.slope = lf.params[0];
  out.model.intercept = lf.params[1];
  out.diagnostics.iterations = lf.opt.iterations;
  out.diagnostics.converged = lf.opt.converged;
  out.diagnostics.gradient_norm = lf.opt.gradient_norm;
  if (zmax == zmin) {
    out.diagnostics.warnings.push_back(
        "ill-conditioned fit: constant class-1 logit, intercept absorbs the base rate");
  }
  attach_baseline_check(out.diagnostics, CalibratorModel{out.model}, cal);
  return out;
}

Fitted<CalibratorModel> fit_platt_ovr(const Dataset& cal) {
  require_nonempty(cal, "fit_platt_ovr");
  if (cal.num_classes == 2) {
    Fitted<PlattCalibrator> f = fit_platt(cal);
    return {CalibratorModel{f.model}, std::move(f.diagnostics)};
  }
  require_all_classes(cal, "fit_platt_ovr");

  const std::size_t n = cal.size();
  const std::size_t m = static_cast<std::size_t>(cal.num_classes);
  PlattOvrCalibrator model;
  model.per_class.resize(m);
  FitDiagnostics diag;
  for (std::size_t c = 0; c < m; ++c) {
    std::vector<std::vector<double>> feats(n);
    std::vector<double> ys(n);
    for (std::size_t i = 0; i < n; ++i) {
      feats[i] = {class_margin(cal.records[i].logits, c)};
      ys[i] = (static_cast<std::size_t>(cal.records[i].label) == c) ? 1.0 : 0.0;
    }
    LogisticFit lf = fit_binary_logistic(std::move(feats), std::move(ys), {1.0, 0.0});
    model.per_class[c].slope = lf.params[0];
    model.per_class[c].intercept = lf.params[1];
    diag.iterations += lf.opt.iterations;
    diag.converged = diag.converged && lf.opt.converged;
    diag.gradient_norm = std::max(diag.gradient_norm, lf.opt.gradient_norm);
  }
  Fitted<CalibratorModel> out{CalibratorModel{std::move(model)}, std::move(diag)};
  attach_baseline_check(out.diagnostics, out.model, cal);
  return out;
}

Fitted<AffineCalibrator> fit_affine(const Dataset& cal, AffineStructure structure,
                                    AffineInput input) {
  require_nonempty(cal, "fit_affine");
  require_all_classes(cal, "fit_affine");

  const std::size_t m = static_cast<std::size_t>(cal.num_classes);

  // Parameter layout: weight matrix row-major, then bias.
  std::vector<double> init(m * m + m, 0.0);
  for (std::size_t j = 0; j < m; ++j) init[j * m + j] = 1.0;

  OptimizeResult opt = minimize(affine_objective(cal, structure, input), init);

  Fitted<AffineCalibrator> out;
  out.model.num_classes = cal.num_classes;
  out.model.structure = structure;
  out.model.input = input;
  out.model.weight.assign(opt.params.begin(), opt.params.begin() + static_cast<long>(m * m));
  out.model.bias.assign(opt.params.begin() + static_cast<long>(m * m), opt.params.end());
  if (structure == AffineStructure::diagonal) {
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t k = 0; k < m; ++k) {
        if (j != k) out.model.weight[j * m + k] = 0.0;
      }
    }
  }
  out.diagnostics.iterations = opt.iterations;
  out.diagnostics.converged = opt.converged;
  out.diagnostics.gradient_norm = opt.gradient_norm;
  attach_baseline_check(out.diagnostics, CalibratorModel{out.model}, cal);
  return out;
}

Fitted<BetaCalibrator> fit_beta(const Dataset& cal) {
  require_nonempty(cal, "fit_beta");
  require_binary(cal, "fit_beta");
  require_two_distinct_labels(cal, "fit_beta");

  const std::size_t n = cal.size();
  std::vector<std::vector<double>> feats(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double p = clamp_probability(class1_probability(cal.records[i].logits),
                                       kLogFeatureClampEps);
    feats[i] = {std::log(p), -std::log(1.0 - p)};
  }

  LogisticFit lf = fit_binary_logistic(std::move(feats), labels01(cal), {1.0, 1.0, 0.0});

  Fitted<BetaCalibrator> out;
  out.model.slope_pos = lf.params[0];
  out.model.slope_neg = lf.params[1];
  out.model.intercept = lf.params[2];
  out.diagnostics.iterations = lf.opt.iterations;
  out.diagnostics.converged = lf.opt.converged;
  out.diagnostics.gradient_norm = lf.opt.gradient_norm;
  attach_baseline_check(out.diagnostics, CalibratorModel{out.model}, cal);
  return out;
}

Fitted<HistogramCalibrator> fit_histogram(const Dataset& cal, const BinningSpec& spec) {
  require_nonempty(cal, "fit_histogram");
  require_binary(cal, "fit_histogram");
  if (spec.num_bins < 1) throw InvalidInputError("fit_histogram: num_bins must be >= 1");

  const std::size_t n = cal.size();
  std::vector<double> scores(n);
  for (std::size_t i = 0; i < n; ++i) scores[i] = class1_probability(cal.records[i].logits);

  std::vector<double> edges;
  const int k = spec.num_bins;
  if (spec.strategy == BinStrategy::equal_width) {
    for (int b = 0; b <= k; ++b) edges.push_back(static_cast<double>(b) / k);
  } else {
    std::vector<double> sorted = scores;
    std::sort(sorted.begin(), sorted.end());
    edges.push_back(0.0);
    for (int b = 1; b < k; ++b) {
      edges.push_back(sorted[static_cast<std::size_t>(b) * n / static_cast<std::size_t>(k)]);
    }
    edges.push_back(1.0);
    std::vector<double> dedup;
    for (double e : edges) {
      if (dedup.empty() || e > dedup.back()) dedup.push_back(e);
    }
    if (dedup.size() < 2) dedup = {0.0, 1.0};
    if (dedup.back() < 1.0) dedup.push_back(1.0);
    edges = std::move(dedup);
  }

  const std::size_t nbins = edges.size() - 1;
  std::vector<std::size_t> counts(nbins, 0), positives(nbins, 0);
  std::size_t total_pos = 0;
  for (std::size_t i = 0; i < n; ++i) {
    auto it = std::upper_bound(edges.begin(), edges.end(), scores[i]);
    std::size_t idx = (it == edges.begin()) ? 0 : static_cast<std::size_t>(it - edges.begin()) - 1;
    idx = std::min(idx, nbins - 1);
    ++counts[idx];
    if (cal.records[i].label == 1) {
      ++positives[idx];
      ++total_pos;
    }
  }
  const double global_rate = static_cast<double>(total_pos) / static_cast<double>(n);

  Fitted<HistogramCalibrator> out;
  out.model.edges = std::move(edges);
  out.model.values.resize(nbins);
  for (std::size_t b = 0; b < nbins; ++b) {
    out.model.values[b] = counts[b] == 0
                              ? global_rate
                              : static_cast<double>(positives[b]) / static_cast<double>(counts[b]);
  }
  out.diagnostics.converged = true;
  attach_baseline_check(out.diagnostics, CalibratorModel{out.model}, cal);
  return out;
}

std::vector<double> pava(const std::vector<double>& values, const std::vector<double>& weights) {
  if (values.empty()) throw InvalidInputError("pava: empty input");
  if (!weights.empty() && weights.size() != values.size()) {
    throw InvalidInputError("pava: weights size mismatch");
  }
  struct Block {
    double sum;
    double weight;
    std::size_t count;
  };
  std::vector<Block> blocks;
  blocks.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    if (!(w > 0.0)) throw InvalidInputError("pava: weights must be positive");
    blocks.push_back({values[i] * w, w, 1});
    while (blocks.size() >= 2) {
      Block& top = blocks[blocks.size() - 1];
      Block& below = blocks[blocks.size() - 2];
      if (top.sum / top.weight < below.sum / below.weight) {
        below.sum += top.sum;
        below.weight += top.weight;
        below.count += top.count;
        blocks.pop_back();
      } else {
        break;
      }
    }
  }
  std::vector<double> out;
  out.reserve(values.size());
  for (const Block& b : blocks) {
    const double level = b.sum / b.weight;
    for (std::size_t i = 0; i < b.count; ++i) out.push_back(level);
  }
  return out;
}

Fitted<IsotonicCalibrator> fit_isotonic(const Dataset& cal) {
  require_nonempty(cal, "fit_isotonic");
  require_binary(cal, "fit_isotonic");

  const std::size_t n = cal.size();
  std::vector<std::pair<double, double>> pts(n);  // (score, target)
  for (std::size_t i = 0; i < n; ++i) {
    pts[i] = {class1_probability(cal.records[i].logits),
              cal.records[i].label == 1 ? 1.0 : 0.0};
  }
  std::stable_sort(pts.begin(), pts.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });

  // Records sharing a score must share a fitted value; collapse ties first.
  std::vector<double> xs, ys, ws;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    double sum = 0.0;
    while (j < n && pts[j].first == pts[i].first) {
      sum += pts[j].second;
      ++j;
    }
    xs.push_back(pts[i].first);
    ys.push_back(sum / static_cast<double>(j - i));
    ws.push_back(static_cast<double>(j - i));
    i = j;
  }

  const std::vector<double> fit = pava(ys, ws);

  Fitted<IsotonicCalibrator> out;
  for (std::size_t i = 0; i < fit.size(); ++i) {
    if (out.model.levels.empty() || fit[i] != out.model.levels.back()) {
      out.model.breakpoints.push_back(xs[i]);
      out.model.levels.push_back(fit[i]);
    }
  }
  out.diagnostics.converged = true;
  attach_baseline_check(out.diagnostics, CalibratorModel{out.model}, cal);
  return out;
}

Objective platt_objective(const Dataset& cal) {
  require_nonempty(cal, "platt_objective");
  require_binary(cal, "platt_objective");
  std::vector<std::vector<double>> feats(cal.size());
  for (std::size_t i = 0; i < cal.size(); ++i) {
    feats[i] = {binary_logit(cal.records[i].logits)};
  }
  return logistic_objective(std::move(feats), labels01(cal));
}

Objective class_margin_objective(const Dataset& cal, std::size_t class_index) {
  require_nonempty(cal, "class_margin_objective");
  if (class_index >= static_cast<std::size_t>(cal.num_classes)) {
    throw InvalidInputError("class_margin_objective: class index out of range");
  }
  std::vector<std::vector<double>> feats(cal.size());
  std::vector<double> ys(cal.size());
  for (std::size_t i = 0; i < cal.size(); ++i) {
    feats[i] = {class_margin(cal.records[i].logits, class_index)};
    ys[i] = (static_cast<std::size_t>(cal.records[i].label) == class_index) ? 1.0 : 0.0;
  }
  return logistic_objective(std::move(feats), std::move(ys));
}

Objective beta_objective(const Dataset& cal) {
  require_nonempty(cal, "beta_objective");
  require_binary(cal, "beta_objective");
  std::vector<std::vector<double>> feats(cal.size());
  for (std::size_t i = 0; i < cal.size(); ++i) {
    const double p = clamp_probability(class1_probability(cal.records[i].logits),
                                       kLogFeatureClampEps);
    feats[i] = {std::log(p), -std::log(1.0 - p)};
  }
  return logistic_objective(std::move(feats), labels01(cal));
}

Objective affine_objective(const Dataset& cal, AffineStructure structure, AffineInput input) {
  require_nonempty(cal, "affine_objective");
  const std::size_t n = cal.size();
  const std::size_t m = static_cast<std::size_t>(cal.num_classes);

  std::vector<std::vector<double>> xs(n);
  std::vector<std::size_t> ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& logits = cal.records[i].logits;
    if (input == AffineInput::logits) {
      xs[i].assign(logits.begin(), logits.end());
    } else {
      const ProbabilityVector p = softmax(logits);
      xs[i].resize(m);
      for (std::size_t j = 0; j < m; ++j) {
        xs[i][j] = std::log(clamp_probability(p[j], kLogFeatureClampEps));
      }
    }
    ys[i] = static_cast<std::size_t>(cal.records[i].label);
  }

  return [xs = std::move(xs), ys = std::move(ys), n, m, structure,
          scores = std::vector<double>(m)](const std::vector<double>& params,
                                           std::vector<double>& grad) mutable {
    std::fill(grad.begin(), grad.end(), 0.0);
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        double acc = params[m * m + j];
        for (std::size_t k = 0; k < m; ++k) acc += params[j * m + k] * xs[i][k];
        scores[j] = acc;
      }
      const std::vector<double> logp = log_softmax(scores);
      loss += -logp[ys[i]];
      for (std::size_t j = 0; j < m; ++j) {
        const double gs = std::exp(logp[j]) - (j == ys[i] ? 1.0 : 0.0);
        for (std::size_t k = 0; k < m; ++k) grad[j * m + k] += gs * xs[i][k];
        grad[m * m + j] += gs;
      }
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    loss *= inv_n;
    for (double& g : grad) g *= inv_n;
    if (structure == AffineStructure::diagonal) {
      for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t k = 0; k < m; ++k) {
          if (j != k) grad[j * m + k] = 0.0;
        }
      }
    }
    return loss;
  };
}

GlobalMethod parse_global_method(const std::string& name) {
  if (name == "identity") return GlobalMethod::identity;
  if (name == "temperature") return GlobalMethod::temperature;
  if (name == "platt") return GlobalMethod::platt;
  if (name == "platt-ovr") return GlobalMethod::platt_ovr;
  if (name == "vector") return GlobalMethod::vector_scaling;
  if (name == "matrix") return GlobalMethod::matrix_scaling;
  if (name == "dirichlet") return GlobalMethod::dirichlet;
  if (name == "beta") return GlobalMethod::beta;
  if (name == "histogram") return GlobalMethod::histogram;
  if (name == "isotonic") return GlobalMethod::isotonic;
  throw InvalidInputError("unknown calibration method: " + name);
}

std::string method_name(GlobalMethod method) {
  switch (method) {
    case GlobalMethod::identity: return "identity";
    case GlobalMethod::temperature: return "temperature";
    case GlobalMethod::platt: return "platt";
    case GlobalMethod::platt_ovr: return "platt-ovr";
    case GlobalMethod::vector_scaling: return "vector";
    case GlobalMethod::matrix_scaling: return "matrix";
    case GlobalMethod::dirichlet: return "dirichlet";
    case GlobalMethod::beta: return "beta";
    case GlobalMethod::histogram: return "histogram";
    case GlobalMethod::isotonic: return "isotonic";
  }
  throw InvalidInputError("unknown calibration method");
}

Fitted<CalibratorModel> fit_global(const Dataset& cal, GlobalMethod method,
                                   const BinningSpec& spec) {
  switch (method) {
    case GlobalMethod::identity: {
      require_nonempty(cal, "fit_global");
      Fitted<CalibratorModel> out{CalibratorModel{IdentityCalibrator{}}, {}};
      out.diagnostics.initial_nll = identity_nll(cal);
      out.diagnostics.final_nll = out.diagnostics.initial_nll;
      out.diagnostics.converged = true;
      return out;
    }
    case GlobalMethod::temperature: {
      Fitted<TemperatureCalibrator> f = fit_temperature(cal);
      return {CalibratorModel{f.model}, std::move(f.diagnostics)};
    }
    case GlobalMethod::platt: {
      Fitted<PlattCalibrator> f = fit_platt(cal);
      return {CalibratorModel{f.model}, std::move(f.diagnostics)};
    }
    case GlobalMethod::platt_ovr: return fit_platt_ovr(cal);
    case GlobalMethod::vector_scaling: {
      Fitted<AffineCalibrator> f = fit_affine(cal, AffineStructure::diagonal, AffineInput::logits);
      return {CalibratorModel{std::move(f.model)}, std::move(f.diagnostics)};
    }
    case GlobalMethod::matrix_scaling: {
      Fitted<AffineCalibrator> f = fit_affine(cal, AffineStructure::full, AffineInput::logits);
      return {CalibratorModel{std::move(f.model)}, std::move(f.diagnostics)};
    }
    case GlobalMethod::dirichlet: {
      Fitted<AffineCalibrator> f =
          fit_affine(cal, AffineStructure::full, AffineInput::log_probabilities);
      return {CalibratorModel{std::move(f.model)}, std::move(f.diagnostics)};
    }
    case GlobalMethod::beta: {
      Fitted<BetaCalibrator> f = fit_beta(cal);
      return {CalibratorModel{f.model}, std::move(f.diagnostics)};
    }
    case GlobalMethod::histogram: {
      Fitted<HistogramCalibrator> f = fit_histogram(cal, spec);
      return {CalibratorModel{std::move(f.model)}, std::move(f.diagnostics)};
    }
    case GlobalMethod::isotonic: {
      Fitted<IsotonicCalibrator> f = fit_isotonic(cal);
      return {CalibratorModel{std::move(f.model)}, std::move(f.diagnostics)};
    }
  }
  throw InvalidInputError("unknown calibration method");
}

}  // namespace tempcal
