#include "tempcal/prob.hpp"

#include <algorithm>
#include <cmath>

namespace tempcal {

namespace {

void require_finite(std::span<const double> values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw InvalidInputError(std::string(what) + ": non-finite entry");
    }
  }
}

}  // namespace

bool is_valid_probability_vector(const ProbabilityVector& v, double tol) {
  if (v.p.empty()) return false;
  double sum = 0.0;
  for (double x : v.p) {
    if (!(x >= 0.0 && x <= 1.0)) return false;
    sum += x;
  }
  return std::abs(sum - 1.0) <= tol;
}

ProbabilityVector softmax(std::span<const double> logits) {
  if (logits.empty()) throw InvalidInputError("softmax: empty logits");
  require_finite(logits, "softmax");
  const double m = *std::max_element(logits.begin(), logits.end());
  ProbabilityVector out;
  out.p.resize(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out.p[i] = std::exp(logits[i] - m);
    sum += out.p[i];
  }
  for (double& x : out.p) x /= sum;
  return out;
}

std::vector<double> log_softmax(std::span<const double> logits) {
  if (logits.empty()) throw InvalidInputError("log_softmax: empty logits");
  require_finite(logits, "log_softmax");
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - m);
  const double lse = m + std::log(sum);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

double binary_sigmoid(double z) {
  if (!std::isfinite(z)) throw InvalidInputError("binary_sigmoid: non-finite input");
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::vector<double> to_onehot(int label, int num_classes) {
  if (num_classes < 1 || label < 0 || label >= num_classes) {
    throw InvalidInputError("to_onehot: label out of range");
  }
  std::vector<double> out(static_cast<std::size_t>(num_classes), 0.0);
  out[static_cast<std::size_t>(label)] = 1.0;
  return out;
}

double clamp_probability(double p, double eps) {
  if (!(eps > 0.0 && eps < 0.5)) throw InvalidInputError("clamp_probability: eps outside (0, 0.5)");
  return std::min(1.0 - eps, std::max(eps, p));
}

std::size_t argmax_index(std::span<const double> values) {
  if (values.empty()) throw InvalidInputError("argmax_index: empty input");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

Dataset make_dataset(std::vector<PredictionRecord> records) {
  Dataset ds;
  ds.records = std::move(records);
  ds.num_classes = ds.records.empty() ? 0 : static_cast<int>(ds.records.front().logits.size());
  validate_dataset(ds);
  return ds;
}

void validate_dataset(const Dataset& ds) {
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const PredictionRecord& r = ds.records[i];
    const std::string at = "record " + std::to_string(i);
    if (r.logits.size() < 2) throw InvalidInputError(at + ": fewer than 2 logits");
    if (static_cast<int>(r.logits.size()) != ds.num_classes) {
      throw InvalidInputError(at + ": inconsistent logits length");
    }
    for (double z : r.logits) {
      if (!std::isfinite(z)) throw InvalidInputError(at + ": non-finite logit");
    }
    if (r.label < 0 || r.label >= ds.num_classes) throw InvalidInputError(at + ": label out of range");
    if (!(r.t >= 0.0)) throw InvalidInputError(at + ": negative t");
    if (r.total_len && r.t > *r.total_len) throw InvalidInputError(at + ": t exceeds total_len");
  }
}

}  // namespace tempcal
