#include "tempcal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tempcal/prob.hpp"

namespace tempcal {

namespace {

// Compensated accumulator; metric sums over large datasets should not drift.
struct KahanSum {
  double sum = 0.0;
  double c = 0.0;
  void add(double x) {
    double y = x - c;
    double t = sum + y;
    c = (t - sum) - y;
    sum = t;
  }
};

void check_metric_inputs(const std::vector<ProbabilityVector>& probs,
                         const std::vector<int>& labels) {
  if (probs.empty()) throw InvalidInputError("metrics: empty input");
  if (probs.size() != labels.size()) throw InvalidInputError("metrics: probs/labels size mismatch");
  const std::size_t m = probs.front().size();
  if (m < 2) throw InvalidInputError("metrics: fewer than 2 classes");
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i].size() != m) throw InvalidInputError("metrics: inconsistent class count");
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= m) {
      throw InvalidInputError("metrics: label out of range");
    }
  }
}

void check_binning(const BinningSpec& spec) {
  if (spec.num_bins < 1) throw InvalidInputError("metrics: num_bins must be >= 1");
}

}  // namespace

double nll(const std::vector<ProbabilityVector>& probs, const std::vector<int>& labels) {
  check_metric_inputs(probs, labels);
  KahanSum acc;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = clamp_probability(probs[i][static_cast<std::size_t>(labels[i])], kNllClampEps);
    acc.add(-std::log(p));
  }
  return acc.sum / static_cast<double>(probs.size());
}

double brier(const std::vector<ProbabilityVector>& probs, const std::vector<int>& labels) {
  check_metric_inputs(probs, labels);
  KahanSum acc;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    for (std::size_t j = 0; j < probs[i].size(); ++j) {
      const double target = (static_cast<std::size_t>(labels[i]) == j) ? 1.0 : 0.0;
      const double d = probs[i][j] - target;
      acc.add(d * d);
    }
  }
  return acc.sum / static_cast<double>(probs.size());
}

double accuracy(const std::vector<ProbabilityVector>& probs, const std::vector<int>& labels) {
  check_metric_inputs(probs, labels);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (argmax_index(probs[i].p) == static_cast<std::size_t>(labels[i])) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(probs.size());
}

std::vector<BinStats> bin_stats(const std::vector<double>& scores,
                                const std::vector<double>& hits, const BinningSpec& spec) {
  if (scores.empty()) throw InvalidInputError("bin_stats: empty input");
  if (scores.size() != hits.size()) throw InvalidInputError("bin_stats: scores/hits size mismatch");
  check_binning(spec);
  for (double s : scores) {
    if (!(s >= 0.0 && s <= 1.0)) throw InvalidInputError("bin_stats: score outside [0,1]");
  }
  const std::size_t n = scores.size();
  const int k = spec.num_bins;
  std::vector<BinStats> bins(static_cast<std::size_t>(k));
  std::vector<KahanSum> conf(static_cast<std::size_t>(k)), acc(static_cast<std::size_t>(k));

  if (spec.strategy == BinStrategy::equal_width) {
    for (int b = 0; b < k; ++b) {
      bins[static_cast<std::size_t>(b)].lo = static_cast<double>(b) / k;
      bins[static_cast<std::size_t>(b)].hi = static_cast<double>(b + 1) / k;
    }
    for (std::size_t i = 0; i < n; ++i) {
      int b = std::min(k - 1, static_cast<int>(std::floor(scores[i] * k)));
      auto& bin = bins[static_cast<std::size_t>(b)];
      ++bin.count;
      conf[static_cast<std::size_t>(b)].add(scores[i]);
      acc[static_cast<std::size_t>(b)].add(hits[i]);
    }
  } else {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    for (int b = 0; b < k; ++b) {
      const std::size_t lo = static_cast<std::size_t>(b) * n / static_cast<std::size_t>(k);
      const std::size_t hi = static_cast<std::size_t>(b + 1) * n / static_cast<std::size_t>(k);
      auto& bin = bins[static_cast<std::size_t>(b)];
      for (std::size_t i = lo; i < hi; ++i) {
        const std::size_t idx = order[i];
        ++bin.count;
        conf[static_cast<std::size_t>(b)].add(scores[idx]);
        acc[static_cast<std::size_t>(b)].add(hits[idx]);
      }
      if (bin.count > 0) {
        bin.lo = scores[order[lo]];
        bin.hi = scores[order[hi - 1]];
      }
    }
  }

  for (int b = 0; b < k; ++b) {
    auto& bin = bins[static_cast<std::size_t>(b)];
    if (bin.count > 0) {
      bin.confidence = conf[static_cast<std::size_t>(b)].sum / static_cast<double>(bin.count);
      bin.accuracy = acc[static_cast<std::size_t>(b)].sum / static_cast<double>(bin.count);
    }
  }
  return bins;
}

std::vector<BinStats> bin_stats(const std::vector<ProbabilityVector>& probs,
                                const std::vector<int>& labels, const BinningSpec& spec) {
  check_metric_inputs(probs, labels);
  const std::size_t n = probs.size();
  std::vector<double> scores(n), hits(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t am = argmax_index(probs[i].p);
    scores[i] = probs[i][am];
    hits[i] = (am == static_cast<std::size_t>(labels[i])) ? 1.0 : 0.0;
  }
  return bin_stats(scores, hits, spec);
}

double ece(const std::vector<ProbabilityVector>& probs, const std::vector<int>& labels,
           const BinningSpec& spec) {
  check_metric_inputs(probs, labels);
  check_binning(spec);
  const std::size_t n = probs.size();
  const std::vector<BinStats> bins = bin_stats(probs, labels, spec);
  KahanSum total;
  for (const BinStats& bin : bins) {
    if (bin.count == 0) continue;
    total.add(static_cast<double>(bin.count) / static_cast<double>(n) *
              std::abs(bin.accuracy - bin.confidence));
  }
  return total.sum;
}

double classwise_ece(const std::vector<ProbabilityVector>& probs, const std::vector<int>& labels,
                     const BinningSpec& spec) {
  check_metric_inputs(probs, labels);
  check_binning(spec);
  const std::size_t n = probs.size();
  const std::size_t m = probs.front().size();
  KahanSum total;
  std::vector<double> scores(n), hits(n);
  for (std::size_t c = 0; c < m; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = probs[i][c];
      hits[i] = (static_cast<std::size_t>(labels[i]) == c) ? 1.0 : 0.0;
    }
    const std::vector<BinStats> bins = bin_stats(scores, hits, spec);
    KahanSum cls;
    for (const BinStats& bin : bins) {
      if (bin.count == 0) continue;
      cls.add(static_cast<double>(bin.count) / static_cast<double>(n) *
              std::abs(bin.accuracy - bin.confidence));
    }
    total.add(cls.sum);
  }
  return total.sum / static_cast<double>(m);
}

MetricsReport evaluate_probs(const std::vector<ProbabilityVector>& probs,
                             const std::vector<int>& labels, const BinningSpec& spec) {
  MetricsReport rep;
  rep.nll = nll(probs, labels);
  rep.brier = brier(probs, labels);
  rep.ece = ece(probs, labels, spec);
  rep.classwise_ece = classwise_ece(probs, labels, spec);
  rep.accuracy = accuracy(probs, labels);
  rep.n = probs.size();
  rep.binning = spec;
  return rep;
}

std::vector<int> labels_of(const Dataset& ds) {
  std::vector<int> out(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) out[i] = ds.records[i].label;
  return out;
}

std::vector<ProbabilityVector> softmax_probs(const Dataset& ds) {
  std::vector<ProbabilityVector> out(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) out[i] = softmax(ds.records[i].logits);
  return out;
}

MetricsReport evaluate(const Dataset& ds, const BinningSpec& spec) {
  if (ds.empty()) throw InvalidInputError("evaluate: empty dataset");
  return evaluate_probs(softmax_probs(ds), labels_of(ds), spec);
}

}  // namespace tempcal
