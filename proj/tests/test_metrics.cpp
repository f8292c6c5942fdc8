#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "tempcal/metrics.hpp"
#include "tempcal/prob.hpp"

using namespace tempcal;

namespace {

ProbabilityVector pv(std::vector<double> p) { return ProbabilityVector{std::move(p)}; }

// Random binary probability vectors with labels drawn at the stated hit rate.
void random_case(std::mt19937_64& rng, std::size_t n, std::vector<ProbabilityVector>& probs,
                 std::vector<int>& labels) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  probs.clear();
  labels.clear();
  for (std::size_t i = 0; i < n; ++i) {
    const double q = unif(rng);
    probs.push_back(pv({1.0 - q, q}));
    labels.push_back(unif(rng) < q ? 1 : 0);
  }
}

}  // namespace

TEST_CASE("nll worked examples") {
  CHECK(nll({pv({0.5, 0.5})}, {0}) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(nll({pv({1.0, 0.0})}, {0}) <= 1e-11);
  const double expected = -(std::log(0.8) + std::log(0.6)) / 2.0;
  CHECK(std::abs(nll({pv({0.8, 0.2}), pv({0.4, 0.6})}, {0, 1}) - expected) < 1e-12);
}

TEST_CASE("nll clamps the zero-probability case") {
  const double v = nll({pv({0.0, 1.0})}, {0});
  CHECK(std::isfinite(v));
  CHECK(v == doctest::Approx(-std::log(1e-12)).epsilon(1e-9));
}

TEST_CASE("brier worked examples") {
  CHECK(brier({pv({1.0, 0.0})}, {0}) == 0.0);
  CHECK(std::abs(brier({pv({0.7, 0.3})}, {0}) - 0.18) < 1e-12);
  CHECK(brier({pv({0.5, 0.5})}, {1}) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("accuracy worked examples and tie-break") {
  CHECK(accuracy({pv({0.9, 0.1})}, {0}) == 1.0);
  CHECK(accuracy({pv({0.5, 0.5})}, {1}) == 0.0);
  CHECK(accuracy({pv({0.9, 0.1}), pv({0.9, 0.1})}, {0, 1}) == 0.5);
}

TEST_CASE("metrics reject empty or mismatched input") {
  CHECK_THROWS_AS(nll({}, {}), InvalidInputError);
  CHECK_THROWS_AS(brier({}, {}), InvalidInputError);
  CHECK_THROWS_AS(accuracy({}, {}), InvalidInputError);
  CHECK_THROWS_AS(nll({pv({0.5, 0.5})}, {0, 1}), InvalidInputError);
  CHECK_THROWS_AS(ece({pv({0.5, 0.5})}, {0, 1}, {}), InvalidInputError);
}

TEST_CASE("bin_stats equal-width hand example") {
  const std::vector<ProbabilityVector> probs{pv({0.9, 0.1}), pv({0.8, 0.2}), pv({0.6, 0.4}),
                                             pv({0.7, 0.3})};
  const std::vector<int> labels{0, 0, 1, 1};
  const BinningSpec spec{BinStrategy::equal_width, 2};
  const std::vector<BinStats> bins = bin_stats(probs, labels, spec);
  REQUIRE(bins.size() == 2);
  CHECK(bins[0].count == 0);
  CHECK(bins[1].count == 4);
  CHECK(bins[1].confidence == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(bins[1].accuracy == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("bin_stats equal-frequency edge cases") {
  std::mt19937_64 rng(11);
  std::vector<ProbabilityVector> probs;
  std::vector<int> labels;
  random_case(rng, 17, probs, labels);

  SUBCASE("one bin holds everything") {
    const auto bins = bin_stats(probs, labels, {BinStrategy::equal_frequency, 1});
    REQUIRE(bins.size() == 1);
    CHECK(bins[0].count == probs.size());
  }
  SUBCASE("n bins hold one record each") {
    const auto bins =
        bin_stats(probs, labels, {BinStrategy::equal_frequency, static_cast<int>(probs.size())});
    for (const auto& b : bins) {
      CHECK(b.count == 1);
      CHECK((b.accuracy == 0.0 || b.accuracy == 1.0));
    }
  }
  SUBCASE("bin sizes differ by at most one") {
    for (int k : {2, 3, 5, 7, 16}) {
      const auto bins = bin_stats(probs, labels, {BinStrategy::equal_frequency, k});
      std::size_t lo = probs.size(), hi = 0;
      for (const auto& b : bins) {
        lo = std::min(lo, b.count);
        hi = std::max(hi, b.count);
      }
      CHECK(hi - lo <= 1);
    }
  }
}

TEST_CASE("ece hand example") {
  const std::vector<ProbabilityVector> probs{pv({0.9, 0.1}), pv({0.8, 0.2}), pv({0.6, 0.4}),
                                             pv({0.7, 0.3})};
  const std::vector<int> labels{0, 0, 1, 1};
  CHECK(std::abs(ece(probs, labels, {BinStrategy::equal_width, 2}) - 0.25) < 1e-12);
}

TEST_CASE("ece is zero at the calibration fixed point") {
  // Five records at confidence 0.6 with three hits: bin accuracy equals bin
  // confidence exactly.
  std::vector<ProbabilityVector> probs(5, pv({0.6, 0.4}));
  const std::vector<int> labels{0, 0, 0, 1, 1};
  CHECK(ece(probs, labels, {BinStrategy::equal_width, 2}) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("ece of perfectly confident correct predictions is zero") {
  std::vector<ProbabilityVector> probs(6, pv({1.0, 0.0}));
  const std::vector<int> labels(6, 0);
  CHECK(ece(probs, labels, {BinStrategy::equal_width, 10}) == 0.0);
}

TEST_CASE("ece with one equal-frequency bin reduces to accuracy-confidence gap") {
  std::mt19937_64 rng(5);
  std::vector<ProbabilityVector> probs;
  std::vector<int> labels;
  for (int trial = 0; trial < 10; ++trial) {
    random_case(rng, 40, probs, labels);
    double conf = 0.0;
    for (const auto& p : probs) conf += std::max(p[0], p[1]);
    conf /= static_cast<double>(probs.size());
    const double acc = accuracy(probs, labels);
    const double e = ece(probs, labels, {BinStrategy::equal_frequency, 1});
    CHECK(e == doctest::Approx(std::abs(acc - conf)).epsilon(1e-12));
  }
}

TEST_CASE("equal-width ece is permutation invariant") {
  std::mt19937_64 rng(7);
  std::vector<ProbabilityVector> probs;
  std::vector<int> labels;
  random_case(rng, 60, probs, labels);
  const double before = ece(probs, labels, {BinStrategy::equal_width, 10});

  std::vector<std::size_t> order(probs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<ProbabilityVector> probs2;
  std::vector<int> labels2;
  for (std::size_t i : order) {
    probs2.push_back(probs[i]);
    labels2.push_back(labels[i]);
  }
  CHECK(ece(probs2, labels2, {BinStrategy::equal_width, 10}) ==
        doctest::Approx(before).epsilon(1e-12));
}

TEST_CASE("metric ranges on random data") {
  std::mt19937_64 rng(13);
  std::vector<ProbabilityVector> probs;
  std::vector<int> labels;
  for (int trial = 0; trial < 20; ++trial) {
    random_case(rng, 30, probs, labels);
    CHECK(nll(probs, labels) >= 0.0);
    const double e = ece(probs, labels, {BinStrategy::equal_width, 10});
    CHECK(e >= 0.0);
    CHECK(e <= 1.0);
    const double b = brier(probs, labels);
    CHECK(b >= 0.0);
    CHECK(b <= 2.0);
  }
}

TEST_CASE("classwise ece hand example") {
  std::vector<ProbabilityVector> probs(4, pv({0.7, 0.3}));
  const std::vector<int> labels{0, 0, 1, 1};
  CHECK(std::abs(classwise_ece(probs, labels, {BinStrategy::equal_width, 10}) - 0.2) < 1e-12);
}

TEST_CASE("classwise ece of confident correct predictions is zero") {
  std::vector<ProbabilityVector> probs(5, pv({1.0, 0.0}));
  const std::vector<int> labels(5, 0);
  CHECK(classwise_ece(probs, labels, {BinStrategy::equal_width, 10}) ==
        doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("brier is minimized by the empirical rate among constant predictions") {
  const std::vector<int> labels{1, 0, 1, 1, 0, 1, 1, 0, 1, 1};
  double base_rate = 0.0;
  for (int y : labels) base_rate += y;
  base_rate /= static_cast<double>(labels.size());

  auto constant_brier = [&](double q) {
    std::vector<ProbabilityVector> probs(labels.size(), pv({1.0 - q, q}));
    return brier(probs, labels);
  };
  const double at_rate = constant_brier(base_rate);
  for (int i = 0; i <= 100; ++i) {
    CHECK(at_rate <= constant_brier(i / 100.0) + 1e-12);
  }
}

TEST_CASE("evaluate on the uniform single record") {
  PredictionRecord r;
  r.logits = {0.0, 0.0};
  r.label = 0;
  const Dataset ds = make_dataset({r});
  const MetricsReport rep = evaluate(ds, {BinStrategy::equal_width, 1});
  CHECK(rep.nll == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(rep.brier == doctest::Approx(0.5).epsilon(1e-14));
  // The tie-break counts the prediction as class 0, so the record is correct
  // and the single bin's accuracy-confidence gap is 0.5.
  CHECK(rep.accuracy == 1.0);
  CHECK(rep.ece == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(rep.n == 1);
}

TEST_CASE("evaluate on perfectly confident correct predictions") {
  std::vector<PredictionRecord> recs(4);
  for (auto& r : recs) {
    r.logits = {40.0, 0.0};
    r.label = 0;
  }
  const MetricsReport rep = evaluate(make_dataset(recs));
  CHECK(rep.nll < 1e-11);
  CHECK(rep.brier < 1e-11);
  CHECK(rep.ece < 1e-11);
  CHECK(rep.accuracy == 1.0);
}

TEST_CASE("evaluate is invariant to record order") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unif(-3.0, 3.0);
  std::vector<PredictionRecord> recs(25);
  for (auto& r : recs) {
    r.logits = {unif(rng), unif(rng)};
    r.label = unif(rng) > 0.0 ? 1 : 0;
  }
  const MetricsReport a = evaluate(make_dataset(recs));
  std::shuffle(recs.begin(), recs.end(), rng);
  const MetricsReport b = evaluate(make_dataset(recs));
  CHECK(a.nll == doctest::Approx(b.nll).epsilon(1e-12));
  CHECK(a.brier == doctest::Approx(b.brier).epsilon(1e-12));
  CHECK(a.ece == doctest::Approx(b.ece).epsilon(1e-12));
  CHECK(a.accuracy == b.accuracy);
}
