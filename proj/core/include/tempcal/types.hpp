#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace tempcal {

// Malformed in-memory input: bad dimensions, out-of-range values, empty data.
class InvalidInputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A file could not be parsed; the message carries file name and line number.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A fit was degenerate (single-class data, missing class) or the optimizer
// failed outright.
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One model output: raw logits, the true label, and temporal metadata.
struct PredictionRecord {
  std::vector<double> logits;
  int label = 0;
  double t = 0.0;                       // sequence time/length at prediction
  std::optional<double> total_len;      // full sequence length, if known
  std::optional<double> measure;        // alternative completion measure
  std::optional<int> run_id;
  std::optional<std::string> group_id;  // source sequence identity
};

/// A discrete distribution over classes. Entries lie in [0,1] and sum to 1.
struct ProbabilityVector {
  std::vector<double> p;

  std::size_t size() const { return p.size(); }
  double operator[](std::size_t i) const { return p[i]; }
};

bool is_valid_probability_vector(const ProbabilityVector& v, double tol = 1e-9);

struct Dataset {
  std::vector<PredictionRecord> records;
  int num_classes = 0;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
};

/// Builds a dataset from records, inferring num_classes.
/// Throws InvalidInputError on inconsistent or invalid records.
Dataset make_dataset(std::vector<PredictionRecord> records);

/// Checks every dataset invariant: consistent finite logits of length >= 2,
/// labels in range, t >= 0 and t <= total_len where present.
void validate_dataset(const Dataset& ds);

}  // namespace tempcal
