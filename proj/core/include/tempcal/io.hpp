#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "tempcal/temporal.hpp"

namespace tempcal {

struct RecordReadResult {
  Dataset data;
  std::size_t missing_t_count = 0;  // lines with no explicit t (defaulted to 0)
};

// Line-delimited records: one JSON object per line with fields logits
// (required), label (required), t, total_len, measure, run_id, group_id.
RecordReadResult parse_records(std::istream& in, const std::string& name);
RecordReadResult read_records(const std::string& path);
void write_records(const std::string& path, const Dataset& ds);

// Mirrors the input records and appends the calibrated probability vector.
void write_calibrated_records(const std::string& path, const Dataset& ds,
                              const std::vector<ProbabilityVector>& probs);

struct CalibratorFile {
  Calibrator model = CalibratorModel{IdentityCalibrator{}};
  FitDiagnostics diagnostics;
  std::size_t n = 0;  // records the model was fitted on
  std::uint64_t seed = 0;
  std::string method;
};

std::string serialize_calibrator(const CalibratorFile& file);
CalibratorFile deserialize_calibrator(const std::string& text, const std::string& name);
void save_calibrator(const std::string& path, const CalibratorFile& file);
CalibratorFile load_calibrator(const std::string& path);

// Writes via a temporary file in the same directory, then renames.
void write_text_atomic(const std::string& path, const std::string& content);
std::string read_text(const std::string& path);

// Shortest decimal representation that parses back to the same double.
std::string format_double(double x);

}  // namespace tempcal
