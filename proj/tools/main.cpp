#include <cstdint>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "tempcal/harness.hpp"
#include "tempcal/io.hpp"

namespace {

using nlohmann::ordered_json;

struct FitArgs {
  std::string input, output;
  std::string method = "temperature";
  std::string key = "time";
  std::string bin_strategy = "width";
  int bins = 10;
  int min_bin = 50;
  std::uint64_t seed = 0;
  bool json = false;
};

struct ApplyArgs {
  std::string input, calibrator, output;
};

struct EvaluateArgs {
  std::string input, calibrator;
  std::string bin_strategy = "width";
  int bins = 10;
  bool json = false;
};

struct CurveArgs {
  std::string input, calibrator, output;
  std::string bin_strategy = "width";
  int bins = 10;
  int length_bins = 10;
  bool json = false;
};

struct ReliabilityArgs {
  std::string input, calibrator, output;
  int bins = 10;
  bool json = false;
};

struct CompareArgs {
  std::string input, output;
  double alpha = 0.05;
  bool json = false;
};

struct SynthArgs {
  std::string output;
  std::string planted = "temperature";
  std::size_t n = 1000;
  double tau = 1.0;
  std::vector<double> taus;
  std::vector<double> gain;  // scale, decay, limit, offset
  double t_span = 30.0;
  double logit_range = 4.0;
  std::uint64_t seed = 0;
};

tempcal::BinningSpec binning_of(const std::string& strategy, int bins) {
  tempcal::BinningSpec spec;
  spec.strategy = strategy == "freq" ? tempcal::BinStrategy::equal_frequency
                                     : tempcal::BinStrategy::equal_width;
  spec.num_bins = bins;
  return spec;
}

bool wants_time(const tempcal::Calibrator& cal) {
  if (const auto* discrete = std::get_if<tempcal::DiscreteTemporalCalibrator>(&cal)) {
    return discrete->key == tempcal::TemporalKey::time;
  }
  return std::holds_alternative<tempcal::ContinuousTemporalCalibrator>(cal);
}

tempcal::Calibrator load_model(const std::string& path) {
  if (path.empty()) {
    return tempcal::Calibrator{tempcal::CalibratorModel{tempcal::IdentityCalibrator{}}};
  }
  return tempcal::load_calibrator(path).model;
}

std::vector<tempcal::ProbabilityVector> apply_with_warnings(
    const tempcal::Calibrator& cal, const tempcal::RecordReadResult& input) {
  if (input.missing_t_count > 0 && wants_time(cal)) {
    std::cerr << "warning: " << input.missing_t_count
              << " record(s) have no t field; t defaults to 0\n";
  }
  tempcal::ApplyStats stats;
  auto probs = tempcal::apply_dataset(cal, input.data, &stats);
  if (stats.nonpositive_gain > 0) {
    std::cerr << "warning: schedule gain is nonpositive for " << stats.nonpositive_gain
              << " record(s); the predicted class may change\n";
  }
  return probs;
}

void emit_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

void print_report(const ordered_json& j, bool as_json) {
  if (as_json) {
    std::cout << j.dump() << "\n";
    return;
  }
  for (const auto& [key, value] : j.items()) {
    if (value.is_string()) {
      std::cout << key << " " << value.get<std::string>() << "\n";
    } else {
      std::cout << key << " " << value.dump() << "\n";
    }
  }
}

int cmd_fit(const FitArgs& args) {
  const tempcal::RecordReadResult input = tempcal::read_records(args.input);
  const tempcal::BinningSpec spec = binning_of(args.bin_strategy, args.bins);

  tempcal::CalibratorFile file;
  file.method = args.method;
  file.n = input.data.size();
  file.seed = args.seed;

  if (args.method == "temporal-discrete") {
    const tempcal::TemporalKey key = tempcal::parse_temporal_key(args.key);
    if (key == tempcal::TemporalKey::time && input.missing_t_count > 0) {
      std::cerr << "warning: " << input.missing_t_count
                << " record(s) have no t field; t defaults to 0\n";
    }
    auto fitted = tempcal::fit_discrete(input.data, key, tempcal::GlobalMethod::temperature,
                                        args.min_bin, spec);
    file.model = std::move(fitted.model);
    file.diagnostics = std::move(fitted.diagnostics);
  } else if (args.method == "temporal-continuous") {
    if (input.missing_t_count > 0) {
      std::cerr << "warning: " << input.missing_t_count
                << " record(s) have no t field; t defaults to 0\n";
    }
    auto fitted = tempcal::fit_continuous(input.data, std::nullopt, args.seed);
    file.model = std::move(fitted.model);
    file.diagnostics = std::move(fitted.diagnostics);
  } else {
    auto fitted = tempcal::fit_global(input.data, tempcal::parse_global_method(args.method), spec);
    file.model = std::move(fitted.model);
    file.diagnostics = std::move(fitted.diagnostics);
  }

  tempcal::save_calibrator(args.output, file);
  emit_warnings(file.diagnostics.warnings);

  ordered_json summary{{"method", args.method},
                       {"n", file.n},
                       {"nll_before", file.diagnostics.initial_nll},
                       {"nll_after", file.diagnostics.final_nll},
                       {"iterations", file.diagnostics.iterations},
                       {"converged", file.diagnostics.converged},
                       {"output", args.output}};
  print_report(summary, args.json);
  return 0;
}

int cmd_apply(const ApplyArgs& args) {
  const tempcal::RecordReadResult input = tempcal::read_records(args.input);
  const tempcal::Calibrator cal = load_model(args.calibrator);
  const auto probs = apply_with_warnings(cal, input);
  tempcal::write_calibrated_records(args.output, input.data, probs);
  return 0;
}

int cmd_evaluate(const EvaluateArgs& args) {
  const tempcal::RecordReadResult input = tempcal::read_records(args.input);
  const tempcal::Calibrator cal = load_model(args.calibrator);
  const auto probs = apply_with_warnings(cal, input);
  const tempcal::BinningSpec spec = binning_of(args.bin_strategy, args.bins);
  const tempcal::MetricsReport rep =
      tempcal::evaluate_probs(probs, tempcal::labels_of(input.data), spec);

  ordered_json j{{"nll", rep.nll},
                 {"brier", rep.brier},
                 {"ece", rep.ece},
                 {"classwise_ece", rep.classwise_ece},
                 {"accuracy", rep.accuracy},
                 {"n", rep.n}};
  print_report(j, args.json);
  return 0;
}

int cmd_curve(const CurveArgs& args) {
  const tempcal::RecordReadResult input = tempcal::read_records(args.input);
  const tempcal::Calibrator cal = load_model(args.calibrator);
  if (input.missing_t_count > 0) {
    std::cerr << "warning: " << input.missing_t_count
              << " record(s) have no t field; t defaults to 0\n";
  }
  const tempcal::BinningSpec spec = binning_of(args.bin_strategy, args.bins);
  const tempcal::LengthBinnedCurve curve =
      tempcal::ece_by_length(input.data, cal, args.length_bins, spec);

  if (args.json) {
    ordered_json bins = ordered_json::array();
    for (std::size_t b = 0; b < curve.bins.size(); ++b) {
      const auto& bin = curve.bins[b];
      bins.push_back(ordered_json{{"bin_index", b},
                                  {"t_lo", bin.t_lo},
                                  {"t_hi", bin.t_hi},
                                  {"count", bin.count},
                                  {"ece", bin.ece},
                                  {"nll", bin.nll}});
    }
    tempcal::write_text_atomic(args.output, bins.dump() + "\n");
  } else {
    std::string csv = "bin_index,t_lo,t_hi,count,ece,nll\n";
    for (std::size_t b = 0; b < curve.bins.size(); ++b) {
      const auto& bin = curve.bins[b];
      csv += std::to_string(b) + "," + tempcal::format_double(bin.t_lo) + "," +
             tempcal::format_double(bin.t_hi) + "," + std::to_string(bin.count) + "," +
             tempcal::format_double(bin.ece) + "," + tempcal::format_double(bin.nll) + "\n";
    }
    tempcal::write_text_atomic(args.output, csv);
  }
  return 0;
}

int cmd_reliability(const ReliabilityArgs& args) {
  const tempcal::RecordReadResult input = tempcal::read_records(args.input);
  const tempcal::Calibrator cal = load_model(args.calibrator);
  const tempcal::ReliabilityData data =
      tempcal::reliability_data(input.data, cal, args.bins);

  if (args.json) {
    ordered_json bins = ordered_json::array();
    for (std::size_t b = 0; b < data.bins.size(); ++b) {
      const auto& bin = data.bins[b];
      bins.push_back(ordered_json{{"bin_index", b},
                                  {"confidence", bin.confidence},
                                  {"accuracy", bin.accuracy},
                                  {"count", bin.count}});
    }
    tempcal::write_text_atomic(args.output, bins.dump() + "\n");
  } else {
    std::string csv = "bin_index,confidence,accuracy,count\n";
    for (std::size_t b = 0; b < data.bins.size(); ++b) {
      const auto& bin = data.bins[b];
      csv += std::to_string(b) + "," + tempcal::format_double(bin.confidence) + "," +
             tempcal::format_double(bin.accuracy) + "," + std::to_string(bin.count) + "\n";
    }
    tempcal::write_text_atomic(args.output, csv);
  }
  return 0;
}

// Expects a header row of method names and one row of metric values per run.
int cmd_compare(const CompareArgs& args) {
  const std::string text = tempcal::read_text(args.input);
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> methods;
  std::vector<std::vector<double>> values;

  auto split = [](const std::string& s) {
    std::vector<std::string> parts;
    std::string token;
    std::istringstream row(s);
    while (std::getline(row, token, ',')) {
      const auto b = token.find_first_not_of(" \t\r");
      const auto e = token.find_last_not_of(" \t\r");
      parts.push_back(b == std::string::npos ? std::string{} : token.substr(b, e - b + 1));
    }
    return parts;
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::vector<std::string> parts = split(line);
    if (methods.empty()) {
      methods = parts;
      continue;
    }
    std::vector<double> row;
    for (const auto& p : parts) {
      try {
        std::size_t used = 0;
        const double v = std::stod(p, &used);
        if (used != p.size()) throw std::invalid_argument(p);
        row.push_back(v);
      } catch (const std::exception&) {
        throw tempcal::ParseError(args.input + ":" + std::to_string(line_no) +
                                  ": not a number: " + p);
      }
    }
    if (row.size() != methods.size()) {
      throw tempcal::ParseError(args.input + ":" + std::to_string(line_no) +
                                ": expected " + std::to_string(methods.size()) + " values");
    }
    values.push_back(std::move(row));
  }

  const tempcal::RankComparison cmp = tempcal::friedman_nemenyi(methods, values, args.alpha);

  std::string out_text;
  if (args.json) {
    ordered_json j{{"methods", cmp.methods},
                   {"avg_ranks", cmp.avg_ranks},
                   {"mean_values", cmp.mean_values},
                   {"stddev_values", cmp.stddev_values},
                   {"cd", cmp.critical_difference},
                   {"friedman_statistic", cmp.friedman_statistic},
                   {"n_runs", cmp.n_runs}};
    ordered_json best = ordered_json::array();
    for (bool b : cmp.best_group) best.push_back(b);
    j["best_group"] = std::move(best);
    out_text = j.dump() + "\n";
  } else {
    out_text = "method,avg_rank,mean,stddev,in_best_group,cd\n";
    for (std::size_t m = 0; m < cmp.methods.size(); ++m) {
      out_text += cmp.methods[m] + "," + tempcal::format_double(cmp.avg_ranks[m]) + "," +
                  tempcal::format_double(cmp.mean_values[m]) + "," +
                  tempcal::format_double(cmp.stddev_values[m]) + "," +
                  (cmp.best_group[m] ? "1" : "0") + "," +
                  tempcal::format_double(cmp.critical_difference) + "\n";
    }
  }

  if (args.output.empty()) {
    std::cout << out_text;
  } else {
    tempcal::write_text_atomic(args.output, out_text);
    ordered_json summary{{"cd", cmp.critical_difference},
                         {"friedman_statistic", cmp.friedman_statistic},
                         {"n_runs", cmp.n_runs},
                         {"output", args.output}};
    print_report(summary, args.json);
  }
  return 0;
}

int cmd_synth(const SynthArgs& args) {
  tempcal::SyntheticSpec spec;
  spec.n = args.n;
  spec.logit_range = args.logit_range;
  spec.t_span = args.t_span;
  spec.seed = args.seed;
  if (args.planted == "temperature") {
    spec.truth = tempcal::PlantedTemperature{args.tau};
  } else if (args.planted == "steps") {
    if (args.taus.empty()) {
      throw tempcal::InvalidInputError("--taus is required for planted step temperatures");
    }
    spec.truth = tempcal::PlantedStepTable{args.taus};
  } else {
    if (args.gain.size() != 4) {
      throw tempcal::InvalidInputError(
          "--gain requires four values: scale,decay,limit,offset");
    }
    spec.truth = tempcal::PlantedSchedule{args.gain[0], args.gain[1], args.gain[2], args.gain[3]};
  }
  const tempcal::Dataset ds = tempcal::generate_synthetic(spec);
  tempcal::write_records(args.output, ds);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Probability calibration for sequence models: global and "
               "time-conditioned calibrators, metrics, and experiment tooling"};
  app.require_subcommand(1);

  FitArgs fit_args;
  auto* fit = app.add_subcommand("fit", "Fit a calibrator on a records file");
  fit->add_option("--input", fit_args.input, "Records file (one JSON object per line)")
      ->required();
  fit->add_option("--output", fit_args.output, "Calibrator file to write")->required();
  fit->add_option("--method", fit_args.method, "Calibration method")
      ->check(CLI::IsMember({"identity", "temperature", "platt", "platt-ovr", "vector", "matrix",
                             "dirichlet", "beta", "histogram", "isotonic", "temporal-discrete",
                             "temporal-continuous"}));
  fit->add_option("--key", fit_args.key, "Temporal key for discrete tables")
      ->check(CLI::IsMember({"time", "measure"}));
  fit->add_option("--bins", fit_args.bins, "Bin count for histogram fitting")
      ->check(CLI::PositiveNumber);
  fit->add_option("--bin-strategy", fit_args.bin_strategy, "Binning strategy: width or freq")
      ->check(CLI::IsMember({"width", "freq"}));
  fit->add_option("--min-bin", fit_args.min_bin,
                  "Minimum records per timestep group for a dedicated fit")
      ->check(CLI::Range(2, 1000000000));
  fit->add_option("--seed", fit_args.seed, "Random seed for restarts");
  fit->add_flag("--json", fit_args.json, "Print the summary as JSON");

  ApplyArgs apply_args;
  auto* apply_cmd = app.add_subcommand("apply", "Apply a saved calibrator to records");
  apply_cmd->add_option("--input", apply_args.input, "Records file")->required();
  apply_cmd->add_option("--calibrator", apply_args.calibrator, "Calibrator file")->required();
  apply_cmd->add_option("--output", apply_args.output, "Calibrated records file to write")
      ->required();

  EvaluateArgs eval_args;
  auto* evaluate = app.add_subcommand("evaluate", "Score records, optionally calibrated");
  evaluate->add_option("--input", eval_args.input, "Records file")->required();
  evaluate->add_option("--calibrator", eval_args.calibrator,
                       "Calibrator file (omit to score raw softmax outputs)");
  evaluate->add_option("--bins", eval_args.bins, "Bin count for the calibration-error metrics")
      ->check(CLI::PositiveNumber);
  evaluate->add_option("--bin-strategy", eval_args.bin_strategy,
                       "Binning strategy: width or freq")
      ->check(CLI::IsMember({"width", "freq"}));
  evaluate->add_flag("--json", eval_args.json, "Print the report as JSON");

  CurveArgs curve_args;
  auto* curve = app.add_subcommand(
      "curve", "Calibration error by sequence length (equal-frequency length bins). Columns: "
               "bin_index,t_lo,t_hi,count,ece,nll");
  curve->add_option("--input", curve_args.input, "Records file")->required();
  curve->add_option("--calibrator", curve_args.calibrator,
                    "Calibrator file (omit for raw softmax outputs)");
  curve->add_option("--output", curve_args.output, "Curve file to write")->required();
  curve->add_option("--length-bins", curve_args.length_bins, "Number of length bins")
      ->check(CLI::PositiveNumber);
  curve->add_option("--bins", curve_args.bins, "Bin count for the per-length-bin ECE")
      ->check(CLI::PositiveNumber);
  curve->add_option("--bin-strategy", curve_args.bin_strategy,
                    "Binning strategy for the per-length-bin ECE")
      ->check(CLI::IsMember({"width", "freq"}));
  curve->add_flag("--json", curve_args.json, "Write JSON instead of CSV");

  ReliabilityArgs rel_args;
  auto* reliability = app.add_subcommand(
      "reliability", "Reliability diagram data over equal-frequency confidence bins. Columns: "
                     "bin_index,confidence,accuracy,count");
  reliability->add_option("--input", rel_args.input, "Records file")->required();
  reliability->add_option("--calibrator", rel_args.calibrator,
                          "Calibrator file (omit for raw softmax outputs)");
  reliability->add_option("--output", rel_args.output, "Data file to write")->required();
  reliability->add_option("--bins", rel_args.bins, "Number of confidence bins")
      ->check(CLI::PositiveNumber);
  reliability->add_flag("--json", rel_args.json, "Write JSON instead of CSV");

  CompareArgs compare_args;
  auto* compare = app.add_subcommand(
      "compare", "Average-rank comparison of methods from a runs-by-methods value grid. Input: "
                 "CSV with a method-name header, one row of metric values per run (lower is "
                 "better). Columns: method,avg_rank,mean,stddev,in_best_group,cd");
  compare->add_option("--input", compare_args.input, "Value grid CSV")->required();
  compare->add_option("--output", compare_args.output,
                      "Ranking file to write (omit to print to stdout)");
  compare->add_option("--alpha", compare_args.alpha, "Significance level (0.05 only)");
  compare->add_flag("--json", compare_args.json, "Emit JSON instead of CSV");

  SynthArgs synth_args;
  auto* synth = app.add_subcommand(
      "synth", "Generate a synthetic two-class records file with a planted calibration truth");
  synth->add_option("--output", synth_args.output, "Records file to write")->required();
  synth->add_option("--planted", synth_args.planted,
                    "Planted truth: temperature, steps, or schedule")
      ->check(CLI::IsMember({"temperature", "steps", "schedule"}));
  synth->add_option("--n", synth_args.n, "Record count (per step for --planted steps)")
      ->check(CLI::PositiveNumber);
  synth->add_option("--tau", synth_args.tau, "Planted temperature");
  synth->add_option("--taus", synth_args.taus, "Planted per-step temperatures")
      ->delimiter(',');
  synth->add_option("--gain", synth_args.gain,
                    "Planted schedule parameters: scale,decay,limit,offset")
      ->delimiter(',');
  synth->add_option("--t-span", synth_args.t_span, "Time range of generated records");
  synth->add_option("--logit-range", synth_args.logit_range,
                    "Logits drawn uniformly from [-range, range]");
  synth->add_option("--seed", synth_args.seed, "Random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (fit->parsed()) return cmd_fit(fit_args);
    if (apply_cmd->parsed()) return cmd_apply(apply_args);
    if (evaluate->parsed()) return cmd_evaluate(eval_args);
    if (curve->parsed()) return cmd_curve(curve_args);
    if (reliability->parsed()) return cmd_reliability(rel_args);
    if (compare->parsed()) return cmd_compare(compare_args);
    if (synth->parsed()) return cmd_synth(synth_args);
  } catch (const tempcal::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const tempcal::InvalidInputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const tempcal::FitError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
