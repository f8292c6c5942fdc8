#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "tempcal/io.hpp"

using namespace tempcal;
namespace fs = std::filesystem;

namespace {

fs::path scratch_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "tempcal_io_tests";
  fs::create_directories(dir);
  return dir / name;
}

template <typename E, typename Fn>
std::string error_message(Fn&& fn) {
  try {
    fn();
  } catch (const E& e) {
    return e.what();
  }
  FAIL("expected an exception");
  return {};
}

bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

}  // namespace

TEST_CASE("records round-trip through files") {
  std::vector<PredictionRecord> recs(3);
  recs[0].logits = {0.1, -2.5};
  recs[0].label = 1;
  recs[0].t = 3.0;
  recs[0].total_len = 10.0;
  recs[0].measure = 0.25;
  recs[0].run_id = 7;
  recs[0].group_id = "seq-a";
  recs[1].logits = {1.0 / 3.0, 0.30000000000000004};
  recs[1].label = 0;
  recs[1].t = 0.0;
  recs[2].logits = {-1e-17, 12345.6789};
  recs[2].label = 1;
  recs[2].t = 9.5;
  recs[2].group_id = "seq-b";
  const Dataset ds = make_dataset(recs);

  const fs::path path = scratch_file("roundtrip.jsonl");
  write_records(path.string(), ds);
  const RecordReadResult back = read_records(path.string());

  CHECK(back.missing_t_count == 0);
  REQUIRE(back.data.size() == ds.size());
  CHECK(back.data.num_classes == 2);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& a = ds.records[i];
    const auto& b = back.data.records[i];
    CHECK(a.logits == b.logits);
    CHECK(a.label == b.label);
    CHECK(a.t == b.t);
    CHECK(a.total_len == b.total_len);
    CHECK(a.measure == b.measure);
    CHECK(a.run_id == b.run_id);
    CHECK(a.group_id == b.group_id);
  }
}

TEST_CASE("missing t values are counted and default to zero") {
  std::istringstream in(
      "{\"logits\":[0,1],\"label\":1,\"t\":2}\n"
      "{\"logits\":[0,1],\"label\":0}\n"
      "\n"
      "{\"logits\":[0,1],\"label\":1}\n");
  const RecordReadResult out = parse_records(in, "mem");
  CHECK(out.missing_t_count == 2);
  REQUIRE(out.data.size() == 3);
  CHECK(out.data.records[1].t == 0.0);
  CHECK(out.data.records[2].t == 0.0);
}

TEST_CASE("record parse errors name the offending line") {
  auto fail_message = [](const std::string& text) {
    return error_message<ParseError>([&] {
      std::istringstream in(text);
      parse_records(in, "input.jsonl");
    });
  };

  SUBCASE("invalid JSON after blank lines") {
    const std::string msg = fail_message("\n\n{not json\n");
    CHECK(contains(msg, "input.jsonl:3:"));
    CHECK(contains(msg, "invalid JSON"));
  }
  SUBCASE("non-object line") {
    CHECK(contains(fail_message("[1,2]\n"), "input.jsonl:1: expected a JSON object"));
  }
  SUBCASE("missing required fields") {
    CHECK(contains(fail_message("{\"logits\":[0,1]}\n"), "input.jsonl:1: missing required field"));
    CHECK(contains(fail_message("{\"label\":0}\n"), "input.jsonl:1: missing required field"));
  }
  SUBCASE("field type errors on the right line") {
    const std::string good = "{\"logits\":[0,1],\"label\":1}\n";
    CHECK(contains(fail_message(good + "{\"logits\":3,\"label\":1}\n"),
                   "input.jsonl:2: logits must be an array"));
    CHECK(contains(fail_message(good + "{\"logits\":[0,\"x\"],\"label\":1}\n"),
                   "input.jsonl:2: logits must be numbers"));
    CHECK(contains(fail_message(good + "{\"logits\":[0,1],\"label\":0.5}\n"),
                   "input.jsonl:2: label must be an integer"));
    CHECK(contains(fail_message(good + "{\"logits\":[0,1],\"label\":1,\"t\":\"x\"}\n"),
                   "input.jsonl:2: t must be a number"));
    CHECK(contains(fail_message(good + "{\"logits\":[0,1],\"label\":1,\"run_id\":1.5}\n"),
                   "input.jsonl:2: run_id must be an integer"));
    CHECK(contains(fail_message(good + "{\"logits\":[0,1],\"label\":1,\"group_id\":4}\n"),
                   "input.jsonl:2: group_id must be a string"));
  }
  SUBCASE("semantic problems surface as invalid input") {
    std::istringstream in(
        "{\"logits\":[0,1],\"label\":1}\n"
        "{\"logits\":[0,1,2],\"label\":1}\n");
    CHECK_THROWS_AS(parse_records(in, "mem"), InvalidInputError);
    std::istringstream bad_label("{\"logits\":[0,1],\"label\":5}\n");
    CHECK_THROWS_AS(parse_records(bad_label, "mem"), InvalidInputError);
  }
  SUBCASE("missing file") {
    CHECK(contains(error_message<ParseError>(
                       [] { read_records("/nonexistent/records.jsonl"); }),
                   "cannot open"));
  }
}

TEST_CASE("calibrated record output appends the probability vector") {
  std::vector<PredictionRecord> recs(2);
  recs[0].logits = {0.0, 1.0};
  recs[0].label = 1;
  recs[1].logits = {2.0, -1.0};
  recs[1].label = 0;
  const Dataset ds = make_dataset(recs);
  const std::vector<ProbabilityVector> probs{{{0.25, 0.75}}, {{0.9, 0.1}}};

  const fs::path path = scratch_file("calibrated.jsonl");
  write_calibrated_records(path.string(), ds, probs);

  std::istringstream lines(read_text(path.string()));
  std::string line;
  std::size_t i = 0;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    const auto parsed = j.at("probs").get<std::vector<double>>();
    CHECK(parsed == probs[i].p);
    CHECK(j.at("label").get<int>() == ds.records[i].label);
    ++i;
  }
  CHECK(i == 2);

  CHECK_THROWS_AS(write_calibrated_records(path.string(), ds, {probs[0]}), InvalidInputError);
}

namespace {

CalibratorFile file_with(Calibrator model) {
  CalibratorFile f;
  f.model = std::move(model);
  f.method = "unit-test";
  f.n = 321;
  f.seed = 99;
  f.diagnostics.initial_nll = 0.7;
  f.diagnostics.final_nll = 0.6931471805599453;
  f.diagnostics.gradient_norm = 1.25e-9;
  f.diagnostics.iterations = 17;
  f.diagnostics.converged = false;
  f.diagnostics.warnings = {"first warning", "second"};
  return f;
}

CalibratorFile roundtrip(const CalibratorFile& f) {
  return deserialize_calibrator(serialize_calibrator(f), "mem");
}

}  // namespace

TEST_CASE("calibrator files round-trip every model kind exactly") {
  SUBCASE("identity") {
    const CalibratorFile back = roundtrip(file_with(CalibratorModel{IdentityCalibrator{}}));
    CHECK(std::holds_alternative<IdentityCalibrator>(std::get<CalibratorModel>(back.model)));
    CHECK(back.method == "unit-test");
    CHECK(back.n == 321);
    CHECK(back.seed == 99);
    CHECK(back.diagnostics.initial_nll == 0.7);
    CHECK(back.diagnostics.final_nll == 0.6931471805599453);
    CHECK(back.diagnostics.gradient_norm == 1.25e-9);
    CHECK(back.diagnostics.iterations == 17);
    CHECK(back.diagnostics.converged == false);
    CHECK(back.diagnostics.warnings == std::vector<std::string>{"first warning", "second"});
  }
  SUBCASE("temperature") {
    const CalibratorFile back =
        roundtrip(file_with(CalibratorModel{TemperatureCalibrator{1.7320508075688772}}));
    CHECK(std::get<TemperatureCalibrator>(std::get<CalibratorModel>(back.model)).tau ==
          1.7320508075688772);
  }
  SUBCASE("platt") {
    const CalibratorFile back =
        roundtrip(file_with(CalibratorModel{PlattCalibrator{0.1, -2.0 / 3.0}}));
    const auto& m = std::get<PlattCalibrator>(std::get<CalibratorModel>(back.model));
    CHECK(m.slope == 0.1);
    CHECK(m.intercept == -2.0 / 3.0);
  }
  SUBCASE("platt one-vs-rest") {
    PlattOvrCalibrator ovr;
    ovr.per_class = {{1.1, 0.0}, {0.9, -0.3}, {1.000000000000001, 1e-300}};
    const CalibratorFile back = roundtrip(file_with(CalibratorModel{ovr}));
    const auto& m = std::get<PlattOvrCalibrator>(std::get<CalibratorModel>(back.model));
    REQUIRE(m.per_class.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(m.per_class[i].slope == ovr.per_class[i].slope);
      CHECK(m.per_class[i].intercept == ovr.per_class[i].intercept);
    }
  }
  SUBCASE("affine") {
    AffineCalibrator aff;
    aff.num_classes = 2;
    aff.structure = AffineStructure::diagonal;
    aff.input = AffineInput::log_probabilities;
    aff.weight = {1.4142135623730951, 0.0, 0.0, 0.30000000000000004};
    aff.bias = {-0.1, 0.1};
    const CalibratorFile back = roundtrip(file_with(CalibratorModel{aff}));
    const auto& m = std::get<AffineCalibrator>(std::get<CalibratorModel>(back.model));
    CHECK(m.num_classes == 2);
    CHECK(m.structure == AffineStructure::diagonal);
    CHECK(m.input == AffineInput::log_probabilities);
    CHECK(m.weight == aff.weight);
    CHECK(m.bias == aff.bias);
  }
  SUBCASE("beta") {
    const CalibratorFile back =
        roundtrip(file_with(CalibratorModel{BetaCalibrator{0.5, 1.5, 1e-17}}));
    const auto& m = std::get<BetaCalibrator>(std::get<CalibratorModel>(back.model));
    CHECK(m.slope_pos == 0.5);
    CHECK(m.slope_neg == 1.5);
    CHECK(m.intercept == 1e-17);
  }
  SUBCASE("histogram") {
    HistogramCalibrator hist;
    hist.edges = {0.0, 0.25, 0.5, 0.75, 1.0};
    hist.values = {0.1, 0.4, 0.6, 0.9};
    const CalibratorFile back = roundtrip(file_with(CalibratorModel{hist}));
    const auto& m = std::get<HistogramCalibrator>(std::get<CalibratorModel>(back.model));
    CHECK(m.edges == hist.edges);
    CHECK(m.values == hist.values);
  }
  SUBCASE("isotonic") {
    IsotonicCalibrator iso;
    iso.breakpoints = {-3.0, -0.5, 2.0};
    iso.levels = {0.2, 0.2, 0.8};
    const CalibratorFile back = roundtrip(file_with(CalibratorModel{iso}));
    const auto& m = std::get<IsotonicCalibrator>(std::get<CalibratorModel>(back.model));
    CHECK(m.breakpoints == iso.breakpoints);
    CHECK(m.levels == iso.levels);
  }
  SUBCASE("discrete temporal") {
    DiscreteTemporalCalibrator disc;
    disc.key = TemporalKey::measure;
    disc.fallback = TemperatureCalibrator{1.25};
    disc.table[3] = TemperatureCalibrator{0.5};
    disc.table[7] = PlattCalibrator{1.5, -0.25};
    const CalibratorFile back = roundtrip(file_with(Calibrator{disc}));
    const auto& m = std::get<DiscreteTemporalCalibrator>(back.model);
    CHECK(m.key == TemporalKey::measure);
    CHECK(std::get<TemperatureCalibrator>(m.fallback).tau == 1.25);
    REQUIRE(m.table.size() == 2);
    CHECK(std::get<TemperatureCalibrator>(m.table.at(3)).tau == 0.5);
    CHECK(std::get<PlattCalibrator>(m.table.at(7)).slope == 1.5);
    CHECK(std::get<PlattCalibrator>(m.table.at(7)).intercept == -0.25);
  }
  SUBCASE("continuous temporal") {
    ContinuousTemporalCalibrator cont;
    cont.schedule = {0.8, 1.2000000000000002, 1.9, -0.05, 30.0};
    const CalibratorFile back = roundtrip(file_with(Calibrator{cont}));
    const auto& s = std::get<ContinuousTemporalCalibrator>(back.model).schedule;
    CHECK(s.scale == 0.8);
    CHECK(s.decay_raw == 1.2000000000000002);
    CHECK(s.limit == 1.9);
    CHECK(s.offset == -0.05);
    CHECK(s.t_max == 30.0);
  }
}

TEST_CASE("calibrator files survive disk and a second serialization") {
  DiscreteTemporalCalibrator disc;
  disc.table[1] = TemperatureCalibrator{2.0};
  disc.fallback = TemperatureCalibrator{1.1};
  const CalibratorFile file = file_with(Calibrator{disc});

  const fs::path path = scratch_file("model.json");
  save_calibrator(path.string(), file);
  const CalibratorFile back = load_calibrator(path.string());
  CHECK(serialize_calibrator(back) == serialize_calibrator(file));
}

TEST_CASE("calibrator file rejection") {
  SUBCASE("unsupported schema version") {
    const std::string msg = error_message<ParseError>([] {
      deserialize_calibrator(R"({"schema_version":2,"kind":"identity","params":{}})", "m");
    });
    CHECK(contains(msg, "unsupported schema_version 2"));
  }
  SUBCASE("missing schema version") {
    CHECK_THROWS_AS(deserialize_calibrator(R"({"kind":"identity","params":{}})", "m"),
                    ParseError);
  }
  SUBCASE("unknown kind") {
    const std::string msg = error_message<ParseError>([] {
      deserialize_calibrator(R"({"schema_version":1,"kind":"mystery","params":{}})", "m");
    });
    CHECK(contains(msg, "unknown calibrator kind: mystery"));
  }
  SUBCASE("invalid JSON") {
    CHECK_THROWS_AS(deserialize_calibrator("{truncated", "m"), ParseError);
  }
  SUBCASE("nonpositive schedule horizon") {
    const std::string text =
        R"({"schema_version":1,"kind":"continuous_temporal",)"
        R"("params":{"scale":1,"decay_raw":1,"limit":2,"offset":0,"t_max":0}})";
    const std::string msg =
        error_message<ParseError>([&] { deserialize_calibrator(text, "m"); });
    CHECK(contains(msg, "t_max must be positive"));
  }
  SUBCASE("malformed parameter blocks") {
    CHECK_THROWS_AS(
        deserialize_calibrator(
            R"({"schema_version":1,"kind":"temperature","params":{}})", "m"),
        ParseError);
    CHECK_THROWS_AS(
        deserialize_calibrator(
            R"({"schema_version":1,"kind":"affine","params":{"structure":"full",)"
            R"("input":"logits","num_classes":2,"weight":[1,0,0],"bias":[0,0]}})",
            "m"),
        ParseError);
    CHECK_THROWS_AS(
        deserialize_calibrator(
            R"({"schema_version":1,"kind":"histogram","params":{"edges":[0,1],)"
            R"("values":[0.5,0.6]}})",
            "m"),
        ParseError);
    CHECK_THROWS_AS(
        deserialize_calibrator(
            R"({"schema_version":1,"kind":"isotonic","params":{"breakpoints":[],)"
            R"("levels":[]}})",
            "m"),
        ParseError);
    CHECK_THROWS_AS(
        deserialize_calibrator(
            R"({"schema_version":1,"kind":"affine","params":{"structure":"fancy",)"
            R"("input":"logits","num_classes":2,"weight":[1,0,0,1],"bias":[0,0]}})",
            "m"),
        ParseError);
  }
  SUBCASE("meta block is optional") {
    const CalibratorFile f = deserialize_calibrator(
        R"({"schema_version":1,"kind":"identity","params":{}})", "m");
    CHECK(f.method.empty());
    CHECK(f.n == 0);
    CHECK(f.diagnostics.converged == true);
  }
}

TEST_CASE("atomic writes leave no temporary behind") {
  const fs::path path = scratch_file("atomic.txt");
  write_text_atomic(path.string(), "line one\nline two\n");
  CHECK(read_text(path.string()) == "line one\nline two\n");
  CHECK_FALSE(fs::exists(path.string() + ".tmp"));

  write_text_atomic(path.string(), "replaced");
  CHECK(read_text(path.string()) == "replaced");

  CHECK_THROWS_AS(write_text_atomic("/nonexistent-dir/out.txt", "x"), ParseError);
  CHECK_THROWS_AS(read_text("/nonexistent-dir/out.txt"), ParseError);
}

TEST_CASE("shortest round-trip double formatting") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(0.5) == "0.5");
  CHECK(format_double(2.0) == "2.0");
  CHECK(format_double(0.30000000000000004) != format_double(0.3));

  const std::vector<double> probes{0.1,
                                   1.0 / 3.0,
                                   0.6931471805599453,
                                   1e300,
                                   5e-324,
                                   -123456.789,
                                   1.7976931348623157e308,
                                   2.2250738585072014e-308};
  for (double x : probes) {
    const std::string s = format_double(x);
    CHECK(std::strtod(s.c_str(), nullptr) == x);
  }
}
