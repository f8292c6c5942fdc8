#include "tempcal/io.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace tempcal {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr int kSchemaVersion = 1;

[[noreturn]] void parse_fail(const std::string& name, std::size_t line, const std::string& msg) {
  throw ParseError(name + ":" + std::to_string(line) + ": " + msg);
}

std::string kind_of(const CalibratorModel& model) {
  struct Visitor {
    std::string operator()(const IdentityCalibrator&) const { return "identity"; }
    std::string operator()(const TemperatureCalibrator&) const { return "temperature"; }
    std::string operator()(const PlattCalibrator&) const { return "platt"; }
    std::string operator()(const PlattOvrCalibrator&) const { return "platt_ovr"; }
    std::string operator()(const AffineCalibrator&) const { return "affine"; }
    std::string operator()(const BetaCalibrator&) const { return "beta"; }
    std::string operator()(const HistogramCalibrator&) const { return "histogram"; }
    std::string operator()(const IsotonicCalibrator&) const { return "isotonic"; }
  };
  return std::visit(Visitor{}, model);
}

ordered_json params_of(const CalibratorModel& model) {
  struct Visitor {
    ordered_json operator()(const IdentityCalibrator&) const { return ordered_json::object(); }
    ordered_json operator()(const TemperatureCalibrator& m) const {
      return ordered_json{{"tau", m.tau}};
    }
    ordered_json operator()(const PlattCalibrator& m) const {
      return ordered_json{{"slope", m.slope}, {"intercept", m.intercept}};
    }
    ordered_json operator()(const PlattOvrCalibrator& m) const {
      ordered_json list = ordered_json::array();
      for (const auto& c : m.per_class) {
        list.push_back(ordered_json{{"slope", c.slope}, {"intercept", c.intercept}});
      }
      return ordered_json{{"per_class", std::move(list)}};
    }
    ordered_json operator()(const AffineCalibrator& m) const {
      return ordered_json{
          {"structure", m.structure == AffineStructure::full ? "full" : "diagonal"},
          {"input", m.input == AffineInput::logits ? "logits" : "log_probabilities"},
          {"num_classes", m.num_classes},
          {"weight", m.weight},
          {"bias", m.bias}};
    }
    ordered_json operator()(const BetaCalibrator& m) const {
      return ordered_json{{"slope_pos", m.slope_pos},
                          {"slope_neg", m.slope_neg},
                          {"intercept", m.intercept}};
    }
    ordered_json operator()(const HistogramCalibrator& m) const {
      return ordered_json{{"edges", m.edges}, {"values", m.values}};
    }
    ordered_json operator()(const IsotonicCalibrator& m) const {
      return ordered_json{{"breakpoints", m.breakpoints}, {"levels", m.levels}};
    }
  };
  return std::visit(Visitor{}, model);
}

ordered_json model_to_json(const CalibratorModel& model) {
  return ordered_json{{"kind", kind_of(model)}, {"params", params_of(model)}};
}

std::vector<double> doubles_of(const ordered_json& j) {
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_number()) throw ParseError("expected an array of numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

CalibratorModel model_from_params(const std::string& kind, const ordered_json& params) {
  if (kind == "identity") return IdentityCalibrator{};
  if (kind == "temperature") {
    TemperatureCalibrator m;
    m.tau = params.at("tau").get<double>();
    return m;
  }
  if (kind == "platt") {
    PlattCalibrator m;
    m.slope = params.at("slope").get<double>();
    m.intercept = params.at("intercept").get<double>();
    return m;
  }
  if (kind == "platt_ovr") {
    PlattOvrCalibrator m;
    for (const auto& c : params.at("per_class")) {
      m.per_class.push_back({c.at("slope").get<double>(), c.at("intercept").get<double>()});
    }
    return m;
  }
  if (kind == "affine") {
    AffineCalibrator m;
    const std::string structure = params.at("structure").get<std::string>();
    const std::string input = params.at("input").get<std::string>();
    if (structure != "full" && structure != "diagonal") {
      throw ParseError("unknown affine structure: " + structure);
    }
    if (input != "logits" && input != "log_probabilities") {
      throw ParseError("unknown affine input: " + input);
    }
    m.structure = structure == "full" ? AffineStructure::full : AffineStructure::diagonal;
    m.input = input == "logits" ? AffineInput::logits : AffineInput::log_probabilities;
    m.num_classes = params.at("num_classes").get<int>();
    m.weight = doubles_of(params.at("weight"));
    m.bias = doubles_of(params.at("bias"));
    const auto mm = static_cast<std::size_t>(m.num_classes);
    if (m.num_classes < 2 || m.weight.size() != mm * mm || m.bias.size() != mm) {
      throw ParseError("malformed affine calibrator parameters");
    }
    return m;
  }
  if (kind == "beta") {
    BetaCalibrator m;
    m.slope_pos = params.at("slope_pos").get<double>();
    m.slope_neg = params.at("slope_neg").get<double>();
    m.intercept = params.at("intercept").get<double>();
    return m;
  }
  if (kind == "histogram") {
    HistogramCalibrator m;
    m.edges = doubles_of(params.at("edges"));
    m.values = doubles_of(params.at("values"));
    if (m.edges.size() < 2 || m.values.size() + 1 != m.edges.size()) {
      throw ParseError("malformed histogram calibrator parameters");
    }
    return m;
  }
  if (kind == "isotonic") {
    IsotonicCalibrator m;
    m.breakpoints = doubles_of(params.at("breakpoints"));
    m.levels = doubles_of(params.at("levels"));
    if (m.breakpoints.empty() || m.breakpoints.size() != m.levels.size()) {
      throw ParseError("malformed isotonic calibrator parameters");
    }
    return m;
  }
  throw ParseError("unknown calibrator kind: " + kind);
}

}  // namespace

std::string format_double(double x) {
  return ordered_json(x).dump();
}

RecordReadResult parse_records(std::istream& in, const std::string& name) {
  RecordReadResult out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;

    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const ordered_json::exception& e) {
      parse_fail(name, line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) parse_fail(name, line_no, "expected a JSON object");

    PredictionRecord r;
    try {
      const auto& logits = j.at("logits");
      if (!logits.is_array()) parse_fail(name, line_no, "logits must be an array");
      for (const auto& v : logits) {
        if (!v.is_number()) parse_fail(name, line_no, "logits must be numbers");
        r.logits.push_back(v.get<double>());
      }
      const auto& label = j.at("label");
      if (!label.is_number_integer()) parse_fail(name, line_no, "label must be an integer");
      r.label = label.get<int>();
    } catch (const ordered_json::out_of_range&) {
      parse_fail(name, line_no, "missing required field (logits, label)");
    }

    auto read_number = [&](const char* field) -> std::optional<double> {
      auto it = j.find(field);
      if (it == j.end()) return std::nullopt;
      if (!it->is_number()) parse_fail(name, line_no, std::string(field) + " must be a number");
      return it->get<double>();
    };
    if (auto t = read_number("t")) {
      r.t = *t;
    } else {
      ++out.missing_t_count;
    }
    r.total_len = read_number("total_len");
    r.measure = read_number("measure");
    if (auto it = j.find("run_id"); it != j.end()) {
      if (!it->is_number_integer()) parse_fail(name, line_no, "run_id must be an integer");
      r.run_id = it->get<int>();
    }
    if (auto it = j.find("group_id"); it != j.end()) {
      if (!it->is_string()) parse_fail(name, line_no, "group_id must be a string");
      r.group_id = it->get<std::string>();
    }
    out.data.records.push_back(std::move(r));
  }
  if (!out.data.records.empty()) {
    out.data.num_classes = static_cast<int>(out.data.records.front().logits.size());
  }
  validate_dataset(out.data);
  return out;
}

RecordReadResult read_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open file: " + path);
  return parse_records(in, path);
}

namespace {

ordered_json record_to_json(const PredictionRecord& r) {
  ordered_json j;
  j["logits"] = r.logits;
  j["label"] = r.label;
  j["t"] = r.t;
  if (r.total_len) j["total_len"] = *r.total_len;
  if (r.measure) j["measure"] = *r.measure;
  if (r.run_id) j["run_id"] = *r.run_id;
  if (r.group_id) j["group_id"] = *r.group_id;
  return j;
}

}  // namespace

void write_records(const std::string& path, const Dataset& ds) {
  std::string buf;
  for (const auto& r : ds.records) {
    buf += record_to_json(r).dump();
    buf += '\n';
  }
  write_text_atomic(path, buf);
}

void write_calibrated_records(const std::string& path, const Dataset& ds,
                              const std::vector<ProbabilityVector>& probs) {
  if (ds.size() != probs.size()) {
    throw InvalidInputError("write_calibrated_records: probs/records size mismatch");
  }
  std::string buf;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    ordered_json j = record_to_json(ds.records[i]);
    j["probs"] = probs[i].p;
    buf += j.dump();
    buf += '\n';
  }
  write_text_atomic(path, buf);
}

std::string serialize_calibrator(const CalibratorFile& file) {
  ordered_json j;
  j["schema_version"] = kSchemaVersion;

  if (const auto* global = std::get_if<CalibratorModel>(&file.model)) {
    j["kind"] = kind_of(*global);
    j["params"] = params_of(*global);
  } else if (const auto* discrete = std::get_if<DiscreteTemporalCalibrator>(&file.model)) {
    j["kind"] = "discrete_temporal";
    ordered_json table = ordered_json::array();
    for (const auto& [k, model] : discrete->table) {
      table.push_back(ordered_json{{"key", k}, {"model", model_to_json(model)}});
    }
    j["params"] = ordered_json{{"key", temporal_key_name(discrete->key)},
                               {"fallback", model_to_json(discrete->fallback)},
                               {"table", std::move(table)}};
  } else {
    const auto& sched = std::get<ContinuousTemporalCalibrator>(file.model).schedule;
    j["kind"] = "continuous_temporal";
    j["params"] = ordered_json{{"scale", sched.scale},
                               {"decay_raw", sched.decay_raw},
                               {"limit", sched.limit},
                               {"offset", sched.offset},
                               {"t_max", sched.t_max}};
  }

  j["meta"] = ordered_json{{"method", file.method},
                           {"n", file.n},
                           {"seed", file.seed},
                           {"initial_nll", file.diagnostics.initial_nll},
                           {"final_nll", file.diagnostics.final_nll},
                           {"gradient_norm", file.diagnostics.gradient_norm},
                           {"iterations", file.diagnostics.iterations},
                           {"converged", file.diagnostics.converged},
                           {"warnings", file.diagnostics.warnings}};
  return j.dump();
}

CalibratorFile deserialize_calibrator(const std::string& text, const std::string& name) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const ordered_json::exception& e) {
    throw ParseError(name + ": invalid JSON: " + e.what());
  }

  CalibratorFile out;
  try {
    const auto version = j.at("schema_version").get<int>();
    if (version != kSchemaVersion) {
      throw ParseError(name + ": unsupported schema_version " + std::to_string(version));
    }
    const std::string kind = j.at("kind").get<std::string>();
    const ordered_json& params = j.at("params");

    if (kind == "discrete_temporal") {
      DiscreteTemporalCalibrator model;
      model.key = parse_temporal_key(params.at("key").get<std::string>());
      const ordered_json& fb = params.at("fallback");
      model.fallback =
          model_from_params(fb.at("kind").get<std::string>(), fb.at("params"));
      for (const auto& entry : params.at("table")) {
        const auto key = entry.at("key").get<long long>();
        const ordered_json& mj = entry.at("model");
        model.table[key] = model_from_params(mj.at("kind").get<std::string>(), mj.at("params"));
      }
      out.model = std::move(model);
    } else if (kind == "continuous_temporal") {
      ContinuousTemporalCalibrator model;
      model.schedule.scale = params.at("scale").get<double>();
      model.schedule.decay_raw = params.at("decay_raw").get<double>();
      model.schedule.limit = params.at("limit").get<double>();
      model.schedule.offset = params.at("offset").get<double>();
      model.schedule.t_max = params.at("t_max").get<double>();
      if (!(model.schedule.t_max > 0.0)) {
        throw ParseError(name + ": t_max must be positive");
      }
      out.model = model;
    } else {
      out.model = model_from_params(kind, params);
    }

    if (auto it = j.find("meta"); it != j.end()) {
      const ordered_json& meta = *it;
      out.method = meta.value("method", std::string{});
      out.n = meta.value("n", std::size_t{0});
      out.seed = meta.value("seed", std::uint64_t{0});
      out.diagnostics.initial_nll = meta.value("initial_nll", 0.0);
      out.diagnostics.final_nll = meta.value("final_nll", 0.0);
      out.diagnostics.gradient_norm = meta.value("gradient_norm", 0.0);
      out.diagnostics.iterations = meta.value("iterations", 0);
      out.diagnostics.converged = meta.value("converged", true);
      if (auto w = meta.find("warnings"); w != meta.end()) {
        for (const auto& s : *w) out.diagnostics.warnings.push_back(s.get<std::string>());
      }
    }
  } catch (const ordered_json::exception& e) {
    throw ParseError(name + ": malformed calibrator file: " + e.what());
  }
  return out;
}

void save_calibrator(const std::string& path, const CalibratorFile& file) {
  write_text_atomic(path, serialize_calibrator(file) + "\n");
}

CalibratorFile load_calibrator(const std::string& path) {
  return deserialize_calibrator(read_text(path), path);
}

void write_text_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ParseError("cannot open file for writing: " + tmp);
    out << content;
    out.flush();
    if (!out) throw ParseError("write failed: " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw ParseError("cannot rename " + tmp + " to " + path + ": " + ec.message());
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace tempcal
