#include "fedleak/fed/transcript.h"

#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>

#include "fedleak/error.h"

namespace fedleak::fed {

using nlohmann::json;

std::string_view to_string(RecordKind kind) {
  return kind == RecordKind::kGradient ? "gradient" : "delta";
}

RecordKind parse_record_kind(std::string_view name) {
  if (name == "gradient") return RecordKind::kGradient;
  if (name == "delta") return RecordKind::kDelta;
  throw FormatError("unknown record kind '" + std::string(name) + "'");
}

void GradientTranscript::append(TranscriptRecord record) {
  if (!records_.empty()) {
    const auto& last = records_.back();
    if (record.round < last.round || (record.round == last.round && record.step < last.step)) {
      throw ConfigError("transcript records must be appended in time order");
    }
  }
  records_.push_back(std::move(record));
}

GradientTranscript GradientTranscript::attack_view() const {
  GradientTranscript view;
  view.records_ = records_;
  for (auto& r : view.records_) r.evaluation.reset();
  return view;
}

namespace {

json tensor_json(const nn::Tensor& t) {
  return json{{"shape", t.shape()}, {"values", t.data()}};
}

nn::Tensor tensor_from(const json& j) {
  auto shape = j.at("shape").get<nn::Shape>();
  auto values = j.at("values").get<std::vector<double>>();
  if (shape.empty() && values.empty()) return {};
  return nn::Tensor(std::move(shape), std::move(values));
}

json layers_json(const std::vector<nn::LayerTensors>& layers) {
  json arr = json::array();
  for (const auto& l : layers) {
    arr.push_back(json{{"weight", tensor_json(l.weight)}, {"bias", tensor_json(l.bias)}});
  }
  return arr;
}

std::vector<nn::LayerTensors> layers_from(const json& j) {
  std::vector<nn::LayerTensors> out;
  for (const auto& l : j) out.push_back({tensor_from(l.at("weight")), tensor_from(l.at("bias"))});
  return out;
}

json record_json(const TranscriptRecord& r, bool include_evaluation) {
  json mask = json::array();
  for (const auto& m : r.update.mask) mask.push_back(json{{"weight", m.weight}, {"bias", m.bias}});
  json j{
      {"round", r.round},
      {"step", r.step},
      {"client", r.client},
      {"kind", to_string(r.kind)},
      {"batch_size", r.batch_size},
      {"update",
       {{"mechanism", r.update.mechanism},
        {"strength", r.update.strength},
        {"step", r.update.step},
        {"layers", layers_json(r.update.gradients.layers)},
        {"mask", mask}}},
      {"public_params", layers_json(r.public_params.layers)},
  };
  if (include_evaluation && r.evaluation) {
    json inputs = json::array();
    for (const auto& x : r.evaluation->inputs) inputs.push_back(tensor_json(x));
    j["evaluation"] = json{{"inputs", inputs},
                           {"labels", r.evaluation->labels},
                           {"clean", layers_json(r.evaluation->clean.layers)}};
  }
  return j;
}

TranscriptRecord record_from(const json& j) {
  TranscriptRecord r;
  r.round = j.at("round").get<std::size_t>();
  r.step = j.at("step").get<std::size_t>();
  r.client = j.at("client").get<std::size_t>();
  r.kind = parse_record_kind(j.at("kind").get<std::string>());
  r.batch_size = j.at("batch_size").get<std::size_t>();
  const json& u = j.at("update");
  r.update.mechanism = u.at("mechanism").get<std::string>();
  r.update.strength = u.at("strength").get<double>();
  r.update.step = u.at("step").get<std::size_t>();
  r.update.gradients.layers = layers_from(u.at("layers"));
  for (const auto& m : u.at("mask")) {
    r.update.mask.push_back({m.at("weight").get<std::vector<std::uint8_t>>(),
                             m.at("bias").get<std::vector<std::uint8_t>>()});
  }
  r.public_params.layers = layers_from(j.at("public_params"));
  if (j.contains("evaluation")) {
    const json& e = j.at("evaluation");
    Evaluation ev;
    for (const auto& x : e.at("inputs")) ev.inputs.push_back(tensor_from(x));
    ev.labels = e.at("labels").get<std::vector<std::size_t>>();
    ev.clean.layers = layers_from(e.at("clean"));
    r.evaluation = std::move(ev);
  }
  return r;
}

}  // namespace

void write_transcript(std::ostream& out, const GradientTranscript& transcript,
                      bool include_evaluation) {
  for (const auto& r : transcript.records()) out << record_json(r, include_evaluation).dump() << '\n';
}

void write_transcript(const std::filesystem::path& path, const GradientTranscript& transcript,
                      bool include_evaluation) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_transcript(out, transcript, include_evaluation);
  if (!out) throw Error("failed writing " + path.string());
}

GradientTranscript read_transcript(std::istream& in) {
  GradientTranscript t;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    try {
      t.append(record_from(json::parse(line)));
    } catch (const json::exception& e) {
      throw FormatError("transcript line " + std::to_string(number) + ": " + e.what());
    } catch (const ConfigError& e) {
      throw FormatError("transcript line " + std::to_string(number) + ": " + e.what());
    }
  }
  return t;
}

GradientTranscript read_transcript(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("transcript file not found: " + path.string());
  try {
    return read_transcript(in);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_params(const std::filesystem::path& path, const nn::Params& params) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << json{{"layers", layers_json(params.layers)}}.dump() << '\n';
  if (!out) throw Error("failed writing " + path.string());
}

nn::Params read_params(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("checkpoint file not found: " + path.string());
  try {
    nn::Params p;
    p.layers = layers_from(json::parse(in).at("layers"));
    return p;
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace fedleak::fed
