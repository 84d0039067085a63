#include "pupilpipe/io.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace pupilpipe {

namespace {

using nlohmann::json;

FrameRecord frame_from_json(const json& j) {
  if (!j.is_object()) throw std::runtime_error("not a JSON object");
  FrameRecord r;
  r.participant_id = j.at("participant_id").get<std::string>();
  r.session_id = j.at("session_id").get<std::string>();
  const auto eye = eye_from_string(j.at("eye").get<std::string>());
  if (!eye) throw std::runtime_error("eye must be \"left\" or \"right\"");
  r.eye = *eye;
  const auto ts = CivilDateTime::parse(j.at("timestamp").get<std::string>());
  if (!ts) throw std::runtime_error("timestamp must be YYYY-MM-DDTHH:MM:SS");
  r.timestamp = *ts;
  r.eye_open_prob = j.at("eye_open_prob").get<double>();
  for (const auto& dj : j.at("detections")) {
    Detection d;
    const auto cls = detection_class_from_string(dj.at("class").get<std::string>());
    if (!cls) throw std::runtime_error("detection class must be \"iris\" or \"pupil\"");
    d.class_label = *cls;
    d.score = dj.at("score").get<double>();
    const auto& box = dj.at("box");
    if (!box.is_array() || box.size() != 4) throw std::runtime_error("box must be [x1,y1,x2,y2]");
    d.box = {box[0].get<double>(), box[1].get<double>(), box[2].get<double>(),
             box[3].get<double>()};
    r.detections.push_back(d);
  }
  return r;
}

json frame_to_json(const FrameRecord& r) {
  json detections = json::array();
  for (const auto& d : r.detections) {
    detections.push_back({{"class", std::string(to_string(d.class_label))},
                          {"score", d.score},
                          {"box", {d.box.x1, d.box.y1, d.box.x2, d.box.y2}}});
  }
  return json{{"participant_id", r.participant_id},
              {"session_id", r.session_id},
              {"eye", std::string(to_string(r.eye))},
              {"timestamp", r.timestamp.to_string()},
              {"eye_open_prob", r.eye_open_prob},
              {"detections", std::move(detections)}};
}

}  // namespace

PredictionsReadResult read_predictions_jsonl(std::istream& in) {
  PredictionsReadResult result;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    ++result.lines_total;
    try {
      result.records.push_back(frame_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      result.errors.push_back({line_number, e.what()});
    }
  }
  return result;
}

PredictionsReadResult read_predictions_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_predictions_jsonl(in);
}

void write_predictions_jsonl(std::ostream& out, std::span<const FrameRecord> records) {
  for (const auto& r : records) out << frame_to_json(r).dump() << '\n';
}

void write_predictions_file(const std::filesystem::path& path,
                            std::span<const FrameRecord> records) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_predictions_jsonl(out, records);
}

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << content;
}

}  // namespace pupilpipe
