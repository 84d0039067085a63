#include "pupilpipe/pir.hpp"

#include <fstream>
#include <stdexcept>

#include "pupilpipe/io.hpp"

namespace pupilpipe {

std::string_view to_string(SkipReason r) {
  switch (r) {
    case SkipReason::eye_closed: return "eye_closed";
    case SkipReason::missing_class: return "missing_class";
    case SkipReason::degenerate_box: return "degenerate_box";
  }
  return "unknown";
}

FilterResult filter_open_frames(const BurstSession& session, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0))
    throw std::invalid_argument("eye-open threshold must be in [0,1]");
  FilterResult result;
  for (const auto& frame : session.frames) {
    if (frame.eye_open_prob >= threshold)
      result.kept.push_back(frame);
    else
      ++result.skipped;
  }
  return result;
}

std::variant<InstancePick, SkipReason> pick_instances(std::span<const Detection> detections) {
  const Detection* best_iris = nullptr;
  const Detection* best_pupil = nullptr;
  auto better = [](const Detection& cand, const Detection* cur) {
    if (cur == nullptr) return true;
    if (cand.score != cur->score) return cand.score > cur->score;
    return cand.box.area() > cur->box.area();  // then keep the earlier one
  };
  for (const auto& d : detections) {
    if (d.class_label == DetectionClass::iris) {
      if (better(d, best_iris)) best_iris = &d;
    } else {
      if (better(d, best_pupil)) best_pupil = &d;
    }
  }
  if (best_iris == nullptr || best_pupil == nullptr) return SkipReason::missing_class;
  return InstancePick{*best_iris, *best_pupil};
}

std::optional<double> box_radius(const BoundingBox& box) {
  const double width = box.x2 - box.x1;
  if (width < 1.0) return std::nullopt;
  return width / 2.0;
}

std::optional<EyeCenter> pupil_center(const BoundingBox& pupil_box) {
  const auto radius = box_radius(pupil_box);
  if (!radius) return std::nullopt;
  return EyeCenter{(pupil_box.x1 + pupil_box.x2) / 2.0, pupil_box.y2 - *radius};
}

PirResult estimate_session_pir(const BurstSession& session, double threshold) {
  const FilterResult open = filter_open_frames(session, threshold);

  double iris_radius_sum = 0.0;
  double pupil_radius_sum = 0.0;
  double center_x_sum = 0.0;
  double center_y_sum = 0.0;
  int used = 0;

  for (const auto& frame : open.kept) {
    const auto picked = pick_instances(frame.detections);
    if (std::holds_alternative<SkipReason>(picked)) continue;
    const auto& pick = std::get<InstancePick>(picked);
    const auto iris_radius = box_radius(pick.iris.box);
    const auto pupil_radius = box_radius(pick.pupil.box);
    if (!iris_radius || !pupil_radius) continue;  // degenerate_box
    const auto center = pupil_center(pick.pupil.box);
    iris_radius_sum += *iris_radius;
    pupil_radius_sum += *pupil_radius;
    center_x_sum += center->x;
    center_y_sum += center->y;
    ++used;
  }

  if (used == 0) return EstimationFailure{};

  PirSample sample;
  sample.participant_id = session.participant_id;
  sample.eye = session.eye;
  sample.timestamp = session.start_time();
  sample.iris_radius_px = iris_radius_sum / used;
  sample.pupil_radius_px = pupil_radius_sum / used;
  sample.pir = sample.pupil_radius_px / sample.iris_radius_px;
  sample.center_x = center_x_sum / used;
  sample.center_y = center_y_sum / used;
  sample.frames_used = used;
  sample.frames_skipped = static_cast<int>(session.frames.size()) - used;
  return sample;
}

std::vector<std::string> audit_containment(const BurstSession& session, double threshold) {
  std::vector<std::string> warnings;
  const FilterResult open = filter_open_frames(session, threshold);
  for (const auto& frame : open.kept) {
    const auto picked = pick_instances(frame.detections);
    if (std::holds_alternative<SkipReason>(picked)) continue;
    const auto& pick = std::get<InstancePick>(picked);
    const BoundingBox& p = pick.pupil.box;
    const BoundingBox& i = pick.iris.box;
    const bool inside = p.x1 >= i.x1 && p.y1 >= i.y1 && p.x2 <= i.x2 && p.y2 <= i.y2;
    if (!inside)
      warnings.push_back("pupil box outside iris box: " + session.participant_id + "/" +
                         session.session_id + "/" + std::string(to_string(session.eye)) + " @ " +
                         frame.timestamp.to_string());
  }
  return warnings;
}

BatchResult estimate_batch(std::span<const BurstSession> sessions, double threshold) {
  BatchResult result;
  for (const auto& session : sessions) {
    PirResult r = estimate_session_pir(session, threshold);
    if (std::holds_alternative<PirSample>(r)) {
      result.samples.push_back(std::get<PirSample>(std::move(r)));
    } else {
      result.failures.push_back(
          {{session.participant_id, session.session_id, session.eye},
           std::get<EstimationFailure>(r)});
    }
  }
  return result;
}

std::string pir_csv_header() {
  return "participant_id,eye,timestamp,pir,iris_radius_px,pupil_radius_px,center_x,"
         "center_y,frames_used,frames_skipped";
}

std::string pir_sample_to_csv(const PirSample& s) {
  std::string line = s.participant_id;
  line += ',';
  line += to_string(s.eye);
  line += ',';
  line += s.timestamp.to_string();
  for (double v : {s.pir, s.iris_radius_px, s.pupil_radius_px, s.center_x, s.center_y}) {
    line += ',';
    line += format_real(v);
  }
  line += ',' + std::to_string(s.frames_used);
  line += ',' + std::to_string(s.frames_skipped);
  return line;
}

void write_pir_csv(const std::filesystem::path& path, std::span<const PirSample> samples) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << pir_csv_header() << '\n';
  for (const auto& s : samples) out << pir_sample_to_csv(s) << '\n';
}

PirCsvReadResult read_pir_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  PirCsvReadResult result;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    if (line_number == 1 && line.rfind("participant_id,", 0) == 0) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 10) {
      result.errors.push_back("line " + std::to_string(line_number) + ": expected 10 fields");
      continue;
    }
    try {
      PirSample s;
      s.participant_id = fields[0];
      const auto eye = eye_from_string(fields[1]);
      const auto ts = CivilDateTime::parse(fields[2]);
      if (!eye || !ts) throw std::runtime_error("bad eye or timestamp");
      s.eye = *eye;
      s.timestamp = *ts;
      s.pir = std::stod(fields[3]);
      s.iris_radius_px = std::stod(fields[4]);
      s.pupil_radius_px = std::stod(fields[5]);
      s.center_x = std::stod(fields[6]);
      s.center_y = std::stod(fields[7]);
      s.frames_used = std::stoi(fields[8]);
      s.frames_skipped = std::stoi(fields[9]);
      result.samples.push_back(std::move(s));
    } catch (const std::exception& e) {
      result.errors.push_back("line " + std::to_string(line_number) + ": " + e.what());
    }
  }
  return result;
}

}  // namespace pupilpipe
