#include "pupilpipe/types.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

namespace pupilpipe {

std::string_view to_string(EyeSide eye) { return eye == EyeSide::left ? "left" : "right"; }

std::optional<EyeSide> eye_from_string(std::string_view text) {
  if (text == "left") return EyeSide::left;
  if (text == "right") return EyeSide::right;
  return std::nullopt;
}

std::string_view to_string(DetectionClass c) {
  return c == DetectionClass::iris ? "iris" : "pupil";
}

std::optional<DetectionClass> detection_class_from_string(std::string_view text) {
  if (text == "iris") return DetectionClass::iris;
  if (text == "pupil") return DetectionClass::pupil;
  return std::nullopt;
}

namespace {

bool box_finite(const BoundingBox& b) {
  return std::isfinite(b.x1) && std::isfinite(b.y1) && std::isfinite(b.x2) &&
         std::isfinite(b.y2);
}

auto detection_key(const Detection& d) {
  return std::make_tuple(static_cast<int>(d.class_label), d.score, d.box.x1, d.box.y1,
                         d.box.x2, d.box.y2);
}

// Total order on frame content; used only to break duplicate-timestamp ties
// so grouping is invariant under input permutation.
bool frame_content_less(const FrameRecord& a, const FrameRecord& b) {
  if (a.eye_open_prob != b.eye_open_prob) return a.eye_open_prob < b.eye_open_prob;
  return std::lexicographical_compare(
      a.detections.begin(), a.detections.end(), b.detections.begin(), b.detections.end(),
      [](const Detection& x, const Detection& y) { return detection_key(x) < detection_key(y); });
}

}  // namespace

ValidationResult validate_frame(const FrameRecord& record) {
  ValidationResult result;
  if (record.participant_id.empty()) result.violations.push_back("empty participant_id");
  if (record.session_id.empty()) result.violations.push_back("empty session_id");
  if (!record.timestamp.valid()) result.violations.push_back("invalid timestamp");
  if (!(record.eye_open_prob >= 0.0 && record.eye_open_prob <= 1.0))
    result.violations.push_back("eye_open_prob out of [0,1]");
  for (std::size_t i = 0; i < record.detections.size(); ++i) {
    const Detection& d = record.detections[i];
    const std::string at = "detection " + std::to_string(i) + ": ";
    if (!(d.score >= 0.0 && d.score <= 1.0)) result.violations.push_back(at + "score out of [0,1]");
    if (!box_finite(d.box)) {
      result.violations.push_back(at + "non-finite box coordinate");
      continue;
    }
    if (!(d.box.x2 > d.box.x1)) result.violations.push_back(at + "x2 <= x1");
    if (!(d.box.y2 > d.box.y1)) result.violations.push_back(at + "y2 <= y1");
    if (d.box.x1 < 0 || d.box.y1 < 0) result.violations.push_back(at + "negative coordinate");
  }
  return result;
}

GroupResult group_sessions(std::vector<FrameRecord> records) {
  GroupResult result;
  using Key = std::tuple<std::string, std::string, EyeSide>;
  std::map<Key, std::vector<FrameRecord>> buckets;
  for (auto& r : records) {
    Key key{r.participant_id, r.session_id, r.eye};
    buckets[std::move(key)].push_back(std::move(r));
  }

  for (auto& [key, frames] : buckets) {
    std::sort(frames.begin(), frames.end(), [](const FrameRecord& a, const FrameRecord& b) {
      if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
      return frame_content_less(a, b);
    });
    BurstSession session;
    session.participant_id = std::get<0>(key);
    session.session_id = std::get<1>(key);
    session.eye = std::get<2>(key);
    for (auto& f : frames) {
      if (!session.frames.empty() && session.frames.back().timestamp == f.timestamp) {
        ++result.duplicates_dropped;
        result.warnings.push_back("duplicate frame dropped: " + session.participant_id + "/" +
                                  session.session_id + "/" + std::string(to_string(session.eye)) +
                                  " @ " + f.timestamp.to_string());
        continue;
      }
      session.frames.push_back(std::move(f));
    }
    if (session.frames.size() > 30) {
      result.warnings.push_back("session " + session.participant_id + "/" + session.session_id +
                                "/" + std::string(to_string(session.eye)) + " has " +
                                std::to_string(session.frames.size()) + " frames (> 30)");
    }
    const std::int64_t span =
        session.frames.back().timestamp.to_seconds() - session.frames.front().timestamp.to_seconds();
    if (span > 15) {
      result.warnings.push_back("session " + session.participant_id + "/" + session.session_id +
                                "/" + std::string(to_string(session.eye)) + " spans " +
                                std::to_string(span) + " s (> 15 s)");
    }
    result.sessions.push_back(std::move(session));
  }

  std::sort(result.sessions.begin(), result.sessions.end(),
            [](const BurstSession& a, const BurstSession& b) {
              return std::make_tuple(std::cref(a.participant_id), a.start_time(), a.eye,
                                     std::cref(a.session_id)) <
                     std::make_tuple(std::cref(b.participant_id), b.start_time(), b.eye,
                                     std::cref(b.session_id));
            });
  return result;
}

}  // namespace pupilpipe
