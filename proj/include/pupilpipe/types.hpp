#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pupilpipe/time.hpp"

namespace pupilpipe {

enum class EyeSide { left, right };

std::string_view to_string(EyeSide eye);
std::optional<EyeSide> eye_from_string(std::string_view text);

enum class DetectionClass { iris, pupil };

std::string_view to_string(DetectionClass c);
std::optional<DetectionClass> detection_class_from_string(std::string_view text);

/// Axis-aligned box in image coordinates, origin top-left, real-valued.
struct BoundingBox {
  double x1 = 0;
  double y1 = 0;
  double x2 = 0;
  double y2 = 0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
};

/// One segmentation result inside a frame.
struct Detection {
  DetectionClass class_label = DetectionClass::iris;
  double score = 0.0;  // in [0, 1]
  BoundingBox box;
};

/// One timestamped eye frame with its segmentation predictions.
struct FrameRecord {
  std::string participant_id;
  std::string session_id;
  EyeSide eye = EyeSide::left;
  CivilDateTime timestamp;
  double eye_open_prob = 0.0;
  std::vector<Detection> detections;
};

/// The frames of one 10-second capture burst for one eye; frames are kept
/// sorted by timestamp.
struct BurstSession {
  std::string participant_id;
  std::string session_id;
  EyeSide eye = EyeSide::left;
  std::vector<FrameRecord> frames;

  const CivilDateTime& start_time() const { return frames.front().timestamp; }
};

/// One estimated pupil-iris ratio with provenance.
struct PirSample {
  std::string participant_id;
  EyeSide eye = EyeSide::left;
  CivilDateTime timestamp;  // session start time
  double pir = 0.0;
  double iris_radius_px = 0.0;
  double pupil_radius_px = 0.0;
  double center_x = 0.0;
  double center_y = 0.0;
  int frames_used = 0;
  int frames_skipped = 0;
};

struct ValidationResult {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

/// Structural checks for a single record: box geometry, score and
/// probability ranges, timestamp validity. Result-style, never throws.
ValidationResult validate_frame(const FrameRecord& record);

struct GroupResult {
  std::vector<BurstSession> sessions;
  std::vector<std::string> warnings;
  std::size_t duplicates_dropped = 0;
};

/// Groups a record stream into burst sessions keyed by
/// (participant_id, session_id, eye). Frames are time-sorted within each
/// session; sessions are ordered by (participant, start time, eye). A pure
/// function of the input multiset: records with identical keys and
/// timestamps are deduplicated under a total content order so shuffled
/// input cannot change the output.
GroupResult group_sessions(std::vector<FrameRecord> records);

}  // namespace pupilpipe
