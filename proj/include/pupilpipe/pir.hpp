#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "pupilpipe/types.hpp"

namespace pupilpipe {

inline constexpr double kDefaultEyeOpenThreshold = 0.75;

/// The best iris and pupil instances of one frame.
struct InstancePick {
  Detection iris;
  Detection pupil;
};

/// Why a frame contributed nothing to the session estimate.
enum class SkipReason { eye_closed, missing_class, degenerate_box };

std::string_view to_string(SkipReason r);

struct FilterResult {
  std::vector<FrameRecord> kept;  // original order
  int skipped = 0;
};

/// Keeps frames with eye_open_prob >= threshold (boundary inclusive).
FilterResult filter_open_frames(const BurstSession& session, double threshold);

/// Highest-score detection per class; SkipReason::missing_class when either
/// class is absent. Score ties break by larger box area, then input order.
std::variant<InstancePick, SkipReason> pick_instances(std::span<const Detection> detections);

/// Radius from the horizontal extent only: (x2 - x1) / 2. Empty when the
/// box is narrower than one pixel.
std::optional<double> box_radius(const BoundingBox& box);

struct EyeCenter {
  double x = 0;
  double y = 0;
};

/// Center from the pupil box: x = (x1 + x2) / 2, y = y2 - (x2 - x1) / 2.
std::optional<EyeCenter> pupil_center(const BoundingBox& pupil_box);

struct EstimationFailure {
  enum class Reason { no_valid_frames };
  Reason reason = Reason::no_valid_frames;
};

using PirResult = std::variant<PirSample, EstimationFailure>;

/// Per-session pupil-iris ratio via the two-box method: filter by eye-open
/// probability, pick best instances per kept frame, average per-frame box
/// radii, and divide the mean pupil radius by the mean iris radius (ratio
/// of means, not mean of per-frame ratios).
PirResult estimate_session_pir(const BurstSession& session,
                               double threshold = kDefaultEyeOpenThreshold);

struct SessionKey {
  std::string participant_id;
  std::string session_id;
  EyeSide eye = EyeSide::left;
};

struct BatchResult {
  std::vector<PirSample> samples;  // input order
  struct Failure {
    SessionKey key;
    EstimationFailure failure;
  };
  std::vector<Failure> failures;  // input order, keys preserved for audit
};

BatchResult estimate_batch(std::span<const BurstSession> sessions,
                           double threshold = kDefaultEyeOpenThreshold);

/// Strict-mode geometry audit: warnings for kept frames whose best pupil box
/// is not contained in the best iris box. Estimation itself never filters on
/// containment; absurd ratios are left to the downstream range filter.
std::vector<std::string> audit_containment(const BurstSession& session,
                                           double threshold = kDefaultEyeOpenThreshold);

std::string pir_csv_header();
std::string pir_sample_to_csv(const PirSample& s);
void write_pir_csv(const std::filesystem::path& path, std::span<const PirSample> samples);

struct PirCsvReadResult {
  std::vector<PirSample> samples;
  std::vector<std::string> errors;
};
PirCsvReadResult read_pir_csv(const std::filesystem::path& path);

}  // namespace pupilpipe
