#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "pupilpipe/features.hpp"
#include "pupilpipe/types.hpp"

namespace pupilpipe {

struct InvalidConfig : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Group-level differences applied to depressive windows. Defaults follow
/// the direction and approximate size of the published group statistics:
/// wider right-eye morning spread, slightly lower left-eye morning level,
/// more evening activity.
struct EffectProfile {
  double morning_right_sd_mult = 2.0;
  double morning_left_mean_shift = -0.02;
  double evening_count_mult = 1.6;

  static EffectProfile null_profile() { return {1.0, 0.0, 1.0}; }
};

struct CohortConfig {
  int n_participants = 25;
  int days_per_participant = 28;  // 14 or 28 (one or two PHQ-9 windows)
  double sessions_per_day_mean = 11.85;

  // Participant-level base PIR distribution (per eye), truncated normal;
  // centers and spreads follow the published per-participant summary.
  double pir_mean_center = 0.33;
  double pir_mean_spread = 0.013;
  double pir_mean_lo = 0.29;
  double pir_mean_hi = 0.41;
  double pir_sd_center = 0.030;
  double pir_sd_spread = 0.005;
  double pir_sd_lo = 0.02;
  double pir_sd_hi = 0.07;

  double depressive_fraction = 14.0 / 44.0;
  EffectProfile effects;

  /// Relative trigger activity per epoch (midnight, morning, afternoon,
  /// evening); normalized internally.
  std::array<double, 4> epoch_weights = {0.05, 0.50, 0.15, 0.30};
  double missing_epoch_prob = 0.06;
  double day_missing_prob = 0.02;
  double bad_session_prob = 0.01;  // burst with every frame below threshold

  int frames_per_burst = 10;  // 1 Hz so second-resolution stamps stay unique
  double frame_jitter_sd = 0.015;
  double eye_closed_frac = 0.10;
  double extra_detection_prob = 0.03;
  double iris_width_lo = 40.0;
  double iris_width_hi = 80.0;

  CivilDate start_date = {2024, 3, 4};
  std::uint64_t seed = 0;

  void validate() const;  // throws InvalidConfig
};

struct SessionTruth {
  std::string participant_id;
  std::string session_id;
  EyeSide eye = EyeSide::left;
  CivilDateTime timestamp;
  double true_pir = 0;
  bool estimable = false;  // at least one frame passes the eye-open filter
};

struct WindowTruth {
  std::string participant_id;
  CivilDate start_date;
  CivilDate end_date;
  bool label = false;
  int phq9_start = 0;
  int phq9_end = 0;
};

struct GroundTruth {
  std::vector<SessionTruth> sessions;
  std::vector<WindowTruth> windows;
};

struct Cohort {
  std::vector<FrameRecord> frames;
  std::vector<Phq9Entry> phq9;
  GroundTruth truth;
};

/// Pure function of the config (seed included). Per-participant streams are
/// derived from the seed so generation order never changes results.
Cohort generate_cohort(const CohortConfig& config);

/// The generator's own labels, one per (participant, window).
std::vector<WindowTruth> emit_gold_episode_labels(const GroundTruth& truth);

void write_ground_truth_jsonl(const std::filesystem::path& path, const GroundTruth& truth);
GroundTruth read_ground_truth_jsonl(const std::filesystem::path& path);

}  // namespace pupilpipe
