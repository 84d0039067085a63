#pragma once

#include <Eigen/Dense>
#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pupilpipe/types.hpp"

namespace pupilpipe {

inline constexpr double kDefaultPirLo = 0.2;
inline constexpr double kDefaultPirHi = 0.7;

/// Four 6-hour wall-clock periods of the day, half-open intervals:
/// midnight [00,06), morning [06,12), afternoon [12,18), evening [18,24).
enum class Epoch { midnight, morning, afternoon, evening };

inline constexpr std::array<Epoch, 4> kEpochs = {Epoch::midnight, Epoch::morning,
                                                 Epoch::afternoon, Epoch::evening};

std::string_view to_string(Epoch e);
Epoch assign_epoch(const CivilDateTime& timestamp);

enum class Stat { sum, min, max, mean, median, stddev };

inline constexpr std::array<Stat, 6> kStats = {Stat::sum, Stat::min,    Stat::max,
                                               Stat::mean, Stat::median, Stat::stddev};

std::string_view to_string(Stat s);

struct EpochStats {
  double sum = 0, min = 0, max = 0, mean = 0, median = 0, stddev = 0;
  double get(Stat s) const;
};

/// Six statistics of a PIR list; std uses the population (n) divisor and
/// the median of an even-length list is the midpoint of the two central
/// order statistics. Empty input means the cell is missing.
std::optional<EpochStats> epoch_stats(Eigen::Ref<const Eigen::VectorXd> pirs);

inline constexpr int kFeatureCount = 48;  // 2 eyes x 6 stats x 4 epochs
using FeatureVec = Eigen::Matrix<double, kFeatureCount, 1>;

/// Canonical column order: side (Left, Right) x stat (sum, min, max, mean,
/// median, std) x epoch (midnight, morning, afternoon, evening).
int feature_index(EyeSide side, Stat stat, Epoch epoch);
std::string feature_name(EyeSide side, Stat stat, Epoch epoch);  // e.g. pirRightstd_morning
const std::array<std::string, kFeatureCount>& feature_names();
int feature_index_by_name(const std::string& name);  // -1 when unknown

struct FeatureVector {
  FeatureVec values = FeatureVec::Zero();
  std::array<bool, kFeatureCount> imputed{};  // true where mean-of-day filled a cell
};

/// Keeps samples with lo <= pir <= hi (boundaries inclusive), order preserved.
std::vector<PirSample> filter_pir_range(std::span<const PirSample> samples,
                                        double lo = kDefaultPirLo, double hi = kDefaultPirHi);

/// The 48 epoch statistics of one participant-day. A missing (eye, epoch)
/// cell is imputed per (eye, stat) with the mean over that eye's present
/// epochs; an eye with no data at all falls back to the day-wide mean of the
/// stat across both eyes. Returns nothing (dropped day) when the day has no
/// samples.
std::optional<FeatureVector> build_day_vector(std::span<const PirSample> day_samples);

/// A two-week PHQ-9 window; depressive only when both endpoint scores
/// reach 5.
struct EpisodeWindow {
  std::string participant_id;
  CivilDate start_date;
  CivilDate end_date;  // start + 13 days
  int phq9_start = 0;
  int phq9_end = 0;
  bool label() const { return phq9_start >= 5 && phq9_end >= 5; }
};

struct LabeledDay {
  std::string participant_id;
  CivilDate date;
  FeatureVector features;
  bool label = false;
};

struct OverlappingWindows : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DayVector {
  std::string participant_id;
  CivilDate date;
  FeatureVector features;
};

struct LabelResult {
  std::vector<LabeledDay> days;
  std::vector<std::string> warnings;  // days outside every window
};

/// Joins each day vector to its containing window's label; days outside any
/// window are dropped with a warning. Throws OverlappingWindows.
LabelResult label_days(std::span<const DayVector> day_vectors,
                       std::span<const EpisodeWindow> windows);

struct FeatureTable {
  std::vector<LabeledDay> days;
  int dropped_days = 0;  // participant-days with no in-range samples
  std::vector<std::string> warnings;
};

/// samples -> range filter -> per-day vectors -> labels, in one call.
FeatureTable build_feature_table(std::span<const PirSample> samples,
                                 std::span<const EpisodeWindow> windows,
                                 double lo = kDefaultPirLo, double hi = kDefaultPirHi);

// --- PHQ-9 schedule ---------------------------------------------------------

struct Phq9Entry {
  std::string participant_id;
  std::string assessment;  // "baseline" | "midpoint" | "endpoint"
  CivilDate date;
  int score = 0;  // 0-27
};

/// Windows between consecutive assessments of each participant; the label
/// rule (both endpoints >= 5) is applied by EpisodeWindow itself.
std::vector<EpisodeWindow> derive_windows_from_phq9(std::span<const Phq9Entry> entries);

void write_phq9_csv(const std::filesystem::path& path, std::span<const Phq9Entry> entries);
std::vector<Phq9Entry> read_phq9_csv(const std::filesystem::path& path);

// --- feature matrix CSV ------------------------------------------------------

std::string feature_csv_header();
void write_feature_csv(const std::filesystem::path& path, std::span<const LabeledDay> days);
std::vector<LabeledDay> read_feature_csv(const std::filesystem::path& path);

}  // namespace pupilpipe
