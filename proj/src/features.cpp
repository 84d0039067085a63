#include "pupilpipe/features.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <unordered_map>

#include "pupilpipe/io.hpp"

namespace pupilpipe {

std::string_view to_string(Epoch e) {
  switch (e) {
    case Epoch::midnight: return "midnight";
    case Epoch::morning: return "morning";
    case Epoch::afternoon: return "afternoon";
    case Epoch::evening: return "evening";
  }
  return "unknown";
}

Epoch assign_epoch(const CivilDateTime& timestamp) {
  return static_cast<Epoch>(timestamp.hour / 6);
}

std::string_view to_string(Stat s) {
  switch (s) {
    case Stat::sum: return "sum";
    case Stat::min: return "min";
    case Stat::max: return "max";
    case Stat::mean: return "mean";
    case Stat::median: return "median";
    case Stat::stddev: return "std";
  }
  return "unknown";
}

double EpochStats::get(Stat s) const {
  switch (s) {
    case Stat::sum: return sum;
    case Stat::min: return min;
    case Stat::max: return max;
    case Stat::mean: return mean;
    case Stat::median: return median;
    case Stat::stddev: return stddev;
  }
  return 0;
}

std::optional<EpochStats> epoch_stats(Eigen::Ref<const Eigen::VectorXd> pirs) {
  const Eigen::Index n = pirs.size();
  if (n == 0) return std::nullopt;
  EpochStats s;
  s.sum = pirs.sum();
  s.min = pirs.minCoeff();
  s.max = pirs.maxCoeff();
  s.mean = s.sum / static_cast<double>(n);
  s.stddev = std::sqrt((pirs.array() - s.mean).square().sum() / static_cast<double>(n));
  Eigen::VectorXd sorted = pirs;
  std::sort(sorted.begin(), sorted.end());
  s.median = (n % 2 == 1) ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  return s;
}

int feature_index(EyeSide side, Stat stat, Epoch epoch) {
  return static_cast<int>(side) * 24 + static_cast<int>(stat) * 4 + static_cast<int>(epoch);
}

std::string feature_name(EyeSide side, Stat stat, Epoch epoch) {
  std::string name = "pir";
  name += side == EyeSide::left ? "Left" : "Right";
  name += to_string(stat);
  name += '_';
  name += to_string(epoch);
  return name;
}

const std::array<std::string, kFeatureCount>& feature_names() {
  static const std::array<std::string, kFeatureCount> names = [] {
    std::array<std::string, kFeatureCount> out;
    for (EyeSide side : {EyeSide::left, EyeSide::right})
      for (Stat stat : kStats)
        for (Epoch epoch : kEpochs)
          out[feature_index(side, stat, epoch)] = feature_name(side, stat, epoch);
    return out;
  }();
  return names;
}

int feature_index_by_name(const std::string& name) {
  static const std::unordered_map<std::string, int> lookup = [] {
    std::unordered_map<std::string, int> m;
    const auto& names = feature_names();
    for (int i = 0; i < kFeatureCount; ++i) m[names[i]] = i;
    return m;
  }();
  const auto it = lookup.find(name);
  return it == lookup.end() ? -1 : it->second;
}

std::vector<PirSample> filter_pir_range(std::span<const PirSample> samples, double lo,
                                        double hi) {
  if (!(lo < hi)) throw std::invalid_argument("filter_pir_range: lo < hi required");
  std::vector<PirSample> kept;
  kept.reserve(samples.size());
  for (const auto& s : samples)
    if (s.pir >= lo && s.pir <= hi) kept.push_back(s);
  return kept;
}

std::optional<FeatureVector> build_day_vector(std::span<const PirSample> day_samples) {
  if (day_samples.empty()) return std::nullopt;

  // Collect this day's PIR values per (eye, epoch) cell.
  std::array<std::array<std::vector<double>, 4>, 2> cells;
  for (const auto& s : day_samples) {
    const int e = static_cast<int>(s.eye);
    const int ep = static_cast<int>(assign_epoch(s.timestamp));
    cells[e][ep].push_back(s.pir);
  }

  std::array<std::array<std::optional<EpochStats>, 4>, 2> stats;
  for (int e = 0; e < 2; ++e)
    for (int ep = 0; ep < 4; ++ep) {
      auto& vals = cells[e][ep];
      stats[e][ep] = vals.empty()
                         ? std::nullopt
                         : epoch_stats(Eigen::Map<const Eigen::VectorXd>(
                               vals.data(), static_cast<Eigen::Index>(vals.size())));
    }

  FeatureVector out;
  for (EyeSide side : {EyeSide::left, EyeSide::right}) {
    const int e = static_cast<int>(side);
    for (Stat stat : kStats) {
      // Mean of the day for this (eye, stat), over present epochs.
      double eye_sum = 0;
      int eye_n = 0;
      for (int ep = 0; ep < 4; ++ep)
        if (stats[e][ep]) {
          eye_sum += stats[e][ep]->get(stat);
          ++eye_n;
        }
      // Day-wide fallback across both eyes for an eye with no data at all.
      double day_sum = eye_sum;
      int day_n = eye_n;
      for (int ep = 0; ep < 4; ++ep)
        if (stats[1 - e][ep]) {
          day_sum += stats[1 - e][ep]->get(stat);
          ++day_n;
        }
      const double imputed_value = eye_n > 0 ? eye_sum / eye_n : day_sum / day_n;
      for (Epoch epoch : kEpochs) {
        const int ep = static_cast<int>(epoch);
        const int idx = feature_index(side, stat, epoch);
        if (stats[e][ep]) {
          out.values[idx] = stats[e][ep]->get(stat);
        } else {
          out.values[idx] = imputed_value;
          out.imputed[idx] = true;
        }
      }
    }
  }
  return out;
}

LabelResult label_days(std::span<const DayVector> day_vectors,
                       std::span<const EpisodeWindow> windows) {
  std::map<std::string, std::vector<const EpisodeWindow*>> by_participant;
  for (const auto& w : windows) by_participant[w.participant_id].push_back(&w);
  for (auto& [pid, ws] : by_participant) {
    std::sort(ws.begin(), ws.end(), [](const EpisodeWindow* a, const EpisodeWindow* b) {
      return a->start_date < b->start_date;
    });
    for (std::size_t i = 1; i < ws.size(); ++i)
      if (!(ws[i]->start_date > ws[i - 1]->end_date))
        throw OverlappingWindows("overlapping windows for participant " + pid);
  }

  LabelResult result;
  for (const auto& dv : day_vectors) {
    const EpisodeWindow* hit = nullptr;
    if (const auto it = by_participant.find(dv.participant_id); it != by_participant.end()) {
      for (const EpisodeWindow* w : it->second)
        if (dv.date >= w->start_date && dv.date <= w->end_date) {
          hit = w;
          break;
        }
    }
    if (hit == nullptr) {
      result.warnings.push_back("day " + dv.date.to_string() + " of " + dv.participant_id +
                                " falls outside every window; dropped");
      continue;
    }
    result.days.push_back({dv.participant_id, dv.date, dv.features, hit->label()});
  }
  return result;
}

FeatureTable build_feature_table(std::span<const PirSample> samples,
                                 std::span<const EpisodeWindow> windows, double lo, double hi) {
  const std::vector<PirSample> kept = filter_pir_range(samples, lo, hi);

  std::map<std::pair<std::string, CivilDate>, std::vector<PirSample>> by_day;
  for (const auto& s : kept) by_day[{s.participant_id, s.timestamp.date()}].push_back(s);

  FeatureTable table;
  std::vector<DayVector> day_vectors;
  for (const auto& [key, day_samples] : by_day) {
    const auto vec = build_day_vector(day_samples);
    if (!vec) {
      ++table.dropped_days;
      continue;
    }
    day_vectors.push_back({key.first, key.second, *vec});
  }

  LabelResult labeled = label_days(day_vectors, windows);
  table.days = std::move(labeled.days);
  table.warnings = std::move(labeled.warnings);
  return table;
}

std::vector<EpisodeWindow> derive_windows_from_phq9(std::span<const Phq9Entry> entries) {
  std::map<std::string, std::vector<const Phq9Entry*>> by_participant;
  for (const auto& e : entries) by_participant[e.participant_id].push_back(&e);

  std::vector<EpisodeWindow> windows;
  for (auto& [pid, es] : by_participant) {
    std::sort(es.begin(), es.end(),
              [](const Phq9Entry* a, const Phq9Entry* b) { return a->date < b->date; });
    for (std::size_t i = 0; i + 1 < es.size(); ++i) {
      EpisodeWindow w;
      w.participant_id = pid;
      w.start_date = es[i]->date;
      w.end_date = es[i]->date.plus_days(13);
      w.phq9_start = es[i]->score;
      w.phq9_end = es[i + 1]->score;
      windows.push_back(std::move(w));
    }
  }
  return windows;
}

void write_phq9_csv(const std::filesystem::path& path, std::span<const Phq9Entry> entries) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "participant_id,assessment,date,score\n";
  for (const auto& e : entries)
    out << e.participant_id << ',' << e.assessment << ',' << e.date.to_string() << ','
        << e.score << '\n';
}

std::vector<Phq9Entry> read_phq9_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<Phq9Entry> entries;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    if (line_number == 1 && line.rfind("participant_id,", 0) == 0) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 4) throw IoError(path.string() + ": bad PHQ-9 row " + std::to_string(line_number));
    const auto date = CivilDate::parse(fields[2]);
    if (!date) throw IoError(path.string() + ": bad date on row " + std::to_string(line_number));
    entries.push_back({fields[0], fields[1], *date, std::stoi(fields[3])});
  }
  return entries;
}

std::string feature_csv_header() {
  std::string header = "participant_id,date,label";
  for (const auto& name : feature_names()) header += ',' + name;
  for (const auto& name : feature_names()) header += ',' + name + ".imputed";
  return header;
}

void write_feature_csv(const std::filesystem::path& path, std::span<const LabeledDay> days) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << feature_csv_header() << '\n';
  for (const auto& d : days) {
    out << d.participant_id << ',' << d.date.to_string() << ',' << (d.label ? 1 : 0);
    for (int i = 0; i < kFeatureCount; ++i) out << ',' << format_real(d.features.values[i]);
    for (int i = 0; i < kFeatureCount; ++i) out << ',' << (d.features.imputed[i] ? 1 : 0);
    out << '\n';
  }
}

std::vector<LabeledDay> read_feature_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<LabeledDay> days;
  std::string line;
  std::size_t line_number = 0;
  const std::size_t expected = 3 + 2 * kFeatureCount;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    if (line_number == 1 && line.rfind("participant_id,", 0) == 0) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != expected)
      throw IoError(path.string() + ": row " + std::to_string(line_number) + " has " +
                    std::to_string(fields.size()) + " fields, expected " +
                    std::to_string(expected));
    LabeledDay d;
    d.participant_id = fields[0];
    const auto date = CivilDate::parse(fields[1]);
    if (!date) throw IoError(path.string() + ": bad date on row " + std::to_string(line_number));
    d.date = *date;
    d.label = fields[2] == "1";
    for (int i = 0; i < kFeatureCount; ++i) d.features.values[i] = std::stod(fields[3 + i]);
    for (int i = 0; i < kFeatureCount; ++i)
      d.features.imputed[i] = fields[3 + kFeatureCount + i] == "1";
    days.push_back(std::move(d));
  }
  return days;
}

}  // namespace pupilpipe
