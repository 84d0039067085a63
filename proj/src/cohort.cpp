#include "pupilpipe/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>

#include <json.hpp>

#include "pupilpipe/io.hpp"
#include "pupilpipe/rng.hpp"

namespace pupilpipe {

void CohortConfig::validate() const {
  if (n_participants < 1) throw InvalidConfig("n_participants must be >= 1");
  if (days_per_participant != 14 && days_per_participant != 28)
    throw InvalidConfig("days_per_participant must be 14 or 28");
  if (sessions_per_day_mean < 0) throw InvalidConfig("sessions_per_day_mean must be >= 0");
  if (!(depressive_fraction >= 0.0 && depressive_fraction <= 1.0))
    throw InvalidConfig("depressive_fraction must be in [0,1]");
  for (double p : {missing_epoch_prob, day_missing_prob, bad_session_prob, eye_closed_frac,
                   extra_detection_prob})
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidConfig("probabilities must be in [0,1]");
  double weight_sum = 0;
  for (double w : epoch_weights) {
    if (w < 0) throw InvalidConfig("epoch weights must be >= 0");
    weight_sum += w;
  }
  if (weight_sum <= 0) throw InvalidConfig("epoch weights must not all be zero");
  if (frames_per_burst < 1 || frames_per_burst > 10)
    throw InvalidConfig("frames_per_burst must be in [1,10]");
  if (!(pir_mean_lo < pir_mean_hi) || !(pir_sd_lo < pir_sd_hi))
    throw InvalidConfig("truncation bounds must be ordered");
  if (!(iris_width_lo >= 8.0 && iris_width_lo < iris_width_hi))
    throw InvalidConfig("iris width range must be ordered and >= 8 px");
  if (frame_jitter_sd < 0 || frame_jitter_sd > 0.2)
    throw InvalidConfig("frame_jitter_sd must be in [0,0.2]");
  if (effects.morning_right_sd_mult <= 0 || effects.evening_count_mult <= 0)
    throw InvalidConfig("effect multipliers must be > 0");
}

namespace {

std::string participant_label(int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "P%02d", index + 1);
  return buf;
}

struct EyeParams {
  double mean = 0;
  double sd = 0;
};

}  // namespace

Cohort generate_cohort(const CohortConfig& config) {
  config.validate();
  Cohort cohort;

  const int wpp = config.days_per_participant / 14;  // windows per participant
  const int total_windows = config.n_participants * wpp;
  const int n_depressive =
      static_cast<int>(std::llround(config.depressive_fraction * total_windows));

  // Which (participant, window) slots are depressive.
  std::vector<int> slots(total_windows);
  for (int i = 0; i < total_windows; ++i) slots[i] = i;
  Rng label_rng(derive_seed(config.seed, "labels"));
  label_rng.shuffle(slots);
  std::vector<std::uint8_t> depressive(total_windows, 0);
  for (int i = 0; i < n_depressive; ++i) depressive[slots[i]] = 1;

  double weight_sum = 0;
  for (double w : config.epoch_weights) weight_sum += w;

  for (int p = 0; p < config.n_participants; ++p) {
    const std::string pid = participant_label(p);
    Rng prng(derive_seed(config.seed, "participant", static_cast<std::uint64_t>(p)));

    EyeParams eye_params[2];
    for (auto& ep : eye_params) {
      ep.mean = prng.truncated_normal(config.pir_mean_center, config.pir_mean_spread,
                                      config.pir_mean_lo, config.pir_mean_hi);
      ep.sd = prng.truncated_normal(config.pir_sd_center, config.pir_sd_spread,
                                    config.pir_sd_lo, config.pir_sd_hi);
    }
    const double iris_width = prng.uniform(config.iris_width_lo, config.iris_width_hi);

    // PHQ-9 endpoint flags: a depressive window forces both of its
    // assessments high; a non-depressive window needs at least one low.
    std::vector<std::optional<bool>> high(wpp + 1);
    auto is_dep = [&](int w) { return depressive[p * wpp + w] != 0; };
    for (int w = 0; w < wpp; ++w)
      if (is_dep(w)) {
        high[w] = true;
        high[w + 1] = true;
      }
    for (int w = 0; w < wpp; ++w) {
      if (is_dep(w)) continue;
      if (high[w] != true)
        high[w] = false;
      else
        high[w + 1] = false;
    }
    for (auto& h : high)
      if (!h.has_value()) h = false;

    std::vector<int> scores(wpp + 1);
    for (int a = 0; a <= wpp; ++a)
      scores[a] = *high[a] ? 5 + static_cast<int>(prng.uniform_int(16))
                           : static_cast<int>(prng.uniform_int(5));

    for (int a = 0; a <= wpp; ++a) {
      const char* kind = a == 0 ? "baseline" : (a == wpp ? "endpoint" : "midpoint");
      cohort.phq9.push_back({pid, kind, config.start_date.plus_days(14 * a), scores[a]});
    }
    for (int w = 0; w < wpp; ++w) {
      WindowTruth window;
      window.participant_id = pid;
      window.start_date = config.start_date.plus_days(14 * w);
      window.end_date = window.start_date.plus_days(13);
      window.label = is_dep(w);
      window.phq9_start = scores[w];
      window.phq9_end = scores[w + 1];
      cohort.truth.windows.push_back(std::move(window));
    }

    int session_counter = 0;
    for (int d = 0; d < config.days_per_participant; ++d) {
      const CivilDate date = config.start_date.plus_days(d);
      const bool dep_day = is_dep(d / 14);
      Rng day_rng(derive_seed(config.seed, "day", static_cast<std::uint64_t>(p),
                              static_cast<std::uint64_t>(d)));
      if (day_rng.uniform01() < config.day_missing_prob) continue;

      for (int e = 0; e < 4; ++e) {
        if (day_rng.uniform01() < config.missing_epoch_prob) continue;
        // One trigger yields a left and a right burst, so trigger rate is
        // half the per-session rate.
        double lambda = 0.5 * config.sessions_per_day_mean * config.epoch_weights[e] / weight_sum;
        if (dep_day && e == 3) lambda *= config.effects.evening_count_mult;
        const int triggers = day_rng.poisson(lambda);

        for (int t = 0; t < triggers; ++t) {
          const int sec_in_epoch =
              static_cast<int>(day_rng.uniform_int(6 * 3600 - config.frames_per_burst));
          const int sec_of_day = e * 6 * 3600 + sec_in_epoch;
          const CivilDateTime start = CivilDateTime::from_seconds(date.to_days() * 86400 + sec_of_day);
          char sid[16];
          std::snprintf(sid, sizeof sid, "s%05d", session_counter++);
          const bool bad_session = day_rng.uniform01() < config.bad_session_prob;

          for (EyeSide eye : {EyeSide::left, EyeSide::right}) {
            const auto& ep = eye_params[static_cast<int>(eye)];
            double mu = ep.mean;
            double sd = ep.sd;
            if (dep_day && e == 1) {  // morning effects
              if (eye == EyeSide::left) mu += config.effects.morning_left_mean_shift;
              if (eye == EyeSide::right) sd *= config.effects.morning_right_sd_mult;
            }
            const double true_pir = day_rng.truncated_normal(mu, sd, 0.05, 0.95);

            bool estimable = false;
            for (int f = 0; f < config.frames_per_burst; ++f) {
              FrameRecord frame;
              frame.participant_id = pid;
              frame.session_id = sid;
              frame.eye = eye;
              frame.timestamp = CivilDateTime::from_seconds(start.to_seconds() + f);
              if (bad_session)
                frame.eye_open_prob = day_rng.uniform(0.0, 0.5);
              else if (day_rng.uniform01() < config.eye_closed_frac)
                frame.eye_open_prob = day_rng.uniform(0.0, 0.7499);
              else
                frame.eye_open_prob = day_rng.uniform(0.75, 1.0);
              if (frame.eye_open_prob >= 0.75) estimable = true;

              const double iris_w =
                  std::max(8.0, iris_width * (1.0 + day_rng.normal(0.0, config.frame_jitter_sd)));
              const double pupil_w = std::max(
                  1.5, true_pir * iris_width * (1.0 + day_rng.normal(0.0, config.frame_jitter_sd)));
              const double cx = 100.0 + day_rng.normal(0.0, 2.0);
              const double cy = 80.0 + day_rng.normal(0.0, 2.0);
              const double iris_h = iris_w * (1.0 + day_rng.normal(0.0, 0.01));
              const double pupil_h = pupil_w * (1.0 + day_rng.normal(0.0, 0.01));

              Detection iris;
              iris.class_label = DetectionClass::iris;
              iris.score = day_rng.uniform(0.70, 0.99);
              iris.box = {cx - iris_w / 2, cy - iris_h / 2, cx + iris_w / 2, cy + iris_h / 2};
              Detection pupil;
              pupil.class_label = DetectionClass::pupil;
              pupil.score = day_rng.uniform(0.60, 0.99);
              pupil.box = {cx - pupil_w / 2, cy - pupil_h / 2, cx + pupil_w / 2,
                           cy + pupil_h / 2};
              frame.detections.push_back(iris);
              frame.detections.push_back(pupil);
              if (day_rng.uniform01() < config.extra_detection_prob) {
                // A weaker duplicate instance, as multi-instance predictions
                // produce in practice; max-score selection must ignore it.
                Detection extra = day_rng.uniform01() < 0.5 ? iris : pupil;
                extra.score = day_rng.uniform(0.05, extra.score * 0.9);
                extra.box.x1 += day_rng.uniform(-3.0, 3.0);
                extra.box.x2 += day_rng.uniform(-3.0, 3.0);
                if (extra.box.x2 - extra.box.x1 < 2.0) extra.box.x2 = extra.box.x1 + 2.0;
                frame.detections.push_back(extra);
              }
              cohort.frames.push_back(std::move(frame));
            }
            cohort.truth.sessions.push_back({pid, sid, eye, start, true_pir, estimable});
          }
        }
      }
    }
  }
  return cohort;
}

std::vector<WindowTruth> emit_gold_episode_labels(const GroundTruth& truth) {
  return truth.windows;
}

namespace {

using nlohmann::json;

}  // namespace

void write_ground_truth_jsonl(const std::filesystem::path& path, const GroundTruth& truth) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  for (const auto& w : truth.windows) {
    out << json{{"type", "window"},
                {"participant_id", w.participant_id},
                {"start_date", w.start_date.to_string()},
                {"end_date", w.end_date.to_string()},
                {"label", w.label},
                {"phq9_start", w.phq9_start},
                {"phq9_end", w.phq9_end}}
               .dump()
        << '\n';
  }
  for (const auto& s : truth.sessions) {
    out << json{{"type", "session"},
                {"participant_id", s.participant_id},
                {"session_id", s.session_id},
                {"eye", std::string(to_string(s.eye))},
                {"timestamp", s.timestamp.to_string()},
                {"true_pir", s.true_pir},
                {"estimable", s.estimable}}
               .dump()
        << '\n';
  }
}

GroundTruth read_ground_truth_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  GroundTruth truth;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    const std::string type = j.at("type").get<std::string>();
    if (type == "window") {
      WindowTruth w;
      w.participant_id = j.at("participant_id").get<std::string>();
      w.start_date = *CivilDate::parse(j.at("start_date").get<std::string>());
      w.end_date = *CivilDate::parse(j.at("end_date").get<std::string>());
      w.label = j.at("label").get<bool>();
      w.phq9_start = j.at("phq9_start").get<int>();
      w.phq9_end = j.at("phq9_end").get<int>();
      truth.windows.push_back(std::move(w));
    } else if (type == "session") {
      SessionTruth s;
      s.participant_id = j.at("participant_id").get<std::string>();
      s.session_id = j.at("session_id").get<std::string>();
      s.eye = *eye_from_string(j.at("eye").get<std::string>());
      s.timestamp = *CivilDateTime::parse(j.at("timestamp").get<std::string>());
      s.true_pir = j.at("true_pir").get<double>();
      s.estimable = j.at("estimable").get<bool>();
      truth.sessions.push_back(std::move(s));
    }
  }
  return truth;
}

}  // namespace pupilpipe
