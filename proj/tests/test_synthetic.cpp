#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <sstream>
#include <tuple>

#include "pupilpipe/cohort.hpp"
#include "pupilpipe/io.hpp"
#include "pupilpipe/pir.hpp"
#include "pupilpipe/raster.hpp"
#include "pupilpipe/segment.hpp"

using namespace pupilpipe;

namespace {

EyeRasterSpec base_spec() {
  EyeRasterSpec spec;
  spec.width = spec.height = 64;
  spec.center_x = spec.center_y = 32;
  spec.iris_radius = 20;
  spec.pir = 0.4;
  return spec;
}

// Runs a single raster through segmentation and the two-box estimator.
std::optional<double> raster_pir(const Raster& raster) {
  const SegmentResult seg = segment_raster(raster);
  if (!seg.iris || !seg.pupil) return std::nullopt;
  BurstSession session;
  session.participant_id = "E01";
  session.session_id = "s1";
  session.eye = EyeSide::left;
  FrameRecord frame;
  frame.participant_id = "E01";
  frame.session_id = "s1";
  frame.eye = EyeSide::left;
  frame.timestamp = *CivilDateTime::parse("2024-03-04T09:00:00");
  frame.eye_open_prob = 0.95;
  frame.detections = seg.detections();
  session.frames.push_back(frame);
  const auto result = estimate_session_pir(session, 0.75);
  if (std::holds_alternative<EstimationFailure>(result)) return std::nullopt;
  return std::get<PirSample>(result).pir;
}

}  // namespace

TEST_CASE("render geometry: pupil, iris and sclera grays by construction") {
  const Raster raster = render_eye_raster(base_spec(), 0);
  CHECK(raster(32, 32) == base_spec().pupil_gray);
  CHECK(raster(47, 32) == base_spec().iris_gray);  // 15 px below the center
  CHECK(raster(2, 2) == base_spec().sclera_gray);
}

TEST_CASE("render rejects invalid specs") {
  auto spec = base_spec();
  spec.pir = 0.05;  // pupil radius 1 px
  CHECK_THROWS_AS(render_eye_raster(spec, 0), InvalidSpec);

  spec = base_spec();
  spec.center_x = 10;  // iris does not fit
  CHECK_THROWS_AS(render_eye_raster(spec, 0), InvalidSpec);

  spec = base_spec();
  spec.iris_gray = 210;  // violates pupil < iris < sclera
  CHECK_THROWS_AS(render_eye_raster(spec, 0), InvalidSpec);

  spec = base_spec();
  spec.eyelid_occlusion_frac = 1.0;
  CHECK_THROWS_AS(render_eye_raster(spec, 0), InvalidSpec);
}

TEST_CASE("render is deterministic per seed") {
  auto spec = base_spec();
  spec.noise_sd = 6.0;
  const Raster a = render_eye_raster(spec, 99);
  const Raster b = render_eye_raster(spec, 99);
  CHECK((a.array() == b.array()).all());
  const Raster c = render_eye_raster(spec, 100);
  CHECK_FALSE((a.array() == c.array()).all());
}

TEST_CASE("pgm round trips bit-exactly") {
  auto spec = base_spec();
  spec.noise_sd = 4.0;
  const Raster raster = render_eye_raster(spec, 7);
  const auto path = std::filesystem::temp_directory_path() / "pupilpipe_test.pgm";
  write_pgm(path, raster);
  const Raster readback = read_pgm(path);
  CHECK((raster.array() == readback.array()).all());
  std::filesystem::remove(path);
}

TEST_CASE("segmenting a clean raster recovers both boxes at the right size") {
  const SegmentResult seg = segment_raster(render_eye_raster(base_spec(), 0));
  REQUIRE(seg.iris.has_value());
  REQUIRE(seg.pupil.has_value());
  CHECK(seg.iris->box.width() == doctest::Approx(40.0).epsilon(2.0 / 40.0));
  CHECK(seg.pupil->box.width() == doctest::Approx(16.0).epsilon(2.0 / 16.0));
  CHECK(seg.iris->score > 0.8);
  CHECK(seg.pupil->score > 0.8);
  CHECK(seg.iris->class_label == DetectionClass::iris);
  CHECK(seg.pupil->class_label == DetectionClass::pupil);
}

TEST_CASE("an all-white raster yields no components") {
  Raster blank(64, 64);
  blank.setConstant(255);
  const SegmentResult seg = segment_raster(blank);
  CHECK_FALSE(seg.iris.has_value());
  CHECK_FALSE(seg.pupil.has_value());
  CHECK(seg.missing.size() == 2);
}

TEST_CASE("noisy rasters estimate PIR within 0.05") {
  auto spec = base_spec();
  spec.noise_sd = 8.0;
  const auto pir = raster_pir(render_eye_raster(spec, 21));
  REQUIRE(pir.has_value());
  CHECK(std::fabs(*pir - spec.pir) <= 0.05);
}

TEST_CASE("threshold overrides are honored") {
  const Raster raster = render_eye_raster(base_spec(), 0);
  SegmentParams params;
  params.pupil_max_gray = 55;
  params.iris_max_gray = 145;
  const SegmentResult seg = segment_raster(raster, params);
  CHECK(seg.pupil_threshold == 55);
  CHECK(seg.iris_threshold == 145);
  REQUIRE(seg.pupil.has_value());
  CHECK(seg.pupil->box.width() == doctest::Approx(16.0).epsilon(0.15));
}

TEST_CASE("deep eyelid occlusion shrinks the measured iris width") {
  auto spec = base_spec();
  spec.eyelid_occlusion_frac = 0.65;
  const SegmentResult seg = segment_raster(render_eye_raster(spec, 0));
  REQUIRE(seg.iris.has_value());
  CHECK(seg.iris->box.width() < 39.0);  // the failure mode the filter must catch
}

TEST_CASE("otsu splits a clean bimodal histogram between the modes") {
  std::array<std::int64_t, 256> hist{};
  hist[40] = 500;
  hist[200] = 800;
  const int t = otsu_threshold(hist, 0, 255);
  CHECK(t >= 40);
  CHECK(t < 200);
}

TEST_CASE("cohort generation is deterministic and validates config") {
  CohortConfig config;
  config.n_participants = 2;
  config.days_per_participant = 14;
  config.seed = 5;
  const Cohort a = generate_cohort(config);
  const Cohort b = generate_cohort(config);
  std::stringstream sa, sb;
  write_predictions_jsonl(sa, a.frames);
  write_predictions_jsonl(sb, b.frames);
  CHECK(sa.str() == sb.str());
  CHECK(a.phq9.size() == b.phq9.size());

  CohortConfig bad = config;
  bad.n_participants = 0;
  CHECK_THROWS_AS(generate_cohort(bad), InvalidConfig);
  bad = config;
  bad.days_per_participant = 21;
  CHECK_THROWS_AS(generate_cohort(bad), InvalidConfig);
  bad = config;
  bad.depressive_fraction = 1.5;
  CHECK_THROWS_AS(generate_cohort(bad), InvalidConfig);
}

TEST_CASE("zero depressive fraction labels every window negative") {
  CohortConfig config;
  config.n_participants = 4;
  config.seed = 9;
  config.depressive_fraction = 0.0;
  const Cohort cohort = generate_cohort(config);
  CHECK(cohort.truth.windows.size() == 8);
  for (const auto& w : cohort.truth.windows) {
    CHECK_FALSE(w.label);
    const bool both_endpoints_high = w.phq9_start >= 5 && w.phq9_end >= 5;
    CHECK_FALSE(both_endpoints_high);
  }
}

TEST_CASE("PHQ-9 derived windows reproduce the generator's labels exactly") {
  CohortConfig config;
  config.n_participants = 8;
  config.seed = 13;
  const Cohort cohort = generate_cohort(config);
  const auto derived = derive_windows_from_phq9(cohort.phq9);
  const auto gold = emit_gold_episode_labels(cohort.truth);
  REQUIRE(derived.size() == gold.size());
  for (std::size_t i = 0; i < derived.size(); ++i) {
    CHECK(derived[i].participant_id == gold[i].participant_id);
    CHECK(derived[i].start_date == gold[i].start_date);
    CHECK(derived[i].end_date == gold[i].end_date);
    CHECK(derived[i].label() == gold[i].label);
  }
}

TEST_CASE("session rate stays near the configured per-day mean") {
  CohortConfig config;
  config.n_participants = 25;
  config.seed = 7;
  const Cohort cohort = generate_cohort(config);
  const double per_day = static_cast<double>(cohort.truth.sessions.size()) /
                         (config.n_participants * config.days_per_participant);
  CHECK(per_day > 11.85 * 0.9);
  CHECK(per_day < 11.85 * 1.1);
}

TEST_CASE("generator bookkeeping matches the estimation pipeline") {
  CohortConfig config;
  config.n_participants = 5;
  config.days_per_participant = 14;
  config.seed = 17;
  const Cohort cohort = generate_cohort(config);

  const GroupResult grouped = group_sessions(cohort.frames);
  CHECK(grouped.sessions.size() == cohort.truth.sessions.size());
  CHECK(grouped.duplicates_dropped == 0);

  const BatchResult batch = estimate_batch(grouped.sessions, 0.75);
  std::size_t estimable = 0;
  for (const auto& s : cohort.truth.sessions) estimable += s.estimable ? 1 : 0;
  CHECK(batch.samples.size() == estimable);
  CHECK(batch.failures.size() == cohort.truth.sessions.size() - estimable);
}

TEST_CASE("estimated session PIR tracks the generator's truth") {
  CohortConfig config;
  config.n_participants = 3;
  config.days_per_participant = 14;
  config.seed = 19;
  const Cohort cohort = generate_cohort(config);
  const BatchResult batch = estimate_batch(group_sessions(cohort.frames).sessions, 0.75);

  std::map<std::tuple<std::string, std::string, EyeSide>, double> truth;
  for (const auto& s : cohort.truth.sessions)
    truth[{s.participant_id, s.session_id, s.eye}] = s.true_pir;
  // Session keys are not carried on PirSample; regroup to recover them.
  const auto sessions = group_sessions(cohort.frames).sessions;
  std::size_t sample_at = 0;
  double worst = 0;
  for (const auto& session : sessions) {
    const auto result = estimate_session_pir(session, 0.75);
    if (std::holds_alternative<EstimationFailure>(result)) continue;
    const double est = std::get<PirSample>(result).pir;
    const double expected = truth.at({session.participant_id, session.session_id, session.eye});
    worst = std::max(worst, std::fabs(est - expected));
    ++sample_at;
  }
  CHECK(sample_at == batch.samples.size());
  CHECK(worst < 0.05);  // frame jitter averages out within a burst
}

TEST_CASE("ground truth sidecar round trips") {
  CohortConfig config;
  config.n_participants = 2;
  config.days_per_participant = 14;
  config.seed = 23;
  const Cohort cohort = generate_cohort(config);
  const auto path = std::filesystem::temp_directory_path() / "pupilpipe_truth_test.jsonl";
  write_ground_truth_jsonl(path, cohort.truth);
  const GroundTruth readback = read_ground_truth_jsonl(path);
  CHECK(readback.windows.size() == cohort.truth.windows.size());
  REQUIRE(readback.sessions.size() == cohort.truth.sessions.size());
  CHECK(readback.sessions[0].session_id == cohort.truth.sessions[0].session_id);
  CHECK(readback.sessions[0].true_pir ==
        doctest::Approx(cohort.truth.sessions[0].true_pir).epsilon(1e-12));
  std::filesystem::remove(path);
}
