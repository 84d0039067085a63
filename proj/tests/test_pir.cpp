#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "pupilpipe/pir.hpp"
#include "pupilpipe/rng.hpp"

using namespace pupilpipe;

namespace {

Detection det(DetectionClass cls, double score, double x1, double y1, double x2, double y2) {
  return {cls, score, {x1, y1, x2, y2}};
}

FrameRecord frame_with(double prob, std::vector<Detection> detections, int second = 0) {
  FrameRecord r;
  r.participant_id = "P01";
  r.session_id = "s1";
  r.eye = EyeSide::left;
  r.timestamp = CivilDateTime::from_seconds(CivilDate{2024, 3, 4}.to_days() * 86400 + 36000 +
                                            second);
  r.eye_open_prob = prob;
  r.detections = std::move(detections);
  return r;
}

BurstSession session_of(std::vector<FrameRecord> frames) {
  BurstSession s;
  s.participant_id = "P01";
  s.session_id = "s1";
  s.eye = EyeSide::left;
  s.frames = std::move(frames);
  return s;
}

// Frame whose iris and pupil boxes have the given widths.
FrameRecord two_box_frame(double prob, double iris_w, double pupil_w, int second = 0) {
  return frame_with(prob,
                    {det(DetectionClass::iris, 0.9, 100, 100, 100 + iris_w, 100 + iris_w),
                     det(DetectionClass::pupil, 0.8, 110, 110, 110 + pupil_w, 110 + pupil_w)},
                    second);
}

}  // namespace

TEST_CASE("filter_open_frames keeps the 0.75 boundary") {
  const auto s = session_of({two_box_frame(0.9, 10, 3, 0), two_box_frame(0.5, 10, 3, 1),
                             two_box_frame(0.75, 10, 3, 2)});
  const auto r = filter_open_frames(s, 0.75);
  REQUIRE(r.kept.size() == 2);
  CHECK(r.kept[0].eye_open_prob == 0.9);
  CHECK(r.kept[1].eye_open_prob == 0.75);
  CHECK(r.skipped == 1);
}

TEST_CASE("filter_open_frames edge thresholds") {
  const auto s = session_of({two_box_frame(0.0, 10, 3, 0), two_box_frame(0.0, 10, 3, 1)});
  CHECK(filter_open_frames(s, 0.75).kept.empty());
  CHECK(filter_open_frames(s, 0.75).skipped == 2);
  CHECK(filter_open_frames(s, 0.0).kept.size() == 2);
  CHECK_THROWS_AS(filter_open_frames(s, 1.1), std::invalid_argument);
}

TEST_CASE("pick_instances selects the max-score detection per class") {
  const std::vector<Detection> both = {det(DetectionClass::iris, 0.8, 0, 0, 40, 40),
                                       det(DetectionClass::pupil, 0.9, 10, 10, 26, 26)};
  const auto picked = std::get<InstancePick>(pick_instances(both));
  CHECK(picked.iris.score == 0.8);
  CHECK(picked.pupil.score == 0.9);

  const std::vector<Detection> multi = {det(DetectionClass::iris, 0.8, 0, 0, 40, 40),
                                        det(DetectionClass::iris, 0.9, 1, 1, 39, 39),
                                        det(DetectionClass::pupil, 0.7, 10, 10, 26, 26)};
  const auto best = std::get<InstancePick>(pick_instances(multi));
  CHECK(best.iris.score == 0.9);
  CHECK(best.pupil.score == 0.7);
}

TEST_CASE("pick_instances reports a missing class") {
  const std::vector<Detection> only_iris = {det(DetectionClass::iris, 0.8, 0, 0, 40, 40),
                                            det(DetectionClass::iris, 0.6, 0, 0, 30, 30)};
  CHECK(std::get<SkipReason>(pick_instances(only_iris)) == SkipReason::missing_class);
  CHECK(std::get<SkipReason>(pick_instances({})) == SkipReason::missing_class);
}

TEST_CASE("pick_instances breaks score ties by larger box area then order") {
  const std::vector<Detection> tied = {det(DetectionClass::iris, 0.8, 0, 0, 30, 30),
                                       det(DetectionClass::iris, 0.8, 0, 0, 40, 40),
                                       det(DetectionClass::pupil, 0.5, 0, 0, 10, 10),
                                       det(DetectionClass::pupil, 0.5, 0, 0, 10, 10)};
  const auto picked = std::get<InstancePick>(pick_instances(tied));
  CHECK(picked.iris.box.x2 == 40);   // larger area wins
  CHECK(&picked.pupil != nullptr);   // equal areas: first occurrence kept
}

TEST_CASE("box_radius uses the horizontal extent only") {
  CHECK(*box_radius({0, 0, 10, 8}) == 5.0);
  CHECK(*box_radius({100, 50, 140, 92}) == 20.0);
  CHECK_FALSE(box_radius({3, 1, 3.5, 4}).has_value());
}

TEST_CASE("pupil_center formula") {
  auto c = pupil_center({0, 0, 10, 10});
  CHECK(c->x == 5.0);
  CHECK(c->y == 5.0);
  c = pupil_center({10, 20, 30, 50});
  CHECK(c->x == 20.0);
  CHECK(c->y == 40.0);
  c = pupil_center({0, 0, 4, 100});
  CHECK(c->x == 2.0);
  CHECK(c->y == 98.0);
  CHECK_FALSE(pupil_center({3, 1, 3.5, 4}).has_value());
}

TEST_CASE("single-frame session gives the frame's box ratio") {
  const auto result = estimate_session_pir(session_of({two_box_frame(0.9, 10, 3)}), 0.75);
  const auto& sample = std::get<PirSample>(result);
  CHECK(sample.pir == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(sample.frames_used == 1);
  CHECK(sample.frames_skipped == 0);
}

TEST_CASE("two-frame session is the ratio of means, not the mean of ratios") {
  const auto result = estimate_session_pir(
      session_of({two_box_frame(0.9, 10, 3, 0), two_box_frame(0.9, 20, 8, 1)}), 0.75);
  const auto& sample = std::get<PirSample>(result);
  CHECK(sample.iris_radius_px == doctest::Approx(7.5).epsilon(1e-12));
  CHECK(sample.pupil_radius_px == doctest::Approx(2.75).epsilon(1e-12));
  CHECK(std::fabs(sample.pir - 11.0 / 30.0) < 1e-9);
  CHECK(std::fabs(sample.pir - 0.35) > 1e-3);  // mean of ratios would give 0.35
}

TEST_CASE("session with every eye closed fails") {
  const auto result = estimate_session_pir(
      session_of({two_box_frame(0.5, 10, 3, 0), two_box_frame(0.5, 10, 3, 1)}), 0.75);
  CHECK(std::holds_alternative<EstimationFailure>(result));
}

TEST_CASE("frames with a missing class or degenerate box are skipped, not fatal") {
  auto missing = frame_with(0.9, {det(DetectionClass::iris, 0.9, 0, 0, 40, 40)}, 1);
  auto degenerate = frame_with(
      0.9,
      {det(DetectionClass::iris, 0.9, 0, 0, 40, 40), det(DetectionClass::pupil, 0.9, 5, 5, 5.5, 9)},
      2);
  const auto result = estimate_session_pir(
      session_of({two_box_frame(0.9, 10, 3, 0), missing, degenerate, two_box_frame(0.4, 10, 3, 3)}),
      0.75);
  const auto& sample = std::get<PirSample>(result);
  CHECK(sample.frames_used == 1);
  CHECK(sample.frames_skipped == 3);
  CHECK(sample.pir == doctest::Approx(0.3));
  CHECK(sample.timestamp.to_string() == session_of({two_box_frame(0.9, 10, 3, 0)}).frames[0].timestamp.to_string());
}

TEST_CASE("pir sample stores pir exactly as the stored radius ratio") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<FrameRecord> frames;
    const int n = 1 + static_cast<int>(rng.uniform_int(10));
    for (int i = 0; i < n; ++i)
      frames.push_back(two_box_frame(rng.uniform01(), rng.uniform(2, 90), rng.uniform(1.5, 60), i));
    const auto result = estimate_session_pir(session_of(frames), 0.5);
    if (std::holds_alternative<EstimationFailure>(result)) continue;
    const auto& s = std::get<PirSample>(result);
    CHECK(std::fabs(s.pir - s.pupil_radius_px / s.iris_radius_px) < 1e-12);
    CHECK(s.pir > 0);
    CHECK(s.frames_used + s.frames_skipped == n);
  }
}

TEST_CASE("scale invariance: pir is unchanged by uniform box scaling") {
  Rng rng(9);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<FrameRecord> frames;
    const int n = 1 + static_cast<int>(rng.uniform_int(8));
    for (int i = 0; i < n; ++i)
      frames.push_back(two_box_frame(rng.uniform01(), rng.uniform(3, 80), rng.uniform(1.5, 50), i));
    const double scale = rng.uniform(0.3, 7.0);
    auto scaled = frames;
    for (auto& f : scaled)
      for (auto& d : f.detections) {
        d.box.x1 *= scale;
        d.box.y1 *= scale;
        d.box.x2 *= scale;
        d.box.y2 *= scale;
      }
    const auto a = estimate_session_pir(session_of(frames), 0.6);
    const auto b = estimate_session_pir(session_of(scaled), 0.6);
    REQUIRE(std::holds_alternative<PirSample>(a) == std::holds_alternative<PirSample>(b));
    if (std::holds_alternative<PirSample>(a))
      CHECK(std::fabs(std::get<PirSample>(a).pir - std::get<PirSample>(b).pir) < 1e-12);
  }
}

TEST_CASE("frame order within a session does not change the estimate") {
  Rng rng(13);
  std::vector<FrameRecord> frames;
  for (int i = 0; i < 9; ++i)
    frames.push_back(two_box_frame(rng.uniform01(), rng.uniform(3, 80), rng.uniform(1.5, 50), i));
  const auto base = estimate_session_pir(session_of(frames), 0.5);
  for (int trial = 0; trial < 5; ++trial) {
    auto shuffled = frames;
    rng.shuffle(shuffled);
    const auto r = estimate_session_pir(session_of(shuffled), 0.5);
    const auto& a = std::get<PirSample>(base);
    const auto& b = std::get<PirSample>(r);
    CHECK(std::fabs(a.pir - b.pir) < 1e-12);
    CHECK(a.frames_used == b.frames_used);
    CHECK(a.frames_skipped == b.frames_skipped);
  }
}

TEST_CASE("raising the eye-open threshold never increases frames used") {
  Rng rng(21);
  std::vector<FrameRecord> frames;
  for (int i = 0; i < 12; ++i)
    frames.push_back(two_box_frame(rng.uniform01(), rng.uniform(3, 80), rng.uniform(1.5, 50), i));
  const auto s = session_of(frames);
  int prev = 1 << 30;
  for (double threshold : {0.0, 0.2, 0.5, 0.75, 0.9, 1.0}) {
    const auto r = estimate_session_pir(s, threshold);
    const int used = std::holds_alternative<PirSample>(r)
                         ? std::get<PirSample>(r).frames_used
                         : 0;
    CHECK(used <= prev);
    prev = used;
  }
}

TEST_CASE("estimate_batch equals the element-wise loop and keeps failure keys") {
  std::vector<BurstSession> sessions;
  sessions.push_back(session_of({two_box_frame(0.9, 10, 3)}));
  auto closed = session_of({two_box_frame(0.5, 10, 3)});
  closed.session_id = "s2";
  sessions.push_back(closed);
  auto third = session_of({two_box_frame(0.8, 20, 8)});
  third.session_id = "s3";
  sessions.push_back(third);

  const auto batch = estimate_batch(sessions, 0.75);
  CHECK(batch.samples.size() == 2);
  REQUIRE(batch.failures.size() == 1);
  CHECK(batch.failures[0].key.session_id == "s2");

  std::size_t sample_at = 0;
  for (const auto& s : sessions) {
    const auto single = estimate_session_pir(s, 0.75);
    if (std::holds_alternative<PirSample>(single)) {
      CHECK(std::get<PirSample>(single).pir == batch.samples[sample_at].pir);
      ++sample_at;
    }
  }
  CHECK(estimate_batch({}, 0.75).samples.empty());
}

TEST_CASE("ratios above 1 pass through unfiltered") {
  const auto result = estimate_session_pir(session_of({two_box_frame(0.9, 10, 30)}), 0.75);
  CHECK(std::get<PirSample>(result).pir == doctest::Approx(3.0));
}

TEST_CASE("strict containment audit flags pupil boxes outside the iris box") {
  auto outside = frame_with(
      0.9,
      {det(DetectionClass::iris, 0.9, 10, 10, 50, 50), det(DetectionClass::pupil, 0.8, 45, 20, 61, 36)},
      0);
  auto inside = frame_with(
      0.9,
      {det(DetectionClass::iris, 0.9, 10, 10, 50, 50), det(DetectionClass::pupil, 0.8, 22, 22, 38, 38)},
      1);
  auto closed = frame_with(
      0.1,
      {det(DetectionClass::iris, 0.9, 10, 10, 50, 50), det(DetectionClass::pupil, 0.8, 45, 20, 61, 36)},
      2);
  const auto warnings = audit_containment(session_of({outside, inside, closed}), 0.75);
  REQUIRE(warnings.size() == 1);  // closed frame is filtered before the audit
  CHECK(warnings[0].find("pupil box outside iris box") != std::string::npos);
}

TEST_CASE("pir CSV header and formatting") {
  CHECK(pir_csv_header() ==
        "participant_id,eye,timestamp,pir,iris_radius_px,pupil_radius_px,center_x,center_y,"
        "frames_used,frames_skipped");
  const auto result = estimate_session_pir(session_of({two_box_frame(0.9, 10, 3)}), 0.75);
  const auto line = pir_sample_to_csv(std::get<PirSample>(result));
  CHECK(line.find("P01,left,2024-03-04T10:00:00,0.300000,5.000000,1.500000") == 0);
}
