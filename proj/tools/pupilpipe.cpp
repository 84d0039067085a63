// pupilpipe command-line interface: synthetic data generation, PIR
// estimation, feature building, correlation analysis and LOPO evaluation.
// Every command writes a run manifest next to its outputs; all randomness
// flows from --seed.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pupilpipe/cohort.hpp"
#include "pupilpipe/evaluation.hpp"
#include "pupilpipe/features.hpp"
#include "pupilpipe/io.hpp"
#include "pupilpipe/manifest.hpp"
#include "pupilpipe/pir.hpp"
#include "pupilpipe/raster.hpp"
#include "pupilpipe/rng.hpp"
#include "pupilpipe/segment.hpp"
#include "pupilpipe/stats.hpp"
#include "pupilpipe/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pupilpipe;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitUsage = 2;
constexpr int kExitSingleClass = 3;

void warn_default_seed(bool seed_given) {
  if (!seed_given)
    std::cerr << "WARNING: --seed not provided; using seed 0 (results are still "
                 "deterministic, pass --seed to vary them)\n";
}

struct SynthCohortArgs {
  int participants = 25;
  int days = 28;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string out_dir;
  double depressive_frac = 14.0 / 44.0;
  double sessions_per_day = 11.85;
  std::string effect_profile = "default";
};

int run_synth_cohort(const SynthCohortArgs& args) {
  warn_default_seed(args.seed_given);
  StageTimer total;
  CohortConfig config;
  config.n_participants = args.participants;
  config.days_per_participant = args.days;
  config.seed = args.seed;
  config.depressive_fraction = args.depressive_frac;
  config.sessions_per_day_mean = args.sessions_per_day;
  if (args.effect_profile == "null")
    config.effects = EffectProfile::null_profile();
  else if (args.effect_profile != "default")
    throw CLI::ValidationError("--effect-profile", "must be 'default' or 'null'");

  fs::create_directories(args.out_dir);
  const fs::path dir(args.out_dir);

  StageTimer generate;
  const Cohort cohort = generate_cohort(config);
  const double generate_ms = generate.elapsed_ms();

  StageTimer write;
  write_predictions_file(dir / "predictions.jsonl", cohort.frames);
  write_phq9_csv(dir / "phq9.csv", cohort.phq9);
  write_ground_truth_jsonl(dir / "ground_truth.jsonl", cohort.truth);
  const double write_ms = write.elapsed_ms();

  RunManifest manifest("synth-cohort", args.seed);
  manifest.set_config(json{{"participants", args.participants},
                           {"days", args.days},
                           {"depressive_frac", args.depressive_frac},
                           {"sessions_per_day", args.sessions_per_day},
                           {"effect_profile", args.effect_profile}});
  manifest.add_output(dir / "predictions.jsonl");
  manifest.add_output(dir / "phq9.csv");
  manifest.add_output(dir / "ground_truth.jsonl");
  manifest.add_timing("generate", generate_ms);
  manifest.add_timing("write", write_ms);
  manifest.add_timing("total", total.elapsed_ms());
  manifest.write(dir / "manifest.json");

  int estimable = 0;
  for (const auto& s : cohort.truth.sessions) estimable += s.estimable ? 1 : 0;
  std::cout << "participants: " << args.participants << ", frames: " << cohort.frames.size()
            << ", sessions: " << cohort.truth.sessions.size() << " (" << estimable
            << " estimable), windows: " << cohort.truth.windows.size() << '\n';
  return kExitOk;
}

struct SynthEyesArgs {
  int count = 50;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string out_dir;
  double noise_sd = 0.0;
  double occlusion = 0.0;
  double iris_min = 20.0;
  double iris_max = 40.0;
  double pir_min = 0.2;
  double pir_max = 0.7;
  bool grid = false;
};

int run_synth_eyes(const SynthEyesArgs& args) {
  warn_default_seed(args.seed_given);
  StageTimer total;
  fs::create_directories(args.out_dir);
  const fs::path dir(args.out_dir);

  struct Plan {
    double pir;
    double iris_radius;
  };
  std::vector<Plan> plans;
  Rng rng(derive_seed(args.seed, "synth-eyes"));
  if (args.grid) {
    for (int p = 0; p <= 10; ++p)
      for (double r : {20.0, 25.0, 30.0, 35.0, 40.0})
        plans.push_back({0.20 + 0.05 * p, r});
  } else {
    for (int i = 0; i < args.count; ++i)
      plans.push_back({rng.uniform(args.pir_min, args.pir_max),
                       rng.uniform(args.iris_min, args.iris_max)});
  }

  std::ofstream index(dir / "index.jsonl");
  if (!index) throw IoError("cannot open index.jsonl for writing");
  const CivilDateTime base = *CivilDateTime::parse("2024-03-04T09:00:00");
  for (std::size_t i = 0; i < plans.size(); ++i) {
    EyeRasterSpec spec;
    const double margin = 10.0;
    const int side = static_cast<int>(std::ceil(2.0 * (plans[i].iris_radius + margin)));
    spec.width = spec.height = side;
    spec.center_x = side / 2.0 + rng.uniform(-0.5, 0.5);
    spec.center_y = side / 2.0 + rng.uniform(-0.5, 0.5);
    spec.iris_radius = plans[i].iris_radius;
    spec.pir = plans[i].pir;
    spec.noise_sd = args.noise_sd;
    spec.eyelid_occlusion_frac = args.occlusion;

    char name[32];
    std::snprintf(name, sizeof name, "eye_%05zu.pgm", i);
    write_pgm(dir / name, render_eye_raster(spec, derive_seed(args.seed, "raster", i)));

    char sid[16];
    std::snprintf(sid, sizeof sid, "s%05zu", i);
    index << json{{"file", name},
                  {"participant_id", "E01"},
                  {"session_id", sid},
                  {"eye", "left"},
                  {"timestamp",
                   CivilDateTime::from_seconds(base.to_seconds() + 60 * static_cast<long>(i))
                       .to_string()},
                  {"eye_open_prob", 0.95},
                  {"true_pir", spec.pir},
                  {"iris_radius", spec.iris_radius}}
                 .dump()
          << '\n';
  }
  index.close();

  RunManifest manifest("synth-eyes", args.seed);
  manifest.set_config(json{{"count", plans.size()},
                           {"grid", args.grid},
                           {"noise_sd", args.noise_sd},
                           {"occlusion", args.occlusion},
                           {"iris_min", args.iris_min},
                           {"iris_max", args.iris_max}});
  manifest.add_output(dir / "index.jsonl");
  manifest.add_timing("total", total.elapsed_ms());
  manifest.write(dir / "manifest.json");
  std::cout << "rasters: " << plans.size() << '\n';
  return kExitOk;
}

struct SegmentArgs {
  std::string in_dir;
  std::string out_file;
  int pupil_max_gray = -1;
  int iris_max_gray = -1;
};

int run_segment(const SegmentArgs& args) {
  StageTimer total;
  const fs::path dir(args.in_dir);
  std::ifstream index(dir / "index.jsonl");
  if (!index) throw IoError("cannot open " + (dir / "index.jsonl").string());

  SegmentParams params;
  if (args.pupil_max_gray >= 0) params.pupil_max_gray = args.pupil_max_gray;
  if (args.iris_max_gray >= 0) params.iris_max_gray = args.iris_max_gray;

  std::vector<FrameRecord> records;
  int missing_components = 0;
  std::string line;
  while (std::getline(index, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    const Raster raster = read_pgm(dir / j.at("file").get<std::string>());
    const SegmentResult seg = segment_raster(raster, params);
    missing_components += static_cast<int>(seg.missing.size());
    FrameRecord r;
    r.participant_id = j.at("participant_id").get<std::string>();
    r.session_id = j.at("session_id").get<std::string>();
    r.eye = *eye_from_string(j.at("eye").get<std::string>());
    r.timestamp = *CivilDateTime::parse(j.at("timestamp").get<std::string>());
    r.eye_open_prob = j.at("eye_open_prob").get<double>();
    r.detections = seg.detections();
    records.push_back(std::move(r));
  }
  write_predictions_file(args.out_file, records);

  RunManifest manifest("segment", 0);
  manifest.set_config(json{{"in", args.in_dir},
                           {"pupil_max_gray", args.pupil_max_gray},
                           {"iris_max_gray", args.iris_max_gray}});
  manifest.add_input(dir / "index.jsonl");
  manifest.add_output(args.out_file);
  manifest.add_timing("total", total.elapsed_ms());
  manifest.write(args.out_file + ".manifest.json");
  std::cout << "frames: " << records.size() << ", missing components: " << missing_components
            << '\n';
  return kExitOk;
}

struct PirArgs {
  std::string in_file;
  std::string out_file;
  std::string failures_file;
  double threshold = kDefaultEyeOpenThreshold;
  bool strict = false;
};

int run_pir(const PirArgs& args) {
  StageTimer total;
  StageTimer read;
  const PredictionsReadResult input = read_predictions_file(args.in_file);
  const double read_ms = read.elapsed_ms();

  std::vector<FrameRecord> valid;
  int invalid_records = 0;
  for (const auto& r : input.records) {
    if (validate_frame(r).ok())
      valid.push_back(r);
    else
      ++invalid_records;
  }

  StageTimer estimate;
  const GroupResult grouped = group_sessions(std::move(valid));
  const BatchResult batch = estimate_batch(grouped.sessions, args.threshold);
  const double estimate_ms = estimate.elapsed_ms();

  std::vector<std::string> containment;
  if (args.strict)
    for (const auto& session : grouped.sessions)
      for (auto& w : audit_containment(session, args.threshold))
        containment.push_back(std::move(w));

  write_pir_csv(args.out_file, batch.samples);
  const std::string failures_path =
      args.failures_file.empty() ? args.out_file + ".failures.csv" : args.failures_file;
  {
    std::ofstream out(failures_path);
    if (!out) throw IoError("cannot open " + failures_path + " for writing");
    out << "participant_id,session_id,eye,reason\n";
    for (const auto& f : batch.failures)
      out << f.key.participant_id << ',' << f.key.session_id << ',' << to_string(f.key.eye)
          << ",no_valid_frames\n";
  }

  RunManifest manifest("pir", 0);
  manifest.set_config(json{{"threshold", args.threshold}});
  manifest.add_input(args.in_file);
  manifest.add_output(args.out_file);
  manifest.add_output(failures_path);
  manifest.add_timing("read", read_ms);
  manifest.add_timing("estimate", estimate_ms);
  manifest.add_timing("total", total.elapsed_ms());
  for (const auto& e : input.errors)
    manifest.add_note("malformed line " + std::to_string(e.line_number) + ": " + e.message);
  if (invalid_records > 0)
    manifest.add_note(std::to_string(invalid_records) + " records failed validation");
  for (const auto& w : grouped.warnings) manifest.add_note(w);
  for (const auto& w : containment) manifest.add_note(w);
  manifest.write(args.out_file + ".manifest.json");

  std::cout << "lines: " << input.lines_total << " (" << input.errors.size()
            << " malformed), records: " << input.records.size() << " (" << invalid_records
            << " invalid), sessions in: " << grouped.sessions.size()
            << ", samples out: " << batch.samples.size()
            << ", failures: " << batch.failures.size() << '\n';
  if (args.strict)
    std::cerr << "strict: " << containment.size() << " containment warnings\n";
  return kExitOk;
}

struct FeaturesArgs {
  std::string pir_file;
  std::string phq9_file;
  std::string out_file;
  double lo = kDefaultPirLo;
  double hi = kDefaultPirHi;
};

int run_features(const FeaturesArgs& args) {
  StageTimer total;
  const PirCsvReadResult pir = read_pir_csv(args.pir_file);
  const std::vector<Phq9Entry> phq9 = read_phq9_csv(args.phq9_file);
  const std::vector<EpisodeWindow> windows = derive_windows_from_phq9(phq9);

  const FeatureTable table = build_feature_table(pir.samples, windows, args.lo, args.hi);
  write_feature_csv(args.out_file, table.days);

  RunManifest manifest("features", 0);
  manifest.set_config(json{{"lo", args.lo}, {"hi", args.hi}});
  manifest.add_input(args.pir_file);
  manifest.add_input(args.phq9_file);
  manifest.add_output(args.out_file);
  manifest.add_timing("total", total.elapsed_ms());
  for (const auto& e : pir.errors) manifest.add_note(e);
  for (const auto& w : table.warnings) manifest.add_note(w);
  manifest.write(args.out_file + ".manifest.json");

  int labeled_true = 0;
  for (const auto& d : table.days) labeled_true += d.label ? 1 : 0;
  std::cout << "samples: " << pir.samples.size() << ", windows: " << windows.size()
            << ", labeled days: " << table.days.size() << " (" << labeled_true
            << " depressive), dropped days: " << table.dropped_days
            << ", out-of-window days: " << table.warnings.size() << '\n';
  return kExitOk;
}

struct AnalyzeArgs {
  std::string features_file;
  std::string out_file;
  double p_max = kDefaultTsfPMax;
  double r_min = kDefaultTsfRMin;
  bool paper_format = false;
};

int run_analyze(const AnalyzeArgs& args) {
  StageTimer total;
  const std::vector<LabeledDay> days = read_feature_csv(args.features_file);
  const std::vector<FeatureCorrelation> table = correlation_table(days);
  write_correlation_csv(args.out_file, table, args.paper_format);

  const std::vector<std::string> tsf = select_tsf(table, args.p_max, args.r_min);
  std::cout << "days: " << days.size() << ", top significant features (p<" << args.p_max
            << ", |r|>=" << args.r_min << "): " << tsf.size() << '\n';
  for (const auto& name : tsf) std::cout << "  " << name << '\n';
  if (tsf.empty()) std::cerr << "WARNING: empty TSF selection\n";

  RunManifest manifest("analyze", 0);
  manifest.set_config(json{{"p_max", args.p_max},
                           {"r_min", args.r_min},
                           {"paper_format", args.paper_format}});
  manifest.add_input(args.features_file);
  manifest.add_output(args.out_file);
  manifest.add_timing("total", total.elapsed_ms());
  manifest.write(args.out_file + ".manifest.json");
  return kExitOk;
}

struct TrainEvalArgs {
  std::string features_file;
  std::string out_file;
  std::string feature_sets = "fs,tsf,all";
  std::uint64_t seed = 0;
  bool seed_given = false;
  bool paper_faithful = false;
  bool paper_format = false;
  std::string predictions_file;
  std::string report_file;
};

int run_train_eval(const TrainEvalArgs& args) {
  std::vector<FeatureSetSpec> sets;
  {
    std::string token;
    std::istringstream ss(args.feature_sets);
    while (std::getline(ss, token, ',')) {
      const auto set = feature_set_from_string(token);
      if (!set) throw CLI::ValidationError("--feature-sets", "unknown set '" + token + "'");
      sets.push_back(*set);
    }
    if (sets.empty()) throw CLI::ValidationError("--feature-sets", "no sets given");
  }

  warn_default_seed(args.seed_given);
  StageTimer total;
  const std::vector<LabeledDay> days = read_feature_csv(args.features_file);

  EvalOptions options;
  options.paper_faithful = args.paper_faithful;
  const HyperGrid grid = HyperGrid::default_grid();

  std::vector<EvalReport> reports;
  for (FeatureSetSpec set : sets)
    reports.push_back(run_lopo(days, set, grid, derive_seed(args.seed, to_string(set)), options));

  write_results_csv(args.out_file, reports, args.paper_format);
  if (!args.predictions_file.empty()) write_predictions_csv(args.predictions_file, reports);
  const std::string report_path =
      args.report_file.empty() ? args.out_file + ".report.json" : args.report_file;
  write_text_file(report_path, eval_manifest_json(reports) + "\n");

  RunManifest manifest("train-eval", args.seed);
  manifest.set_config(json{{"feature_sets", args.feature_sets},
                           {"paper_faithful", args.paper_faithful},
                           {"paper_format", args.paper_format}});
  manifest.add_input(args.features_file);
  manifest.add_output(args.out_file);
  manifest.add_output(report_path);
  if (!args.predictions_file.empty()) manifest.add_output(args.predictions_file);
  for (const auto& r : reports)
    manifest.add_timing(std::string(to_string(r.set)), r.wall_ms);
  manifest.add_timing("total", total.elapsed_ms());
  for (const auto& r : reports)
    for (const auto& w : r.warnings) manifest.add_note(std::string(to_string(r.set)) + ": " + w);
  manifest.write(args.out_file + ".manifest.json");

  for (const auto& r : reports) {
    std::cout << to_string(r.set) << ": accuracy " << format_real(r.metrics.accuracy)
              << ", f1 " << format_real(r.metrics.f1) << ", auroc "
              << (r.metrics.auroc ? format_real(*r.metrics.auroc) : "undefined") << " ("
              << r.predictions.size() << " predictions)\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pupilpipe: pupil-iris-ratio pipeline and episode-detection toolkit"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  SynthCohortArgs cohort_args;
  auto* synth_cohort = app.add_subcommand("synth-cohort", "generate a synthetic cohort");
  synth_cohort->add_option("--participants", cohort_args.participants)
      ->check(CLI::PositiveNumber);
  synth_cohort->add_option("--days", cohort_args.days)->check(CLI::IsMember({14, 28}));
  synth_cohort->add_option("--seed", cohort_args.seed);
  synth_cohort->add_option("--out", cohort_args.out_dir)->required();
  synth_cohort->add_option("--depressive-frac", cohort_args.depressive_frac)
      ->check(CLI::Range(0.0, 1.0));
  synth_cohort->add_option("--sessions-per-day", cohort_args.sessions_per_day)
      ->check(CLI::NonNegativeNumber);
  synth_cohort->add_option("--effect-profile", cohort_args.effect_profile)
      ->check(CLI::IsMember({"default", "null"}));

  SynthEyesArgs eyes_args;
  auto* synth_eyes = app.add_subcommand("synth-eyes", "render synthetic eye rasters");
  synth_eyes->add_option("--count", eyes_args.count)->check(CLI::PositiveNumber);
  synth_eyes->add_option("--seed", eyes_args.seed);
  synth_eyes->add_option("--out", eyes_args.out_dir)->required();
  synth_eyes->add_option("--noise-sd", eyes_args.noise_sd)->check(CLI::NonNegativeNumber);
  synth_eyes->add_option("--occlusion", eyes_args.occlusion)->check(CLI::Range(0.0, 0.99));
  synth_eyes->add_option("--iris-min", eyes_args.iris_min)->check(CLI::PositiveNumber);
  synth_eyes->add_option("--iris-max", eyes_args.iris_max)->check(CLI::PositiveNumber);
  synth_eyes->add_option("--pir-min", eyes_args.pir_min)->check(CLI::Range(0.05, 0.95));
  synth_eyes->add_option("--pir-max", eyes_args.pir_max)->check(CLI::Range(0.05, 0.95));
  synth_eyes->add_flag("--grid", eyes_args.grid, "render the 0.20..0.70 PIR grid");

  SegmentArgs segment_args;
  auto* segment = app.add_subcommand("segment", "segment rasters into predictions");
  segment->add_option("--in", segment_args.in_dir)->required()->check(CLI::ExistingDirectory);
  segment->add_option("--out", segment_args.out_file)->required();
  segment->add_option("--pupil-max-gray", segment_args.pupil_max_gray)
      ->check(CLI::Range(0, 255));
  segment->add_option("--iris-max-gray", segment_args.iris_max_gray)->check(CLI::Range(0, 255));

  PirArgs pir_args;
  auto* pir = app.add_subcommand("pir", "estimate pupil-iris ratios per session");
  pir->add_option("--in", pir_args.in_file)->required();
  pir->add_option("--out", pir_args.out_file)->required();
  pir->add_option("--failures", pir_args.failures_file);
  pir->add_option("--threshold", pir_args.threshold)->check(CLI::Range(0.0, 1.0));
  pir->add_flag("--strict", pir_args.strict, "report pupil-outside-iris containment warnings");

  FeaturesArgs features_args;
  auto* features = app.add_subcommand("features", "build labeled day features");
  features->add_option("--pir", features_args.pir_file)->required();
  features->add_option("--phq9", features_args.phq9_file)->required();
  features->add_option("--out", features_args.out_file)->required();
  features->add_option("--lo", features_args.lo);
  features->add_option("--hi", features_args.hi);

  AnalyzeArgs analyze_args;
  auto* analyze = app.add_subcommand("analyze", "correlate features with episode labels");
  analyze->add_option("--features", analyze_args.features_file)->required();
  analyze->add_option("--out", analyze_args.out_file)->required();
  analyze->add_option("--p-max", analyze_args.p_max)->check(CLI::Range(0.0, 1.0));
  analyze->add_option("--r-min", analyze_args.r_min)->check(CLI::Range(0.0, 1.0));
  analyze->add_flag("--paper-format", analyze_args.paper_format, "round reals to 2 decimals");

  TrainEvalArgs train_args;
  auto* train_eval = app.add_subcommand("train-eval", "LOPO evaluation per feature set");
  train_eval->add_option("--features", train_args.features_file)->required();
  train_eval->add_option("--out", train_args.out_file)->required();
  train_eval->add_option("--feature-sets", train_args.feature_sets);
  train_eval->add_option("--seed", train_args.seed);
  train_eval->add_option("--predictions", train_args.predictions_file);
  train_eval->add_option("--report", train_args.report_file);
  train_eval->add_flag("--paper-faithful", train_args.paper_faithful,
                       "compute feature selection once on the full table");
  train_eval->add_flag("--paper-format", train_args.paper_format, "round reals to 2 decimals");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  cohort_args.seed_given = synth_cohort->count("--seed") > 0;
  eyes_args.seed_given = synth_eyes->count("--seed") > 0;
  train_args.seed_given = train_eval->count("--seed") > 0;

  try {
    if (synth_cohort->parsed()) return run_synth_cohort(cohort_args);
    if (synth_eyes->parsed()) return run_synth_eyes(eyes_args);
    if (segment->parsed()) return run_segment(segment_args);
    if (pir->parsed()) return run_pir(pir_args);
    if (features->parsed()) return run_features(features_args);
    if (analyze->parsed()) return run_analyze(analyze_args);
    if (train_eval->parsed()) return run_train_eval(train_args);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const InvalidConfig& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const SingleClass& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitSingleClass;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  }
  return kExitUsage;
}
