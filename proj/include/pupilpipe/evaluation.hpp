#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pupilpipe/features.hpp"
#include "pupilpipe/learner.hpp"

namespace pupilpipe {

struct TooFewGroups : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One fold per participant, folds ordered by sorted participant id.
struct FoldPlan {
  std::vector<std::string> participants;
};

FoldPlan plan_lopo(std::span<const LabeledDay> days);

struct HyperGrid {
  std::vector<TreeParams> points;
  /// max_depth {2,3,4,5,8,unlimited} x min_samples_leaf {1,5,10}.
  static HyperGrid default_grid();
};

/// Inner leave-one-participant-out over the training participants (grouped
/// round-robin into at most 10 inner folds); picks the grid point with the
/// best mean inner AUROC, ties toward smaller max_depth then larger
/// min_samples_leaf.
TreeParams tune_hyperparams(const Dataset& train, const HyperGrid& grid, std::uint64_t seed);

enum class FeatureSetSpec { fs, tsf, all };

std::string_view to_string(FeatureSetSpec s);
std::optional<FeatureSetSpec> feature_set_from_string(std::string_view text);

struct EvalOptions {
  /// Compute TSF/FS once on the full table instead of per training split.
  /// Off by default; the default recomputes selection inside each fold so no
  /// held-out information reaches training.
  bool paper_faithful = false;
  double tsf_p_max = kDefaultTsfPMax;
  double tsf_r_min = kDefaultTsfRMin;
  int smote_k = kDefaultSmoteK;
  ForestParams fs_forest;  // forest behind the FS importance ranking
};

Dataset to_dataset(std::span<const LabeledDay> days,
                   const std::vector<std::string>& features);

/// One trained fold: selection, tuned parameters and the fitted tree.
struct FoldModel {
  std::string held_out;
  TreeParams params;
  std::vector<std::string> selected_features;
  Tree tree;
  std::vector<std::string> warnings;
};

FoldModel fit_fold(std::span<const LabeledDay> days, const std::string& held_out,
                   FeatureSetSpec set, const HyperGrid& grid, std::uint64_t seed,
                   const EvalOptions& options = {});

/// Stable serialization of a trained fold (features, parameters, tree);
/// used for model persistence and bit-level comparisons.
std::string fold_model_json(const FoldModel& model);

struct PredictionRow {
  std::string participant_id;
  CivilDate date;
  double score = 0;
  bool predicted = false;
  bool label = false;
};

struct EvalReport {
  FeatureSetSpec set = FeatureSetSpec::all;
  MetricsReport metrics;  // pooled over all held-out predictions
  std::vector<PredictionRow> predictions;
  std::vector<FoldModel> folds;
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;
  double wall_ms = 0;
};

/// Outer LOPO loop: per fold, feature selection and SMOTE balancing on the
/// training split only, inner tuning, fit, score the held-out participant;
/// metrics are computed on the pooled held-out predictions.
EvalReport run_lopo(std::span<const LabeledDay> days, FeatureSetSpec set,
                    const HyperGrid& grid, std::uint64_t seed,
                    const EvalOptions& options = {});

/// FS / TSF / All rows, in that order.
std::vector<EvalReport> compare_feature_sets(std::span<const LabeledDay> days,
                                             const HyperGrid& grid, std::uint64_t seed,
                                             const EvalOptions& options = {});

void write_results_csv(const std::filesystem::path& path, std::span<const EvalReport> reports,
                       bool paper_format = false);
void write_predictions_csv(const std::filesystem::path& path,
                           std::span<const EvalReport> reports);
std::string eval_manifest_json(std::span<const EvalReport> reports);

}  // namespace pupilpipe
