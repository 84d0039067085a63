#include "pupilpipe/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>
#include <set>

#include <json.hpp>

#include "pupilpipe/io.hpp"
#include "pupilpipe/parallel.hpp"
#include "pupilpipe/rng.hpp"

namespace pupilpipe {

namespace {

using nlohmann::json;

std::vector<std::string> sorted_participants(std::span<const LabeledDay> days) {
  std::set<std::string> ids;
  for (const auto& d : days) ids.insert(d.participant_id);
  return {ids.begin(), ids.end()};
}

json params_to_json(const TreeParams& p) {
  json j;
  if (p.max_depth == kUnlimitedDepth)
    j["max_depth"] = nullptr;
  else
    j["max_depth"] = p.max_depth;
  j["min_samples_leaf"] = p.min_samples_leaf;
  j["min_impurity_decrease"] = p.min_impurity_decrease;
  return j;
}

// Tie order: smaller max_depth wins, then larger min_samples_leaf.
bool simpler_than(const TreeParams& a, const TreeParams& b) {
  if (a.max_depth != b.max_depth) return a.max_depth < b.max_depth;
  return a.min_samples_leaf > b.min_samples_leaf;
}

}  // namespace

FoldPlan plan_lopo(std::span<const LabeledDay> days) {
  FoldPlan plan{sorted_participants(days)};
  if (plan.participants.size() < 2)
    throw TooFewGroups("plan_lopo: need at least 2 participants");
  return plan;
}

HyperGrid HyperGrid::default_grid() {
  HyperGrid grid;
  for (int depth : {2, 3, 4, 5, 8, kUnlimitedDepth})
    for (int leaf : {1, 5, 10})
      grid.points.push_back({depth, leaf, 0.0});
  return grid;
}

std::string_view to_string(FeatureSetSpec s) {
  switch (s) {
    case FeatureSetSpec::fs: return "fs";
    case FeatureSetSpec::tsf: return "tsf";
    case FeatureSetSpec::all: return "all";
  }
  return "unknown";
}

std::optional<FeatureSetSpec> feature_set_from_string(std::string_view text) {
  if (text == "fs") return FeatureSetSpec::fs;
  if (text == "tsf") return FeatureSetSpec::tsf;
  if (text == "all") return FeatureSetSpec::all;
  return std::nullopt;
}

Dataset to_dataset(std::span<const LabeledDay> days,
                   const std::vector<std::string>& features) {
  std::vector<int> columns;
  columns.reserve(features.size());
  for (const auto& name : features) {
    const int idx = feature_index_by_name(name);
    if (idx < 0) throw std::invalid_argument("unknown feature: " + name);
    columns.push_back(idx);
  }
  Dataset ds;
  ds.feature_names = features;
  ds.x.resize(static_cast<Eigen::Index>(days.size()), static_cast<Eigen::Index>(columns.size()));
  ds.labels.reserve(days.size());
  ds.groups.reserve(days.size());
  for (std::size_t i = 0; i < days.size(); ++i) {
    for (std::size_t c = 0; c < columns.size(); ++c)
      ds.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
          days[i].features.values[columns[c]];
    ds.labels.push_back(days[i].label ? 1 : 0);
    ds.groups.push_back(days[i].participant_id);
  }
  return ds;
}

TreeParams tune_hyperparams(const Dataset& train, const HyperGrid& grid, std::uint64_t seed) {
  if (grid.points.empty()) throw std::invalid_argument("tune_hyperparams: empty grid");
  if (grid.points.size() == 1) return grid.points.front();

  bool any_pos = false, any_neg = false;
  for (int l : train.labels) (l ? any_pos : any_neg) = true;
  if (!any_pos || !any_neg) throw SingleClass("tune_hyperparams: both classes required");

  std::set<std::string> id_set(train.groups.begin(), train.groups.end());
  id_set.erase(kSyntheticGroup);
  const std::vector<std::string> ids(id_set.begin(), id_set.end());
  if (ids.size() < 2) return grid.points.front();

  // Grouped round-robin cap at 10 inner folds.
  const std::size_t n_folds = std::min<std::size_t>(ids.size(), 10);
  std::vector<std::set<std::string>> fold_groups(n_folds);
  for (std::size_t i = 0; i < ids.size(); ++i) fold_groups[i % n_folds].insert(ids[i]);

  struct InnerFold {
    Dataset balanced_train;
    std::vector<int> test_rows;
  };
  std::vector<InnerFold> folds;
  for (std::size_t f = 0; f < n_folds; ++f) {
    std::vector<int> train_rows, test_rows;
    for (Eigen::Index i = 0; i < train.rows(); ++i) {
      if (fold_groups[f].count(train.groups[i]))
        test_rows.push_back(static_cast<int>(i));
      else
        train_rows.push_back(static_cast<int>(i));
    }
    if (train_rows.empty() || test_rows.empty()) continue;
    Dataset inner;
    inner.feature_names = train.feature_names;
    inner.x.resize(static_cast<Eigen::Index>(train_rows.size()), train.cols());
    for (std::size_t i = 0; i < train_rows.size(); ++i) {
      inner.x.row(static_cast<Eigen::Index>(i)) = train.x.row(train_rows[i]);
      inner.labels.push_back(train.labels[train_rows[i]]);
      inner.groups.push_back(train.groups[train_rows[i]]);
    }
    int pos = 0;
    for (int l : inner.labels) pos += l;
    const int minority = std::min<int>(pos, static_cast<int>(inner.labels.size()) - pos);
    if (minority == 0) continue;  // single-class inner training split
    InnerFold fold;
    fold.balanced_train = minority >= 2
                              ? balance_training(inner, derive_seed(seed, "inner", f))
                              : std::move(inner);  // too small to oversample, use as is
    fold.test_rows = std::move(test_rows);
    folds.push_back(std::move(fold));
  }
  if (folds.empty()) return grid.points.front();

  TreeParams best = grid.points.front();
  double best_score = -1.0;
  bool first = true;
  for (const auto& params : grid.points) {
    double auroc_sum = 0.0;
    int auroc_n = 0;
    std::vector<Prediction> pooled;
    for (const auto& fold : folds) {
      const Tree tree = fit_tree(fold.balanced_train, params);
      std::vector<Prediction> preds;
      preds.reserve(fold.test_rows.size());
      for (int r : fold.test_rows) {
        const double score = predict_score(tree, train.x.row(r));
        preds.push_back({score, score >= 0.5, train.labels[r] == 1});
      }
      pooled.insert(pooled.end(), preds.begin(), preds.end());
      const MetricsReport m = compute_metrics(preds);
      if (m.auroc) {
        auroc_sum += *m.auroc;
        ++auroc_n;
      }
    }
    double score;
    if (auroc_n > 0) {
      score = auroc_sum / auroc_n;
    } else {
      const MetricsReport m = compute_metrics(pooled);
      score = m.auroc.value_or(0.5);
    }
    if (first || score > best_score + 1e-12 ||
        (std::fabs(score - best_score) <= 1e-12 && simpler_than(params, best))) {
      best = params;
      best_score = score;
      first = false;
    }
  }
  return best;
}

namespace {

std::vector<LabeledDay> training_split(std::span<const LabeledDay> days,
                                       const std::string& held_out) {
  std::vector<LabeledDay> train;
  train.reserve(days.size());
  for (const auto& d : days)
    if (d.participant_id != held_out) train.push_back(d);
  return train;
}

std::vector<std::string> all_feature_names_vec() {
  const auto& names = feature_names();
  return {names.begin(), names.end()};
}

std::vector<std::string> select_features_for(std::span<const LabeledDay> selection_days,
                                             FeatureSetSpec set, std::uint64_t seed,
                                             const EvalOptions& options,
                                             std::vector<std::string>& warnings) {
  switch (set) {
    case FeatureSetSpec::all:
      return all_feature_names_vec();
    case FeatureSetSpec::tsf: {
      const auto table = correlation_table(selection_days);
      auto names = select_tsf(table, options.tsf_p_max, options.tsf_r_min);
      if (names.empty()) {
        warnings.push_back("tsf selection empty; falling back to all features");
        return all_feature_names_vec();
      }
      return names;
    }
    case FeatureSetSpec::fs: {
      const Dataset ds = to_dataset(selection_days, all_feature_names_vec());
      const ForestModel forest =
          fit_forest(ds, options.fs_forest, derive_seed(seed, "fs-forest"));
      const FsSelection sel = select_fs(ds.feature_names, gini_importances(forest));
      if (sel.all_equal_fallback)
        warnings.push_back("fs importances all equal; keeping maximal set");
      return sel.names;
    }
  }
  throw std::logic_error("unreachable feature set");
}

FoldModel fit_fold_impl(std::span<const LabeledDay> days, const std::string& held_out,
                        FeatureSetSpec set, const HyperGrid& grid, std::uint64_t seed,
                        const EvalOptions& options,
                        const std::vector<std::string>* fixed_features) {
  FoldModel model;
  model.held_out = held_out;
  const std::vector<LabeledDay> train_days = training_split(days, held_out);
  if (train_days.empty()) throw TooFewGroups("fit_fold: empty training split");

  model.selected_features =
      fixed_features != nullptr
          ? *fixed_features
          : select_features_for(train_days, set, seed, options, model.warnings);

  const Dataset train = to_dataset(train_days, model.selected_features);
  model.params = grid.points.size() == 1
                     ? grid.points.front()
                     : tune_hyperparams(train, grid, derive_seed(seed, "tune"));
  const Dataset balanced = balance_training(train, derive_seed(seed, "smote"), options.smote_k);
  model.tree = fit_tree(balanced, model.params);
  return model;
}

}  // namespace

FoldModel fit_fold(std::span<const LabeledDay> days, const std::string& held_out,
                   FeatureSetSpec set, const HyperGrid& grid, std::uint64_t seed,
                   const EvalOptions& options) {
  return fit_fold_impl(days, held_out, set, grid, seed, options, nullptr);
}

std::string fold_model_json(const FoldModel& model) {
  json j{{"held_out", model.held_out},
         {"params", params_to_json(model.params)},
         {"features", model.selected_features},
         {"tree", json::parse(tree_to_json(model.tree, model.selected_features))}};
  return j.dump();
}

EvalReport run_lopo(std::span<const LabeledDay> days, FeatureSetSpec set,
                    const HyperGrid& grid, std::uint64_t seed, const EvalOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  const FoldPlan plan = plan_lopo(days);

  std::vector<std::string> global_features;
  if (options.paper_faithful && set != FeatureSetSpec::all) {
    std::vector<std::string> warnings;
    global_features =
        select_features_for(days, set, derive_seed(seed, "global"), options, warnings);
  }

  EvalReport report;
  report.set = set;
  report.seed = seed;

  struct FoldOutcome {
    FoldModel model;
    std::vector<PredictionRow> predictions;
  };
  std::vector<FoldOutcome> outcomes(plan.participants.size());
  std::vector<std::exception_ptr> errors(plan.participants.size());

  parallel_for(plan.participants.size(), [&](std::size_t i) {
    try {
      const std::string& held_out = plan.participants[i];
      const std::uint64_t fold_seed = derive_seed(seed, "fold", fnv1a(held_out));
      FoldOutcome outcome;
      outcome.model =
          fit_fold_impl(days, held_out, set, grid, fold_seed, options,
                        options.paper_faithful && set != FeatureSetSpec::all
                            ? &global_features
                            : nullptr);
      std::vector<LabeledDay> test_days;
      for (const auto& d : days)
        if (d.participant_id == held_out) test_days.push_back(d);
      const Dataset test = to_dataset(test_days, outcome.model.selected_features);
      for (Eigen::Index r = 0; r < test.rows(); ++r) {
        const double score = predict_score(outcome.model.tree, test.x.row(r));
        outcome.predictions.push_back(
            {test_days[r].participant_id, test_days[r].date, score, score >= 0.5,
             test_days[r].label});
      }
      outcomes[i] = std::move(outcome);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  });
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<Prediction> pooled;
  for (auto& outcome : outcomes) {
    for (const auto& p : outcome.predictions) pooled.push_back({p.score, p.predicted, p.label});
    report.predictions.insert(report.predictions.end(), outcome.predictions.begin(),
                              outcome.predictions.end());
    for (const auto& w : outcome.model.warnings)
      report.warnings.push_back(outcome.model.held_out + ": " + w);
    report.folds.push_back(std::move(outcome.model));
  }
  report.metrics = compute_metrics(pooled);
  report.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                       .count();
  return report;
}

std::vector<EvalReport> compare_feature_sets(std::span<const LabeledDay> days,
                                             const HyperGrid& grid, std::uint64_t seed,
                                             const EvalOptions& options) {
  std::vector<EvalReport> reports;
  for (FeatureSetSpec set : {FeatureSetSpec::fs, FeatureSetSpec::tsf, FeatureSetSpec::all})
    reports.push_back(run_lopo(days, set, grid, derive_seed(seed, to_string(set)), options));
  return reports;
}

void write_results_csv(const std::filesystem::path& path, std::span<const EvalReport> reports,
                       bool paper_format) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  auto fmt = [paper_format](double v) {
    if (!paper_format) return format_real(v);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return std::string(buf);
  };
  out << "feature_set,acc,prec,rec,f1,auroc\n";
  for (const auto& r : reports) {
    out << to_string(r.set) << ',' << fmt(r.metrics.accuracy) << ',' << fmt(r.metrics.precision)
        << ',' << fmt(r.metrics.recall) << ',' << fmt(r.metrics.f1) << ','
        << (r.metrics.auroc ? fmt(*r.metrics.auroc) : std::string()) << '\n';
  }
}

void write_predictions_csv(const std::filesystem::path& path,
                           std::span<const EvalReport> reports) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "feature_set,participant_id,date,score,predicted,label\n";
  for (const auto& r : reports)
    for (const auto& p : r.predictions)
      out << to_string(r.set) << ',' << p.participant_id << ',' << p.date.to_string() << ','
          << format_real(p.score) << ',' << (p.predicted ? 1 : 0) << ',' << (p.label ? 1 : 0)
          << '\n';
}

std::string eval_manifest_json(std::span<const EvalReport> reports) {
  json sets = json::array();
  for (const auto& r : reports) {
    json folds = json::array();
    for (const auto& f : r.folds) {
      folds.push_back({{"held_out", f.held_out},
                       {"params", params_to_json(f.params)},
                       {"selected_features", f.selected_features},
                       {"warnings", f.warnings}});
    }
    json metrics{{"accuracy", r.metrics.accuracy}, {"precision", r.metrics.precision},
                 {"recall", r.metrics.recall},     {"f1", r.metrics.f1},
                 {"tp", r.metrics.tp},             {"fp", r.metrics.fp},
                 {"tn", r.metrics.tn},             {"fn", r.metrics.fn}};
    if (r.metrics.auroc) metrics["auroc"] = *r.metrics.auroc;
    // No timings here: this report must be byte-identical across reruns;
    // wall-clock numbers live in the run manifest instead.
    sets.push_back({{"feature_set", std::string(to_string(r.set))},
                    {"seed", r.seed},
                    {"metrics", std::move(metrics)},
                    {"prediction_count", r.predictions.size()},
                    {"folds", std::move(folds)},
                    {"warnings", r.warnings}});
  }
  return json{{"feature_sets", std::move(sets)}}.dump(2);
}

}  // namespace pupilpipe
