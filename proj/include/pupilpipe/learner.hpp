#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pupilpipe/stats.hpp"  // SingleClass

namespace pupilpipe {

struct TooFewSamples : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct DimensionMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Rectangular training table; no missing values. Synthetic rows carry the
/// reserved group id "synthetic".
struct Dataset {
  Eigen::MatrixXd x;  // rows x features
  std::vector<int> labels;
  std::vector<std::string> groups;
  std::vector<std::string> feature_names;

  Eigen::Index rows() const { return x.rows(); }
  Eigen::Index cols() const { return x.cols(); }
};

inline constexpr const char* kSyntheticGroup = "synthetic";
inline constexpr int kDefaultSmoteK = 5;

/// Each synthetic row is x + u (x_nn - x) for a uniformly chosen minority
/// row x, one of its k Euclidean nearest minority neighbours x_nn and
/// u ~ U[0,1]. k is clamped to minority size - 1. Throws TooFewSamples.
Eigen::MatrixXd smote_oversample(const Eigen::Ref<const Eigen::MatrixXd>& minority, int k,
                                 int n_synthetic, std::uint64_t seed);

/// Appends SMOTE synthetics to the minority class until counts are equal.
Dataset balance_training(const Dataset& train, std::uint64_t seed, int k = kDefaultSmoteK);

inline constexpr int kUnlimitedDepth = std::numeric_limits<int>::max();

struct TreeParams {
  int max_depth = kUnlimitedDepth;
  int min_samples_leaf = 1;
  double min_impurity_decrease = 0.0;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  int neg = 0;  // training class counts at this node
  int pos = 0;

  bool is_leaf() const { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  int feature_count = 0;
};

/// CART with Gini impurity. Best split maximizes impurity decrease over all
/// features and midpoints between consecutive distinct sorted values; ties
/// break toward the lower feature index, then the lower threshold. Rows with
/// value <= threshold go left.
Tree fit_tree(const Dataset& train, const TreeParams& params = {});

/// Positive-class fraction of the reached leaf.
double predict_score(const Tree& tree, Eigen::Ref<const Eigen::RowVectorXd> row);

struct ForestParams {
  int n_trees = 100;
  bool bootstrap = true;
  enum class MaxFeatures { sqrt_of_d, all } max_features = MaxFeatures::sqrt_of_d;
  TreeParams tree;
};

struct ForestModel {
  std::vector<Tree> trees;
  std::vector<std::uint64_t> tree_seeds;
  std::vector<std::string> feature_names;
};

ForestModel fit_forest(const Dataset& train, const ForestParams& params, std::uint64_t seed);

double predict_score(const ForestModel& forest, Eigen::Ref<const Eigen::RowVectorXd> row);

/// Mean decrease in impurity: per feature, the sum over its splits of the
/// node-fraction-weighted Gini decrease, averaged over trees and normalized
/// to sum to one. Features never split on get exactly zero.
Eigen::VectorXd gini_importances(const ForestModel& forest);

struct FsSelection {
  std::vector<std::string> names;
  bool all_equal_fallback = false;  // nothing exceeded the mean; maximal set kept
};

/// Keeps features whose importance strictly exceeds the mean importance.
FsSelection select_fs(const std::vector<std::string>& names,
                      Eigen::Ref<const Eigen::VectorXd> importances);

struct Prediction {
  double score = 0.0;
  bool predicted = false;
  bool label = false;
};

struct MetricsReport {
  double accuracy = 0, precision = 0, recall = 0, f1 = 0;
  std::optional<double> auroc;  // undefined when one class is absent
  int tp = 0, fp = 0, tn = 0, fn = 0;
};

/// Label metrics from the stored predicted labels; AUROC is the probability
/// that a random positive outscores a random negative, ties counted 1/2.
MetricsReport compute_metrics(std::span<const Prediction> predictions);

std::string tree_to_json(const Tree& tree, const std::vector<std::string>& feature_names);
Tree tree_from_json(const std::string& text);
std::string forest_to_json(const ForestModel& forest);

}  // namespace pupilpipe
