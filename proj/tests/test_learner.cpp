#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "pupilpipe/learner.hpp"
#include "pupilpipe/rng.hpp"

using namespace pupilpipe;

namespace {

Dataset dataset_from(std::vector<std::vector<double>> rows, std::vector<int> labels) {
  Dataset ds;
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto d = static_cast<Eigen::Index>(rows.empty() ? 0 : rows[0].size());
  ds.x.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) ds.x(i, j) = rows[i][j];
  ds.labels = std::move(labels);
  for (Eigen::Index i = 0; i < n; ++i) ds.groups.push_back("G" + std::to_string(i % 4));
  for (Eigen::Index j = 0; j < d; ++j) ds.feature_names.push_back("f" + std::to_string(j));
  return ds;
}

double training_accuracy(const Tree& tree, const Dataset& ds) {
  int correct = 0;
  for (Eigen::Index i = 0; i < ds.rows(); ++i) {
    const bool predicted = predict_score(tree, ds.x.row(i)) >= 0.5;
    correct += predicted == (ds.labels[i] == 1) ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(ds.rows());
}

// Distance from point p to the segment [a, b].
double segment_residual(const Eigen::VectorXd& p, const Eigen::VectorXd& a,
                        const Eigen::VectorXd& b) {
  const Eigen::VectorXd ab = b - a;
  const double denom = ab.squaredNorm();
  const double t = denom > 0 ? std::clamp((p - a).dot(ab) / denom, 0.0, 1.0) : 0.0;
  return (p - (a + t * ab)).norm();
}

}  // namespace

TEST_CASE("smote synthetics from two points stay on the segment") {
  Eigen::MatrixXd minority(2, 2);
  minority << 0, 0, 1, 1;
  const auto synthetic = smote_oversample(minority, 1, 200, 42);
  REQUIRE(synthetic.rows() == 200);
  for (Eigen::Index i = 0; i < synthetic.rows(); ++i) {
    CHECK(synthetic(i, 0) == doctest::Approx(synthetic(i, 1)).epsilon(1e-12));
    CHECK(synthetic(i, 0) >= 0.0);
    CHECK(synthetic(i, 0) <= 1.0);
  }
}

TEST_CASE("smote with zero requested synthetics returns an empty block") {
  Eigen::MatrixXd minority(3, 2);
  minority << 0, 0, 1, 1, 2, 0;
  CHECK(smote_oversample(minority, 2, 0, 1).rows() == 0);
}

TEST_CASE("smote on collinear points stays on the line") {
  Eigen::MatrixXd minority(3, 3);
  minority << 0, 0, 0, 1, 2, 3, 2, 4, 6;  // all on t * (1,2,3)
  const auto synthetic = smote_oversample(minority, 2, 100, 7);
  const Eigen::Vector3d direction(1, 2, 3);
  for (Eigen::Index i = 0; i < synthetic.rows(); ++i) {
    const Eigen::Vector3d p = synthetic.row(i);
    const Eigen::Vector3d residual = p - p.dot(direction) / direction.squaredNorm() * direction;
    CHECK(residual.norm() < 1e-12);
  }
}

TEST_CASE("smote needs at least two minority rows and is deterministic") {
  Eigen::MatrixXd one(1, 2);
  one << 0, 0;
  CHECK_THROWS_AS(smote_oversample(one, 1, 5, 3), TooFewSamples);

  Eigen::MatrixXd minority(4, 2);
  minority << 0, 0, 1, 0, 0, 1, 1, 1;
  const auto a = smote_oversample(minority, 5, 50, 99);  // k clamps to 3
  const auto b = smote_oversample(minority, 5, 50, 99);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("balance_training appends synthetics until classes are equal") {
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  Rng rng(5);
  for (int i = 0; i < 30; ++i) {
    rows.push_back({rng.uniform01(), rng.uniform01()});
    labels.push_back(0);
  }
  for (int i = 0; i < 14; ++i) {
    rows.push_back({rng.uniform01() + 2, rng.uniform01()});
    labels.push_back(1);
  }
  const Dataset ds = dataset_from(rows, labels);
  const Dataset balanced = balance_training(ds, 11);
  CHECK(balanced.rows() == 60);  // 16 synthetics appended
  int pos = 0, synthetic = 0;
  for (std::size_t i = 0; i < balanced.labels.size(); ++i) {
    pos += balanced.labels[i];
    synthetic += balanced.groups[i] == kSyntheticGroup ? 1 : 0;
  }
  CHECK(pos == 30);
  CHECK(synthetic == 16);

  const Dataset again = balance_training(ds, 11);
  CHECK((balanced.x - again.x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("balance_training leaves balanced data unchanged and rejects one class") {
  const Dataset ds = dataset_from({{0, 0}, {1, 1}}, {0, 1});
  CHECK(balance_training(ds, 1).rows() == 2);
  const Dataset single = dataset_from({{0, 0}, {1, 1}}, {1, 1});
  CHECK_THROWS_AS(balance_training(single, 1), SingleClass);
}

TEST_CASE("fit_tree splits 1-D two-point data at the midpoint") {
  const Dataset ds = dataset_from({{0.0}, {1.0}}, {0, 1});
  const Tree tree = fit_tree(ds);
  REQUIRE(tree.nodes.size() == 3);
  CHECK(tree.nodes[0].feature == 0);
  CHECK(tree.nodes[0].threshold == doctest::Approx(0.5));
  CHECK(training_accuracy(tree, ds) == 1.0);
}

TEST_CASE("fit_tree on a pure class gives a single leaf") {
  const Dataset ds = dataset_from({{0.0}, {1.0}, {2.0}}, {1, 1, 1});
  const Tree tree = fit_tree(ds);
  CHECK(tree.nodes.size() == 1);
  CHECK(tree.nodes[0].is_leaf());
  CHECK(predict_score(tree, ds.x.row(0)) == 1.0);
}

TEST_CASE("fit_tree solves XOR with depth 2") {
  const Dataset ds = dataset_from({{0, 0}, {1, 1}, {0, 1}, {1, 0}}, {0, 0, 1, 1});
  TreeParams params;
  params.max_depth = 2;
  const Tree tree = fit_tree(ds, params);
  CHECK(training_accuracy(tree, ds) == 1.0);
}

TEST_CASE("min_samples_leaf bounds every leaf") {
  Rng rng(17);
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  for (int i = 0; i < 80; ++i) {
    rows.push_back({rng.uniform01(), rng.uniform01()});
    labels.push_back(rng.uniform01() < 0.5 ? 0 : 1);
  }
  TreeParams params;
  params.min_samples_leaf = 7;
  const Tree tree = fit_tree(dataset_from(rows, labels), params);
  for (const auto& node : tree.nodes)
    if (node.is_leaf()) CHECK(node.neg + node.pos >= 7);
}

TEST_CASE("unlimited depth separates any consistent labeling") {
  Rng rng(23);
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  for (int i = 0; i < 60; ++i) {
    rows.push_back({rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)});
    labels.push_back(rng.uniform01() < 0.4 ? 1 : 0);
  }
  const Dataset ds = dataset_from(rows, labels);
  CHECK(training_accuracy(fit_tree(ds), ds) == 1.0);
}

TEST_CASE("split ties break toward the lower feature index") {
  // Feature 1 duplicates feature 0, so both give identical gains.
  const Dataset ds = dataset_from({{0, 0}, {1, 1}, {0.1, 0.1}, {0.9, 0.9}}, {0, 1, 0, 1});
  const Tree tree = fit_tree(ds);
  CHECK(tree.nodes[0].feature == 0);
}

TEST_CASE("predict_score returns leaf fractions and checks dimensions") {
  const Dataset ds = dataset_from({{0.0}, {0.1}, {1.0}}, {0, 1, 1});
  TreeParams stump;
  stump.max_depth = 0;
  const Tree tree = fit_tree(ds, stump);
  CHECK(predict_score(tree, ds.x.row(0)) == doctest::Approx(2.0 / 3.0));
  Eigen::RowVectorXd wide(2);
  wide << 0, 1;
  CHECK_THROWS_AS(predict_score(tree, wide), DimensionMismatch);
}

TEST_CASE("a one-tree forest without bootstrap equals the plain tree") {
  Rng rng(29);
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  for (int i = 0; i < 40; ++i) {
    rows.push_back({rng.uniform01(), rng.uniform01()});
    labels.push_back(rows.back()[0] > 0.5 ? 1 : 0);
  }
  const Dataset ds = dataset_from(rows, labels);
  ForestParams params;
  params.n_trees = 1;
  params.bootstrap = false;
  params.max_features = ForestParams::MaxFeatures::all;
  const ForestModel forest = fit_forest(ds, params, 3);
  const Tree plain = fit_tree(ds);
  CHECK(tree_to_json(forest.trees[0], ds.feature_names) == tree_to_json(plain, ds.feature_names));
}

TEST_CASE("forests are deterministic given the seed") {
  Rng rng(31);
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  for (int i = 0; i < 60; ++i) {
    rows.push_back({rng.uniform01(), rng.uniform01(), rng.uniform01()});
    labels.push_back(rng.uniform01() < 0.5 ? 0 : 1);
  }
  const Dataset ds = dataset_from(rows, labels);
  ForestParams params;
  params.n_trees = 12;
  const ForestModel a = fit_forest(ds, params, 77);
  const ForestModel b = fit_forest(ds, params, 77);
  CHECK(forest_to_json(a) == forest_to_json(b));
  const ForestModel c = fit_forest(ds, params, 78);
  CHECK(forest_to_json(a) != forest_to_json(c));
}

TEST_CASE("gini importance of a single perfect split is 1") {
  const Dataset ds = dataset_from({{0, 5}, {1, 5}, {0, 5}, {1, 5}}, {0, 1, 0, 1});
  ForestParams params;
  params.n_trees = 1;
  params.bootstrap = false;
  params.max_features = ForestParams::MaxFeatures::all;
  const ForestModel forest = fit_forest(ds, params, 1);
  const Eigen::VectorXd importances = gini_importances(forest);
  CHECK(importances[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(importances[1] == 0.0);  // never split on
}

TEST_CASE("gini importances sum to one and rank informative features") {
  Rng rng(37);
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  for (int i = 0; i < 200; ++i) {
    std::vector<double> row(10);
    for (auto& v : row) v = rng.uniform(-1, 1);
    const int label = row[3] > 0 ? 1 : 0;  // feature 3 carries the signal
    rows.push_back(row);
    labels.push_back(label);
  }
  const Dataset ds = dataset_from(rows, labels);
  ForestParams params;
  params.n_trees = 40;
  const ForestModel forest = fit_forest(ds, params, 5);
  const Eigen::VectorXd importances = gini_importances(forest);
  CHECK(std::fabs(importances.sum() - 1.0) < 1e-9);
  Eigen::Index top;
  importances.maxCoeff(&top);
  CHECK(top == 3);
}

TEST_CASE("select_fs keeps strictly-above-mean importances") {
  Eigen::VectorXd imp(3);
  imp << 0.5, 0.3, 0.2;  // mean = 1/3; 0.3 is below it
  const auto sel = select_fs({"a", "b", "c"}, imp);
  REQUIRE(sel.names.size() == 1);
  CHECK(sel.names[0] == "a");
  CHECK_FALSE(sel.all_equal_fallback);

  Eigen::VectorXd two(2);
  two << 0.9, 0.1;
  CHECK(select_fs({"a", "b"}, two).names == std::vector<std::string>{"a"});

  Eigen::VectorXd equal(4);
  equal << 0.25, 0.25, 0.25, 0.25;
  const auto fallback = select_fs({"a", "b", "c", "d"}, equal);
  CHECK(fallback.names.size() == 4);
  CHECK(fallback.all_equal_fallback);
}

TEST_CASE("compute_metrics on the pairwise-concordance fixture") {
  const std::vector<Prediction> preds = {{0.1, false, false},
                                         {0.4, false, false},
                                         {0.35, false, true},
                                         {0.8, true, true}};
  const auto m = compute_metrics(preds);
  REQUIRE(m.auroc.has_value());
  CHECK(*m.auroc == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("compute_metrics on perfect predictions") {
  const std::vector<Prediction> preds = {
      {0.9, true, true}, {0.8, true, true}, {0.2, false, false}, {0.1, false, false}};
  const auto m = compute_metrics(preds);
  CHECK(m.accuracy == 1.0);
  CHECK(m.precision == 1.0);
  CHECK(m.recall == 1.0);
  CHECK(m.f1 == 1.0);
  CHECK(*m.auroc == 1.0);
}

TEST_CASE("auroc counts tied scores as one half") {
  const std::vector<Prediction> preds = {{0.5, true, true}, {0.5, true, false}};
  CHECK(*compute_metrics(preds).auroc == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("auroc is undefined for single-class inputs") {
  const std::vector<Prediction> preds = {{0.5, true, true}, {0.7, true, true}};
  const auto m = compute_metrics(preds);
  CHECK_FALSE(m.auroc.has_value());
}

TEST_CASE("auroc is invariant under strictly increasing score transforms") {
  Rng rng(43);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Prediction> preds;
    for (int i = 0; i < 50; ++i) {
      const double score = rng.uniform01();
      preds.push_back({score, score >= 0.5, rng.uniform01() < 0.5});
    }
    auto transformed = preds;
    for (auto& p : transformed) p.score = std::exp(3.0 * p.score) + 7.0;
    const auto a = compute_metrics(preds).auroc;
    const auto b = compute_metrics(transformed).auroc;
    if (a.has_value()) CHECK(*a == doctest::Approx(*b).epsilon(1e-12));
  }
}

TEST_CASE("confusion counts drive precision and recall") {
  const std::vector<Prediction> preds = {{0.9, true, true},   {0.8, true, false},
                                         {0.3, false, true},  {0.2, false, false},
                                         {0.6, true, true},   {0.1, false, false}};
  const auto m = compute_metrics(preds);
  CHECK(m.tp == 2);
  CHECK(m.fp == 1);
  CHECK(m.fn == 1);
  CHECK(m.tn == 2);
  CHECK(m.precision == doctest::Approx(2.0 / 3.0));
  CHECK(m.recall == doctest::Approx(2.0 / 3.0));
  CHECK(m.f1 == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("tree serialization round trips predictions") {
  Rng rng(47);
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  for (int i = 0; i < 50; ++i) {
    rows.push_back({rng.uniform01(), rng.uniform01()});
    labels.push_back(rows.back()[1] > 0.6 ? 1 : 0);
  }
  const Dataset ds = dataset_from(rows, labels);
  const Tree tree = fit_tree(ds);
  const Tree restored = tree_from_json(tree_to_json(tree, ds.feature_names));
  for (Eigen::Index i = 0; i < ds.rows(); ++i)
    CHECK(predict_score(tree, ds.x.row(i)) == predict_score(restored, ds.x.row(i)));
}

TEST_CASE("smote synthetics lie on some minority segment") {
  Rng rng(53);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform_int(8));
    const int d = 1 + static_cast<int>(rng.uniform_int(5));
    Eigen::MatrixXd minority(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < d; ++j) minority(i, j) = rng.uniform(-3, 3);
    const auto synthetic = smote_oversample(minority, 5, 40, trial);
    for (Eigen::Index s = 0; s < synthetic.rows(); ++s) {
      double best = 1e9;
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
          if (i == j) continue;
          best = std::min(best, segment_residual(synthetic.row(s).transpose(),
                                                 minority.row(i).transpose(),
                                                 minority.row(j).transpose()));
        }
      CHECK(best < 1e-9);
    }
  }
}
