#include "pupilpipe/learner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "pupilpipe/parallel.hpp"
#include "pupilpipe/rng.hpp"

namespace pupilpipe {

namespace {

double gini(int neg, int pos) {
  const double n = neg + pos;
  if (n == 0) return 0.0;
  const double pn = neg / n;
  const double pp = pos / n;
  return 1.0 - pn * pn - pp * pp;
}

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  // Starts below zero: zero-gain splits on impure nodes are admissible, or
  // XOR-shaped data could never be separated at any depth.
  double decrease = -1.0;
};

// Per-node row indices, kept sorted by each feature's value. Children are
// produced by stable partition, so columns are argsorted once per tree
// instead of re-sorted at every node.
using SortedColumns = std::vector<std::vector<int>>;

// Best split over the given candidate features (ascending order required for
// the tie-break: strict improvement keeps the lowest feature index and the
// lowest threshold among equals).
SplitChoice find_best_split(const Eigen::MatrixXd& x, const std::vector<int>& labels,
                            const SortedColumns& columns,
                            const std::vector<int>& candidate_features, int pos_total,
                            int min_samples_leaf) {
  const int n = static_cast<int>(columns.front().size());
  const int neg_total = n - pos_total;
  const double parent_gini = gini(neg_total, pos_total);

  SplitChoice best;
  for (int f : candidate_features) {
    const std::vector<int>& order = columns[f];
    if (x(order.front(), f) == x(order.back(), f)) continue;  // constant in node

    int pos_left = 0;
    for (int i = 1; i < n; ++i) {
      pos_left += labels[order[i - 1]];
      const double prev = x(order[i - 1], f);
      const double cur = x(order[i], f);
      if (cur == prev) continue;  // not a boundary
      const int n_left = i;
      const int n_right = n - i;
      if (n_left < min_samples_leaf || n_right < min_samples_leaf) continue;
      const int neg_left = n_left - pos_left;
      const int pos_right = pos_total - pos_left;
      const int neg_right = neg_total - neg_left;
      const double decrease = parent_gini -
                              (static_cast<double>(n_left) / n) * gini(neg_left, pos_left) -
                              (static_cast<double>(n_right) / n) * gini(neg_right, pos_right);
      if (decrease > best.decrease) {
        best.feature = f;
        best.threshold = 0.5 * (prev + cur);
        best.decrease = decrease;
      }
    }
  }
  return best;
}

// FeatureSampler fills the candidate feature list for one node.
template <typename FeatureSampler>
int build_node(Tree& tree, const Eigen::MatrixXd& x, const std::vector<int>& labels,
               SortedColumns&& columns, int depth, const TreeParams& params,
               FeatureSampler&& sample_features) {
  TreeNode node;
  for (int r : columns.front()) (labels[r] ? node.pos : node.neg) += 1;

  const int n = static_cast<int>(columns.front().size());
  const bool pure = node.pos == 0 || node.neg == 0;
  const bool can_split = depth < params.max_depth && !pure && n >= 2 * params.min_samples_leaf;

  SplitChoice split;
  std::vector<int> candidates;
  if (can_split) {
    sample_features(candidates);
    split = find_best_split(x, labels, columns, candidates, node.pos, params.min_samples_leaf);
  }
  if (!can_split || split.feature < 0 || split.decrease < params.min_impurity_decrease) {
    const int index = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(node);
    return index;
  }

  const int d = static_cast<int>(columns.size());
  SortedColumns left_columns(d), right_columns(d);
  for (int f = 0; f < d; ++f) {
    for (int r : columns[f])
      (x(r, split.feature) <= split.threshold ? left_columns[f] : right_columns[f]).push_back(r);
    columns[f].clear();
    columns[f].shrink_to_fit();
  }

  node.feature = split.feature;
  node.threshold = split.threshold;
  const int index = static_cast<int>(tree.nodes.size());
  tree.nodes.push_back(node);
  const int left = build_node(tree, x, labels, std::move(left_columns), depth + 1, params,
                              sample_features);
  const int right = build_node(tree, x, labels, std::move(right_columns), depth + 1, params,
                               sample_features);
  tree.nodes[index].left = left;
  tree.nodes[index].right = right;
  return index;
}

template <typename FeatureSampler>
Tree build_tree(const Eigen::MatrixXd& x, const std::vector<int>& labels,
                std::vector<int> rows, const TreeParams& params,
                FeatureSampler&& sample_features) {
  if (rows.empty()) throw std::invalid_argument("fit_tree: empty training set");
  if (x.cols() == 0) throw std::invalid_argument("fit_tree: no features");
  Tree tree;
  tree.feature_count = static_cast<int>(x.cols());
  SortedColumns columns(static_cast<std::size_t>(x.cols()));
  for (int f = 0; f < static_cast<int>(x.cols()); ++f) {
    columns[f] = rows;
    std::sort(columns[f].begin(), columns[f].end(), [&](int a, int b) {
      const double va = x(a, f);
      const double vb = x(b, f);
      if (va != vb) return va < vb;
      return a < b;  // deterministic within ties
    });
  }
  build_node(tree, x, labels, std::move(columns), 0, params, sample_features);
  return tree;
}

}  // namespace

Eigen::MatrixXd smote_oversample(const Eigen::Ref<const Eigen::MatrixXd>& minority, int k,
                                 int n_synthetic, std::uint64_t seed) {
  const Eigen::Index n = minority.rows();
  if (n < 2) throw TooFewSamples("smote_oversample: need at least 2 minority rows");
  if (k < 1) throw std::invalid_argument("smote_oversample: k must be >= 1");
  const int k_eff = static_cast<int>(std::min<Eigen::Index>(k, n - 1));

  // k nearest minority neighbours per row; distance ties break by index.
  std::vector<std::vector<int>> neighbours(n);
  std::vector<std::pair<double, int>> dist;
  for (Eigen::Index i = 0; i < n; ++i) {
    dist.clear();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      dist.emplace_back((minority.row(i) - minority.row(j)).squaredNorm(),
                        static_cast<int>(j));
    }
    std::sort(dist.begin(), dist.end());
    neighbours[i].reserve(k_eff);
    for (int t = 0; t < k_eff; ++t) neighbours[i].push_back(dist[t].second);
  }

  Rng rng(seed);
  Eigen::MatrixXd synthetic(n_synthetic, minority.cols());
  for (int s = 0; s < n_synthetic; ++s) {
    const auto i = static_cast<Eigen::Index>(rng.uniform_int(static_cast<std::uint64_t>(n)));
    const int nn = neighbours[i][rng.uniform_int(static_cast<std::uint64_t>(k_eff))];
    const double u = rng.uniform01();
    synthetic.row(s) = minority.row(i) + u * (minority.row(nn) - minority.row(i));
  }
  return synthetic;
}

Dataset balance_training(const Dataset& train, std::uint64_t seed, int k) {
  int pos = 0;
  for (int label : train.labels) pos += label;
  const int neg = static_cast<int>(train.labels.size()) - pos;
  if (pos == 0 || neg == 0) throw SingleClass("balance_training: both classes required");
  if (pos == neg) return train;

  const int minority_label = pos < neg ? 1 : 0;
  const int deficit = std::abs(neg - pos);
  Eigen::MatrixXd minority(std::min(pos, neg), train.cols());
  Eigen::Index row = 0;
  for (Eigen::Index i = 0; i < train.rows(); ++i)
    if (train.labels[i] == minority_label) minority.row(row++) = train.x.row(i);

  const Eigen::MatrixXd synthetic = smote_oversample(minority, k, deficit, seed);

  Dataset out = train;
  out.x.conservativeResize(train.rows() + deficit, Eigen::NoChange);
  out.x.bottomRows(deficit) = synthetic;
  out.labels.insert(out.labels.end(), deficit, minority_label);
  out.groups.insert(out.groups.end(), deficit, kSyntheticGroup);
  return out;
}

Tree fit_tree(const Dataset& train, const TreeParams& params) {
  std::vector<int> rows(train.rows());
  std::iota(rows.begin(), rows.end(), 0);
  std::vector<int> all(train.cols());
  std::iota(all.begin(), all.end(), 0);
  return build_tree(train.x, train.labels, std::move(rows), params,
                    [&all](std::vector<int>& out) { out = all; });
}

double predict_score(const Tree& tree, Eigen::Ref<const Eigen::RowVectorXd> row) {
  if (row.size() != tree.feature_count)
    throw DimensionMismatch("predict_score: row has " + std::to_string(row.size()) +
                            " features, tree expects " + std::to_string(tree.feature_count));
  int at = 0;
  while (!tree.nodes[at].is_leaf()) {
    const TreeNode& n = tree.nodes[at];
    at = row[n.feature] <= n.threshold ? n.left : n.right;
  }
  const TreeNode& leaf = tree.nodes[at];
  return static_cast<double>(leaf.pos) / (leaf.pos + leaf.neg);
}

ForestModel fit_forest(const Dataset& train, const ForestParams& params, std::uint64_t seed) {
  if (train.rows() == 0) throw std::invalid_argument("fit_forest: empty training set");
  ForestModel model;
  model.feature_names = train.feature_names;
  model.trees.resize(params.n_trees);
  model.tree_seeds.resize(params.n_trees);
  for (int t = 0; t < params.n_trees; ++t)
    model.tree_seeds[t] = derive_seed(seed, "tree", static_cast<std::uint64_t>(t));

  const int d = static_cast<int>(train.cols());
  const int subset =
      params.max_features == ForestParams::MaxFeatures::sqrt_of_d
          ? std::max(1, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(d)))))
          : d;

  parallel_for(static_cast<std::size_t>(params.n_trees), [&](std::size_t t) {
    Rng rng(model.tree_seeds[t]);
    std::vector<int> rows(train.rows());
    if (params.bootstrap) {
      for (auto& r : rows)
        r = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(train.rows())));
    } else {
      std::iota(rows.begin(), rows.end(), 0);
    }
    std::vector<int> pool(d);
    std::iota(pool.begin(), pool.end(), 0);
    auto sampler = [&](std::vector<int>& out) {
      if (subset >= d) {
        out = pool;
        return;
      }
      // Partial Fisher-Yates, then sort so the low-index tie-break holds
      // inside the subset too.
      for (int i = 0; i < subset; ++i) {
        const auto j = i + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(d - i)));
        std::swap(pool[i], pool[j]);
      }
      out.assign(pool.begin(), pool.begin() + subset);
      std::sort(out.begin(), out.end());
    };
    model.trees[t] = build_tree(train.x, train.labels, std::move(rows), params.tree, sampler);
  });
  return model;
}

double predict_score(const ForestModel& forest, Eigen::Ref<const Eigen::RowVectorXd> row) {
  double sum = 0.0;
  for (const auto& tree : forest.trees) sum += predict_score(tree, row);
  return sum / static_cast<double>(forest.trees.size());
}

Eigen::VectorXd gini_importances(const ForestModel& forest) {
  const int d = static_cast<int>(forest.feature_names.size());
  Eigen::VectorXd total = Eigen::VectorXd::Zero(d);
  for (const auto& tree : forest.trees) {
    const double root_n = tree.nodes[0].neg + tree.nodes[0].pos;
    for (const auto& node : tree.nodes) {
      if (node.is_leaf()) continue;
      const TreeNode& l = tree.nodes[node.left];
      const TreeNode& r = tree.nodes[node.right];
      const double n = node.neg + node.pos;
      const double decrease = gini(node.neg, node.pos) -
                              ((l.neg + l.pos) / n) * gini(l.neg, l.pos) -
                              ((r.neg + r.pos) / n) * gini(r.neg, r.pos);
      total[node.feature] += (n / root_n) * decrease;
    }
  }
  total /= static_cast<double>(forest.trees.size());
  const double sum = total.sum();
  if (sum > 0) total /= sum;
  return total;
}

FsSelection select_fs(const std::vector<std::string>& names,
                      Eigen::Ref<const Eigen::VectorXd> importances) {
  if (names.empty() || static_cast<Eigen::Index>(names.size()) != importances.size())
    throw DimensionMismatch("select_fs: names/importances size mismatch");
  const double mean = importances.mean();
  FsSelection out;
  for (std::size_t i = 0; i < names.size(); ++i)
    if (importances[static_cast<Eigen::Index>(i)] > mean) out.names.push_back(names[i]);
  if (out.names.empty()) {
    const double max = importances.maxCoeff();
    for (std::size_t i = 0; i < names.size(); ++i)
      if (importances[static_cast<Eigen::Index>(i)] == max) out.names.push_back(names[i]);
    out.all_equal_fallback = true;
  }
  return out;
}

MetricsReport compute_metrics(std::span<const Prediction> predictions) {
  if (predictions.empty()) throw std::invalid_argument("compute_metrics: no predictions");
  MetricsReport m;
  for (const auto& p : predictions) {
    if (p.label)
      (p.predicted ? m.tp : m.fn) += 1;
    else
      (p.predicted ? m.fp : m.tn) += 1;
  }
  const double n = static_cast<double>(predictions.size());
  m.accuracy = (m.tp + m.tn) / n;
  m.precision = (m.tp + m.fp) > 0 ? static_cast<double>(m.tp) / (m.tp + m.fp) : 0.0;
  m.recall = (m.tp + m.fn) > 0 ? static_cast<double>(m.tp) / (m.tp + m.fn) : 0.0;
  m.f1 = (m.precision + m.recall) > 0
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;

  const int n_pos = m.tp + m.fn;
  const int n_neg = m.fp + m.tn;
  if (n_pos > 0 && n_neg > 0) {
    // Rank-sum form of pairwise concordance; tied scores get average ranks.
    std::vector<int> order(predictions.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      return predictions[a].score < predictions[b].score;
    });
    double pos_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
      std::size_t j = i;
      while (j + 1 < order.size() &&
             predictions[order[j + 1]].score == predictions[order[i]].score)
        ++j;
      const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
      for (std::size_t t = i; t <= j; ++t)
        if (predictions[order[t]].label) pos_rank_sum += avg_rank;
      i = j + 1;
    }
    const double u = pos_rank_sum - static_cast<double>(n_pos) * (n_pos + 1) / 2.0;
    m.auroc = u / (static_cast<double>(n_pos) * n_neg);
  }
  return m;
}

namespace {

using nlohmann::json;

json node_to_json(const Tree& tree, int index) {
  const TreeNode& n = tree.nodes[index];
  if (n.is_leaf()) return json{{"leaf", {{"neg", n.neg}, {"pos", n.pos}}}};
  return json{{"split",
               {{"feature", n.feature},
                {"threshold", n.threshold},
                {"neg", n.neg},
                {"pos", n.pos},
                {"left", node_to_json(tree, n.left)},
                {"right", node_to_json(tree, n.right)}}}};
}

int node_from_json(const json& jn, Tree& tree) {
  const int index = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  if (jn.contains("leaf")) {
    tree.nodes[index].neg = jn.at("leaf").at("neg").get<int>();
    tree.nodes[index].pos = jn.at("leaf").at("pos").get<int>();
    return index;
  }
  const json& split = jn.at("split");
  tree.nodes[index].feature = split.at("feature").get<int>();
  tree.nodes[index].threshold = split.at("threshold").get<double>();
  tree.nodes[index].neg = split.at("neg").get<int>();
  tree.nodes[index].pos = split.at("pos").get<int>();
  const int left = node_from_json(split.at("left"), tree);
  const int right = node_from_json(split.at("right"), tree);
  tree.nodes[index].left = left;
  tree.nodes[index].right = right;
  return index;
}

}  // namespace

std::string tree_to_json(const Tree& tree, const std::vector<std::string>& feature_names) {
  json j{{"version", 1},
         {"model", "decision_tree"},
         {"feature_names", feature_names},
         {"root", node_to_json(tree, 0)}};
  return j.dump();
}

Tree tree_from_json(const std::string& text) {
  const json j = json::parse(text);
  if (j.at("version").get<int>() != 1) throw std::runtime_error("unsupported model version");
  Tree tree;
  tree.feature_count = static_cast<int>(j.at("feature_names").size());
  node_from_json(j.at("root"), tree);
  return tree;
}

std::string forest_to_json(const ForestModel& forest) {
  json trees = json::array();
  for (const auto& t : forest.trees) trees.push_back(node_to_json(t, 0));
  json j{{"version", 1},
         {"model", "random_forest"},
         {"feature_names", forest.feature_names},
         {"tree_seeds", forest.tree_seeds},
         {"trees", std::move(trees)}};
  return j.dump();
}

}  // namespace pupilpipe
