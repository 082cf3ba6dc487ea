#include "mhtc/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mhtc/error.hpp"
#include "mhtc/util.hpp"

namespace mhtc {

FeatureMatrix FeatureMatrix::from_rows(std::span<const std::vector<double>> rows,
                                       std::vector<std::string> row_ids) {
  FeatureMatrix m;
  const std::size_t d = rows.empty() ? 0 : rows.front().size();
  m.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != d) {
      throw Error(ErrorCode::DimensionMismatch, "row " + std::to_string(r) + " has " +
                                                    std::to_string(rows[r].size()) +
                                                    " columns, expected " + std::to_string(d));
    }
    for (std::size_t c = 0; c < d; ++c) {
      if (!std::isfinite(rows[r][c])) {
        throw Error(ErrorCode::NonFiniteInput, "row " + std::to_string(r) + " column " +
                                                   std::to_string(c));
      }
      m.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  if (row_ids.empty()) {
    row_ids.reserve(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) row_ids.push_back(std::to_string(r));
  }
  if (row_ids.size() != rows.size()) {
    throw Error(ErrorCode::LengthMismatch, "row ids do not match row count");
  }
  m.row_ids = std::move(row_ids);
  return m;
}

std::vector<double> concat_features(std::span<const double> embedding,
                                    std::span<const double> lexicon) {
  std::vector<double> out;
  out.reserve(embedding.size() + lexicon.size());
  for (double v : embedding) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteInput, "non-finite embedding entry");
    out.push_back(v);
  }
  for (double v : lexicon) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteInput, "non-finite lexicon entry");
    out.push_back(v);
  }
  return out;
}

namespace {

// log(1 + exp(-m)) without overflow.
double log1p_exp_neg(double m) {
  return m > 0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
}

// 1 / (1 + exp(m)).
double sigmoid_neg(double m) {
  if (m >= 0) {
    const double e = std::exp(-m);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(m));
}

void check_finite(const Eigen::MatrixXd& X) {
  if (!X.allFinite()) throw Error(ErrorCode::NonFiniteInput, "feature matrix has NaN or inf");
}

}  // namespace

double logistic_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                          const Eigen::VectorXd& w, double b, double C) {
  const Eigen::VectorXd margins = (y.array() * ((X * w).array() + b)).matrix();
  double loss = 0.0;
  for (Eigen::Index i = 0; i < margins.size(); ++i) loss += log1p_exp_neg(margins[i]);
  return 0.5 * w.squaredNorm() + C * loss;
}

void logistic_gradient(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& w, double b, double C, Eigen::VectorXd& grad_w,
                       double& grad_b) {
  const Eigen::VectorXd margins = (y.array() * ((X * w).array() + b)).matrix();
  Eigen::VectorXd coef(margins.size());
  for (Eigen::Index i = 0; i < margins.size(); ++i) coef[i] = -y[i] * sigmoid_neg(margins[i]);
  grad_w = w + C * (X.transpose() * coef);
  grad_b = C * coef.sum();
}

double hinge_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& w, double b, double C) {
  const Eigen::VectorXd margins = (y.array() * ((X * w).array() + b)).matrix();
  double loss = 0.0;
  for (Eigen::Index i = 0; i < margins.size(); ++i) loss += std::max(0.0, 1.0 - margins[i]);
  return 0.5 * w.squaredNorm() + C * loss;
}

BinaryFit fit_logistic_binary(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                              const TrainConfig& cfg) {
  constexpr double kArmijo = 1e-4;
  constexpr double kMinStep = 1e-20;
  BinaryFit fit;
  fit.w = Eigen::VectorXd::Zero(X.cols());
  fit.objective = logistic_objective(X, y, fit.w, fit.b, cfg.C);
  fit.history.push_back(fit.objective);

  Eigen::VectorXd gw;
  double gb = 0.0;
  double step = 1.0;
  for (std::size_t it = 0; it < cfg.max_iter; ++it) {
    logistic_gradient(X, y, fit.w, fit.b, cfg.C, gw, gb);
    const double gnorm2 = gw.squaredNorm() + gb * gb;
    if (std::sqrt(gnorm2) <= cfg.tol) break;

    bool accepted = false;
    while (step >= kMinStep) {
      Eigen::VectorXd w_next = fit.w - step * gw;
      const double b_next = fit.b - step * gb;
      const double j_next = logistic_objective(X, y, w_next, b_next, cfg.C);
      if (j_next <= fit.objective - kArmijo * step * gnorm2) {
        fit.w = std::move(w_next);
        fit.b = b_next;
        fit.objective = j_next;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    fit.history.push_back(fit.objective);
    fit.iterations = it + 1;
    step *= 2.0;
  }
  return fit;
}

BinaryFit fit_hinge_binary(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           const TrainConfig& cfg) {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(X.cols());
  double b = 0.0;
  BinaryFit best;
  best.w = w;
  best.objective = hinge_objective(X, y, w, b, cfg.C);
  best.history.push_back(best.objective);

  Eigen::VectorXd active(X.rows());
  for (std::size_t t = 0; t < cfg.max_iter; ++t) {
    const Eigen::VectorXd margins = (y.array() * ((X * w).array() + b)).matrix();
    for (Eigen::Index i = 0; i < margins.size(); ++i) active[i] = margins[i] < 1.0 ? y[i] : 0.0;
    const Eigen::VectorXd gw = w - cfg.C * (X.transpose() * active);
    const double gb = -cfg.C * active.sum();
    if (std::sqrt(gw.squaredNorm() + gb * gb) <= cfg.tol) break;

    const double eta = 1.0 / (1.0 + static_cast<double>(t));
    w -= eta * gw;
    b -= eta * gb;
    const double j = hinge_objective(X, y, w, b, cfg.C);
    if (j < best.objective) {
      best.w = w;
      best.b = b;
      best.objective = j;
    }
    best.history.push_back(best.objective);
    best.iterations = t + 1;
  }
  return best;
}

namespace {

std::vector<std::size_t> distinct_classes(std::span<const std::size_t> y) {
  std::vector<std::size_t> classes(y.begin(), y.end());
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  return classes;
}

// Rows in a canonical order (lexicographic on features, then label) so the
// full-batch sums, and hence the trained parameters, do not depend on input order.
std::vector<Eigen::Index> canonical_order(const Eigen::MatrixXd& X,
                                          std::span<const std::size_t> y) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(X.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index c = 0; c < X.cols(); ++c) {
      if (X(a, c) != X(b, c)) return X(a, c) < X(b, c);
    }
    return y[static_cast<std::size_t>(a)] < y[static_cast<std::size_t>(b)];
  });
  return order;
}

LinearModel train_linear(const FeatureMatrix& data, std::span<const std::size_t> y,
                         const TrainConfig& cfg, LinearFamily family) {
  if (data.rows() != y.size()) {
    throw Error(ErrorCode::LengthMismatch, "feature rows and labels differ in length");
  }
  if (data.rows() < 2) throw Error(ErrorCode::InsufficientRows, "need at least 2 training rows");
  check_finite(data.values);
  const auto classes = distinct_classes(y);
  if (classes.size() < 2) throw Error(ErrorCode::SingleClass, "training labels contain one class");

  const auto order = canonical_order(data.values, y);
  Eigen::MatrixXd X(data.values.rows(), data.values.cols());
  std::vector<std::size_t> labels(y.size());
  for (std::size_t r = 0; r < order.size(); ++r) {
    X.row(static_cast<Eigen::Index>(r)) = data.values.row(order[r]);
    labels[r] = y[static_cast<std::size_t>(order[r])];
  }

  LinearModel model;
  model.family = family;
  model.classes = classes;
  model.config = cfg;
  const std::size_t problems = classes.size() == 2 ? 1 : classes.size();
  for (std::size_t k = 0; k < problems; ++k) {
    Eigen::VectorXd target(X.rows());
    for (std::size_t r = 0; r < labels.size(); ++r) {
      target[static_cast<Eigen::Index>(r)] = labels[r] == classes[k] ? 1.0 : -1.0;
    }
    auto fit = family == LinearFamily::Logistic ? fit_logistic_binary(X, target, cfg)
                                                : fit_hinge_binary(X, target, cfg);
    model.weights.push_back(std::move(fit.w));
    model.biases.push_back(fit.b);
    model.objective.push_back(fit.objective);
    model.iterations.push_back(fit.iterations);
  }
  return model;
}

}  // namespace

LinearModel train_logreg(const FeatureMatrix& X, std::span<const std::size_t> y,
                         const TrainConfig& cfg) {
  return train_linear(X, y, cfg, LinearFamily::Logistic);
}

LinearModel train_linear_svm(const FeatureMatrix& X, std::span<const std::size_t> y,
                             const TrainConfig& cfg) {
  return train_linear(X, y, cfg, LinearFamily::Hinge);
}

std::vector<double> decision_scores(const LinearModel& model, std::span<const double> x) {
  if (x.size() != model.dimension()) {
    throw Error(ErrorCode::DimensionMismatch, "model expects " +
                                                  std::to_string(model.dimension()) +
                                                  " features, got " + std::to_string(x.size()));
  }
  const Eigen::Map<const Eigen::VectorXd> v(x.data(), static_cast<Eigen::Index>(x.size()));
  std::vector<double> scores;
  scores.reserve(model.weights.size());
  for (std::size_t k = 0; k < model.weights.size(); ++k) {
    scores.push_back(model.weights[k].dot(v) + model.biases[k]);
  }
  return scores;
}

std::vector<std::size_t> predict(const LinearModel& model, const FeatureMatrix& X) {
  if (X.cols() != model.dimension()) {
    throw Error(ErrorCode::DimensionMismatch, "model expects " +
                                                  std::to_string(model.dimension()) +
                                                  " features, got " + std::to_string(X.cols()));
  }
  std::vector<std::size_t> out;
  out.reserve(X.rows());
  std::vector<double> row(X.cols());
  for (std::size_t r = 0; r < X.rows(); ++r) {
    for (std::size_t c = 0; c < X.cols(); ++c) {
      row[c] = X.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    }
    const auto scores = decision_scores(model, row);
    if (model.classes.size() == 2) {
      out.push_back(scores[0] >= 0.0 ? model.classes[0] : model.classes[1]);
      continue;
    }
    std::size_t best = 0;
    for (std::size_t k = 1; k < scores.size(); ++k) {
      if (scores[k] > scores[best]) best = k;
    }
    out.push_back(model.classes[best]);
  }
  return out;
}

namespace {

struct NodeWork {
  int node;
  std::vector<std::size_t> samples;
};

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double impurity = 0.0;
};

double gini_from_counts(const std::vector<std::size_t>& counts, std::size_t total) {
  if (total == 0) return 0.0;
  double sum_sq = 0.0;
  for (auto c : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(total);
    sum_sq += p * p;
  }
  return 1.0 - sum_sq;
}

// Best midpoint split on one feature; false when the feature is constant on `samples`.
bool best_split_on(const Eigen::MatrixXd& X, const std::vector<std::size_t>& class_index,
                   std::size_t n_classes, const std::vector<std::size_t>& samples, int feature,
                   SplitChoice& choice) {
  std::vector<std::pair<double, std::size_t>> column;
  column.reserve(samples.size());
  for (auto s : samples) {
    column.emplace_back(X(static_cast<Eigen::Index>(s), feature), class_index[s]);
  }
  std::sort(column.begin(), column.end());
  if (column.front().first == column.back().first) return false;

  std::vector<std::size_t> left(n_classes, 0), right(n_classes, 0);
  for (const auto& [v, c] : column) ++right[c];
  const std::size_t n = column.size();
  bool found = false;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    ++left[column[i].second];
    --right[column[i].second];
    if (column[i].first == column[i + 1].first) continue;
    const std::size_t nl = i + 1, nr = n - nl;
    const double impurity = (static_cast<double>(nl) * gini_from_counts(left, nl) +
                             static_cast<double>(nr) * gini_from_counts(right, nr)) /
                            static_cast<double>(n);
    if (!found || impurity < choice.impurity) {
      choice.feature = feature;
      choice.threshold = 0.5 * (column[i].first + column[i + 1].first);
      choice.impurity = impurity;
      found = true;
    }
  }
  return found;
}

DecisionTree grow_tree(const Eigen::MatrixXd& X, const std::vector<std::size_t>& class_index,
                       std::size_t n_classes, std::uint64_t seed) {
  const std::size_t n = static_cast<std::size_t>(X.rows());
  const std::size_t d = static_cast<std::size_t>(X.cols());
  const std::size_t m = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(d)))));
  SeededRng rng(seed);

  std::vector<std::size_t> bootstrap(n);
  for (auto& s : bootstrap) s = static_cast<std::size_t>(rng.uniform_index(n));

  DecisionTree tree;
  tree.nodes.emplace_back();
  std::vector<NodeWork> stack;
  stack.push_back({0, std::move(bootstrap)});
  std::vector<std::size_t> features(d);

  while (!stack.empty()) {
    NodeWork work = std::move(stack.back());
    stack.pop_back();

    std::vector<std::size_t> counts(n_classes, 0);
    for (auto s : work.samples) ++counts[class_index[s]];
    const auto nonzero = std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; });

    SplitChoice best;
    bool found = false;
    if (nonzero > 1 && work.samples.size() >= 2) {
      // Partial Fisher-Yates: the first m entries are the sampled features. If
      // all of them are constant here, keep drawing from the rest.
      std::iota(features.begin(), features.end(), std::size_t{0});
      for (std::size_t k = 0; k < d && (k < m || !found); ++k) {
        const std::size_t j = k + static_cast<std::size_t>(rng.uniform_index(d - k));
        std::swap(features[k], features[j]);
        SplitChoice candidate;
        if (best_split_on(X, class_index, n_classes, work.samples,
                          static_cast<int>(features[k]), candidate)) {
          if (!found || candidate.impurity < best.impurity) best = candidate;
          found = true;
        }
      }
    }

    if (!found) {
      tree.nodes[static_cast<std::size_t>(work.node)].counts = std::move(counts);
      continue;
    }

    std::vector<std::size_t> left, right;
    for (auto s : work.samples) {
      (X(static_cast<Eigen::Index>(s), best.feature) <= best.threshold ? left : right).push_back(s);
    }
    const int left_id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    const int right_id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    auto& node = tree.nodes[static_cast<std::size_t>(work.node)];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = left_id;
    node.right = right_id;
    // Right pushed first so the left subtree is expanded first.
    stack.push_back({right_id, std::move(right)});
    stack.push_back({left_id, std::move(left)});
  }
  return tree;
}

std::size_t argmax_first(const std::vector<std::size_t>& counts) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < counts.size(); ++k) {
    if (counts[k] > counts[best]) best = k;
  }
  return best;
}

std::size_t tree_vote(const DecisionTree& tree, const Eigen::MatrixXd& X, Eigen::Index row) {
  std::size_t node = 0;
  while (tree.nodes[node].feature >= 0) {
    const auto& nd = tree.nodes[node];
    node = static_cast<std::size_t>(X(row, nd.feature) <= nd.threshold ? nd.left : nd.right);
  }
  return argmax_first(tree.nodes[node].counts);
}

}  // namespace

ForestModel train_random_forest(const FeatureMatrix& data, std::span<const std::size_t> y,
                                const TrainConfig& cfg) {
  if (data.rows() != y.size()) {
    throw Error(ErrorCode::LengthMismatch, "feature rows and labels differ in length");
  }
  if (data.rows() < 2) throw Error(ErrorCode::InsufficientRows, "need at least 2 training rows");
  if (data.cols() == 0) throw Error(ErrorCode::DimensionMismatch, "feature matrix has no columns");
  if (cfg.n_trees == 0) throw Error(ErrorCode::InvalidConfig, "n_trees must be positive");
  check_finite(data.values);

  ForestModel model;
  model.classes = distinct_classes(y);
  model.seed = cfg.seed;
  model.dimension = data.cols();
  model.config = cfg;
  std::vector<std::size_t> class_index(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    class_index[i] = static_cast<std::size_t>(
        std::lower_bound(model.classes.begin(), model.classes.end(), y[i]) -
        model.classes.begin());
  }
  model.trees.reserve(cfg.n_trees);
  for (std::size_t t = 0; t < cfg.n_trees; ++t) {
    model.trees.push_back(grow_tree(data.values, class_index, model.classes.size(), cfg.seed + t));
  }
  return model;
}

std::vector<std::size_t> predict(const ForestModel& model, const FeatureMatrix& X) {
  if (X.cols() != model.dimension) {
    throw Error(ErrorCode::DimensionMismatch, "model expects " + std::to_string(model.dimension) +
                                                  " features, got " + std::to_string(X.cols()));
  }
  std::vector<std::size_t> out;
  out.reserve(X.rows());
  std::vector<std::size_t> votes(model.classes.size());
  for (std::size_t r = 0; r < X.rows(); ++r) {
    std::fill(votes.begin(), votes.end(), 0);
    for (const auto& tree : model.trees) {
      ++votes[tree_vote(tree, X.values, static_cast<Eigen::Index>(r))];
    }
    out.push_back(model.classes[argmax_first(votes)]);
  }
  return out;
}

namespace {

nlohmann::ordered_json hyperparameters(const TrainConfig& cfg, bool forest) {
  nlohmann::ordered_json h;
  if (forest) {
    h["n_trees"] = cfg.n_trees;
  } else {
    h["C"] = cfg.C;
    h["max_iter"] = cfg.max_iter;
    h["tol"] = cfg.tol;
  }
  return h;
}

TrainConfig config_from(const nlohmann::json& j) {
  TrainConfig cfg;
  const auto& h = j.at("hyperparameters");
  cfg.C = h.value("C", cfg.C);
  cfg.max_iter = h.value("max_iter", cfg.max_iter);
  cfg.tol = h.value("tol", cfg.tol);
  cfg.n_trees = h.value("n_trees", cfg.n_trees);
  cfg.seed = j.value("seed", std::uint64_t{0});
  return cfg;
}

}  // namespace

nlohmann::ordered_json to_json(const LinearModel& model) {
  nlohmann::ordered_json j;
  j["family"] = model.family == LinearFamily::Logistic ? "logistic_regression" : "linear_svm";
  j["classes"] = model.classes;
  j["hyperparameters"] = hyperparameters(model.config, false);
  j["seed"] = model.config.seed;
  j["dimension"] = model.dimension();
  j["weights"] = nlohmann::ordered_json::array();
  for (const auto& w : model.weights) {
    j["weights"].push_back(std::vector<double>(w.data(), w.data() + w.size()));
  }
  j["biases"] = model.biases;
  j["objective"] = model.objective;
  j["iterations"] = model.iterations;
  return j;
}

nlohmann::ordered_json to_json(const ForestModel& model) {
  nlohmann::ordered_json j;
  j["family"] = "random_forest";
  j["classes"] = model.classes;
  j["hyperparameters"] = hyperparameters(model.config, true);
  j["seed"] = model.seed;
  j["dimension"] = model.dimension;
  j["trees"] = nlohmann::ordered_json::array();
  for (const auto& tree : model.trees) {
    nlohmann::ordered_json t;
    std::vector<int> feature, left, right;
    std::vector<double> threshold;
    std::vector<std::vector<std::size_t>> counts;
    for (const auto& n : tree.nodes) {
      feature.push_back(n.feature);
      threshold.push_back(n.threshold);
      left.push_back(n.left);
      right.push_back(n.right);
      counts.push_back(n.counts);
    }
    t["feature"] = feature;
    t["threshold"] = threshold;
    t["left"] = left;
    t["right"] = right;
    t["counts"] = counts;
    j["trees"].push_back(std::move(t));
  }
  return j;
}

LinearModel linear_model_from_json(const nlohmann::json& j) {
  LinearModel m;
  const auto family = j.at("family").get<std::string>();
  if (family == "logistic_regression") m.family = LinearFamily::Logistic;
  else if (family == "linear_svm") m.family = LinearFamily::Hinge;
  else throw Error(ErrorCode::InvalidConfig, "not a linear model: " + family);
  m.classes = j.at("classes").get<std::vector<std::size_t>>();
  m.config = config_from(j);
  for (const auto& w : j.at("weights")) {
    const auto v = w.get<std::vector<double>>();
    m.weights.emplace_back(Eigen::Map<const Eigen::VectorXd>(v.data(),
                                                             static_cast<Eigen::Index>(v.size())));
  }
  m.biases = j.at("biases").get<std::vector<double>>();
  m.objective = j.value("objective", std::vector<double>{});
  m.iterations = j.value("iterations", std::vector<std::size_t>{});
  return m;
}

ForestModel forest_model_from_json(const nlohmann::json& j) {
  if (j.at("family").get<std::string>() != "random_forest") {
    throw Error(ErrorCode::InvalidConfig, "not a forest model");
  }
  ForestModel m;
  m.classes = j.at("classes").get<std::vector<std::size_t>>();
  m.config = config_from(j);
  m.seed = m.config.seed;
  m.dimension = j.at("dimension").get<std::size_t>();
  for (const auto& t : j.at("trees")) {
    DecisionTree tree;
    const auto feature = t.at("feature").get<std::vector<int>>();
    const auto threshold = t.at("threshold").get<std::vector<double>>();
    const auto left = t.at("left").get<std::vector<int>>();
    const auto right = t.at("right").get<std::vector<int>>();
    const auto counts = t.at("counts").get<std::vector<std::vector<std::size_t>>>();
    for (std::size_t i = 0; i < feature.size(); ++i) {
      if (feature[i] >= static_cast<int>(m.dimension)) {
        throw Error(ErrorCode::DimensionMismatch, "tree split on feature beyond model dimension");
      }
      tree.nodes.push_back({feature[i], threshold[i], left[i], right[i], counts[i]});
    }
    m.trees.push_back(std::move(tree));
  }
  return m;
}

std::string serialize_model(const LinearModel& model) { return to_json(model).dump(1) + "\n"; }
std::string serialize_model(const ForestModel& model) { return to_json(model).dump() + "\n"; }

}  // namespace mhtc
