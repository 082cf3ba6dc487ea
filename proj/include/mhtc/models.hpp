#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace mhtc {

/// Dense N x d design matrix with post ids aligned to rows.
struct FeatureMatrix {
  Eigen::MatrixXd values;
  std::vector<std::string> row_ids;

  std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(values.cols()); }

  /// Throws DimensionMismatch on ragged rows and NonFiniteInput on NaN/inf.
  static FeatureMatrix from_rows(std::span<const std::vector<double>> rows,
                                 std::vector<std::string> row_ids = {});
};

struct TrainConfig {
  double C = 1.0;
  std::size_t max_iter = 1000;
  double tol = 1e-6;
  std::size_t n_trees = 100;
  std::uint64_t seed = 0;
};

/// Embedding entries followed by lexicon entries.
std::vector<double> concat_features(std::span<const double> embedding,
                                    std::span<const double> lexicon);

enum class LinearFamily { Logistic, Hinge };

/// One (w, b) pair for a two-class problem (positive class = classes[0]),
/// otherwise one pair per class trained one-vs-rest.
struct LinearModel {
  LinearFamily family = LinearFamily::Logistic;
  std::vector<std::size_t> classes;
  std::vector<Eigen::VectorXd> weights;
  std::vector<double> biases;
  TrainConfig config;
  /// Objective value and iteration count per binary subproblem.
  std::vector<double> objective;
  std::vector<std::size_t> iterations;

  std::size_t dimension() const {
    return weights.empty() ? 0 : static_cast<std::size_t>(weights.front().size());
  }
};

/// Outputs of a single binary (+1/-1) training problem.
struct BinaryFit {
  Eigen::VectorXd w;
  double b = 0.0;
  double objective = 0.0;
  std::size_t iterations = 0;
  /// Objective after every accepted step, starting with the initial point.
  std::vector<double> history;
};

/// 0.5 |w|^2 + C sum log(1 + exp(-y (w.x + b))), bias unregularized.
double logistic_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                          const Eigen::VectorXd& w, double b, double C);
void logistic_gradient(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& w, double b, double C, Eigen::VectorXd& grad_w,
                       double& grad_b);
/// 0.5 |w|^2 + C sum max(0, 1 - y (w.x + b)).
double hinge_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& w, double b, double C);

/// Gradient descent with Armijo backtracking from (0, 0).
BinaryFit fit_logistic_binary(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                              const TrainConfig& cfg);
/// Subgradient descent with step 1/(1+t) from (0, 0), returning the best iterate.
BinaryFit fit_hinge_binary(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           const TrainConfig& cfg);

LinearModel train_logreg(const FeatureMatrix& X, std::span<const std::size_t> y,
                         const TrainConfig& cfg);
LinearModel train_linear_svm(const FeatureMatrix& X, std::span<const std::size_t> y,
                             const TrainConfig& cfg);

/// Per-class scores; a two-class model yields a single score.
std::vector<double> decision_scores(const LinearModel& model, std::span<const double> x);

struct TreeNode {
  /// -1 for leaves.
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  /// Class histogram of the training samples that reached this leaf.
  std::vector<std::size_t> counts;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;
};

struct ForestModel {
  std::vector<DecisionTree> trees;
  std::uint64_t seed = 0;
  std::vector<std::size_t> classes;
  std::size_t dimension = 0;
  TrainConfig config;
};

ForestModel train_random_forest(const FeatureMatrix& X, std::span<const std::size_t> y,
                                const TrainConfig& cfg);

std::vector<std::size_t> predict(const LinearModel& model, const FeatureMatrix& X);
std::vector<std::size_t> predict(const ForestModel& model, const FeatureMatrix& X);

nlohmann::ordered_json to_json(const LinearModel& model);
nlohmann::ordered_json to_json(const ForestModel& model);
LinearModel linear_model_from_json(const nlohmann::json& j);
ForestModel forest_model_from_json(const nlohmann::json& j);
/// Full-precision text form used for model files and determinism checks.
std::string serialize_model(const LinearModel& model);
std::string serialize_model(const ForestModel& model);

}  // namespace mhtc
