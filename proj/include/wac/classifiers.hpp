#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "wac/core_data.hpp"

namespace wac {

inline constexpr std::size_t kMlpHidden = 3;

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  bool operator==(const AdamConfig&) const = default;
};

struct TrainConfig {
  std::size_t max_epochs = 2000;
  AdamConfig adam;
  double l2_alpha = 0.1;    // MLP only
  double l1_lambda = 1e-4;  // logreg only
  std::size_t tree_max_depth = 2;
  std::size_t min_leaf = 1;
  std::uint64_t seed = 0;
  double convergence_tol = 1e-6;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::size_t step = 0;

  explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

// One bias-corrected adam update in place. Throws TrainingError on a
// non-finite gradient.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads,
               const AdamConfig& config);

struct LogRegParams {
  std::vector<double> weights;
  double bias = 0.0;

  std::size_t dim() const { return weights.size(); }
  bool operator==(const LogRegParams&) const = default;
};

struct MlpParams {
  std::vector<double> w1;  // kMlpHidden x D, row-major
  std::vector<double> b1;  // kMlpHidden
  std::vector<double> w2;  // kMlpHidden
  double b2 = 0.0;

  static MlpParams zeros(std::size_t dim);
  std::size_t dim() const { return w1.size() / kMlpHidden; }
  double logit(std::span<const double> x) const;
  bool operator==(const MlpParams&) const = default;
};

// Flat node array; node 0 is the root. Internal nodes route x[feature] <=
// threshold to `left`.
class DecisionTree {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    std::size_t n_pos = 0;
    std::size_t n_neg = 0;

    bool is_leaf() const { return feature < 0; }
    double probability() const {
      return static_cast<double>(n_pos) / static_cast<double>(n_pos + n_neg);
    }
    bool operator==(const Node&) const = default;
  };

  DecisionTree() = default;
  explicit DecisionTree(std::vector<Node> nodes);

  static DecisionTree leaf(std::size_t n_pos, std::size_t n_neg);

  const std::vector<Node>& nodes() const { return nodes_; }
  std::size_t depth() const;
  // Index of the leaf reached by x.
  int leaf_index(std::span<const double> x) const;
  double predict(std::span<const double> x) const;
  // Largest feature index used plus one (0 for a single leaf).
  std::size_t min_dim() const;
  // Copy of this tree where each leaf in `leaves` is replaced by a copy of `scion`.
  DecisionTree graft(std::span<const int> leaves, const DecisionTree& scion) const;
  bool operator==(const DecisionTree&) const = default;

 private:
  std::vector<Node> nodes_;
};

using WordClassifier = std::variant<LogRegParams, MlpParams, DecisionTree>;

enum class Backend { LogReg, Mlp, Tree };

std::string_view to_string(Backend backend);
Backend backend_from_string(std::string_view name);
Backend backend_of(const WordClassifier& classifier);

double sigmoid(double z);

// Gini impurity 1 - p^2 - q^2 of a node with the given class counts.
double gini(std::size_t n_pos, std::size_t n_neg);

// Probability in [0, 1]. Throws DimensionMismatchError when x does not fit.
double predict(const WordClassifier& classifier, std::span<const double> x);
std::size_t classifier_dim(const WordClassifier& classifier);

// Labelled training matrix, one row per example.
struct TrainingSet {
  std::vector<FeatureVector> rows;
  std::vector<double> labels;  // 1 positive, 0 negative

  static TrainingSet from(std::span<const FeatureVector> positives,
                          std::span<const FeatureVector> negatives);
  std::size_t size() const { return rows.size(); }
  std::size_t dim() const { return rows.empty() ? 0 : rows.front().size(); }
};

// Mean binary cross-entropy of logistic regression (the smooth part of the
// objective; the L1 term is handled proximally). Gradient layout: weights
// then bias.
double logreg_loss(const LogRegParams& params, const TrainingSet& data, std::vector<double>* grad);

// Mean binary cross-entropy plus (l2_alpha / 2n) * sum of squared weights.
// Gradient layout matches mlp_flatten.
double mlp_loss(const MlpParams& params, const TrainingSet& data, double l2_alpha,
                std::vector<double>* grad);

std::vector<double> mlp_flatten(const MlpParams& params);
MlpParams mlp_unflatten(std::span<const double> flat, std::size_t dim);

// Glorot-uniform weights and zero biases drawn from `seed`.
MlpParams mlp_init(std::size_t dim, std::uint64_t seed);

LogRegParams train_logreg(std::span<const FeatureVector> positives,
                          std::span<const FeatureVector> negatives, const TrainConfig& config);

MlpParams train_mlp(std::span<const FeatureVector> positives,
                    std::span<const FeatureVector> negatives, const TrainConfig& config);

// Continues adam training from `start` with fresh optimizer moments.
MlpParams continue_mlp(const MlpParams& start, std::span<const FeatureVector> positives,
                       std::span<const FeatureVector> negatives, const TrainConfig& config);

DecisionTree train_tree(std::span<const FeatureVector> positives,
                        std::span<const FeatureVector> negatives, const TrainConfig& config);

WordClassifier train_classifier(Backend backend, std::span<const FeatureVector> positives,
                                std::span<const FeatureVector> negatives,
                                const TrainConfig& config);

}  // namespace wac
