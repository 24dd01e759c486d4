#include "wac/classifiers.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "wac/error.hpp"
#include "wac/rng.hpp"

namespace wac {

void TrainConfig::validate() const {
  if (!(adam.learning_rate > 0 && adam.beta1 > 0 && adam.beta1 < 1 && adam.beta2 > 0 &&
        adam.beta2 < 1 && adam.eps > 0)) {
    throw ConfigError("adam rates must be positive (betas below 1)");
  }
  if (!(l2_alpha >= 0 && l1_lambda >= 0 && convergence_tol >= 0)) {
    throw ConfigError("regularization and tolerance must be non-negative");
  }
  if (tree_max_depth == 0 || min_leaf == 0) {
    throw ConfigError("tree_max_depth and min_leaf must be >= 1");
  }
}

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads,
               const AdamConfig& config) {
  if (params.size() != grads.size()) {
    throw DimensionMismatchError(params.size(), grads.size(), "adam_step gradient");
  }
  if (state.m.size() != params.size()) {
    throw DimensionMismatchError(params.size(), state.m.size(), "adam_step state");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw TrainingError("non-finite gradient at parameter " + std::to_string(i) + " (step " +
                          std::to_string(state.step + 1) + ")");
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(config.beta1, t);
  const double correction2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g;
    state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g * g;
    const double m_hat = state.m[i] / correction1;
    const double v_hat = state.v[i] / correction2;
    params[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.eps);
  }
}

MlpParams MlpParams::zeros(std::size_t dim) {
  return MlpParams{std::vector<double>(kMlpHidden * dim, 0.0), std::vector<double>(kMlpHidden, 0.0),
                   std::vector<double>(kMlpHidden, 0.0), 0.0};
}

double MlpParams::logit(std::span<const double> x) const {
  const std::size_t d = dim();
  double z = b2;
  for (std::size_t k = 0; k < kMlpHidden; ++k) {
    const double* row = w1.data() + k * d;
    double a = b1[k];
    for (std::size_t j = 0; j < d; ++j) a += row[j] * x[j];
    z += w2[k] * std::tanh(a);
  }
  return z;
}

// --- decision tree -------------------------------------------------------

DecisionTree::DecisionTree(std::vector<Node> nodes) : nodes_(std::move(nodes)) {
  if (nodes_.empty()) throw InvalidInputError("decision tree needs at least one node");
  const int n = static_cast<int>(nodes_.size());
  for (const auto& node : nodes_) {
    if (node.is_leaf()) {
      if (node.n_pos + node.n_neg == 0) throw InvalidInputError("empty tree leaf");
    } else if (node.left <= 0 || node.right <= 0 || node.left >= n || node.right >= n) {
      throw InvalidInputError("tree child index out of range");
    }
  }
}

DecisionTree DecisionTree::leaf(std::size_t n_pos, std::size_t n_neg) {
  Node node;
  node.n_pos = n_pos;
  node.n_neg = n_neg;
  return DecisionTree({node});
}

std::size_t DecisionTree::depth() const {
  std::function<std::size_t(int)> rec = [&](int i) -> std::size_t {
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.is_leaf()) return 0;
    return 1 + std::max(rec(n.left), rec(n.right));
  };
  return nodes_.empty() ? 0 : rec(0);
}

int DecisionTree::leaf_index(std::span<const double> x) const {
  int i = 0;
  while (!nodes_[static_cast<std::size_t>(i)].is_leaf()) {
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
  return i;
}

double DecisionTree::predict(std::span<const double> x) const {
  return nodes_[static_cast<std::size_t>(leaf_index(x))].probability();
}

std::size_t DecisionTree::min_dim() const {
  std::size_t d = 0;
  for (const auto& n : nodes_) {
    if (!n.is_leaf()) d = std::max(d, static_cast<std::size_t>(n.feature) + 1);
  }
  return d;
}

DecisionTree DecisionTree::graft(std::span<const int> leaves, const DecisionTree& scion) const {
  std::vector<Node> out = nodes_;
  for (int leaf : leaves) {
    if (leaf < 0 || static_cast<std::size_t>(leaf) >= nodes_.size() ||
        !nodes_[static_cast<std::size_t>(leaf)].is_leaf()) {
      throw InvalidInputError("graft target is not a leaf");
    }
    const int base = static_cast<int>(out.size());
    auto remap = [&](int k) { return k == 0 ? leaf : base + k - 1; };
    const auto& src = scion.nodes_;
    for (std::size_t k = 0; k < src.size(); ++k) {
      Node copy = src[k];
      if (!copy.is_leaf()) {
        copy.left = remap(copy.left);
        copy.right = remap(copy.right);
      }
      if (k == 0) {
        out[static_cast<std::size_t>(leaf)] = copy;
      } else {
        out.push_back(copy);
      }
    }
  }
  return DecisionTree(std::move(out));
}

// --- shared -------------------------------------------------------------

std::string_view to_string(Backend backend) {
  switch (backend) {
    case Backend::LogReg: return "logreg";
    case Backend::Mlp: return "mlp";
    case Backend::Tree: return "tree";
  }
  return "logreg";
}

Backend backend_from_string(std::string_view name) {
  if (name == "logreg") return Backend::LogReg;
  if (name == "mlp") return Backend::Mlp;
  if (name == "tree") return Backend::Tree;
  throw ConfigError("unknown backend '" + std::string(name) + "' (expected logreg, mlp or tree)");
}

Backend backend_of(const WordClassifier& classifier) {
  return static_cast<Backend>(classifier.index());
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

namespace {

// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

void check_dim(std::size_t expected, std::size_t got, const char* where) {
  if (expected != got) throw DimensionMismatchError(expected, got, where);
}

}  // namespace

double gini(std::size_t n_pos, std::size_t n_neg) {
  const double n = static_cast<double>(n_pos + n_neg);
  if (n == 0) return 0.0;
  const double p = static_cast<double>(n_pos) / n;
  const double q = static_cast<double>(n_neg) / n;
  return 1.0 - p * p - q * q;
}

std::size_t classifier_dim(const WordClassifier& classifier) {
  return std::visit(
      [](const auto& c) -> std::size_t {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, DecisionTree>) {
          return c.min_dim();
        } else {
          return c.dim();
        }
      },
      classifier);
}

double predict(const WordClassifier& classifier, std::span<const double> x) {
  return std::visit(
      [&](const auto& c) -> double {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, LogRegParams>) {
          check_dim(c.dim(), x.size(), "logreg predict");
          double z = c.bias;
          for (std::size_t j = 0; j < x.size(); ++j) z += c.weights[j] * x[j];
          return sigmoid(z);
        } else if constexpr (std::is_same_v<T, MlpParams>) {
          check_dim(c.dim(), x.size(), "mlp predict");
          return sigmoid(c.logit(x));
        } else {
          if (x.size() < c.min_dim()) throw DimensionMismatchError(c.min_dim(), x.size(), "tree predict");
          return c.predict(x);
        }
      },
      classifier);
}

TrainingSet TrainingSet::from(std::span<const FeatureVector> positives,
                              std::span<const FeatureVector> negatives) {
  TrainingSet set;
  set.rows.reserve(positives.size() + negatives.size());
  for (const auto& p : positives) {
    set.rows.push_back(p);
    set.labels.push_back(1.0);
  }
  for (const auto& n : negatives) {
    set.rows.push_back(n);
    set.labels.push_back(0.0);
  }
  const std::size_t d = set.dim();
  for (const auto& r : set.rows) check_dim(d, r.size(), "training example");
  return set;
}

// --- logistic regression ------------------------------------------------

double logreg_loss(const LogRegParams& params, const TrainingSet& data, std::vector<double>* grad) {
  const std::size_t d = params.dim();
  const double inv_n = 1.0 / static_cast<double>(data.size());
  if (grad) grad->assign(d + 1, 0.0);
  double loss = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& x = data.rows[i];
    double z = params.bias;
    for (std::size_t j = 0; j < d; ++j) z += params.weights[j] * x[j];
    const double y = data.labels[i];
    loss += softplus(z) - y * z;
    if (grad) {
      const double dz = (sigmoid(z) - y) * inv_n;
      for (std::size_t j = 0; j < d; ++j) (*grad)[j] += dz * x[j];
      (*grad)[d] += dz;
    }
  }
  return loss * inv_n;
}

namespace {

void require_both_classes(std::span<const FeatureVector> positives,
                          std::span<const FeatureVector> negatives) {
  if (positives.empty() || negatives.empty()) {
    throw InsufficientDataError("training needs at least one positive and one negative (got " +
                                std::to_string(positives.size()) + " / " +
                                std::to_string(negatives.size()) + ")");
  }
}

}  // namespace

LogRegParams train_logreg(std::span<const FeatureVector> positives,
                          std::span<const FeatureVector> negatives, const TrainConfig& config) {
  require_both_classes(positives, negatives);
  config.validate();
  const TrainingSet data = TrainingSet::from(positives, negatives);
  const std::size_t d = data.dim();

  LogRegParams params{std::vector<double>(d, 0.0), 0.0};
  std::vector<double> flat(d + 1, 0.0);
  std::vector<double> grad;
  AdamState state(d + 1);
  const double shrink = config.adam.learning_rate * config.l1_lambda;
  double previous = 0.0;
  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    double loss = logreg_loss(params, data, &grad);
    for (double w : params.weights) loss += config.l1_lambda * std::abs(w);
    if (epoch > 0 && std::abs(previous - loss) < config.convergence_tol) break;
    previous = loss;

    adam_step(state, flat, grad, config.adam);
    // Proximal soft-threshold on the weights; the bias is unpenalized.
    for (std::size_t j = 0; j < d; ++j) {
      const double w = flat[j];
      flat[j] = w > shrink ? w - shrink : (w < -shrink ? w + shrink : 0.0);
    }
    std::copy(flat.begin(), flat.begin() + static_cast<long>(d), params.weights.begin());
    params.bias = flat[d];
  }
  return params;
}

// --- multi-layer perceptron ---------------------------------------------

std::vector<double> mlp_flatten(const MlpParams& p) {
  std::vector<double> flat;
  flat.reserve(p.w1.size() + 2 * kMlpHidden + 1);
  flat.insert(flat.end(), p.w1.begin(), p.w1.end());
  flat.insert(flat.end(), p.b1.begin(), p.b1.end());
  flat.insert(flat.end(), p.w2.begin(), p.w2.end());
  flat.push_back(p.b2);
  return flat;
}

MlpParams mlp_unflatten(std::span<const double> flat, std::size_t dim) {
  check_dim(kMlpHidden * dim + 2 * kMlpHidden + 1, flat.size(), "mlp parameter vector");
  MlpParams p;
  auto it = flat.begin();
  p.w1.assign(it, it + static_cast<long>(kMlpHidden * dim));
  it += static_cast<long>(kMlpHidden * dim);
  p.b1.assign(it, it + kMlpHidden);
  it += kMlpHidden;
  p.w2.assign(it, it + kMlpHidden);
  it += kMlpHidden;
  p.b2 = *it;
  return p;
}

double mlp_loss(const MlpParams& params, const TrainingSet& data, double l2_alpha,
                std::vector<double>* grad) {
  const std::size_t d = params.dim();
  const std::size_t n = data.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  const std::size_t b1_off = kMlpHidden * d;
  const std::size_t w2_off = b1_off + kMlpHidden;
  const std::size_t b2_off = w2_off + kMlpHidden;
  if (grad) grad->assign(b2_off + 1, 0.0);

  double loss = 0.0;
  double hidden[kMlpHidden];
  for (std::size_t i = 0; i < n; ++i) {
    const auto& x = data.rows[i];
    double z = params.b2;
    for (std::size_t k = 0; k < kMlpHidden; ++k) {
      const double* row = params.w1.data() + k * d;
      double a = params.b1[k];
      for (std::size_t j = 0; j < d; ++j) a += row[j] * x[j];
      hidden[k] = std::tanh(a);
      z += params.w2[k] * hidden[k];
    }
    const double y = data.labels[i];
    loss += softplus(z) - y * z;
    if (!grad) continue;
    const double dz = (sigmoid(z) - y) * inv_n;
    auto& g = *grad;
    g[b2_off] += dz;
    for (std::size_t k = 0; k < kMlpHidden; ++k) {
      g[w2_off + k] += dz * hidden[k];
      const double da = dz * params.w2[k] * (1.0 - hidden[k] * hidden[k]);
      g[b1_off + k] += da;
      double* grow = g.data() + k * d;
      for (std::size_t j = 0; j < d; ++j) grow[j] += da * x[j];
    }
  }
  loss *= inv_n;

  const double scale = l2_alpha * inv_n;
  double sq = 0.0;
  for (double w : params.w1) sq += w * w;
  for (double w : params.w2) sq += w * w;
  loss += 0.5 * scale * sq;
  if (grad) {
    for (std::size_t j = 0; j < b1_off; ++j) (*grad)[j] += scale * params.w1[j];
    for (std::size_t k = 0; k < kMlpHidden; ++k) (*grad)[w2_off + k] += scale * params.w2[k];
  }
  return loss;
}

MlpParams mlp_init(std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  MlpParams p = MlpParams::zeros(dim);
  const double r1 = std::sqrt(6.0 / static_cast<double>(dim + kMlpHidden));
  for (auto& w : p.w1) w = rng.uniform(-r1, r1);
  const double r2 = std::sqrt(6.0 / static_cast<double>(kMlpHidden + 1));
  for (auto& w : p.w2) w = rng.uniform(-r2, r2);
  return p;
}

MlpParams continue_mlp(const MlpParams& start, std::span<const FeatureVector> positives,
                       std::span<const FeatureVector> negatives, const TrainConfig& config) {
  require_both_classes(positives, negatives);
  config.validate();
  const TrainingSet data = TrainingSet::from(positives, negatives);
  const std::size_t d = start.dim();
  check_dim(d, data.dim(), "mlp training data");

  MlpParams params = start;
  std::vector<double> flat = mlp_flatten(params);
  std::vector<double> grad;
  AdamState state(flat.size());
  double previous = 0.0;
  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    const double loss = mlp_loss(params, data, config.l2_alpha, &grad);
    if (epoch > 0 && std::abs(previous - loss) < config.convergence_tol) break;
    previous = loss;
    adam_step(state, flat, grad, config.adam);
    params = mlp_unflatten(flat, d);
  }
  return params;
}

MlpParams train_mlp(std::span<const FeatureVector> positives,
                    std::span<const FeatureVector> negatives, const TrainConfig& config) {
  require_both_classes(positives, negatives);
  const std::size_t d = positives.front().size();
  return continue_mlp(mlp_init(d, config.seed), positives, negatives, config);
}

// --- decision tree training ---------------------------------------------

namespace {

__extension__ using i128 = __int128;

struct SplitScore {
  // Maximizing p_L^2+q_L^2 over N_L plus the same for the right child is
  // equivalent to minimizing weighted Gini. Kept as an exact fraction.
  i128 num = 0;
  i128 den = 1;

  bool better_than(const SplitScore& o) const { return num * o.den > o.num * den; }
};

SplitScore score_split(std::size_t lp, std::size_t ln, std::size_t rp, std::size_t rn) {
  const i128 nl = static_cast<i128>(lp + ln);
  const i128 nr = static_cast<i128>(rp + rn);
  const i128 sl = static_cast<i128>(lp) * lp + static_cast<i128>(ln) * ln;
  const i128 sr = static_cast<i128>(rp) * rp + static_cast<i128>(rn) * rn;
  return {sl * nr + sr * nl, nl * nr};
}

class TreeBuilder {
 public:
  TreeBuilder(const TrainingSet& data, const TrainConfig& config) : data_(data), config_(config) {}

  int build(std::vector<std::size_t> idx, std::size_t depth) {
    DecisionTree::Node node;
    for (std::size_t i : idx) (data_.labels[i] > 0.5 ? node.n_pos : node.n_neg) += 1;
    const int self = static_cast<int>(nodes_.size());
    nodes_.push_back(node);

    const bool pure = node.n_pos == 0 || node.n_neg == 0;
    if (depth >= config_.tree_max_depth || pure || idx.size() < 2 * config_.min_leaf) return self;

    bool found = false;
    std::size_t best_feature = 0;
    double best_threshold = 0.0;
    SplitScore best;
    std::vector<std::size_t> order = idx;
    for (std::size_t f = 0; f < data_.dim(); ++f) {
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return data_.rows[a][f] < data_.rows[b][f];
      });
      std::size_t lp = 0, ln = 0;
      for (std::size_t k = 0; k + 1 < order.size(); ++k) {
        (data_.labels[order[k]] > 0.5 ? lp : ln) += 1;
        const double lo = data_.rows[order[k]][f];
        const double hi = data_.rows[order[k + 1]][f];
        if (!(lo < hi)) continue;
        const std::size_t n_left = k + 1;
        const std::size_t n_right = order.size() - n_left;
        if (n_left < config_.min_leaf || n_right < config_.min_leaf) continue;
        const SplitScore s = score_split(lp, ln, node.n_pos - lp, node.n_neg - ln);
        if (!found || s.better_than(best)) {
          double threshold = lo + 0.5 * (hi - lo);
          if (!(threshold < hi)) threshold = lo;
          found = true;
          best = s;
          best_feature = f;
          best_threshold = threshold;
        }
      }
    }
    if (!found) return self;

    std::vector<std::size_t> left, right;
    for (std::size_t i : idx) {
      (data_.rows[i][best_feature] <= best_threshold ? left : right).push_back(i);
    }
    const int l = build(std::move(left), depth + 1);
    const int r = build(std::move(right), depth + 1);
    auto& me = nodes_[static_cast<std::size_t>(self)];
    me.feature = static_cast<int>(best_feature);
    me.threshold = best_threshold;
    me.left = l;
    me.right = r;
    return self;
  }

  std::vector<DecisionTree::Node> take() { return std::move(nodes_); }

 private:
  const TrainingSet& data_;
  const TrainConfig& config_;
  std::vector<DecisionTree::Node> nodes_;
};

}  // namespace

DecisionTree train_tree(std::span<const FeatureVector> positives,
                        std::span<const FeatureVector> negatives, const TrainConfig& config) {
  if (positives.empty() && negatives.empty()) {
    throw InsufficientDataError("tree training needs at least one example");
  }
  config.validate();
  const TrainingSet data = TrainingSet::from(positives, negatives);
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  TreeBuilder builder(data, config);
  builder.build(std::move(idx), 0);
  return DecisionTree(builder.take());
}

WordClassifier train_classifier(Backend backend, std::span<const FeatureVector> positives,
                                std::span<const FeatureVector> negatives,
                                const TrainConfig& config) {
  switch (backend) {
    case Backend::LogReg: return train_logreg(positives, negatives, config);
    case Backend::Mlp: return train_mlp(positives, negatives, config);
    case Backend::Tree: return train_tree(positives, negatives, config);
  }
  throw ConfigError("unknown backend");
}

}  // namespace wac
