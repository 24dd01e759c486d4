#include "wac/model.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "wac/error.hpp"
#include "wac/log.hpp"
#include "wac/parallel.hpp"
#include "wac/rng.hpp"

namespace wac {

using nlohmann::json;

void SamplingConfig::validate() const {
  if (neg_ratio < 1) throw ConfigError("neg_ratio must be >= 1");
}

const WordClassifier& WacModel::classifier(const std::string& word) const {
  auto it = classifiers.find(word);
  if (it == classifiers.end()) throw OovError(word);
  return it->second;
}

void WacModel::require_backend(Backend required, std::string_view operation) const {
  if (backend != required) {
    throw BackendMismatchError(std::string(operation) + " requires the " +
                               std::string(to_string(required)) + " backend, model uses " +
                               std::string(to_string(backend)));
  }
}

namespace {

bool contains_token(const RefExpInstance& r, const std::string& word) {
  return std::find(r.tokens.begin(), r.tokens.end(), word) != r.tokens.end();
}

}  // namespace

ExampleSet collect_examples(const Dataset& dataset, const std::string& word) {
  ExampleSet out;
  for (const auto& r : dataset.refexps) {
    const Entity& target = dataset.target(r);
    EntityRef ref{r.scene_id, r.target_object_id};
    if (contains_token(r, word)) {
      out.positives.push_back(target.features);
      out.positive_refs.push_back(std::move(ref));
    } else {
      out.negative_pool.push_back(target.features);
      out.negative_refs.push_back(std::move(ref));
    }
  }
  return out;
}

std::vector<FeatureVector> sample_negatives(const ExampleSet& examples,
                                            const SamplingConfig& sampling,
                                            const std::string& stream) {
  const std::set<EntityRef> positive_set(examples.positive_refs.begin(),
                                         examples.positive_refs.end());
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < examples.negative_pool.size(); ++i) {
    if (!positive_set.contains(examples.negative_refs[i])) pool.push_back(i);
  }
  const std::size_t need = sampling.neg_ratio * examples.positives.size();
  std::vector<FeatureVector> out;
  if (pool.empty() || need == 0) return out;

  Rng rng(derive_seed(sampling.seed, stream));
  out.reserve(need);
  if (pool.size() >= need) {
    rng.shuffle(pool);
    for (std::size_t k = 0; k < need; ++k) out.push_back(examples.negative_pool[pool[k]]);
  } else {
    log_warning("'" + stream + "': negative pool has " + std::to_string(pool.size()) +
                " entries for " + std::to_string(need) + " draws; sampling with replacement");
    for (std::size_t k = 0; k < need; ++k) {
      out.push_back(examples.negative_pool[pool[rng.index(pool.size())]]);
    }
  }
  return out;
}

WacModel train_model(const Dataset& dataset, Backend backend, const SamplingConfig& sampling,
                     const TrainConfig& train) {
  sampling.validate();
  train.validate();
  if (dataset.split != Split::Train) {
    throw InvalidInputError("train_model expects the train split, got " +
                            std::string(to_string(dataset.split)));
  }

  WacModel model;
  model.backend = backend;
  model.feature_dim = dataset.feature_dim;
  model.sampling = sampling;
  model.train = train;

  std::set<std::string> vocabulary;
  for (const auto& r : dataset.refexps) vocabulary.insert(r.tokens.begin(), r.tokens.end());

  struct Job {
    std::string word;
    ExampleSet examples;
    std::vector<FeatureVector> negatives;
  };
  std::vector<Job> jobs;
  for (const auto& word : vocabulary) {
    ExampleSet examples = collect_examples(dataset, word);
    if (examples.positives.size() < sampling.min_positives) {
      model.excluded[word] = std::to_string(examples.positives.size()) + " positives";
      continue;
    }
    auto negatives = sample_negatives(examples, sampling, word);
    if (negatives.empty()) {
      model.excluded[word] = "no negative examples";
      continue;
    }
    jobs.push_back({word, std::move(examples), std::move(negatives)});
  }
  if (jobs.empty()) throw InsufficientDataError("vocabulary is empty after filtering");

  std::vector<std::optional<WordClassifier>> trained(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t i) {
    trained[i] = train_classifier(backend, jobs[i].examples.positives, jobs[i].negatives, train);
  });
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    model.classifiers.emplace(jobs[i].word, std::move(*trained[i]));
    model.train_meta[jobs[i].word] = {jobs[i].examples.positives.size(), jobs[i].negatives.size()};
  }
  return model;
}

std::optional<double> word_fitness(const WacModel& model, const std::string& word,
                                   const Entity& entity) {
  auto it = model.classifiers.find(word);
  if (it == model.classifiers.end()) return std::nullopt;
  if (entity.features.size() != model.feature_dim) {
    throw DimensionMismatchError(model.feature_dim, entity.features.size(),
                                 "word_fitness('" + word + "')");
  }
  return predict(it->second, entity.features);
}

// --- persistence ---------------------------------------------------------

namespace {

json classifier_to_json(const WordClassifier& c) {
  return std::visit(
      [](const auto& p) -> json {
        using T = std::decay_t<decltype(p)>;
        json j;
        if constexpr (std::is_same_v<T, LogRegParams>) {
          j["weights"] = p.weights;
          j["bias"] = p.bias;
        } else if constexpr (std::is_same_v<T, MlpParams>) {
          const std::size_t d = p.dim();
          json rows = json::array();
          for (std::size_t k = 0; k < kMlpHidden; ++k) {
            rows.push_back(std::vector<double>(p.w1.begin() + static_cast<long>(k * d),
                                               p.w1.begin() + static_cast<long>((k + 1) * d)));
          }
          j["w1"] = rows;
          j["b1"] = p.b1;
          j["w2"] = p.w2;
          j["b2"] = p.b2;
        } else {
          json nodes = json::array();
          for (const auto& n : p.nodes()) {
            json node{{"n_pos", n.n_pos}, {"n_neg", n.n_neg}};
            if (!n.is_leaf()) {
              node["feature"] = n.feature;
              node["threshold"] = n.threshold;
              node["left"] = n.left;
              node["right"] = n.right;
            }
            nodes.push_back(node);
          }
          j["nodes"] = nodes;
        }
        return j;
      },
      c);
}

WordClassifier classifier_from_json(const json& j, Backend backend) {
  switch (backend) {
    case Backend::LogReg:
      return LogRegParams{j.at("weights").get<std::vector<double>>(), j.at("bias").get<double>()};
    case Backend::Mlp: {
      MlpParams p;
      const auto& rows = j.at("w1");
      if (rows.size() != kMlpHidden) throw InvalidInputError("w1 must have 3 rows");
      for (const auto& row : rows) {
        const auto r = row.get<std::vector<double>>();
        p.w1.insert(p.w1.end(), r.begin(), r.end());
      }
      p.b1 = j.at("b1").get<std::vector<double>>();
      p.w2 = j.at("w2").get<std::vector<double>>();
      p.b2 = j.at("b2").get<double>();
      if (p.b1.size() != kMlpHidden || p.w2.size() != kMlpHidden) {
        throw InvalidInputError("hidden layer width must be 3");
      }
      return p;
    }
    case Backend::Tree: {
      std::vector<DecisionTree::Node> nodes;
      for (const auto& nj : j.at("nodes")) {
        DecisionTree::Node n;
        n.n_pos = nj.at("n_pos").get<std::size_t>();
        n.n_neg = nj.at("n_neg").get<std::size_t>();
        if (nj.contains("feature")) {
          n.feature = nj.at("feature").get<int>();
          n.threshold = nj.at("threshold").get<double>();
          n.left = nj.at("left").get<int>();
          n.right = nj.at("right").get<int>();
        }
        nodes.push_back(n);
      }
      return DecisionTree(std::move(nodes));
    }
  }
  throw InvalidInputError("unknown backend");
}

json stats_to_json(const std::map<std::string, WordStats>& stats) {
  json j = json::object();
  for (const auto& [w, s] : stats) j[w] = {{"positives", s.positives}, {"negatives", s.negatives}};
  return j;
}

std::map<std::string, WordStats> stats_from_json(const json& j) {
  std::map<std::string, WordStats> out;
  for (const auto& [w, s] : j.items()) {
    out[w] = {s.at("positives").get<std::size_t>(), s.at("negatives").get<std::size_t>()};
  }
  return out;
}

void check_classifier_dim(const WordClassifier& c, std::size_t dim, const std::string& word) {
  if (std::holds_alternative<DecisionTree>(c)) {
    if (classifier_dim(c) > dim) throw DimensionMismatchError(dim, classifier_dim(c), word);
  } else if (classifier_dim(c) != dim) {
    throw DimensionMismatchError(dim, classifier_dim(c), "classifier '" + word + "'");
  }
}

}  // namespace

std::string model_to_json(const WacModel& model) {
  json j;
  j["version"] = kModelFormatVersion;
  j["backend"] = std::string(to_string(model.backend));
  j["feature_dim"] = model.feature_dim;
  const auto& t = model.train;
  j["config"] = {
      {"sampling",
       {{"neg_ratio", model.sampling.neg_ratio},
        {"min_positives", model.sampling.min_positives},
        {"seed", model.sampling.seed}}},
      {"train",
       {{"max_epochs", t.max_epochs},
        {"learning_rate", t.adam.learning_rate},
        {"beta1", t.adam.beta1},
        {"beta2", t.adam.beta2},
        {"eps", t.adam.eps},
        {"l2_alpha", t.l2_alpha},
        {"l1_lambda", t.l1_lambda},
        {"tree_max_depth", t.tree_max_depth},
        {"min_leaf", t.min_leaf},
        {"seed", t.seed},
        {"convergence_tol", t.convergence_tol}}}};
  j["classifiers"] = json::object();
  for (const auto& [w, c] : model.classifiers) j["classifiers"][w] = classifier_to_json(c);
  j["relational"] = json::object();
  for (const auto& [w, c] : model.relational) j["relational"][w] = classifier_to_json(c);
  j["train_meta"] = {{"words", stats_to_json(model.train_meta)},
                     {"relational", stats_to_json(model.relational_meta)},
                     {"excluded", model.excluded}};
  return j.dump(1) + "\n";
}

WacModel model_from_json(const std::string& text, const std::string& source) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& ex) {
    throw ParseError(source, 0, ex.what());
  }
  try {
    const int version = j.at("version").get<int>();
    if (version != kModelFormatVersion) {
      throw UnsupportedVersionError(source + ": unsupported model version " +
                                    std::to_string(version) + " (expected " +
                                    std::to_string(kModelFormatVersion) + ")");
    }
    WacModel model;
    model.backend = backend_from_string(j.at("backend").get<std::string>());
    model.feature_dim = j.at("feature_dim").get<std::size_t>();
    const auto& s = j.at("config").at("sampling");
    model.sampling.neg_ratio = s.at("neg_ratio").get<std::size_t>();
    model.sampling.min_positives = s.at("min_positives").get<std::size_t>();
    model.sampling.seed = s.at("seed").get<std::uint64_t>();
    const auto& t = j.at("config").at("train");
    model.train.max_epochs = t.at("max_epochs").get<std::size_t>();
    model.train.adam.learning_rate = t.at("learning_rate").get<double>();
    model.train.adam.beta1 = t.at("beta1").get<double>();
    model.train.adam.beta2 = t.at("beta2").get<double>();
    model.train.adam.eps = t.at("eps").get<double>();
    model.train.l2_alpha = t.at("l2_alpha").get<double>();
    model.train.l1_lambda = t.at("l1_lambda").get<double>();
    model.train.tree_max_depth = t.at("tree_max_depth").get<std::size_t>();
    model.train.min_leaf = t.at("min_leaf").get<std::size_t>();
    model.train.seed = t.at("seed").get<std::uint64_t>();
    model.train.convergence_tol = t.at("convergence_tol").get<double>();
    for (const auto& [w, cj] : j.at("classifiers").items()) {
      auto c = classifier_from_json(cj, model.backend);
      check_classifier_dim(c, model.feature_dim, w);
      model.classifiers.emplace(w, std::move(c));
    }
    for (const auto& [w, cj] : j.at("relational").items()) {
      auto c = classifier_from_json(cj, model.backend);
      check_classifier_dim(c, model.feature_dim, w);
      model.relational.emplace(w, std::move(c));
    }
    const auto& meta = j.at("train_meta");
    model.train_meta = stats_from_json(meta.at("words"));
    model.relational_meta = stats_from_json(meta.at("relational"));
    model.excluded = meta.at("excluded").get<std::map<std::string, std::string>>();
    return model;
  } catch (const json::exception& ex) {
    throw ParseError(source, 0, ex.what());
  } catch (const ConfigError& ex) {
    throw ParseError(source, 0, ex.what());
  } catch (const InvalidInputError& ex) {
    throw ParseError(source, 0, ex.what());
  }
}

void save_model(const WacModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << model_to_json(model);
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

WacModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return model_from_json(buf.str(), path.string());
}

}  // namespace wac
