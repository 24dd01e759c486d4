#include "wac/composition.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "wac/error.hpp"
#include "wac/parallel.hpp"
#include "wac/rng.hpp"

namespace wac {

std::optional<Backend> required_backend(Composition composition) {
  switch (composition) {
    case Composition::SummedPredictions: return std::nullopt;
    case Composition::MlpAdjNounExtended:
    case Composition::MlpAdjNounWarmStart:
    case Composition::MlpExtended: return Backend::Mlp;
    case Composition::TreeGraft: return Backend::Tree;
  }
  return std::nullopt;
}

void check_strategy(const Strategy& strategy, Backend backend) {
  const auto required = required_backend(strategy.composition);
  if (required && *required != backend) {
    throw BackendMismatchError("composition requires the " + std::string(to_string(*required)) +
                               " backend, model uses " + std::string(to_string(backend)));
  }
}

const std::vector<std::string>& strategy_names() {
  static const std::vector<std::string> names{
      "logreg-summed", "mlp-summed", "mlp-adjnoun-extended", "mlp-adjnoun-warmstart",
      "mlp-extended",  "tree-summed", "tree-graft",          "relational"};
  return names;
}

Composition default_relational_np(Backend backend) {
  return backend == Backend::Mlp ? Composition::MlpExtended : Composition::SummedPredictions;
}

NamedStrategy strategy_from_name(std::string_view name, Backend model_backend) {
  NamedStrategy out;
  out.name = std::string(name);
  if (name == "logreg-summed") {
    out = {out.name, Strategy::simple(Composition::SummedPredictions), Backend::LogReg};
  } else if (name == "mlp-summed") {
    out = {out.name, Strategy::simple(Composition::SummedPredictions), Backend::Mlp};
  } else if (name == "mlp-adjnoun-extended") {
    out = {out.name, Strategy::simple(Composition::MlpAdjNounExtended), Backend::Mlp};
  } else if (name == "mlp-adjnoun-warmstart") {
    out = {out.name, Strategy::simple(Composition::MlpAdjNounWarmStart), Backend::Mlp};
  } else if (name == "mlp-extended") {
    out = {out.name, Strategy::simple(Composition::MlpExtended), Backend::Mlp};
  } else if (name == "tree-summed") {
    out = {out.name, Strategy::simple(Composition::SummedPredictions), Backend::Tree};
  } else if (name == "tree-graft") {
    out = {out.name, Strategy::simple(Composition::TreeGraft), Backend::Tree};
  } else if (name == "relational") {
    out = {out.name, Strategy::relational_over(default_relational_np(model_backend)),
           std::nullopt};
  } else {
    throw ConfigError("unknown strategy '" + std::string(name) + "'");
  }
  if (out.backend && *out.backend != model_backend) {
    throw BackendMismatchError("strategy '" + out.name + "' requires the " +
                               std::string(to_string(*out.backend)) + " backend, got " +
                               std::string(to_string(model_backend)));
  }
  return out;
}

// --- scores ---------------------------------------------------------------

ObjectScores ObjectScores::zeros(const Scene& scene) {
  ObjectScores s;
  for (const auto& e : scene.entities) s.object_ids.push_back(e.object_id);
  s.scores.assign(scene.entities.size(), 0.0);
  return s;
}

ObjectScores ObjectScores::uniform(const Scene& scene) {
  ObjectScores s = zeros(scene);
  if (!s.scores.empty()) {
    std::fill(s.scores.begin(), s.scores.end(), 1.0 / static_cast<double>(s.scores.size()));
  }
  s.normalized = true;
  return s;
}

double ObjectScores::at(std::string_view object_id) const {
  for (std::size_t i = 0; i < object_ids.size(); ++i) {
    if (object_ids[i] == object_id) return scores[i];
  }
  throw InvalidInputError("no score for object '" + std::string(object_id) + "'");
}

std::size_t ObjectScores::argmax() const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

ObjectScores normalize(ObjectScores s) {
  const double total = std::accumulate(s.scores.begin(), s.scores.end(), 0.0);
  const double denom = std::max(total, 1e-12);
  for (auto& v : s.scores) v /= denom;
  s.normalized = true;
  return s;
}

// --- apply-then-compose ---------------------------------------------------

ObjectScores compose_summed(const WacModel& model, std::span<const std::string> content_words,
                            const Scene& scene) {
  ObjectScores s = ObjectScores::zeros(scene);
  bool any = false;
  for (const auto& w : content_words) {
    if (!model.contains(w)) continue;
    any = true;
    for (std::size_t i = 0; i < scene.entities.size(); ++i) {
      s.scores[i] += *word_fitness(model, w, scene.entities[i]);
    }
  }
  return any ? s : ObjectScores::uniform(scene);
}

IncrementalState IncrementalState::start(const WacModel& model, const Scene& scene) {
  return {&model, &scene, ObjectScores::zeros(scene)};
}

IncrementalState& incremental_update(IncrementalState& state, const std::string& word) {
  if (!state.model->contains(word)) return state;
  for (std::size_t i = 0; i < state.scene->entities.size(); ++i) {
    state.scores.scores[i] += *word_fitness(*state.model, word, state.scene->entities[i]);
  }
  return state;
}

// --- merged MLPs ------------------------------------------------------------

double MergedMlp::logit(std::span<const double> x) const {
  double total = 0.0;
  for (const auto& b : blocks) total += b.logit(x);
  return total / static_cast<double>(blocks.size());
}

double MergedMlp::predict(std::span<const double> x) const { return sigmoid(logit(x)); }

MergedMlp merge_mlps(std::span<const MlpParams> mlps) {
  if (mlps.empty()) throw InvalidInputError("merge_mlps needs at least one MLP");
  const std::size_t d = mlps.front().dim();
  for (const auto& m : mlps) {
    if (m.dim() != d) throw DimensionMismatchError(d, m.dim(), "merge_mlps");
  }
  return MergedMlp{std::vector<MlpParams>(mlps.begin(), mlps.end())};
}

namespace {

const MlpParams* mlp_of(const WacModel& model, const std::string& word) {
  auto it = model.classifiers.find(word);
  if (it == model.classifiers.end()) return nullptr;
  return std::get_if<MlpParams>(&it->second);
}

void add_merged(ObjectScores& s, const Scene& scene, const MergedMlp& merged) {
  for (std::size_t i = 0; i < scene.entities.size(); ++i) {
    s.scores[i] += merged.predict(scene.entities[i].features);
  }
}

// Shared body of the two adj-noun compositions. `pair_classifier` returns the
// contribution of one pair, or nullopt when neither word is known.
template <typename PairScore>
ObjectScores compose_adj_noun(const WacModel& model, const NounPhrase& np, const Scene& scene,
                              PairScore&& pair_score) {
  model.require_backend(Backend::Mlp, "adj-noun composition");
  ObjectScores s = ObjectScores::zeros(scene);
  bool any = false;
  std::set<std::string> paired;
  for (const auto& [adj, noun] : np.adj_noun_pairs) {
    paired.insert(adj);
    paired.insert(noun);
    any |= pair_score(adj, noun, s);
  }
  for (const auto& w : np.tokens) {
    if (paired.contains(w) || !model.contains(w)) continue;
    any = true;
    for (std::size_t i = 0; i < scene.entities.size(); ++i) {
      s.scores[i] += *word_fitness(model, w, scene.entities[i]);
    }
  }
  return any ? s : ObjectScores::uniform(scene);
}

}  // namespace

ObjectScores compose_adj_noun_extended(const WacModel& model, const NounPhrase& np,
                                       const Scene& scene) {
  return compose_adj_noun(model, np, scene,
                          [&](const std::string& adj, const std::string& noun, ObjectScores& s) {
                            std::vector<MlpParams> blocks;
                            for (const auto* w : {&adj, &noun}) {
                              if (const MlpParams* m = mlp_of(model, *w)) blocks.push_back(*m);
                            }
                            if (blocks.empty()) return false;
                            add_merged(s, scene, merge_mlps(blocks));
                            return true;
                          });
}

MlpParams warm_start_pair(const WacModel& model, const std::string& adj, const std::string& noun,
                          const Dataset& dataset, const TrainConfig& train_config) {
  model.require_backend(Backend::Mlp, "warm-start");
  const auto& noun_params = std::get<MlpParams>(model.classifier(noun));
  model.classifier(adj);
  const ExampleSet examples = collect_examples(dataset, adj);
  const auto negatives = sample_negatives(examples, model.sampling, adj);
  if (train_config.max_epochs == 0) return noun_params;
  return continue_mlp(noun_params, examples.positives, negatives, train_config);
}

const MlpParams& WarmStartCache::get(const WacModel& model, const std::string& adj,
                                     const std::string& noun) {
  std::lock_guard lock(mutex_);
  auto key = std::make_pair(adj, noun);
  auto it = cache_.find(key);
  if (it == cache_.end()) {
    it = cache_.emplace(key, warm_start_pair(model, adj, noun, *dataset_, train_config_)).first;
  }
  return it->second;
}

ObjectScores compose_adj_noun_warmstart(const WacModel& model, const NounPhrase& np,
                                        const Scene& scene, WarmStartCache& cache) {
  return compose_adj_noun(
      model, np, scene, [&](const std::string& adj, const std::string& noun, ObjectScores& s) {
        const bool has_adj = model.contains(adj);
        const bool has_noun = model.contains(noun);
        if (!has_adj && !has_noun) return false;
        if (has_adj && has_noun) {
          const WordClassifier pair = cache.get(model, adj, noun);
          for (std::size_t i = 0; i < scene.entities.size(); ++i) {
            s.scores[i] += predict(pair, scene.entities[i].features);
          }
        } else {
          const std::string& known = has_adj ? adj : noun;
          for (std::size_t i = 0; i < scene.entities.size(); ++i) {
            s.scores[i] += *word_fitness(model, known, scene.entities[i]);
          }
        }
        return true;
      });
}

ObjectScores compose_mlp_extended(const WacModel& model, std::span<const std::string> words,
                                  const Scene& scene) {
  model.require_backend(Backend::Mlp, "mlp-extended composition");
  std::vector<MlpParams> blocks;
  for (const auto& w : words) {
    if (const MlpParams* m = mlp_of(model, w)) blocks.push_back(*m);
  }
  if (blocks.empty()) return ObjectScores::uniform(scene);
  ObjectScores s = ObjectScores::zeros(scene);
  add_merged(s, scene, merge_mlps(blocks));
  return s;
}

// --- tree grafting ------------------------------------------------------------

std::vector<int> graft_points(const DecisionTree& tree) {
  std::vector<int> leaves;
  const auto& nodes = tree.nodes();
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].is_leaf()) leaves.push_back(static_cast<int>(i));
  }
  auto prob = [&](int i) { return nodes[static_cast<std::size_t>(i)].probability(); };
  std::stable_sort(leaves.begin(), leaves.end(), [&](int a, int b) { return prob(a) > prob(b); });
  std::vector<int> out;
  for (int leaf : leaves) {
    if (out.size() == 2 || prob(leaf) < 0.5) break;
    out.push_back(leaf);
  }
  if (out.empty()) out.push_back(leaves.front());
  return out;
}

DecisionTree graft_trees(std::span<const DecisionTree> trees) {
  if (trees.empty()) throw InvalidInputError("graft_trees needs at least one tree");
  DecisionTree composite = trees.back();
  for (std::size_t i = trees.size() - 1; i-- > 0;) {
    composite = trees[i].graft(graft_points(trees[i]), composite);
  }
  return composite;
}

ObjectScores compose_tree_graft(const WacModel& model, std::span<const std::string> words,
                                const Scene& scene) {
  model.require_backend(Backend::Tree, "tree grafting");
  std::vector<DecisionTree> trees;
  for (const auto& w : words) {
    auto it = model.classifiers.find(w);
    if (it != model.classifiers.end()) trees.push_back(std::get<DecisionTree>(it->second));
  }
  if (trees.empty()) return ObjectScores::uniform(scene);
  const DecisionTree composite = graft_trees(trees);
  ObjectScores s = ObjectScores::zeros(scene);
  for (std::size_t i = 0; i < scene.entities.size(); ++i) {
    s.scores[i] = composite.predict(scene.entities[i].features);
  }
  return s;
}

// --- resolver -------------------------------------------------------------

Resolver::Resolver(const WacModel& model, Lexicons lexicons, const Dataset* train_data)
    : model_(&model), lexicons_(std::move(lexicons)), train_data_(train_data) {
  if (train_data_) warm_cache_.emplace(*train_data_, model.train);
}

ObjectScores Resolver::compose_np(const NounPhrase& np, const Scene& scene,
                                  Composition composition) {
  switch (composition) {
    case Composition::SummedPredictions: return compose_summed(*model_, np.tokens, scene);
    case Composition::MlpAdjNounExtended: return compose_adj_noun_extended(*model_, np, scene);
    case Composition::MlpAdjNounWarmStart:
      if (!warm_cache_) {
        throw InvalidInputError("warm-start composition needs the training dataset");
      }
      return compose_adj_noun_warmstart(*model_, np, scene, *warm_cache_);
    case Composition::MlpExtended: return compose_mlp_extended(*model_, np.tokens, scene);
    case Composition::TreeGraft: return compose_tree_graft(*model_, np.tokens, scene);
  }
  throw InvalidInputError("unknown composition");
}

ObjectScores Resolver::compose_expression(const ParsedExpression& parsed, const Scene& scene,
                                          Composition composition) {
  NounPhrase whole{parsed.content_tokens(), {}};
  for (const auto& seg : parsed.segments) {
    if (const auto* np = std::get_if<NounPhrase>(&seg)) {
      whole.adj_noun_pairs.insert(whole.adj_noun_pairs.end(), np->adj_noun_pairs.begin(),
                                  np->adj_noun_pairs.end());
    }
  }
  return compose_np(whole, scene, composition);
}

ObjectScores Resolver::resolve_relational(const ParsedExpression& parsed, const Scene& scene,
                                          Composition np_composition) {
  const auto relation = parsed.relation();
  if (!relation || !model_->relational.contains(*relation)) {
    return compose_expression(parsed, scene, np_composition);
  }
  if (scene.entities.size() < 2) return compose_np(parsed.head(), scene, np_composition);

  const WordClassifier& rel = model_->relational.at(*relation);
  const Tokens landmark_tokens = parsed.landmark_tokens();
  const NounPhrase landmark{landmark_tokens, extract_adj_noun_pairs(landmark_tokens, lexicons_)};
  const ObjectScores p1 = normalize(compose_np(parsed.head(), scene, np_composition));
  const ObjectScores p2 = normalize(compose_np(landmark, scene, np_composition));

  const std::size_t n = scene.entities.size();
  const std::size_t d = model_->feature_dim;
  ObjectScores out = ObjectScores::zeros(scene);
  std::vector<double> diff(d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& xi = scene.entities[i].features;
    double best = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const auto& xj = scene.entities[j].features;
      for (std::size_t k = 0; k < d; ++k) diff[k] = xi[k] - xj[k];
      best = std::max(best, p1.scores[i] * predict(rel, diff) * p2.scores[j]);
    }
    out.scores[i] = best;
  }
  return out;
}

Resolution Resolver::resolve(std::span<const std::string> tokens, const Scene& scene,
                             const Strategy& strategy) {
  check_strategy(strategy, model_->backend);
  if (scene.entities.empty()) throw InvalidInputError("cannot resolve in an empty scene");
  const ParsedExpression parsed = parse(tokens, lexicons_);
  ObjectScores scores = strategy.relational
                            ? resolve_relational(parsed, scene, strategy.composition)
                            : compose_expression(parsed, scene, strategy.composition);
  const std::size_t best = scores.argmax();
  return Resolution{scores.object_ids[best], best, std::move(scores)};
}

Resolution resolve(const WacModel& model, const Lexicons& lexicons,
                   std::span<const std::string> tokens, const Scene& scene,
                   const Strategy& strategy) {
  Resolver resolver(model, lexicons);
  return resolver.resolve(tokens, scene, strategy);
}

// --- relational training --------------------------------------------------

namespace {

bool contains_phrase(const std::vector<std::string>& tokens, const std::vector<std::string>& phrase) {
  return std::search(tokens.begin(), tokens.end(), phrase.begin(), phrase.end()) != tokens.end();
}

FeatureVector difference(const FeatureVector& a, const FeatureVector& b) {
  FeatureVector d(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) d[k] = a[k] - b[k];
  return d;
}

}  // namespace

RelationalTraining train_relational(Resolver& resolver, const Dataset& dataset,
                                    Composition np_composition, const SamplingConfig& sampling,
                                    const TrainConfig& train_config) {
  sampling.validate();
  train_config.validate();
  const WacModel& model = resolver.model();
  if (auto req = required_backend(np_composition)) model.require_backend(*req, "relational NP");

  std::map<std::string, std::vector<FeatureVector>> positives;
  for (const auto& r : dataset.refexps) {
    const ParsedExpression parsed = parse(r.tokens, resolver.lexicons());
    const auto relation = parsed.relation();
    if (!relation) continue;
    const Scene& scene = dataset.scene(r.scene_id);
    const std::size_t target = *scene.index_of(r.target_object_id);
    const Tokens landmark_tokens = parsed.landmark_tokens();
    const NounPhrase landmark{landmark_tokens,
                              extract_adj_noun_pairs(landmark_tokens, resolver.lexicons())};
    const ObjectScores p2 = resolver.compose_np(landmark, scene, np_composition);
    std::optional<std::size_t> r2;
    for (std::size_t j = 0; j < scene.entities.size(); ++j) {
      if (j == target) continue;
      if (!r2 || p2.scores[j] > p2.scores[*r2]) r2 = j;
    }
    positives[*relation].push_back(
        difference(scene.entities[target].features, scene.entities[*r2].features));
  }

  RelationalTraining out;
  struct Job {
    std::string phrase;
    const std::vector<FeatureVector>* positives;
    std::vector<FeatureVector> negatives;
  };
  std::vector<Job> jobs;
  for (const auto& [phrase, pos] : positives) {
    if (pos.size() < sampling.min_positives) {
      out.excluded[phrase] = std::to_string(pos.size()) + " positives";
      continue;
    }
    const auto phrase_tokens = tokenize(phrase);
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < dataset.refexps.size(); ++i) {
      if (!contains_phrase(dataset.refexps[i].tokens, phrase_tokens)) pool.push_back(i);
    }
    if (pool.empty()) {
      out.excluded[phrase] = "no negative examples";
      continue;
    }
    Rng rng(derive_seed(sampling.seed, "relational/" + phrase));
    std::vector<FeatureVector> negatives;
    const std::size_t need = sampling.neg_ratio * pos.size();
    negatives.reserve(need);
    for (std::size_t k = 0; k < need; ++k) {
      const Scene& scene = dataset.scene(dataset.refexps[pool[rng.index(pool.size())]].scene_id);
      const std::size_t n = scene.entities.size();
      const std::size_t i = rng.index(n);
      std::size_t j = rng.index(n - 1);
      if (j >= i) ++j;
      negatives.push_back(difference(scene.entities[i].features, scene.entities[j].features));
    }
    jobs.push_back({phrase, &pos, std::move(negatives)});
  }

  std::vector<std::optional<WordClassifier>> trained(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t i) {
    trained[i] = train_classifier(model.backend, *jobs[i].positives, jobs[i].negatives,
                                  train_config);
  });
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    out.classifiers.emplace(jobs[i].phrase, std::move(*trained[i]));
    out.meta[jobs[i].phrase] = {jobs[i].positives->size(), jobs[i].negatives.size()};
  }
  return out;
}

void add_relational(WacModel& model, const Lexicons& lexicons, const Dataset& dataset,
                    Composition np_composition) {
  RelationalTraining trained;
  {
    Resolver resolver(model, lexicons, &dataset);
    trained = train_relational(resolver, dataset, np_composition, model.sampling, model.train);
  }
  model.relational = std::move(trained.classifiers);
  model.relational_meta = std::move(trained.meta);
  for (auto& [phrase, why] : trained.excluded) model.excluded["relational:" + phrase] = why;
}

}  // namespace wac
