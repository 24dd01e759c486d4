#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "wac/classifiers.hpp"
#include "wac/core_data.hpp"
#include "wac/model.hpp"
#include "wac/parser.hpp"

namespace wac {

// How word classifiers are combined for one noun phrase or expression.
enum class Composition {
  SummedPredictions,    // apply each word, sum the probabilities
  MlpAdjNounExtended,   // merged adj+noun MLPs, remaining words summed
  MlpAdjNounWarmStart,  // noun MLP warm-started on adjective data, rest summed
  MlpExtended,          // one merged MLP for every word
  TreeGraft,            // one grafted tree for every word
};

struct Strategy {
  Composition composition = Composition::SummedPredictions;
  // Set for the relational trellis; `composition` then scores each NP.
  bool relational = false;

  static Strategy simple(Composition c) { return {c, false}; }
  static Strategy relational_over(Composition np) { return {np, true}; }
  bool operator==(const Strategy&) const = default;
};

// Backend a composition needs, if any.
std::optional<Backend> required_backend(Composition composition);
// Throws BackendMismatchError when the strategy cannot run on `backend`.
void check_strategy(const Strategy& strategy, Backend backend);

// CLI strategy names: logreg-summed, mlp-summed, mlp-adjnoun-extended,
// mlp-adjnoun-warmstart, mlp-extended, tree-summed, tree-graft, relational.
struct NamedStrategy {
  std::string name;
  Strategy strategy;
  std::optional<Backend> backend;  // unset for "relational"
};

NamedStrategy strategy_from_name(std::string_view name, Backend model_backend);
const std::vector<std::string>& strategy_names();
// Relational NP composition used when none is given: merged MLPs on the MLP
// backend, summed predictions otherwise.
Composition default_relational_np(Backend backend);

struct ObjectScores {
  std::vector<std::string> object_ids;
  std::vector<double> scores;
  bool normalized = false;

  static ObjectScores zeros(const Scene& scene);
  static ObjectScores uniform(const Scene& scene);
  std::size_t size() const { return scores.size(); }
  double at(std::string_view object_id) const;
  // First index with the maximal score (scene order breaks ties).
  std::size_t argmax() const;
};

// Divides by the sum (floored at 1e-12) and marks the scores normalized.
ObjectScores normalize(ObjectScores scores);

ObjectScores compose_summed(const WacModel& model, std::span<const std::string> content_words,
                            const Scene& scene);

struct IncrementalState {
  const WacModel* model = nullptr;
  const Scene* scene = nullptr;
  ObjectScores scores;

  static IncrementalState start(const WacModel& model, const Scene& scene);
};

// Adds the word's fitness to every object; OOV words leave the state unchanged.
IncrementalState& incremental_update(IncrementalState& state, const std::string& word);

struct MergedMlp {
  std::vector<MlpParams> blocks;

  double logit(std::span<const double> x) const;
  double predict(std::span<const double> x) const;
};

// Concatenated hidden layers; the output is the sigmoid of the averaged
// constituent logits.
MergedMlp merge_mlps(std::span<const MlpParams> mlps);

ObjectScores compose_adj_noun_extended(const WacModel& model, const NounPhrase& np,
                                       const Scene& scene);

// Noun classifier trained further on the adjective's positives and sampled
// negatives with fresh optimizer moments. Throws OovError for unknown words.
MlpParams warm_start_pair(const WacModel& model, const std::string& adj, const std::string& noun,
                          const Dataset& dataset, const TrainConfig& train_config);

// Thread-safe get-or-train cache of warm-started pairs.
class WarmStartCache {
 public:
  WarmStartCache(const Dataset& dataset, TrainConfig train_config)
      : dataset_(&dataset), train_config_(train_config) {}

  const MlpParams& get(const WacModel& model, const std::string& adj, const std::string& noun);

 private:
  const Dataset* dataset_;
  TrainConfig train_config_;
  std::mutex mutex_;
  std::map<std::pair<std::string, std::string>, MlpParams> cache_;
};

ObjectScores compose_adj_noun_warmstart(const WacModel& model, const NounPhrase& np,
                                        const Scene& scene, WarmStartCache& cache);

ObjectScores compose_mlp_extended(const WacModel& model, std::span<const std::string> words,
                                  const Scene& scene);

// Leaves a word tree offers for grafting: its two most probable leaves with
// probability >= 0.5, one if only one qualifies, else the most probable leaf.
std::vector<int> graft_points(const DecisionTree& tree);

// Tree 1 with its graft points replaced by tree 2 (itself grafted with tree
// 3, ...), in expression order.
DecisionTree graft_trees(std::span<const DecisionTree> trees);

ObjectScores compose_tree_graft(const WacModel& model, std::span<const std::string> words,
                                const Scene& scene);

struct Resolution {
  std::string object_id;
  std::size_t index = 0;
  ObjectScores scores;
};

// Bundles what resolution needs: the model, lexicons and, for warm-start, the
// training data. Resolution calls are safe to run concurrently.
class Resolver {
 public:
  Resolver(const WacModel& model, Lexicons lexicons, const Dataset* train_data = nullptr);

  const WacModel& model() const { return *model_; }
  const Lexicons& lexicons() const { return lexicons_; }

  ObjectScores compose_np(const NounPhrase& np, const Scene& scene, Composition composition);
  // Non-relational composition over a whole parsed expression.
  ObjectScores compose_expression(const ParsedExpression& parsed, const Scene& scene,
                                  Composition composition);
  ObjectScores resolve_relational(const ParsedExpression& parsed, const Scene& scene,
                                  Composition np_composition);
  Resolution resolve(std::span<const std::string> tokens, const Scene& scene,
                     const Strategy& strategy);

 private:
  const WacModel* model_;
  Lexicons lexicons_;
  const Dataset* train_data_;
  std::optional<WarmStartCache> warm_cache_;
};

Resolution resolve(const WacModel& model, const Lexicons& lexicons,
                   std::span<const std::string> tokens, const Scene& scene,
                   const Strategy& strategy);

struct RelationalTraining {
  std::map<std::string, WordClassifier> classifiers;
  std::map<std::string, WordStats> meta;
  std::map<std::string, std::string> excluded;
};

// One classifier per relational phrase over R1 - R2 feature differences,
// where R2 is the best non-target entity for the landmark NP.
RelationalTraining train_relational(Resolver& resolver, const Dataset& dataset,
                                    Composition np_composition, const SamplingConfig& sampling,
                                    const TrainConfig& train_config);

// Trains relational classifiers and stores them in the model.
void add_relational(WacModel& model, const Lexicons& lexicons, const Dataset& dataset,
                    Composition np_composition);

}  // namespace wac
