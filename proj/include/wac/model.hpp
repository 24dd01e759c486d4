#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wac/classifiers.hpp"
#include "wac/core_data.hpp"

namespace wac {

inline constexpr int kModelFormatVersion = 1;

struct SamplingConfig {
  std::size_t neg_ratio = 5;
  std::size_t min_positives = 5;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const SamplingConfig&) const = default;
};

struct WordStats {
  std::size_t positives = 0;
  std::size_t negatives = 0;
  bool operator==(const WordStats&) const = default;
};

struct WacModel {
  Backend backend = Backend::LogReg;
  std::size_t feature_dim = 0;
  std::map<std::string, WordClassifier> classifiers;
  // Keyed by relational phrase ("left of"); trained on R1 - R2 feature differences.
  std::map<std::string, WordClassifier> relational;
  std::map<std::string, WordStats> train_meta;
  std::map<std::string, WordStats> relational_meta;
  // Words seen in training but left out, with the reason.
  std::map<std::string, std::string> excluded;
  SamplingConfig sampling;
  TrainConfig train;

  bool contains(const std::string& word) const { return classifiers.contains(word); }
  // Throws OovError.
  const WordClassifier& classifier(const std::string& word) const;
  // Throws BackendMismatchError unless the model uses `required`.
  void require_backend(Backend required, std::string_view operation) const;
  bool operator==(const WacModel&) const = default;
};

// Identifies an entity across a dataset.
struct EntityRef {
  std::string scene_id;
  std::string object_id;
  auto operator<=>(const EntityRef&) const = default;
};

struct ExampleSet {
  std::vector<FeatureVector> positives;
  std::vector<EntityRef> positive_refs;
  std::vector<FeatureVector> negative_pool;
  std::vector<EntityRef> negative_refs;
};

// Positives: targets of expressions containing `word`. Negative pool: targets
// of the other expressions (one entry per expression).
ExampleSet collect_examples(const Dataset& dataset, const std::string& word);

// Draws neg_ratio * |positives| negatives from the pool after removing
// entities that are positives for the same word; with replacement only when
// the filtered pool is too small. Deterministic in (seed, stream).
std::vector<FeatureVector> sample_negatives(const ExampleSet& examples,
                                            const SamplingConfig& sampling,
                                            const std::string& stream);

WacModel train_model(const Dataset& dataset, Backend backend, const SamplingConfig& sampling,
                     const TrainConfig& train);

// Classifier probability that `word` fits `entity`; nullopt for out-of-vocabulary words.
std::optional<double> word_fitness(const WacModel& model, const std::string& word,
                                   const Entity& entity);

void save_model(const WacModel& model, const std::filesystem::path& path);
WacModel load_model(const std::filesystem::path& path);

std::string model_to_json(const WacModel& model);
WacModel model_from_json(const std::string& text, const std::string& source = "<string>");

}  // namespace wac
