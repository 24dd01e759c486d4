#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wac/model.hpp"
#include "wac/scenegen.hpp"

namespace wac {

enum class EmbeddingSource { WacHidden, External, Combined };

struct EmbeddingTable {
  std::map<std::string, std::vector<double>> vectors;
  std::size_t dim = 0;
  EmbeddingSource source = EmbeddingSource::External;

  bool contains(const std::string& w) const { return vectors.contains(w); }
  // Throws DimensionMismatchError or InvalidInputError on a bad vector.
  void add(const std::string& word, std::vector<double> vec);
};

// Row-major flattening of the hidden-layer weights (biases excluded), length 3 * D.
std::vector<double> extract_embedding(const WacModel& model, const std::string& word);
EmbeddingTable embedding_table(const WacModel& model);

// Cosine similarity; 0 with a warning when either vector is zero.
double cosine(std::span<const double> u, std::span<const double> v);

// Average ranks (1-based) with ties sharing the mean of their positions.
std::vector<double> average_ranks(std::span<const double> xs);
double pearson(std::span<const double> xs, std::span<const double> ys);
// Pearson correlation of average-tie ranks.
double spearman(std::span<const double> xs, std::span<const double> ys);

struct SimilarityPair {
  std::string word_a;
  std::string word_b;
  double gold_score = 0.0;
};

// Tab-separated word_a, word_b, score; '#' lines and blank lines are skipped.
std::vector<SimilarityPair> load_similarity_pairs(const std::filesystem::path& path);

struct SimilarityResult {
  std::string name;
  double rho = 0.0;
  std::size_t coverage = 0;
};

struct SimilarityReport {
  std::vector<SimilarityResult> tables;
  std::optional<SimilarityResult> combined;  // present with two or more tables
  std::size_t total_pairs = 0;
};

// Each table dropping its own OOV pairs; `combined` concatenates the
// L2-normalized vectors of all tables over pairs every table covers.
SimilarityReport eval_similarity(
    std::span<const std::pair<std::string, const EmbeddingTable*>> tables,
    std::span<const SimilarityPair> pairs);

EmbeddingTable combine_tables(std::span<const EmbeddingTable* const> tables);

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // row-major

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
};

struct TsneConfig {
  double perplexity = 30.0;
  std::size_t iterations = 1000;
  double learning_rate = 200.0;
  double early_exaggeration = 12.0;
  std::size_t exaggeration_iterations = 250;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  double perplexity_tolerance = 1e-5;
  std::uint64_t seed = 0;
};

struct TsneResult {
  Matrix embedding;  // n x 2
  double initial_kl = 0.0;
  double final_kl = 0.0;
  // |perplexity achieved - target| per point.
  std::vector<double> perplexity_residuals;
};

// Row-normalized Gaussian affinities calibrated by binary search on the
// precision so each row reaches the target perplexity.
Matrix conditional_affinities(const Matrix& x, double perplexity, double tolerance,
                              std::vector<double>* residuals = nullptr);

// Exact O(n^2) t-SNE to two dimensions.
TsneResult tsne(const Matrix& x, const TsneConfig& config);

struct ClusterConfig {
  double eps = 0.7;
  std::size_t min_pts = 5;

  void validate() const;
};

inline constexpr int kNoise = -1;

// Density-based clustering; cluster ids follow first-visited order.
std::vector<int> dbscan(const Matrix& points, const ClusterConfig& config);

// Centers the points and scales them to unit RMS per coordinate.
Matrix standardize(const Matrix& points);

// Maps hue to a full feature vector for a generated layout: category
// prototype at zero, size at 0.5, box centered.
struct HueSweep {
  FeatureLayout layout;
  double hue_start = 0.0;
  double hue_end = 360.0;
  std::size_t samples = 73;
  double size_value = 0.5;
  BBox box{0.4, 0.4, 0.6, 0.6};

  FeatureVector features_at(double hue) const;
};

std::vector<std::pair<double, double>> probe_classifier(const WacModel& model,
                                                        const std::string& word,
                                                        const HueSweep& sweep);
void write_probe_tsv(const std::vector<std::pair<double, double>>& curve, std::ostream& out);

EmbeddingTable load_external_embeddings(const std::filesystem::path& path);
void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path);

}  // namespace wac
