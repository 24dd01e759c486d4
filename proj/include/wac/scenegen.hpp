#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "wac/core_data.hpp"
#include "wac/parser.hpp"
#include "wac/rng.hpp"

namespace wac {

struct ColorTerm {
  std::string name;
  double hue_center = 0.0;  // degrees
};

struct SizeTerm {
  std::string name;
  double scalar = 0.0;      // feature value
  double box_fraction = 0;  // box side as a fraction of the grid cell
};

struct GenLexicon {
  std::vector<std::string> nouns;
  std::vector<ColorTerm> colors;
  std::vector<SizeTerm> sizes;
  std::vector<std::string> relations;  // subset of {left of, right of, above, below, next to}
  double hue_half_width = 10.0;        // each color occupies hue_center +- this

  static GenLexicon defaults();
};

struct GenConfig {
  std::size_t n_scenes = 100;
  std::size_t objects_per_scene = 8;
  std::size_t expressions_per_scene = 1;
  double noise_sigma = 0.05;
  std::uint64_t seed = 1;
  GenLexicon lexicon = GenLexicon::defaults();
  double relation_fraction = 0.3;
  std::size_t prototype_dim = 32;
  std::size_t grid_size = 5;
  double next_to_threshold = 0.25;
  std::size_t max_retries = 100;

  // Throws ConfigError when an invariant does not hold.
  void validate() const;
};

// Where each attribute lives inside a generated raw feature vector.
struct FeatureLayout {
  std::size_t prototype_dim = 32;

  std::size_t rgb_offset() const { return prototype_dim; }
  std::size_t size_index() const { return prototype_dim + 3; }
  std::size_t raw_dim() const { return prototype_dim + 4; }
  std::size_t total_dim() const { return raw_dim() + kPositionalFeatureCount; }
};

// Cosine color wheel: channel c is 0.5 + 0.5 cos(hue - 120c), hue in degrees.
// Smooth in hue, so a classifier's preferred hue is not pinned to the corners
// of the piecewise-linear HSV wheel.
std::array<double, 3> hue_to_rgb(double hue_degrees);

// Fixed unit-norm prototype per noun, seeded by (seed, noun).
std::vector<double> category_prototype(std::uint64_t seed, const std::string& noun,
                                       std::size_t dim);

// Geometry predicate on box centers (y grows downwards). Horizontal relations
// require |dx| >= |dy|, vertical ones |dy| >= |dx|.
bool relation_holds(const std::string& relation, const BBox& target, const BBox& landmark,
                    double next_to_threshold);

Dataset generate_dataset(const GenConfig& config);

// Produces a discriminating expression for `target`, or nullopt when none
// exists under the request (the caller resamples the scene). When
// `want_relation` is false the relational template is still used as a
// fallback if attributes alone cannot discriminate and relation_fraction > 0.
std::optional<std::vector<std::string>> render_expression(const Entity& target, const Scene& scene,
                                                          const GenConfig& config,
                                                          bool want_relation, Rng& rng);

// Lexicons matching a generator lexicon (adjectives = colors + sizes).
Lexicons lexicons_for(const GenLexicon& lexicon);

// Ground-truth resolver: reads the template back and matches entity
// attributes and true geometry exhaustively. Returns every consistent
// candidate in scene order.
std::vector<std::string> oracle_candidates(const Scene& scene, const std::vector<std::string>& tokens,
                                           const GenLexicon& lexicon, double next_to_threshold);

}  // namespace wac
