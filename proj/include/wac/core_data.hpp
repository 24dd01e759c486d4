#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace wac {

using FeatureVector = std::vector<double>;

inline constexpr std::size_t kPositionalFeatureCount = 7;

// Axis-aligned region in relative image coordinates; y grows downwards.
struct BBox {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 1.0;
  double y2 = 1.0;

  double center_x() const { return 0.5 * (x1 + x2); }
  double center_y() const { return 0.5 * (y1 + y2); }
  bool operator==(const BBox&) const = default;
};

// Throws InvalidInputError unless 0 <= x1 < x2 <= 1 and 0 <= y1 < y2 <= 1.
void validate_bbox(const BBox& box);

// [x1, y1, x2, y2, area, distance of center to (0.5, 0.5), orientation], where
// orientation = (w - h) / (w + h).
std::array<double, kPositionalFeatureCount> compute_positional_features(const BBox& box);

struct Entity {
  std::string object_id;
  // Raw features followed by the positional block when `bbox` is set.
  FeatureVector features;
  std::optional<BBox> bbox;
  std::map<std::string, std::string> attributes;

  // Number of leading features that came from the source (no positional block).
  std::size_t raw_dim() const {
    return bbox ? features.size() - kPositionalFeatureCount : features.size();
  }
  bool operator==(const Entity&) const = default;
};

// Builds an entity from raw features, appending positional features when a
// bounding box is given.
Entity make_entity(std::string object_id, FeatureVector raw_features, std::optional<BBox> bbox,
                   std::map<std::string, std::string> attributes = {});

struct Scene {
  std::string scene_id;
  std::vector<Entity> entities;

  const Entity* find(std::string_view object_id) const;
  std::optional<std::size_t> index_of(std::string_view object_id) const;
  bool operator==(const Scene&) const = default;
};

struct RefExpInstance {
  std::string scene_id;
  std::vector<std::string> tokens;
  std::string target_object_id;

  bool operator==(const RefExpInstance&) const = default;
};

enum class Split { Train, Dev, Test };

std::string_view to_string(Split split);
Split split_from_string(std::string_view name);

struct Dataset {
  std::map<std::string, Scene> scenes;
  std::vector<RefExpInstance> refexps;
  Split split = Split::Train;
  std::size_t feature_dim = 0;

  const Scene& scene(std::string_view scene_id) const;
  const Entity& target(const RefExpInstance& refexp) const;
  bool operator==(const Dataset&) const = default;
};

// Lowercases, strips punctuation and splits on whitespace.
std::vector<std::string> tokenize(std::string_view text);
std::string join_tokens(std::span<const std::string> tokens);

// Checks every dataset invariant (scene sizes, unique ids, referential
// integrity, homogeneous feature dimension) and sets feature_dim.
void validate_dataset(Dataset& dataset);

// Partitions scenes (in id order) into train/dev/test blocks of the given
// fractions; each expression follows its scene.
std::array<Dataset, 3> split_dataset(const Dataset& dataset, double train_fraction,
                                     double dev_fraction);

// One scene in the scenes-file line format.
Scene scene_from_json(const std::string& text, const std::string& source = "<scene>");

Dataset load_dataset(const std::filesystem::path& scenes_path,
                     const std::filesystem::path& refexps_path, Split split = Split::Train);

void save_dataset(const Dataset& dataset, const std::filesystem::path& scenes_path,
                  const std::filesystem::path& refexps_path);

}  // namespace wac
