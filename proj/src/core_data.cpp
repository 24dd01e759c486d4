#include "wac/core_data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

#include "wac/error.hpp"

namespace wac {

using nlohmann::json;

void validate_bbox(const BBox& b) {
  const bool ok = std::isfinite(b.x1) && std::isfinite(b.y1) && std::isfinite(b.x2) &&
                  std::isfinite(b.y2) && 0.0 <= b.x1 && b.x1 < b.x2 && b.x2 <= 1.0 &&
                  0.0 <= b.y1 && b.y1 < b.y2 && b.y2 <= 1.0;
  if (!ok) {
    throw InvalidInputError("invalid bbox (" + std::to_string(b.x1) + ", " + std::to_string(b.y1) +
                            ", " + std::to_string(b.x2) + ", " + std::to_string(b.y2) + ")");
  }
}

std::array<double, kPositionalFeatureCount> compute_positional_features(const BBox& b) {
  validate_bbox(b);
  const double w = b.x2 - b.x1;
  const double h = b.y2 - b.y1;
  const double dx = b.center_x() - 0.5;
  const double dy = b.center_y() - 0.5;
  return {b.x1, b.y1, b.x2, b.y2, w * h, std::sqrt(dx * dx + dy * dy), (w - h) / (w + h)};
}

Entity make_entity(std::string object_id, FeatureVector raw_features, std::optional<BBox> bbox,
                   std::map<std::string, std::string> attributes) {
  Entity e{std::move(object_id), std::move(raw_features), bbox, std::move(attributes)};
  if (bbox) {
    const auto pos = compute_positional_features(*bbox);
    e.features.insert(e.features.end(), pos.begin(), pos.end());
  }
  return e;
}

const Entity* Scene::find(std::string_view object_id) const {
  for (const auto& e : entities) {
    if (e.object_id == object_id) return &e;
  }
  return nullptr;
}

std::optional<std::size_t> Scene::index_of(std::string_view object_id) const {
  for (std::size_t i = 0; i < entities.size(); ++i) {
    if (entities[i].object_id == object_id) return i;
  }
  return std::nullopt;
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Dev: return "dev";
    case Split::Test: return "test";
  }
  return "train";
}

Split split_from_string(std::string_view name) {
  if (name == "train") return Split::Train;
  if (name == "dev") return Split::Dev;
  if (name == "test") return Split::Test;
  throw InvalidInputError("unknown split '" + std::string(name) + "'");
}

const Scene& Dataset::scene(std::string_view scene_id) const {
  auto it = scenes.find(std::string(scene_id));
  if (it == scenes.end()) {
    throw ReferentialIntegrityError("unknown scene_id '" + std::string(scene_id) + "'");
  }
  return it->second;
}

const Entity& Dataset::target(const RefExpInstance& refexp) const {
  const Entity* e = scene(refexp.scene_id).find(refexp.target_object_id);
  if (!e) {
    throw ReferentialIntegrityError("target '" + refexp.target_object_id + "' not in scene '" +
                                    refexp.scene_id + "'");
  }
  return *e;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else if (std::ispunct(c)) {
      continue;
    } else {
      current.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::string join_tokens(std::span<const std::string> tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out.push_back(' ');
    out += t;
  }
  return out;
}

void validate_dataset(Dataset& dataset) {
  std::optional<std::size_t> dim;
  for (const auto& [id, scene] : dataset.scenes) {
    if (id != scene.scene_id) {
      throw InvalidInputError("scene key '" + id + "' does not match scene_id '" +
                              scene.scene_id + "'");
    }
    if (scene.entities.size() < 2) {
      throw InvalidInputError("scene '" + id + "' has fewer than 2 entities");
    }
    std::set<std::string_view> ids;
    for (const auto& e : scene.entities) {
      if (!ids.insert(e.object_id).second) {
        throw InvalidInputError("duplicate object_id '" + e.object_id + "' in scene '" + id + "'");
      }
      if (e.bbox) validate_bbox(*e.bbox);
      for (double v : e.features) {
        if (!std::isfinite(v)) {
          throw InvalidInputError("non-finite feature in scene '" + id + "'");
        }
      }
      if (!dim) {
        dim = e.features.size();
      } else if (*dim != e.features.size()) {
        throw DimensionMismatchError(*dim, e.features.size(),
                                     "scene '" + id + "' object '" + e.object_id + "'");
      }
    }
  }
  for (const auto& r : dataset.refexps) {
    if (r.tokens.empty()) {
      throw InvalidInputError("empty expression for scene '" + r.scene_id + "'");
    }
    dataset.target(r);
  }
  dataset.feature_dim = dim.value_or(0);
}

std::array<Dataset, 3> split_dataset(const Dataset& dataset, double train_fraction,
                                     double dev_fraction) {
  if (!(train_fraction >= 0 && dev_fraction >= 0 && train_fraction + dev_fraction <= 1.0)) {
    throw InvalidInputError("split fractions must be non-negative and sum to at most 1");
  }
  const auto n = static_cast<double>(dataset.scenes.size());
  const auto n_train = static_cast<std::size_t>(std::llround(n * train_fraction));
  const auto n_dev = std::min(static_cast<std::size_t>(std::llround(n * dev_fraction)),
                              dataset.scenes.size() - n_train);

  std::array<Dataset, 3> parts;
  parts[0].split = Split::Train;
  parts[1].split = Split::Dev;
  parts[2].split = Split::Test;
  std::map<std::string_view, std::size_t> part_of;
  std::size_t k = 0;
  for (const auto& [id, scene] : dataset.scenes) {
    const std::size_t part = k < n_train ? 0 : (k < n_train + n_dev ? 1 : 2);
    parts[part].scenes.emplace(id, scene);
    part_of.emplace(id, part);
    ++k;
  }
  for (const auto& r : dataset.refexps) parts[part_of.at(r.scene_id)].refexps.push_back(r);
  for (auto& p : parts) {
    validate_dataset(p);
    if (p.scenes.empty()) p.feature_dim = dataset.feature_dim;
  }
  return parts;
}

namespace {

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(std::move(line));
  return lines;
}

bool is_blank(std::string_view s) {
  for (unsigned char c : s) {
    if (!std::isspace(c)) return false;
  }
  return true;
}

Entity entity_from_json(const json& j) {
  auto raw = j.at("features").get<std::vector<double>>();
  std::optional<BBox> bbox;
  if (j.contains("bbox") && !j.at("bbox").is_null()) {
    const auto b = j.at("bbox").get<std::vector<double>>();
    if (b.size() != 4) throw InvalidInputError("bbox must have 4 numbers");
    bbox = BBox{b[0], b[1], b[2], b[3]};
  }
  std::map<std::string, std::string> attributes;
  if (j.contains("attributes")) {
    for (const auto& [k, v] : j.at("attributes").items()) {
      attributes[k] = v.is_string() ? v.get<std::string>() : v.dump();
    }
  }
  return make_entity(j.at("object_id").get<std::string>(), std::move(raw), bbox,
                     std::move(attributes));
}

json entity_to_json(const Entity& e) {
  json j;
  j["object_id"] = e.object_id;
  j["features"] = std::vector<double>(e.features.begin(),
                                      e.features.begin() + static_cast<long>(e.raw_dim()));
  if (e.bbox) j["bbox"] = {e.bbox->x1, e.bbox->y1, e.bbox->x2, e.bbox->y2};
  if (!e.attributes.empty()) j["attributes"] = e.attributes;
  return j;
}

Scene scene_from_json_object(const json& j) {
  Scene scene;
  scene.scene_id = j.at("scene_id").get<std::string>();
  for (const auto& ej : j.at("entities")) scene.entities.push_back(entity_from_json(ej));
  return scene;
}

}  // namespace

Scene scene_from_json(const std::string& text, const std::string& source) {
  Scene scene;
  try {
    scene = scene_from_json_object(json::parse(text));
  } catch (const json::exception& ex) {
    throw ParseError(source, 1, ex.what());
  } catch (const InvalidInputError& ex) {
    throw ParseError(source, 1, ex.what());
  }
  if (scene.entities.empty()) throw InvalidInputError(source + ": scene has no entities");
  std::optional<std::size_t> dim;
  for (const auto& e : scene.entities) {
    if (dim && *dim != e.features.size()) {
      throw DimensionMismatchError(*dim, e.features.size(), source + " object '" + e.object_id + "'");
    }
    dim = e.features.size();
  }
  return scene;
}

Dataset load_dataset(const std::filesystem::path& scenes_path,
                     const std::filesystem::path& refexps_path, Split split) {
  Dataset dataset;
  dataset.split = split;

  const auto scene_lines = read_lines(scenes_path);
  for (std::size_t i = 0; i < scene_lines.size(); ++i) {
    if (is_blank(scene_lines[i])) continue;
    try {
      Scene scene = scene_from_json_object(json::parse(scene_lines[i]));
      if (dataset.scenes.contains(scene.scene_id)) {
        throw InvalidInputError("duplicate scene_id '" + scene.scene_id + "'");
      }
      dataset.scenes.emplace(scene.scene_id, std::move(scene));
    } catch (const json::exception& ex) {
      throw ParseError(scenes_path.string(), i + 1, ex.what());
    } catch (const InvalidInputError& ex) {
      throw ParseError(scenes_path.string(), i + 1, ex.what());
    }
  }

  const auto refexp_lines = read_lines(refexps_path);
  for (std::size_t i = 0; i < refexp_lines.size(); ++i) {
    if (is_blank(refexp_lines[i])) continue;
    RefExpInstance r;
    try {
      const json j = json::parse(refexp_lines[i]);
      r.scene_id = j.at("scene_id").get<std::string>();
      r.tokens = tokenize(j.at("expression").get<std::string>());
      r.target_object_id = j.at("target_object_id").get<std::string>();
    } catch (const json::exception& ex) {
      throw ParseError(refexps_path.string(), i + 1, ex.what());
    }
    if (!dataset.scenes.contains(r.scene_id)) {
      throw ReferentialIntegrityError(refexps_path.string() + ":" + std::to_string(i + 1) +
                                      ": unknown scene_id '" + r.scene_id + "'");
    }
    dataset.refexps.push_back(std::move(r));
  }

  validate_dataset(dataset);
  return dataset;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& scenes_path,
                  const std::filesystem::path& refexps_path) {
  std::ofstream scenes_out(scenes_path, std::ios::binary);
  if (!scenes_out) throw IoError("cannot open '" + scenes_path.string() + "' for writing");
  for (const auto& [id, scene] : dataset.scenes) {
    json j;
    j["scene_id"] = id;
    j["entities"] = json::array();
    for (const auto& e : scene.entities) j["entities"].push_back(entity_to_json(e));
    scenes_out << j.dump() << '\n';
  }
  if (!scenes_out) throw IoError("write failed for '" + scenes_path.string() + "'");

  std::ofstream refexps_out(refexps_path, std::ios::binary);
  if (!refexps_out) throw IoError("cannot open '" + refexps_path.string() + "' for writing");
  for (const auto& r : dataset.refexps) {
    json j;
    j["scene_id"] = r.scene_id;
    j["expression"] = join_tokens(r.tokens);
    j["target_object_id"] = r.target_object_id;
    refexps_out << j.dump() << '\n';
  }
  if (!refexps_out) throw IoError("write failed for '" + refexps_path.string() + "'");
}

}  // namespace wac
