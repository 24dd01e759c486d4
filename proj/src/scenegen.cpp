#include "wac/scenegen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "wac/error.hpp"

namespace wac {

GenLexicon GenLexicon::defaults() {
  GenLexicon lex;
  lex.nouns = {"dog", "cat", "horse", "cow", "sheep", "car", "truck", "bus", "van", "bike"};
  lex.colors = {{"red", 0.0},    {"orange", 45.0}, {"yellow", 90.0}, {"green", 135.0},
                {"cyan", 180.0}, {"blue", 225.0},  {"purple", 270.0}, {"pink", 315.0}};
  lex.sizes = {{"small", 0.0, 0.45}, {"large", 1.0, 0.8}};
  lex.relations = {"left of", "right of", "above", "below", "next to"};
  lex.hue_half_width = 8.0;
  return lex;
}

void GenConfig::validate() const {
  if (objects_per_scene < 2) throw ConfigError("objects_per_scene must be >= 2");
  if (!(relation_fraction >= 0.0 && relation_fraction <= 1.0)) {
    throw ConfigError("relation_fraction must lie in [0, 1]");
  }
  if (!(noise_sigma >= 0.0)) throw ConfigError("noise_sigma must be >= 0");
  if (lexicon.nouns.empty() || lexicon.colors.empty() || lexicon.sizes.empty()) {
    throw ConfigError("lexicon needs at least one noun, color and size");
  }
  if (grid_size * grid_size < objects_per_scene) {
    throw ConfigError("grid_size^2 must be >= objects_per_scene");
  }
  if (prototype_dim == 0) throw ConfigError("prototype_dim must be > 0");
  if (expressions_per_scene == 0 || expressions_per_scene > objects_per_scene) {
    throw ConfigError("expressions_per_scene must lie in [1, objects_per_scene]");
  }
  for (const auto& rel : lexicon.relations) {
    if (rel != "left of" && rel != "right of" && rel != "above" && rel != "below" &&
        rel != "next to") {
      throw ConfigError("unsupported generator relation '" + rel + "'");
    }
  }
}

std::array<double, 3> hue_to_rgb(double hue) {
  constexpr double kDeg = 3.14159265358979323846 / 180.0;
  return {0.5 + 0.5 * std::cos(hue * kDeg), 0.5 + 0.5 * std::cos((hue - 120.0) * kDeg),
          0.5 + 0.5 * std::cos((hue - 240.0) * kDeg)};
}

std::vector<double> category_prototype(std::uint64_t seed, const std::string& noun,
                                       std::size_t dim) {
  Rng rng(derive_seed(seed, "prototype/" + noun));
  std::vector<double> v(dim);
  double norm = 0.0;
  for (auto& x : v) {
    x = rng.normal();
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (auto& x : v) x /= norm;
  return v;
}

bool relation_holds(const std::string& relation, const BBox& target, const BBox& landmark,
                    double next_to_threshold) {
  const double dx = target.center_x() - landmark.center_x();
  const double dy = target.center_y() - landmark.center_y();
  const bool horizontal = std::abs(dx) >= std::abs(dy);
  const bool vertical = std::abs(dy) >= std::abs(dx);
  if (relation == "left of") return dx < 0 && horizontal;
  if (relation == "right of") return dx > 0 && horizontal;
  if (relation == "above") return dy < 0 && vertical;
  if (relation == "below") return dy > 0 && vertical;
  if (relation == "next to") return std::hypot(dx, dy) < next_to_threshold;
  throw InvalidInputError("unknown relation '" + relation + "'");
}

namespace {

// Attribute description of one noun phrase; empty optionals are unmentioned.
struct Description {
  std::string noun;
  std::optional<std::string> color;
  std::optional<std::string> size;
};

const std::string& attr(const Entity& e, const char* key) {
  static const std::string empty;
  auto it = e.attributes.find(key);
  return it == e.attributes.end() ? empty : it->second;
}

bool matches(const Entity& e, const Description& d) {
  if (attr(e, "category") != d.noun) return false;
  if (d.color && attr(e, "color") != *d.color) return false;
  if (d.size && attr(e, "size") != *d.size) return false;
  return true;
}

std::vector<Description> descriptions_of(const Entity& e) {
  const auto& noun = attr(e, "category");
  const auto& color = attr(e, "color");
  const auto& size = attr(e, "size");
  return {{noun, std::nullopt, std::nullopt},
          {noun, color, std::nullopt},
          {noun, std::nullopt, size},
          {noun, color, size}};
}

std::size_t count_matches(const Scene& scene, const Description& d) {
  return static_cast<std::size_t>(std::count_if(
      scene.entities.begin(), scene.entities.end(), [&](const Entity& e) { return matches(e, d); }));
}

void emit(std::vector<std::string>& out, const Description& d) {
  out.push_back("the");
  if (d.size) out.push_back(*d.size);
  if (d.color) out.push_back(*d.color);
  out.push_back(d.noun);
}

std::vector<std::string> relational_candidates(const Scene& scene, const Description& np1,
                                               const std::string& relation,
                                               const Description& np2, double threshold) {
  std::vector<std::string> out;
  for (const auto& o : scene.entities) {
    if (!matches(o, np1) || !o.bbox) continue;
    for (const auto& l : scene.entities) {
      if (&l == &o || !l.bbox || !matches(l, np2)) continue;
      if (relation_holds(relation, *o.bbox, *l.bbox, threshold)) {
        out.push_back(o.object_id);
        break;
      }
    }
  }
  return out;
}

std::optional<std::vector<std::string>> render_relational(const Entity& target,
                                                          const Scene& scene,
                                                          const GenConfig& config, Rng& rng) {
  struct Option {
    Description np1;
    std::string relation;
    Description np2;
  };
  std::vector<Option> preferred;  // head NP alone is ambiguous
  std::vector<Option> fallback;
  if (!target.bbox) return std::nullopt;
  for (const auto& landmark : scene.entities) {
    if (&landmark == &target || !landmark.bbox) continue;
    for (const auto& relation : config.lexicon.relations) {
      if (!relation_holds(relation, *target.bbox, *landmark.bbox, config.next_to_threshold)) {
        continue;
      }
      for (const auto& np2 : descriptions_of(landmark)) {
        if (count_matches(scene, np2) != 1) continue;
        for (const auto& np1 : descriptions_of(target)) {
          const auto cands =
              relational_candidates(scene, np1, relation, np2, config.next_to_threshold);
          if (cands.size() != 1 || cands.front() != target.object_id) continue;
          (count_matches(scene, np1) > 1 ? preferred : fallback)
              .push_back(Option{np1, relation, np2});
        }
      }
    }
  }
  const auto& pool = preferred.empty() ? fallback : preferred;
  if (pool.empty()) return std::nullopt;
  const Option& pick = pool[rng.index(pool.size())];
  std::vector<std::string> tokens;
  emit(tokens, pick.np1);
  for (auto& t : tokenize(pick.relation)) tokens.push_back(std::move(t));
  emit(tokens, pick.np2);
  return tokens;
}

}  // namespace

std::optional<std::vector<std::string>> render_expression(const Entity& target, const Scene& scene,
                                                          const GenConfig& config,
                                                          bool want_relation, Rng& rng) {
  if (!scene.find(target.object_id)) {
    throw InvalidInputError("target '" + target.object_id + "' is not in scene '" +
                            scene.scene_id + "'");
  }
  if (want_relation) return render_relational(target, scene, config, rng);

  std::vector<Description> unique;
  for (const auto& d : descriptions_of(target)) {
    if (count_matches(scene, d) == 1) unique.push_back(d);
  }
  if (unique.empty()) {
    if (config.relation_fraction > 0.0) return render_relational(target, scene, config, rng);
    return std::nullopt;
  }
  std::vector<std::string> tokens;
  emit(tokens, unique[rng.index(unique.size())]);
  return tokens;
}

namespace {

Scene sample_scene(const GenConfig& config, const std::string& scene_id,
                   const std::vector<std::vector<double>>& prototypes, Rng& rng) {
  const auto& lex = config.lexicon;
  const double cell = 1.0 / static_cast<double>(config.grid_size);
  std::vector<std::size_t> cells(config.grid_size * config.grid_size);
  std::iota(cells.begin(), cells.end(), 0);
  rng.shuffle(cells);

  Scene scene;
  scene.scene_id = scene_id;
  for (std::size_t k = 0; k < config.objects_per_scene; ++k) {
    const std::size_t noun_idx = rng.index(lex.nouns.size());
    const ColorTerm& color = lex.colors[rng.index(lex.colors.size())];
    const SizeTerm& size = lex.sizes[rng.index(lex.sizes.size())];
    const double hue = color.hue_center + rng.uniform(-lex.hue_half_width, lex.hue_half_width);
    const auto rgb = hue_to_rgb(hue);

    std::vector<double> raw = prototypes[noun_idx];
    raw.insert(raw.end(), rgb.begin(), rgb.end());
    raw.push_back(size.scalar);
    if (config.noise_sigma > 0.0) {
      for (auto& v : raw) v += config.noise_sigma * rng.normal();
    }

    const std::size_t row = cells[k] / config.grid_size;
    const std::size_t col = cells[k] % config.grid_size;
    const double half = 0.5 * size.box_fraction * cell;
    const double slack = std::max(0.0, 0.5 * cell - half);
    const double cx = (static_cast<double>(col) + 0.5) * cell + rng.uniform(-slack, slack) * 0.5;
    const double cy = (static_cast<double>(row) + 0.5) * cell + rng.uniform(-slack, slack) * 0.5;
    const BBox box{std::clamp(cx - half, 0.0, 1.0), std::clamp(cy - half, 0.0, 1.0),
                   std::clamp(cx + half, 0.0, 1.0), std::clamp(cy + half, 0.0, 1.0)};

    std::map<std::string, std::string> attributes{{"category", lex.nouns[noun_idx]},
                                                  {"color", color.name},
                                                  {"size", size.name},
                                                  {"grid_row", std::to_string(row)},
                                                  {"grid_col", std::to_string(col)}};
    scene.entities.push_back(
        make_entity("o" + std::to_string(k), std::move(raw), box, std::move(attributes)));
  }
  return scene;
}

}  // namespace

Dataset generate_dataset(const GenConfig& config) {
  config.validate();
  std::vector<std::vector<double>> prototypes;
  for (const auto& noun : config.lexicon.nouns) {
    prototypes.push_back(category_prototype(config.seed, noun, config.prototype_dim));
  }

  Dataset dataset;
  dataset.split = Split::Train;
  for (std::size_t s = 0; s < config.n_scenes; ++s) {
    char id_buf[32];
    std::snprintf(id_buf, sizeof id_buf, "s%06zu", s);
    const std::string scene_id = id_buf;
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(s)));

    bool done = false;
    for (std::size_t attempt = 0; attempt < config.max_retries && !done; ++attempt) {
      Scene scene = sample_scene(config, scene_id, prototypes, rng);
      std::vector<std::size_t> order(scene.entities.size());
      std::iota(order.begin(), order.end(), 0);
      rng.shuffle(order);

      std::vector<RefExpInstance> refexps;
      for (std::size_t e = 0; e < config.expressions_per_scene; ++e) {
        const Entity& target = scene.entities[order[e]];
        const bool want_relation = rng.bernoulli(config.relation_fraction);
        auto tokens = render_expression(target, scene, config, want_relation, rng);
        if (!tokens) break;
        refexps.push_back({scene_id, std::move(*tokens), target.object_id});
      }
      if (refexps.size() != config.expressions_per_scene) continue;

      dataset.scenes.emplace(scene_id, std::move(scene));
      for (auto& r : refexps) dataset.refexps.push_back(std::move(r));
      done = true;
    }
    if (!done) {
      throw GenerationFailureError("could not generate an unambiguous expression for scene '" +
                                   scene_id + "' after " + std::to_string(config.max_retries) +
                                   " retries");
    }
  }
  validate_dataset(dataset);
  return dataset;
}

Lexicons lexicons_for(const GenLexicon& lexicon) {
  Lexicons lex = Lexicons::defaults();
  for (const auto& c : lexicon.colors) lex.adjectives.insert(c.name);
  for (const auto& s : lexicon.sizes) lex.adjectives.insert(s.name);
  for (const auto& n : lexicon.nouns) lex.nouns.insert(n);
  return lex;
}

std::vector<std::string> oracle_candidates(const Scene& scene,
                                           const std::vector<std::string>& tokens,
                                           const GenLexicon& lexicon, double next_to_threshold) {
  std::size_t pos = 0;
  auto bad = [&](const std::string& why) {
    return InvalidInputError("oracle cannot read '" + join_tokens(tokens) + "': " + why);
  };
  auto is_in = [](const auto& terms, const std::string& t) {
    return std::any_of(terms.begin(), terms.end(), [&](const auto& x) { return x.name == t; });
  };
  auto read_np = [&]() {
    Description d;
    if (pos < tokens.size() && tokens[pos] == "the") ++pos;
    if (pos < tokens.size() && is_in(lexicon.sizes, tokens[pos])) d.size = tokens[pos++];
    if (pos < tokens.size() && is_in(lexicon.colors, tokens[pos])) d.color = tokens[pos++];
    if (pos >= tokens.size() ||
        std::find(lexicon.nouns.begin(), lexicon.nouns.end(), tokens[pos]) ==
            lexicon.nouns.end()) {
      throw bad("expected a noun");
    }
    d.noun = tokens[pos++];
    return d;
  };

  const Description np1 = read_np();
  if (pos == tokens.size()) {
    std::vector<std::string> out;
    for (const auto& e : scene.entities) {
      if (matches(e, np1)) out.push_back(e.object_id);
    }
    return out;
  }
  std::optional<std::string> relation;
  for (const auto& rel : lexicon.relations) {
    const auto rel_tokens = tokenize(rel);
    if (pos + rel_tokens.size() <= tokens.size() &&
        std::equal(rel_tokens.begin(), rel_tokens.end(), tokens.begin() + static_cast<long>(pos))) {
      relation = rel;
      pos += rel_tokens.size();
      break;
    }
  }
  if (!relation) throw bad("expected a relation");
  const Description np2 = read_np();
  if (pos != tokens.size()) throw bad("trailing tokens");
  return relational_candidates(scene, np1, *relation, np2, next_to_threshold);
}

}  // namespace wac
