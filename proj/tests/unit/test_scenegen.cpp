#include "support.hpp"

#include <set>

#include "wac/error.hpp"
#include "wac/scenegen.hpp"

using namespace wac;

namespace {

bool is_relational(const std::vector<std::string>& tokens) {
  static const std::set<std::string> markers{"left", "right", "above", "below", "next"};
  for (const auto& t : tokens) {
    if (markers.contains(t)) return true;
  }
  return false;
}

std::size_t relational_count(const Dataset& d) {
  std::size_t n = 0;
  for (const auto& r : d.refexps) n += is_relational(r.tokens);
  return n;
}

}  // namespace

TEST_SUITE("scenegen") {
  TEST_CASE("same config gives identical datasets, different seed differs") {
    GenConfig g;
    g.n_scenes = 50;
    const Dataset a = generate_dataset(g);
    CHECK(a == generate_dataset(g));
    g.seed = 2;
    CHECK_FALSE(a == generate_dataset(g));
  }

  TEST_CASE("two objects and no relations gives attribute-only expressions") {
    GenConfig g;
    g.n_scenes = 10;
    g.objects_per_scene = 2;
    g.relation_fraction = 0.0;
    const Dataset d = generate_dataset(g);
    CHECK(d.scenes.size() == 10);
    CHECK(d.refexps.size() == 10);
    CHECK(relational_count(d) == 0);
    for (const auto& [_, s] : d.scenes) CHECK(s.entities.size() == 2);
  }

  TEST_CASE("relation_fraction 1 makes every expression relational with one relation phrase") {
    GenConfig g;
    g.n_scenes = 40;
    g.relation_fraction = 1.0;
    const Dataset d = generate_dataset(g);
    for (const auto& r : d.refexps) {
      CHECK(is_relational(r.tokens));
      std::size_t the_count = 0;
      for (const auto& t : r.tokens) the_count += (t == "the");
      CHECK(the_count == 2);
    }
  }

  TEST_CASE("noise-free oracle resolves every expression uniquely to its target") {
    GenConfig g;
    g.n_scenes = 200;
    g.noise_sigma = 0.0;
    const Dataset d = generate_dataset(g);
    for (const auto& r : d.refexps) {
      const auto cands = oracle_candidates(d.scene(r.scene_id), r.tokens, g.lexicon, g.next_to_threshold);
      REQUIRE(cands.size() == 1);
      CHECK(cands.front() == r.target_object_id);
    }
  }

  TEST_CASE("property: oracle uniqueness holds across seeds and noise") {
    for (std::uint64_t seed = 10; seed < 15; ++seed) {
      GenConfig g;
      g.n_scenes = 30;
      g.seed = seed;
      g.noise_sigma = 0.2;
      g.expressions_per_scene = 3;
      const Dataset d = generate_dataset(g);
      CHECK(d.refexps.size() == 90);
      for (const auto& r : d.refexps) {
        const auto cands =
            oracle_candidates(d.scene(r.scene_id), r.tokens, g.lexicon, g.next_to_threshold);
        CHECK(cands == std::vector<std::string>{r.target_object_id});
      }
    }
  }

  TEST_CASE("generated features have the documented layout") {
    GenConfig g;
    g.n_scenes = 5;
    g.noise_sigma = 0.0;
    const Dataset d = generate_dataset(g);
    const FeatureLayout layout{g.prototype_dim};
    CHECK(d.feature_dim == layout.total_dim());
    for (const auto& [_, s] : d.scenes) {
      for (const auto& e : s.entities) {
        REQUIRE(e.bbox.has_value());
        const auto proto = category_prototype(g.seed, e.attributes.at("category"), g.prototype_dim);
        for (std::size_t k = 0; k < g.prototype_dim; ++k) CHECK(e.features[k] == proto[k]);
        const double size = e.features[layout.size_index()];
        CHECK(size == (e.attributes.at("size") == "large" ? 1.0 : 0.0));
      }
    }
  }

  TEST_CASE("hue_to_rgb is a smooth wheel") {
    const auto close = [](std::array<double, 3> a, std::array<double, 3> b) {
      for (int i = 0; i < 3; ++i)
        if (std::abs(a[i] - b[i]) > 1e-12) return false;
      return true;
    };
    CHECK(close(hue_to_rgb(0), {1, 0.25, 0.25}));
    CHECK(close(hue_to_rgb(120), {0.25, 1, 0.25}));
    CHECK(close(hue_to_rgb(240), {0.25, 0.25, 1}));
    CHECK(close(hue_to_rgb(60), {0.75, 0.75, 0}));
    CHECK(close(hue_to_rgb(360), hue_to_rgb(0)));
    CHECK(close(hue_to_rgb(-60), hue_to_rgb(300)));
    Rng rng(4);
    for (int i = 0; i < 200; ++i) {
      const double h = rng.uniform(0, 360);
      const auto c = hue_to_rgb(h);
      // Constant brightness and a fixed distance from the gray axis.
      CHECK(c[0] + c[1] + c[2] == doctest::Approx(1.5));
      double r2 = 0;
      for (double v : c) r2 += (v - 0.5) * (v - 0.5);
      CHECK(r2 == doctest::Approx(0.375));
    }
  }

  TEST_CASE("relation geometry on box centers") {
    const BBox left{0.0, 0.4, 0.2, 0.6};
    const BBox right{0.8, 0.4, 1.0, 0.6};
    const BBox top{0.4, 0.0, 0.6, 0.2};
    CHECK(relation_holds("left of", left, right, 0.25));
    CHECK_FALSE(relation_holds("left of", right, left, 0.25));
    CHECK(relation_holds("right of", right, left, 0.25));
    // |dx| == |dy| satisfies both the horizontal and the vertical reading.
    CHECK(relation_holds("above", top, left, 0.25));
    CHECK(relation_holds("right of", top, left, 0.25));
    CHECK(relation_holds("above", top, BBox{0.4, 0.8, 0.6, 1.0}, 0.25));
    CHECK(relation_holds("below", BBox{0.4, 0.8, 0.6, 1.0}, top, 0.25));
    CHECK(relation_holds("next to", left, BBox{0.2, 0.4, 0.4, 0.6}, 0.25));
    CHECK_FALSE(relation_holds("next to", left, right, 0.25));
    CHECK_THROWS_AS(relation_holds("near", left, right, 0.25), InvalidInputError);
  }

  TEST_CASE("identical attributes force a relational expression") {
    GenConfig g;
    g.relation_fraction = 0.5;
    Scene s;
    s.scene_id = "x";
    const std::map<std::string, std::string> same{{"category", "dog"}, {"color", "red"}, {"size", "small"}};
    s.entities.push_back(make_entity("a", {0.0}, BBox{0.0, 0.4, 0.2, 0.6}, same));
    s.entities.push_back(make_entity("b", {0.0}, BBox{0.8, 0.4, 1.0, 0.6}, same));
    s.entities.push_back(
        make_entity("c", {0.0}, BBox{0.4, 0.4, 0.6, 0.6}, {{"category", "cat"}, {"color", "blue"}, {"size", "large"}}));
    Rng rng(3);
    const auto tokens = render_expression(s.entities[0], s, g, false, rng);
    REQUIRE(tokens.has_value());
    CHECK(is_relational(*tokens));
    CHECK(oracle_candidates(s, *tokens, g.lexicon, g.next_to_threshold) == std::vector<std::string>{"a"});

    g.relation_fraction = 0.0;
    CHECK_FALSE(render_expression(s.entities[0], s, g, false, rng).has_value());
  }

  TEST_CASE("invalid configs are rejected") {
    GenConfig g;
    g.objects_per_scene = 1;
    CHECK_THROWS_AS(generate_dataset(g), ConfigError);
    g = GenConfig{};
    g.relation_fraction = 1.5;
    CHECK_THROWS_AS(g.validate(), ConfigError);
    g = GenConfig{};
    g.objects_per_scene = 30;
    CHECK_THROWS_AS(g.validate(), ConfigError);
    g = GenConfig{};
    g.expressions_per_scene = 0;
    CHECK_THROWS_AS(g.validate(), ConfigError);
  }

  TEST_CASE("impossible scenes exhaust retries") {
    GenConfig g;
    g.n_scenes = 3;
    g.lexicon.nouns = {"dog"};
    g.lexicon.colors = {{"red", 0.0}};
    g.lexicon.sizes = {{"small", 0.0, 0.45}};
    g.relation_fraction = 0.0;
    g.max_retries = 4;
    CHECK_THROWS_AS(generate_dataset(g), GenerationFailureError);
  }

  TEST_CASE("generator lexicons feed the parser") {
    const Lexicons lex = lexicons_for(GenLexicon::defaults());
    CHECK(lex.adjectives.contains("purple"));
    CHECK(lex.adjectives.contains("large"));
    CHECK(lex.nouns.contains("bike"));
  }
}
