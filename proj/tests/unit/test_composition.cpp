#include "support.hpp"

#include <cmath>

#include "oracles.hpp"
#include "wac/composition.hpp"
#include "wac/error.hpp"
#include "wac/log.hpp"
#include "wac/scenegen.hpp"

using namespace wac;

namespace {

struct Fixture {
  GenConfig gen;
  Dataset train;
  Dataset test;
  Lexicons lexicons;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    Fixture out;
    out.gen.n_scenes = 300;
    out.gen.relation_fraction = 0.4;
    const Dataset all = generate_dataset(out.gen);
    auto parts = split_dataset(all, 0.8, 0.0);
    out.train = std::move(parts[0]);
    out.test = std::move(parts[2]);
    out.lexicons = lexicons_for(out.gen.lexicon);
    return out;
  }();
  return f;
}

const WacModel& model_for(Backend backend) {
  static std::map<Backend, WacModel> cache;
  auto it = cache.find(backend);
  if (it != cache.end()) return it->second;
  TrainConfig t;
  t.max_epochs = backend == Backend::Mlp ? 200 : 400;
  set_warnings_enabled(false);
  WacModel m = train_model(fixture().train, backend, SamplingConfig{}, t);
  if (backend == Backend::LogReg) {
    add_relational(m, fixture().lexicons, fixture().train, Composition::SummedPredictions);
  }
  set_warnings_enabled(true);
  return cache.emplace(backend, std::move(m)).first->second;
}

std::vector<std::string> content(const RefExpInstance& r, const Lexicons& lex) {
  return parse(r.tokens, lex).content_tokens();
}

}  // namespace

TEST_SUITE("strategies") {
  TEST_CASE("names map to compositions and backends") {
    CHECK(strategy_from_name("mlp-extended", Backend::Mlp).strategy ==
          Strategy::simple(Composition::MlpExtended));
    CHECK(strategy_from_name("tree-graft", Backend::Tree).backend == Backend::Tree);
    const auto rel = strategy_from_name("relational", Backend::Mlp);
    CHECK(rel.strategy.relational);
    CHECK(rel.strategy.composition == default_relational_np(Backend::Mlp));
    CHECK(strategy_from_name("relational", Backend::Tree).strategy.composition ==
          Composition::SummedPredictions);
    CHECK_THROWS_AS(strategy_from_name("best-guess", Backend::Mlp), ConfigError);
    CHECK(strategy_names().size() == 8);
  }

  TEST_CASE("backend mismatches are rejected") {
    CHECK_THROWS_AS(check_strategy(Strategy::simple(Composition::MlpExtended), Backend::Tree),
                    BackendMismatchError);
    CHECK_THROWS_AS(check_strategy(Strategy::simple(Composition::TreeGraft), Backend::Mlp),
                    BackendMismatchError);
    CHECK_THROWS_AS(check_strategy(Strategy::relational_over(Composition::MlpAdjNounExtended),
                                   Backend::LogReg),
                    BackendMismatchError);
    CHECK_NOTHROW(check_strategy(Strategy::simple(Composition::SummedPredictions), Backend::Tree));
    CHECK_THROWS_AS(strategy_from_name("tree-graft", Backend::Mlp), BackendMismatchError);

    const Scene& s = fixture().test.scenes.begin()->second;
    const std::vector<std::string> words{"red", "dog"};
    CHECK_THROWS_AS(resolve(model_for(Backend::Tree), fixture().lexicons, words, s,
                            Strategy::simple(Composition::MlpExtended)),
                    BackendMismatchError);
  }
}

TEST_SUITE("summed") {
  TEST_CASE("matches the per-object oracle and skips OOV words") {
    const WacModel& m = model_for(Backend::LogReg);
    for (const auto& r : fixture().test.refexps) {
      const Scene& s = fixture().test.scene(r.scene_id);
      const auto words = content(r, fixture().lexicons);
      const auto got = compose_summed(m, words, s);
      const auto want = oracle::summed_scores(m, words, s);
      REQUIRE(got.size() == want.size());
      for (std::size_t i = 0; i < want.size(); ++i) CHECK(got.scores[i] == doctest::Approx(want[i]).epsilon(1e-12));
    }
    const Scene& s = fixture().test.scenes.begin()->second;
    const std::vector<std::string> only_oov{"zebra", "quux"};
    const ObjectScores uniform = compose_summed(m, only_oov, s);
    for (double v : uniform.scores) CHECK(v == uniform.scores.front());
    CHECK(uniform.argmax() == 0);
    const std::vector<std::string> with_oov{"red", "zebra", "dog"};
    const std::vector<std::string> without{"red", "dog"};
    CHECK(compose_summed(m, with_oov, s).scores == compose_summed(m, without, s).scores);
  }

  TEST_CASE("incremental updates agree with batch summation") {
    const WacModel& m = model_for(Backend::LogReg);
    std::size_t checked = 0;
    for (const auto& r : fixture().test.refexps) {
      if (checked == 100) break;
      const Scene& s = fixture().test.scene(r.scene_id);
      const auto words = content(r, fixture().lexicons);
      IncrementalState state = IncrementalState::start(m, s);
      for (const auto& w : words) incremental_update(state, w);
      const auto batch = compose_summed(m, words, s);
      for (std::size_t i = 0; i < batch.size(); ++i) {
        CHECK(std::abs(state.scores.scores[i] - batch.scores[i]) <= 1e-9);
      }
      ++checked;
    }
    CHECK(checked == fixture().test.refexps.size());
  }

  TEST_CASE("normalize sums to one and keeps zero scores finite") {
    const Scene& s = fixture().test.scenes.begin()->second;
    ObjectScores z = normalize(ObjectScores::zeros(s));
    CHECK(z.normalized);
    for (double v : z.scores) CHECK(v == 0.0);
    ObjectScores u = normalize(ObjectScores::uniform(s));
    double total = 0;
    for (double v : u.scores) total += v;
    CHECK(total == doctest::Approx(1.0));
  }

  TEST_CASE("argmax breaks ties by scene order") {
    const Scene& s = fixture().test.scenes.begin()->second;
    ObjectScores u = ObjectScores::uniform(s);
    CHECK(u.argmax() == 0);
    u.scores[3] = 2.0;
    u.scores[5] = 2.0;
    CHECK(u.argmax() == 3);
  }
}

TEST_SUITE("mlp composition") {
  TEST_CASE("merging one network, or k copies of it, changes nothing") {
    Rng rng(4);
    const MlpParams a = mlp_init(6, 11);
    const MlpParams b = mlp_init(6, 12);
    const std::vector<MlpParams> one{a};
    const std::vector<MlpParams> three{a, a, a};
    const std::vector<MlpParams> pair{a, b};
    const MergedMlp m1 = merge_mlps(one);
    const MergedMlp m3 = merge_mlps(three);
    const MergedMlp m2 = merge_mlps(pair);
    const WordClassifier ca = a;
    for (int k = 0; k < 200; ++k) {
      const auto x = test::random_vector(rng, 6, -3, 3);
      CHECK(std::abs(m1.predict(x) - predict(ca, x)) <= 1e-12);
      CHECK(std::abs(m3.predict(x) - predict(ca, x)) <= 1e-12);
      CHECK(std::abs(m2.logit(x) - 0.5 * (a.logit(x) + b.logit(x))) <= 1e-12);
    }
    CHECK_THROWS_AS(merge_mlps(std::vector<MlpParams>{}), InvalidInputError);
    CHECK_THROWS_AS(merge_mlps(std::vector<MlpParams>{a, mlp_init(5, 1)}), DimensionMismatchError);
  }

  TEST_CASE("extended composition of a single word equals that word's classifier") {
    const WacModel& m = model_for(Backend::Mlp);
    const Scene& s = fixture().test.scenes.begin()->second;
    const std::vector<std::string> words{"red"};
    REQUIRE(m.contains("red"));
    const auto ext = compose_mlp_extended(m, words, s);
    const auto sum = compose_summed(m, words, s);
    for (std::size_t i = 0; i < s.entities.size(); ++i) {
      CHECK(std::abs(ext.scores[i] - sum.scores[i]) <= 1e-12);
    }
  }

  TEST_CASE("adj-noun extension with no pairs falls back to summation") {
    const WacModel& m = model_for(Backend::Mlp);
    const Scene& s = fixture().test.scenes.begin()->second;
    const NounPhrase np{{"dog", "large"}, {}};
    const auto got = compose_adj_noun_extended(m, np, s);
    const auto want = compose_summed(m, np.tokens, s);
    for (std::size_t i = 0; i < s.entities.size(); ++i) {
      CHECK(std::abs(got.scores[i] - want.scores[i]) <= 1e-12);
    }
  }

  TEST_CASE("warm start trains a noun network on adjective data and caches it") {
    const WacModel& m = model_for(Backend::Mlp);
    TrainConfig t;
    t.max_epochs = 50;
    set_warnings_enabled(false);
    const MlpParams w = warm_start_pair(m, "red", "dog", fixture().train, t);
    CHECK(w.dim() == m.feature_dim);
    CHECK_FALSE(WordClassifier(w) == m.classifier("dog"));
    CHECK(w == warm_start_pair(m, "red", "dog", fixture().train, t));
    CHECK_THROWS_AS(warm_start_pair(m, "zebra", "dog", fixture().train, t), OovError);

    WarmStartCache cache(fixture().train, t);
    const MlpParams* first = &cache.get(m, "red", "dog");
    CHECK(first == &cache.get(m, "red", "dog"));
    CHECK(*first == w);
    set_warnings_enabled(true);
    CHECK_THROWS_AS(warm_start_pair(model_for(Backend::Tree), "red", "dog", fixture().train, t),
                    BackendMismatchError);
  }
}

TEST_SUITE("tree graft") {
  TEST_CASE("grafting a single tree is the identity and depth stays bounded") {
    const WacModel& m = model_for(Backend::Tree);
    Rng rng(9);
    std::vector<DecisionTree> trees;
    for (const auto& [w, c] : m.classifiers) trees.push_back(std::get<DecisionTree>(c));
    REQUIRE(trees.size() >= 4);
    CHECK(graft_trees(std::span(trees).first(1)) == trees[0]);
    for (std::size_t k = 1; k <= 4; ++k) {
      std::vector<DecisionTree> chain;
      for (std::size_t j = 0; j < k; ++j) chain.push_back(trees[rng.index(trees.size())]);
      const DecisionTree g = graft_trees(chain);
      std::size_t depth_sum = 0;
      for (const auto& t : chain) depth_sum += t.depth();
      CHECK(g.depth() <= depth_sum);
      CHECK(g.depth() <= 2 * k);
      for (int n = 0; n < 50; ++n) {
        const double p = g.predict(test::random_vector(rng, m.feature_dim, -1, 2));
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
      }
    }
    CHECK_THROWS_AS(graft_trees(std::vector<DecisionTree>{}), InvalidInputError);
  }

  TEST_CASE("graft points prefer probable leaves") {
    // root splits on x0 <= 0.5 into leaves with p = 0.9 and p = 0.2.
    const DecisionTree t({DecisionTree::Node{0, 0.5, 1, 2, 10, 10},
                          DecisionTree::Node{-1, 0, -1, -1, 9, 1},
                          DecisionTree::Node{-1, 0, -1, -1, 1, 4}});
    CHECK(graft_points(t) == std::vector<int>{1});
    const DecisionTree all_low({DecisionTree::Node{0, 0.5, 1, 2, 10, 10},
                                DecisionTree::Node{-1, 0, -1, -1, 1, 9},
                                DecisionTree::Node{-1, 0, -1, -1, 2, 3}});
    CHECK(graft_points(all_low) == std::vector<int>{2});
    // x below the split reaches the grafted subtree, above keeps the old leaf.
    const DecisionTree scion = DecisionTree::leaf(1, 3);
    const std::vector<DecisionTree> chain{t, scion};
    const DecisionTree g = graft_trees(chain);
    const std::vector<double> lo{0.0};
    const std::vector<double> hi{1.0};
    CHECK(g.predict(lo) == 0.25);
    CHECK(g.predict(hi) == t.predict(hi));
  }
}

TEST_SUITE("relational") {
  TEST_CASE("trellis argmax matches brute-force enumeration") {
    const WacModel& m = model_for(Backend::LogReg);
    REQUIRE_FALSE(m.relational.empty());
    Resolver resolver(m, fixture().lexicons);
    std::size_t checked = 0;
    for (const auto& r : fixture().test.refexps) {
      const ParsedExpression parsed = parse(r.tokens, fixture().lexicons);
      if (!parsed.relation() || !m.relational.contains(*parsed.relation())) continue;
      const Scene& s = fixture().test.scene(r.scene_id);
      const auto p1 = oracle::summed_scores(m, parsed.head().tokens, s);
      const auto p2 = oracle::summed_scores(m, parsed.landmark_tokens(), s);
      const std::size_t want = oracle::trellis_argmax(p1, p2, m.relational.at(*parsed.relation()), s);
      const Resolution got =
          resolver.resolve(r.tokens, s, Strategy::relational_over(Composition::SummedPredictions));
      CHECK(got.index == want);
      if (++checked == 20) break;
    }
    CHECK(checked == 20);
  }

  TEST_CASE("relational classifiers see feature differences and are deterministic") {
    const WacModel& m = model_for(Backend::LogReg);
    for (const auto& [phrase, c] : m.relational) {
      CHECK(classifier_dim(c) == m.feature_dim);
      CHECK(m.relational_meta.at(phrase).positives >= 5);
    }
    WacModel again = train_model(fixture().train, Backend::LogReg, SamplingConfig{}, [] {
      TrainConfig t;
      t.max_epochs = 400;
      return t;
    }());
    set_warnings_enabled(false);
    add_relational(again, fixture().lexicons, fixture().train, Composition::SummedPredictions);
    set_warnings_enabled(true);
    CHECK(again.relational == m.relational);
  }

  TEST_CASE("expressions without a known relation fall back to the simple composition") {
    const WacModel& m = model_for(Backend::LogReg);
    const Scene& s = fixture().test.scenes.begin()->second;
    const std::vector<std::string> tokens{"the", "red", "dog"};
    const auto rel = resolve(m, fixture().lexicons, tokens, s,
                             Strategy::relational_over(Composition::SummedPredictions));
    const auto simple = resolve(m, fixture().lexicons, tokens, s,
                                Strategy::simple(Composition::SummedPredictions));
    CHECK(rel.scores.scores == simple.scores.scores);
  }

  TEST_CASE("empty scene is rejected") {
    const Scene empty{"e", {}};
    const std::vector<std::string> tokens{"dog"};
    CHECK_THROWS_AS(resolve(model_for(Backend::LogReg), fixture().lexicons, tokens, empty,
                            Strategy::simple(Composition::SummedPredictions)),
                    InvalidInputError);
  }
}
