#include "support.hpp"

#include <cmath>
#include <sstream>

#include "oracles.hpp"
#include "wac/analysis.hpp"
#include "wac/error.hpp"
#include "wac/log.hpp"

using namespace wac;

namespace {

Matrix from_rows(const std::vector<std::vector<double>>& rows) {
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < m.cols; ++c) m(r, c) = rows[r][c];
  }
  return m;
}

// Two Gaussian blobs in `dim` dimensions, centers 10 apart on every axis.
Matrix two_blobs(std::uint64_t seed, std::size_t per_blob, std::size_t dim) {
  Rng rng(seed);
  Matrix m(2 * per_blob, dim);
  for (std::size_t r = 0; r < m.rows; ++r) {
    const double center = r < per_blob ? 0.0 : 10.0;
    for (std::size_t c = 0; c < dim; ++c) m(r, c) = center + rng.normal();
  }
  return m;
}

double row_perplexity(const Matrix& p, std::size_t i) {
  double h = 0.0;
  for (std::size_t j = 0; j < p.cols; ++j) {
    if (p(i, j) > 0) h -= p(i, j) * std::log(p(i, j));
  }
  return std::exp(h);
}

}  // namespace

TEST_SUITE("similarity") {
  TEST_CASE("cosine examples") {
    const std::vector<double> u{1, 2, 2};
    const std::vector<double> v{2, 1, 2};
    CHECK(cosine(u, v) == doctest::Approx(8.0 / 9.0));
    CHECK(cosine(u, u) == doctest::Approx(1.0));
    const std::vector<double> neg{-1, -2, -2};
    CHECK(cosine(u, neg) == doctest::Approx(-1.0));
    const std::vector<double> zero{0, 0, 0};
    set_warnings_enabled(false);
    CHECK(cosine(u, zero) == 0.0);
    set_warnings_enabled(true);
    const std::vector<double> short_v{1, 2};
    CHECK_THROWS_AS(cosine(u, short_v), DimensionMismatchError);
  }

  TEST_CASE("property: cosine is scale invariant and bounded") {
    Rng rng(21);
    for (int k = 0; k < 500; ++k) {
      const auto u = test::random_vector(rng, 7, -5, 5);
      auto v = test::random_vector(rng, 7, -5, 5);
      const double c = cosine(u, v);
      CHECK(std::abs(c) <= 1.0);
      const double a = rng.uniform(0.01, 100.0);
      for (auto& x : v) x *= a;
      CHECK(cosine(u, v) == doctest::Approx(c).epsilon(1e-12));
    }
  }

  TEST_CASE("spearman hand examples") {
    const std::vector<double> x{1, 2, 3, 4, 5};
    const std::vector<double> up{2, 4, 6, 8, 100};
    const std::vector<double> down{5, 4, 3, 2, 1};
    CHECK(spearman(x, up) == doctest::Approx(1.0));
    CHECK(spearman(x, down) == doctest::Approx(-1.0));
    const std::vector<double> p{1, 2, 3};
    const std::vector<double> q{1, 3, 2};
    CHECK(spearman(p, q) == doctest::Approx(0.5));
    const std::vector<double> tied{10, 20, 20, 30};
    CHECK(average_ranks(tied) == std::vector<double>{1, 2.5, 2.5, 4});
    const std::vector<double> constant{3, 3, 3};
    const std::vector<double> three{1, 2, 3};
    CHECK_THROWS_AS(spearman(three, constant), UndefinedCorrelationError);
    const std::vector<double> one{1};
    CHECK_THROWS_AS(spearman(one, one), UndefinedCorrelationError);
  }

  TEST_CASE("property: spearman matches the naive rank oracle on tied inputs") {
    Rng rng(33);
    for (int k = 0; k < 1000; ++k) {
      const std::size_t n = 2 + rng.index(30);
      std::vector<double> a(n), b(n);
      // Small integer ranges force ties.
      for (auto& v : a) v = static_cast<double>(rng.index(6));
      for (auto& v : b) v = static_cast<double>(rng.index(6));
      CHECK(average_ranks(a) == oracle::naive_ranks(a));
      const auto ra = oracle::naive_ranks(a);
      const auto rb = oracle::naive_ranks(b);
      const bool constant = std::all_of(a.begin(), a.end(), [&](double v) { return v == a[0]; }) ||
                            std::all_of(b.begin(), b.end(), [&](double v) { return v == b[0]; });
      if (constant) {
        CHECK_THROWS_AS(spearman(a, b), UndefinedCorrelationError);
      } else {
        CHECK(spearman(a, b) == doctest::Approx(oracle::naive_spearman(a, b)).epsilon(1e-12));
        CHECK(spearman(a, b) == doctest::Approx(oracle::naive_pearson(ra, rb)).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("eval_similarity over a ten-pair fixture") {
    EmbeddingTable t;
    t.add("red", {1, 0, 0});
    t.add("crimson", {0.9, 0.1, 0});
    t.add("blue", {0, 0, 1});
    t.add("navy", {0, 0.1, 0.9});
    t.add("dog", {0, 1, 0});
    t.add("cat", {0.1, 0.9, 0.1});
    const std::vector<SimilarityPair> pairs{
        {"red", "crimson", 9.5}, {"blue", "navy", 9.0}, {"dog", "cat", 8.0},  {"red", "blue", 3.0},
        {"red", "dog", 1.0},     {"crimson", "navy", 2.5}, {"cat", "navy", 1.5}, {"blue", "dog", 0.5},
        {"red", "zebra", 5.0},   {"unicorn", "cat", 5.0}};
    const std::vector<std::pair<std::string, const EmbeddingTable*>> one{{"toy", &t}};
    const SimilarityReport r = eval_similarity(one, pairs);
    CHECK(r.total_pairs == 10);
    REQUIRE(r.tables.size() == 1);
    CHECK(r.tables[0].coverage == 8);
    CHECK_FALSE(r.combined.has_value());

    std::vector<double> predicted, gold;
    for (const auto& p : pairs) {
      if (!t.contains(p.word_a) || !t.contains(p.word_b)) continue;
      predicted.push_back(cosine(t.vectors.at(p.word_a), t.vectors.at(p.word_b)));
      gold.push_back(p.gold_score);
    }
    CHECK(r.tables[0].rho == doctest::Approx(oracle::naive_spearman(predicted, gold)));

    const std::vector<std::pair<std::string, const EmbeddingTable*>> twice{{"a", &t}, {"b", &t}};
    const SimilarityReport rr = eval_similarity(twice, pairs);
    REQUIRE(rr.combined.has_value());
    CHECK(rr.combined->rho == doctest::Approx(r.tables[0].rho).epsilon(1e-12));
    CHECK(rr.combined->coverage == 8);

    const std::vector<SimilarityPair> none{{"zebra", "unicorn", 1.0}};
    CHECK_THROWS_AS(eval_similarity(one, none), InvalidInputError);
  }

  TEST_CASE("combined table keeps shared words with normalized halves") {
    EmbeddingTable a, b;
    a.add("x", {3, 4});
    a.add("y", {1, 0});
    b.add("x", {0, 0, 2});
    b.add("z", {1, 1, 1});
    const std::vector<const EmbeddingTable*> both{&a, &b};
    const EmbeddingTable c = combine_tables(both);
    CHECK(c.dim == 5);
    CHECK(c.vectors.size() == 1);
    const std::vector<double> want{0.6, 0.8, 0, 0, 1};
    for (std::size_t k = 0; k < 5; ++k) CHECK(c.vectors.at("x")[k] == doctest::Approx(want[k]));
  }

  TEST_CASE("similarity pair files") {
    test::TempDir dir("pairs");
    test::write_file(dir / "p.tsv", "# gold\nRed\tcrimson\t9.5\n\nblue\tnavy\t8\n");
    const auto pairs = load_similarity_pairs(dir / "p.tsv");
    REQUIRE(pairs.size() == 2);
    CHECK(pairs[0].word_a == "red");
    CHECK(pairs[1].gold_score == 8.0);
    test::write_file(dir / "bad.tsv", "red\tcrimson\t9\nblue navy 8\n");
    try {
      load_similarity_pairs(dir / "bad.tsv");
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
    }
    CHECK_THROWS_AS(load_similarity_pairs(dir / "missing.tsv"), IoError);
  }
}

TEST_SUITE("tsne") {
  TEST_CASE("affinity rows reach the target perplexity") {
    const Matrix x = two_blobs(3, 100, 5);
    std::vector<double> residuals;
    const Matrix p = conditional_affinities(x, 30.0, 1e-5, &residuals);
    REQUIRE(residuals.size() == 200);
    for (std::size_t i = 0; i < x.rows; ++i) {
      CHECK(residuals[i] < 1e-4);
      CHECK(std::abs(row_perplexity(p, i) - 30.0) < 1e-4);
      CHECK(p(i, i) == 0.0);
      double s = 0.0;
      for (std::size_t j = 0; j < p.cols; ++j) s += p(i, j);
      CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
  }

  TEST_CASE("invalid perplexity is rejected") {
    const Matrix x = two_blobs(3, 5, 2);
    CHECK_THROWS_AS(conditional_affinities(x, 9.0, 1e-5), InvalidInputError);
    CHECK_THROWS_AS(conditional_affinities(x, 0.0, 1e-5), InvalidInputError);
  }

  TEST_CASE("optimization lowers KL and separates two blobs") {
    const Matrix x = two_blobs(8, 20, 6);
    TsneConfig cfg;
    cfg.perplexity = 10;
    cfg.seed = 4;
    const TsneResult r = tsne(x, cfg);
    CHECK(r.final_kl < r.initial_kl);
    REQUIRE(r.embedding.rows == 40);
    REQUIRE(r.embedding.cols == 2);
    double c[2][2] = {{0, 0}, {0, 0}};
    for (std::size_t i = 0; i < 40; ++i) {
      for (int d = 0; d < 2; ++d) c[i / 20][d] += r.embedding(i, d) / 20.0;
    }
    for (std::size_t i = 0; i < 40; ++i) {
      const double d0 = std::hypot(r.embedding(i, 0) - c[0][0], r.embedding(i, 1) - c[0][1]);
      const double d1 = std::hypot(r.embedding(i, 0) - c[1][0], r.embedding(i, 1) - c[1][1]);
      CHECK((i < 20 ? d0 < d1 : d1 < d0));
    }
    const TsneResult again = tsne(x, cfg);
    CHECK(again.embedding.data == r.embedding.data);
  }

  TEST_CASE("duplicate rows stay finite") {
    Matrix x(12, 3);
    for (std::size_t i = 0; i < 12; ++i) {
      for (std::size_t k = 0; k < 3; ++k) x(i, k) = i < 6 ? 1.0 : 2.0;
    }
    TsneConfig cfg;
    cfg.perplexity = 3;
    cfg.iterations = 200;
    const TsneResult r = tsne(x, cfg);
    for (double v : r.embedding.data) CHECK(std::isfinite(v));
    CHECK(std::isfinite(r.final_kl));
  }
}

TEST_SUITE("dbscan") {
  TEST_CASE("three blobs and isolated points") {
    const auto b = oracle::three_blobs(2);
    Matrix pts(b.truth.size(), 2);
    pts.data = b.xy;
    const auto labels = dbscan(pts, ClusterConfig{1.0, 4});
    CHECK(labels == b.truth);

    Matrix shifted = pts;
    for (std::size_t i = 0; i < shifted.rows; ++i) {
      shifted(i, 0) += 100.0;
      shifted(i, 1) -= 50.0;
    }
    CHECK(dbscan(shifted, ClusterConfig{1.0, 4}) == labels);
  }

  TEST_CASE("property: labels are invariant under translation of random clouds") {
    Rng rng(17);
    for (int trial = 0; trial < 30; ++trial) {
      Matrix pts(40, 2);
      for (auto& v : pts.data) v = rng.uniform(0, 8);
      const ClusterConfig cfg{1.0 + rng.uniform(), 1 + rng.index(4)};
      const auto labels = dbscan(pts, cfg);
      Matrix moved = pts;
      const double dx = rng.uniform(-50, 50), dy = rng.uniform(-50, 50);
      for (std::size_t i = 0; i < moved.rows; ++i) {
        moved(i, 0) += dx;
        moved(i, 1) += dy;
      }
      CHECK(dbscan(moved, cfg) == labels);
      for (int l : labels) CHECK(l >= kNoise);
    }
  }

  TEST_CASE("single point and min_pts edge cases") {
    const Matrix one = from_rows({{0.0, 0.0}});
    CHECK(dbscan(one, ClusterConfig{1.0, 2}) == std::vector<int>{kNoise});
    CHECK(dbscan(one, ClusterConfig{1.0, 1}) == std::vector<int>{0});
    const Matrix far = from_rows({{0, 0}, {5, 5}, {10, 10}});
    CHECK(dbscan(far, ClusterConfig{1.0, 1}) == std::vector<int>{0, 1, 2});
    CHECK_THROWS_AS(dbscan(far, ClusterConfig{0.0, 1}), ConfigError);
  }

  TEST_CASE("standardize centers and scales each column") {
    const Matrix m = from_rows({{1, 10}, {2, 10}, {3, 10}, {6, 10}});
    const Matrix s = standardize(m);
    double mean = 0, sq = 0;
    for (std::size_t r = 0; r < 4; ++r) {
      mean += s(r, 0);
      sq += s(r, 0) * s(r, 0);
      CHECK(s(r, 1) == 0.0);
    }
    CHECK(mean == doctest::Approx(0.0));
    CHECK(sq / 4.0 == doctest::Approx(1.0));
  }
}

TEST_SUITE("probe and embeddings") {
  TEST_CASE("zero MLP probes flat at one half and the sweep has N samples") {
    WacModel m;
    m.backend = Backend::Mlp;
    const FeatureLayout layout{4};
    m.feature_dim = layout.total_dim();
    m.classifiers["red"] = MlpParams::zeros(m.feature_dim);
    HueSweep sweep;
    sweep.layout = layout;
    sweep.samples = 13;
    const auto curve = probe_classifier(m, "red", sweep);
    REQUIRE(curve.size() == 13);
    CHECK(curve.front().first == 0.0);
    CHECK(curve.back().first == 360.0);
    CHECK(curve[1].first == 30.0);
    for (const auto& [_, p] : curve) CHECK(p == 0.5);
    CHECK_THROWS_AS(probe_classifier(m, "blue", sweep), OovError);

    std::ostringstream out;
    write_probe_tsv(curve, out);
    CHECK(out.str().rfind("hue\tprobability\n0\t0.5\n30\t0.5\n", 0) == 0);
  }

  TEST_CASE("trained color classifier peaks inside its band") {
    GenConfig g;
    g.n_scenes = 800;
    g.seed = 7;
    set_warnings_enabled(false);
    const auto parts = split_dataset(generate_dataset(g), 0.8, 0.0);
    SamplingConfig sampling;
    sampling.seed = 7;
    TrainConfig train;
    train.seed = 7;
    const WacModel m = train_model(parts[0], Backend::Mlp, sampling, train);
    set_warnings_enabled(true);
    HueSweep sweep;
    sweep.layout = FeatureLayout{g.prototype_dim};
    sweep.samples = 361;
    for (const auto& color : g.lexicon.colors) {
      if (!m.contains(color.name)) continue;
      const auto curve = probe_classifier(m, color.name, sweep);
      const auto peak = std::max_element(curve.begin(), curve.end(),
                                         [](const auto& a, const auto& b) { return a.second < b.second; });
      double off = std::fmod(std::abs(peak->first - color.hue_center), 360.0);
      off = std::min(off, 360.0 - off);
      CHECK_MESSAGE(off <= g.lexicon.hue_half_width, color.name << " peaks at " << peak->first);
    }
  }

  TEST_CASE("embedding extraction needs an MLP model") {
    WacModel m;
    m.backend = Backend::Mlp;
    m.feature_dim = 4;
    MlpParams p = MlpParams::zeros(4);
    for (std::size_t k = 0; k < p.w1.size(); ++k) p.w1[k] = static_cast<double>(k);
    m.classifiers["red"] = p;
    const auto e = extract_embedding(m, "red");
    CHECK(e.size() == 3 * 4);
    CHECK(e == p.w1);
    CHECK_THROWS_AS(extract_embedding(m, "blue"), OovError);
    const EmbeddingTable t = embedding_table(m);
    CHECK(t.dim == 12);
    CHECK(t.source == EmbeddingSource::WacHidden);
    m.backend = Backend::LogReg;
    m.classifiers["red"] = LogRegParams{std::vector<double>(4, 0.0), 0.0};
    CHECK_THROWS_AS(extract_embedding(m, "red"), BackendMismatchError);
  }

  TEST_CASE("embedding files round trip exactly") {
    test::TempDir dir("emb");
    Rng rng(6);
    EmbeddingTable t;
    for (const char* w : {"red", "blue", "dog"}) t.add(w, test::random_vector(rng, 5, -1, 1));
    t.vectors["red"][0] = 0.1;
    t.vectors["red"][1] = 1e-300;
    save_embeddings(t, dir / "e.txt");
    const EmbeddingTable back = load_external_embeddings(dir / "e.txt");
    CHECK(back.vectors == t.vectors);
    CHECK(back.dim == 5);
  }

  TEST_CASE("embedding file edge cases") {
    test::TempDir dir("emb2");
    test::write_file(dir / "two.txt", "red 1 0\ncrimson 0.9 0.1\n");
    const EmbeddingTable two = load_external_embeddings(dir / "two.txt");
    CHECK(two.vectors.size() == 2);
    CHECK(cosine(two.vectors.at("red"), two.vectors.at("crimson")) ==
          doctest::Approx(0.9 / std::sqrt(0.82)));

    test::write_file(dir / "dup.txt", "red 1 0\nred 0 1\n");
    set_warnings_enabled(false);
    const EmbeddingTable dup = load_external_embeddings(dir / "dup.txt");
    set_warnings_enabled(true);
    CHECK(dup.vectors.at("red") == std::vector<double>{0, 1});

    test::write_file(dir / "ragged.txt", "red 1 0\nblue 1 0 0\n");
    try {
      load_external_embeddings(dir / "ragged.txt");
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
    }
    test::write_file(dir / "nan.txt", "red 1 x\n");
    CHECK_THROWS_AS(load_external_embeddings(dir / "nan.txt"), ParseError);
  }
}
