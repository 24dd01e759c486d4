#include "wac/analysis.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <deque>
#include <fstream>
#include <numeric>
#include <sstream>

#include "wac/error.hpp"
#include "wac/log.hpp"
#include "wac/rng.hpp"

namespace wac {

void EmbeddingTable::add(const std::string& word, std::vector<double> vec) {
  if (vectors.empty() && dim == 0) dim = vec.size();
  if (vec.size() != dim) throw DimensionMismatchError(dim, vec.size(), "embedding '" + word + "'");
  for (double v : vec) {
    if (!std::isfinite(v)) throw InvalidInputError("non-finite value in embedding '" + word + "'");
  }
  vectors[word] = std::move(vec);
}

std::vector<double> extract_embedding(const WacModel& model, const std::string& word) {
  model.require_backend(Backend::Mlp, "coefficient embedding");
  return std::get<MlpParams>(model.classifier(word)).w1;
}

EmbeddingTable embedding_table(const WacModel& model) {
  model.require_backend(Backend::Mlp, "coefficient embedding");
  EmbeddingTable table;
  table.source = EmbeddingSource::WacHidden;
  table.dim = kMlpHidden * model.feature_dim;
  for (const auto& [word, c] : model.classifiers) table.add(word, std::get<MlpParams>(c).w1);
  return table;
}

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw DimensionMismatchError(u.size(), v.size(), "cosine");
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) {
    log_warning("cosine of a zero vector; returning 0");
    return 0.0;
  }
  return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

std::vector<double> average_ranks(std::span<const double> xs) {
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(xs.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
    // Positions i..j (0-based) share rank mean((i+1)..(j+1)).
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw DimensionMismatchError(xs.size(), ys.size(), "correlation");
  if (xs.size() < 2) throw UndefinedCorrelationError("correlation needs at least 2 points");
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw UndefinedCorrelationError("correlation of a constant input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double spearman(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw DimensionMismatchError(xs.size(), ys.size(), "spearman");
  const auto rx = average_ranks(xs);
  const auto ry = average_ranks(ys);
  return pearson(rx, ry);
}

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  for (std::string t; in >> t;) out.push_back(std::move(t));
  return out;
}

bool parse_double(const std::string& s, double& out) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

std::vector<SimilarityPair> load_similarity_pairs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open similarity file '" + path.string() + "'");
  std::vector<SimilarityPair> pairs;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (std::size_t tab; (tab = line.find('\t', start)) != std::string::npos; start = tab + 1) {
      fields.push_back(line.substr(start, tab - start));
    }
    fields.push_back(line.substr(start));
    SimilarityPair p;
    if (fields.size() != 3 || !parse_double(fields[2], p.gold_score)) {
      throw ParseError(path.string(), line_no, "expected word_a<TAB>word_b<TAB>score");
    }
    p.word_a = fields[0];
    p.word_b = fields[1];
    std::transform(p.word_a.begin(), p.word_a.end(), p.word_a.begin(), ::tolower);
    std::transform(p.word_b.begin(), p.word_b.end(), p.word_b.begin(), ::tolower);
    pairs.push_back(std::move(p));
  }
  return pairs;
}

EmbeddingTable combine_tables(std::span<const EmbeddingTable* const> tables) {
  EmbeddingTable out;
  out.source = EmbeddingSource::Combined;
  if (tables.empty()) return out;
  for (const auto& [word, _] : tables.front()->vectors) {
    bool everywhere = true;
    for (const auto* t : tables) everywhere &= t->contains(word);
    if (!everywhere) continue;
    std::vector<double> joined;
    for (const auto* t : tables) {
      const auto& v = t->vectors.at(word);
      double norm = 0.0;
      for (double x : v) norm += x * x;
      norm = std::sqrt(norm);
      for (double x : v) joined.push_back(norm > 0 ? x / norm : 0.0);
    }
    out.add(word, std::move(joined));
  }
  out.dim = 0;
  for (const auto* t : tables) out.dim += t->dim;
  return out;
}

namespace {

SimilarityResult evaluate_table(const std::string& name, const EmbeddingTable& table,
                                std::span<const SimilarityPair> pairs) {
  std::vector<double> predicted, gold;
  for (const auto& p : pairs) {
    if (!table.contains(p.word_a) || !table.contains(p.word_b)) continue;
    predicted.push_back(cosine(table.vectors.at(p.word_a), table.vectors.at(p.word_b)));
    gold.push_back(p.gold_score);
  }
  if (predicted.empty()) throw InvalidInputError("table '" + name + "' covers no similarity pairs");
  return {name, spearman(predicted, gold), predicted.size()};
}

}  // namespace

SimilarityReport eval_similarity(
    std::span<const std::pair<std::string, const EmbeddingTable*>> tables,
    std::span<const SimilarityPair> pairs) {
  if (tables.empty()) throw InvalidInputError("eval_similarity needs at least one table");
  SimilarityReport report;
  report.total_pairs = pairs.size();
  for (const auto& [name, table] : tables) report.tables.push_back(evaluate_table(name, *table, pairs));
  if (tables.size() >= 2) {
    std::vector<const EmbeddingTable*> ptrs;
    for (const auto& t : tables) ptrs.push_back(t.second);
    const EmbeddingTable combined = combine_tables(ptrs);
    report.combined = evaluate_table("combined", combined, pairs);
  }
  return report;
}

// --- t-SNE -------------------------------------------------------------------

namespace {

Matrix squared_distances(const Matrix& x) {
  Matrix d(x.rows, x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) {
    for (std::size_t j = i + 1; j < x.rows; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < x.cols; ++k) {
        const double t = x(i, k) - x(j, k);
        s += t * t;
      }
      d(i, j) = d(j, i) = s;
    }
  }
  return d;
}

double kl_divergence(const Matrix& p, const Matrix& y) {
  const std::size_t n = y.rows;
  double z = 0.0;
  Matrix num(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double dx = y(i, 0) - y(j, 0);
      const double dy = y(i, 1) - y(j, 1);
      num(i, j) = 1.0 / (1.0 + dx * dx + dy * dy);
      z += num(i, j);
    }
  }
  double kl = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j || p(i, j) <= 0) continue;
      const double q = std::max(num(i, j) / z, 1e-300);
      kl += p(i, j) * std::log(p(i, j) / q);
    }
  }
  return kl;
}

}  // namespace

Matrix conditional_affinities(const Matrix& x, double perplexity, double tolerance,
                              std::vector<double>* residuals) {
  const std::size_t n = x.rows;
  if (!(perplexity > 0) || static_cast<double>(n - 1) <= perplexity) {
    throw InvalidInputError("perplexity must lie in (0, n - 1); n = " + std::to_string(n));
  }
  const Matrix dist = squared_distances(x);
  Matrix p(n, n);
  if (residuals) residuals->assign(n, 0.0);
  const double target_entropy = std::log(perplexity);
  for (std::size_t i = 0; i < n; ++i) {
    double d_min = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) d_min = std::min(d_min, dist(i, j));
    }
    double beta = 1.0;
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    double achieved = 0.0;
    for (int iter = 0; iter < 200; ++iter) {
      double sum = 0.0, weighted = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double shifted = dist(i, j) - d_min;
        const double v = std::exp(-beta * shifted);
        p(i, j) = v;
        sum += v;
        weighted += shifted * v;
      }
      // Entropy of the row in nats.
      const double entropy = std::log(sum) + beta * weighted / sum;
      for (std::size_t j = 0; j < n; ++j) {
        if (j != i) p(i, j) /= sum;
      }
      achieved = std::exp(entropy);
      if (std::abs(achieved - perplexity) < tolerance) break;
      if (entropy > target_entropy) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
      } else {
        hi = beta;
        beta = 0.5 * (beta + lo);
      }
    }
    if (residuals) (*residuals)[i] = std::abs(achieved - perplexity);
  }
  return p;
}

TsneResult tsne(const Matrix& x, const TsneConfig& config) {
  for (double v : x.data) {
    if (!std::isfinite(v)) throw InvalidInputError("t-SNE input contains non-finite values");
  }
  const std::size_t n = x.rows;
  TsneResult result;
  const Matrix cond = conditional_affinities(x, config.perplexity, config.perplexity_tolerance,
                                             &result.perplexity_residuals);
  Matrix p(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) p(i, j) = std::max((cond(i, j) + cond(j, i)) / (2.0 * static_cast<double>(n)), 1e-12);
    }
  }

  Rng rng(config.seed);
  Matrix y(n, 2);
  for (auto& v : y.data) v = 1e-4 * rng.normal();
  result.initial_kl = kl_divergence(p, y);

  Matrix update(n, 2), gains(n, 2), grad(n, 2), num(n, n);
  std::fill(gains.data.begin(), gains.data.end(), 1.0);
  for (std::size_t iter = 0; iter < config.iterations; ++iter) {
    const bool early = iter < config.exaggeration_iterations;
    const double exaggeration = early ? config.early_exaggeration : 1.0;
    const double momentum = early ? config.initial_momentum : config.final_momentum;

    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double dx = y(i, 0) - y(j, 0);
        const double dy = y(i, 1) - y(j, 1);
        num(i, j) = num(j, i) = 1.0 / (1.0 + dx * dx + dy * dy);
        z += 2.0 * num(i, j);
      }
    }
    std::fill(grad.data.begin(), grad.data.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const double mult = (exaggeration * p(i, j) - num(i, j) / z) * num(i, j);
        grad(i, 0) += 4.0 * mult * (y(i, 0) - y(j, 0));
        grad(i, 1) += 4.0 * mult * (y(i, 1) - y(j, 1));
      }
    }
    for (std::size_t k = 0; k < y.data.size(); ++k) {
      const bool same_sign = (grad.data[k] > 0) == (update.data[k] > 0);
      gains.data[k] = same_sign ? gains.data[k] * 0.8 : gains.data[k] + 0.2;
      gains.data[k] = std::max(gains.data[k], 0.01);
      update.data[k] = momentum * update.data[k] - config.learning_rate * gains.data[k] * grad.data[k];
      y.data[k] += update.data[k];
    }
    for (std::size_t c = 0; c < 2; ++c) {
      double mean = 0.0;
      for (std::size_t i = 0; i < n; ++i) mean += y(i, c);
      mean /= static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) y(i, c) -= mean;
    }
  }
  result.final_kl = kl_divergence(p, y);
  result.embedding = std::move(y);
  return result;
}

// --- clustering -------------------------------------------------------------

void ClusterConfig::validate() const {
  if (!(eps > 0) || min_pts < 1) throw ConfigError("dbscan needs eps > 0 and min_pts >= 1");
}

std::vector<int> dbscan(const Matrix& points, const ClusterConfig& config) {
  config.validate();
  const std::size_t n = points.rows;
  for (double v : points.data) {
    if (!std::isfinite(v)) throw InvalidInputError("dbscan input contains non-finite values");
  }
  const double eps2 = config.eps * config.eps;
  auto region = [&](std::size_t i) {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < points.cols; ++k) {
        const double t = points(i, k) - points(j, k);
        s += t * t;
      }
      if (s <= eps2) out.push_back(j);
    }
    return out;
  };

  constexpr int kUnvisited = -2;
  std::vector<int> labels(n, kUnvisited);
  int cluster = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] != kUnvisited) continue;
    const auto neighbors = region(i);
    if (neighbors.size() < config.min_pts) {
      labels[i] = kNoise;
      continue;
    }
    labels[i] = cluster;
    std::deque<std::size_t> seeds(neighbors.begin(), neighbors.end());
    while (!seeds.empty()) {
      const std::size_t q = seeds.front();
      seeds.pop_front();
      if (labels[q] == kNoise) labels[q] = cluster;
      if (labels[q] != kUnvisited) continue;
      labels[q] = cluster;
      const auto qn = region(q);
      if (qn.size() >= config.min_pts) seeds.insert(seeds.end(), qn.begin(), qn.end());
    }
    ++cluster;
  }
  return labels;
}

Matrix standardize(const Matrix& points) {
  Matrix out = points;
  for (std::size_t c = 0; c < out.cols; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < out.rows; ++r) mean += out(r, c);
    mean /= static_cast<double>(out.rows);
    double sq = 0.0;
    for (std::size_t r = 0; r < out.rows; ++r) {
      out(r, c) -= mean;
      sq += out(r, c) * out(r, c);
    }
    const double rms = std::sqrt(sq / static_cast<double>(out.rows));
    if (rms > 0) {
      for (std::size_t r = 0; r < out.rows; ++r) out(r, c) /= rms;
    }
  }
  return out;
}

// --- probing ----------------------------------------------------------------

FeatureVector HueSweep::features_at(double hue) const {
  std::vector<double> raw(layout.prototype_dim, 0.0);
  const auto rgb = hue_to_rgb(hue);
  raw.insert(raw.end(), rgb.begin(), rgb.end());
  raw.push_back(size_value);
  return make_entity("probe", std::move(raw), box).features;
}

std::vector<std::pair<double, double>> probe_classifier(const WacModel& model,
                                                        const std::string& word,
                                                        const HueSweep& sweep) {
  const WordClassifier& c = model.classifier(word);
  std::vector<std::pair<double, double>> curve;
  curve.reserve(sweep.samples);
  for (std::size_t k = 0; k < sweep.samples; ++k) {
    const double t = sweep.samples > 1 ? static_cast<double>(k) / static_cast<double>(sweep.samples - 1) : 0.0;
    const double hue = sweep.hue_start + t * (sweep.hue_end - sweep.hue_start);
    curve.emplace_back(hue, predict(c, sweep.features_at(hue)));
  }
  return curve;
}

void write_probe_tsv(const std::vector<std::pair<double, double>>& curve, std::ostream& out) {
  out << "hue\tprobability\n";
  for (const auto& [hue, p] : curve) out << format_double(hue) << '\t' << format_double(p) << '\n';
}

// --- embedding files ----------------------------------------------------------

EmbeddingTable load_external_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open embedding file '" + path.string() + "'");
  EmbeddingTable table;
  table.source = EmbeddingSource::External;
  std::optional<std::size_t> dim;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    const auto fields = split_ws(line);
    if (fields.empty()) continue;
    if (!dim) dim = fields.size() - 1;
    if (fields.size() - 1 != *dim || *dim == 0) {
      throw ParseError(path.string(), line_no,
                       "expected " + std::to_string(*dim) + " values, got " +
                           std::to_string(fields.size() - 1));
    }
    std::vector<double> vec(*dim);
    for (std::size_t k = 0; k < *dim; ++k) {
      if (!parse_double(fields[k + 1], vec[k])) {
        throw ParseError(path.string(), line_no, "bad number '" + fields[k + 1] + "'");
      }
    }
    if (table.contains(fields[0])) {
      log_warning(path.string() + ":" + std::to_string(line_no) + ": duplicate word '" +
                  fields[0] + "', keeping the last occurrence");
    }
    table.dim = *dim;
    table.add(fields[0], std::move(vec));
  }
  return table;
}

void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  for (const auto& [word, vec] : table.vectors) {
    out << word;
    for (double v : vec) out << ' ' << format_double(v);
    out << '\n';
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace wac
