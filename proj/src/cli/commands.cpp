#include <fstream>
#include <iomanip>
#include <iostream>
#include <iterator>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "wac/cli.hpp"
#include "wac/composition.hpp"
#include "wac/error.hpp"
#include "wac/log.hpp"
#include "wac/parallel.hpp"
#include "wac/parser.hpp"

namespace wac::cli {

namespace fs = std::filesystem;

DataPaths data_paths(const fs::path& dir, Split split) {
  const std::string prefix(to_string(split));
  return {dir / (prefix + ".scenes.jsonl"), dir / (prefix + ".refexps.jsonl")};
}

namespace {

std::string fixed(double v, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

const std::string& require(const std::string& value, std::string_view what) {
  if (value.empty()) throw ConfigError(std::string(what) + " is required");
  return value;
}

Dataset load_split(const RunConfig& config, Split split) {
  const auto paths = data_paths(require(config.data, "data directory (--data)"), split);
  return load_dataset(paths.scenes, paths.refexps, split);
}

Lexicons resolve_lexicons(const RunConfig& config) {
  if (!config.lexicons.empty()) return load_lexicons(config.lexicons);
  if (!config.data.empty()) {
    const fs::path candidate = fs::path(config.data) / "lexicons.txt";
    if (fs::exists(candidate)) return load_lexicons(candidate);
  }
  log_warning("no lexicons given; using the default relational phrases and stopwords only");
  return Lexicons::defaults();
}

WacModel load_model_arg(const RunConfig& config) {
  return load_model(require(config.model, "model path (--model)"));
}

// Writes to --out when given, else to `fallback`.
template <typename Fn>
void emit(const RunConfig& config, std::ostream& fallback, Fn&& write) {
  if (config.out.empty()) {
    write(fallback);
    return;
  }
  std::ofstream file(config.out, std::ios::binary);
  if (!file) throw IoError("cannot open '" + config.out + "' for writing");
  write(file);
  if (!file) throw IoError("write failed for '" + config.out + "'");
}

struct EvalRow {
  std::string name;
  std::size_t correct_simple = 0;
  std::size_t correct_relational = 0;
};

double ratio(std::size_t a, std::size_t b) { return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b); }

}  // namespace

void cmd_gen(const RunConfig& config, std::ostream& out) {
  GenConfig gen = config.gen;
  gen.seed = config.seed;
  const Dataset all = generate_dataset(gen);
  const auto parts = split_dataset(all, config.train_fraction, config.dev_fraction);

  const fs::path dir = config.out.empty() ? fs::path("data") : fs::path(config.out);
  fs::create_directories(dir);
  for (const auto& part : parts) {
    const auto paths = data_paths(dir, part.split);
    save_dataset(part, paths.scenes, paths.refexps);
  }
  const Lexicons lexicons = lexicons_for(gen.lexicon);
  save_lexicons(lexicons, dir / "lexicons.txt");

  std::set<std::string> vocabulary;
  std::size_t relational = 0;
  for (const auto& r : all.refexps) {
    vocabulary.insert(r.tokens.begin(), r.tokens.end());
    if (parse(r.tokens, lexicons).has_relation()) ++relational;
  }
  out << report_header(config, "gen") << '\n';
  out << "directory\t" << dir.string() << '\n';
  for (const auto& part : parts) {
    out << to_string(part.split) << "_scenes\t" << part.scenes.size() << '\n';
    out << to_string(part.split) << "_expressions\t" << part.refexps.size() << '\n';
  }
  out << "vocabulary\t" << vocabulary.size() << '\n';
  out << "relation_fraction\t" << fixed(ratio(relational, all.refexps.size())) << '\n';
}

void cmd_train(const RunConfig& config, std::ostream& out) {
  std::optional<NamedStrategy> strategy;
  if (!config.strategy.empty()) strategy = strategy_from_name(config.strategy, config.backend);
  config.sampling.validate();
  config.train.validate();

  const Dataset train = load_split(config, Split::Train);
  WacModel model = train_model(train, config.backend, config.sampling, config.train);
  if (strategy && strategy->strategy.relational) {
    add_relational(model, resolve_lexicons(config), train, strategy->strategy.composition);
  }
  const std::string path = config.out.empty() ? "model.json" : config.out;
  save_model(model, path);

  out << report_header(config, "train") << '\n';
  out << "model\t" << path << '\n';
  out << "backend\t" << to_string(model.backend) << '\n';
  out << "feature_dim\t" << model.feature_dim << '\n';
  out << "vocabulary\t" << model.classifiers.size() << '\n';
  out << "relational\t" << model.relational.size() << '\n';
  out << "excluded\t" << model.excluded.size() << '\n';
  for (const auto& [word, reason] : model.excluded) out << "excluded_word\t" << word << '\t' << reason << '\n';
}

void cmd_eval(const RunConfig& config, std::ostream& out) {
  const WacModel model = load_model_arg(config);
  const Lexicons lexicons = resolve_lexicons(config);
  const Dataset test = load_split(config, split_from_string(config.split));

  std::vector<NamedStrategy> strategies;
  if (!config.strategy.empty()) {
    strategies.push_back(strategy_from_name(config.strategy, model.backend));
  } else {
    for (const auto& name : strategy_names()) {
      if (name == "relational") {
        if (model.relational.empty()) {
          log_warning("model has no relational classifiers; skipping the relational row");
          continue;
        }
        strategies.push_back(strategy_from_name(name, model.backend));
        continue;
      }
      try {
        strategies.push_back(strategy_from_name(name, model.backend));
      } catch (const BackendMismatchError&) {
      }
    }
  }
  std::optional<Dataset> train;
  for (const auto& s : strategies) {
    if (s.strategy.composition == Composition::MlpAdjNounWarmStart && !train) {
      train = load_split(config, Split::Train);
    }
  }

  const std::size_t n = test.refexps.size();
  std::vector<char> is_relational(n);
  for (std::size_t i = 0; i < n; ++i) is_relational[i] = parse(test.refexps[i].tokens, lexicons).has_relation();
  std::size_t n_relational = 0;
  for (char c : is_relational) n_relational += c != 0;
  const std::size_t n_simple = n - n_relational;

  auto tally = [&](std::string name, const std::vector<char>& correct) {
    EvalRow row{std::move(name)};
    for (std::size_t i = 0; i < n; ++i) {
      if (!correct[i]) continue;
      if (is_relational[i]) ++row.correct_relational;
      else ++row.correct_simple;
    }
    return row;
  };

  std::vector<EvalRow> rows;
  {
    Rng rng(derive_seed(config.seed, "eval/random"));
    std::vector<char> correct(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& r = test.refexps[i];
      const Scene& scene = test.scene(r.scene_id);
      correct[i] = scene.entities[rng.index(scene.entities.size())].object_id == r.target_object_id;
    }
    rows.push_back(tally("random", correct));
  }
  {
    std::vector<char> correct(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& r = test.refexps[i];
      try {
        const auto candidates = oracle_candidates(test.scene(r.scene_id), r.tokens, config.gen.lexicon,
                                                  config.gen.next_to_threshold);
        correct[i] = !candidates.empty() && candidates.front() == r.target_object_id;
      } catch (const InvalidInputError&) {
        correct[i] = 0;
      }
    }
    rows.push_back(tally("attribute-oracle", correct));
  }
  Resolver resolver(model, lexicons, train ? &*train : nullptr);
  for (const auto& s : strategies) {
    std::vector<char> correct(n);
    parallel_for(n, [&](std::size_t i) {
      const auto& r = test.refexps[i];
      correct[i] = resolver.resolve(r.tokens, test.scene(r.scene_id), s.strategy).object_id == r.target_object_id;
    });
    rows.push_back(tally(s.name, correct));
  }

  const std::string header = report_header(config, "eval");
  out << header << '\n';
  out << "model backend " << to_string(model.backend) << ", split " << config.split << ", "
      << n << " expressions (" << n_simple << " simple, " << n_relational << " relational)\n\n";
  out << std::left << std::setw(24) << "strategy" << std::right << std::setw(10) << "overall"
      << std::setw(10) << "simple" << std::setw(12) << "relational" << '\n';
  for (const auto& row : rows) {
    out << std::left << std::setw(24) << row.name << std::right << std::setw(10)
        << fixed(ratio(row.correct_simple + row.correct_relational, n)) << std::setw(10)
        << fixed(ratio(row.correct_simple, n_simple)) << std::setw(12)
        << fixed(ratio(row.correct_relational, n_relational)) << '\n';
  }
  if (!config.out.empty()) {
    emit(config, out, [&](std::ostream& tsv) {
      tsv << header << '\n';
      tsv << "strategy\toverall\tsimple\trelational\tn\tn_simple\tn_relational\n";
      for (const auto& row : rows) {
        tsv << row.name << '\t' << fixed(ratio(row.correct_simple + row.correct_relational, n), 6)
            << '\t' << fixed(ratio(row.correct_simple, n_simple), 6) << '\t'
            << fixed(ratio(row.correct_relational, n_relational), 6) << '\t' << n << '\t' << n_simple
            << '\t' << n_relational << '\n';
      }
    });
  }
}

void cmd_resolve(const RunConfig& config, std::istream& in, std::ostream& out) {
  const WacModel model = load_model_arg(config);
  const Lexicons lexicons = resolve_lexicons(config);
  const std::string name = config.strategy.empty() ? std::string(to_string(model.backend)) + "-summed"
                                                   : config.strategy;
  const NamedStrategy strategy = strategy_from_name(name, model.backend);

  std::string text;
  std::string source = config.scene;
  if (config.scene.empty() || config.scene == "-") {
    source = "<stdin>";
    text.assign(std::istreambuf_iterator<char>(in), {});
  } else {
    std::ifstream file(config.scene);
    if (!file) throw IoError("cannot open scene file '" + config.scene + "'");
    text.assign(std::istreambuf_iterator<char>(file), {});
  }
  const Scene scene = scene_from_json(text, source);
  const auto tokens = tokenize(require(config.expression, "expression (--expression)"));
  if (tokens.empty()) throw InvalidInputError("expression has no tokens");

  std::optional<Dataset> train;
  if (strategy.strategy.composition == Composition::MlpAdjNounWarmStart) train = load_split(config, Split::Train);
  Resolver resolver(model, lexicons, train ? &*train : nullptr);
  const Resolution res = resolver.resolve(tokens, scene, strategy.strategy);

  out << report_header(config, "resolve") << '\n';
  out << "target\t" << res.object_id << '\n';
  for (std::size_t i = 0; i < res.scores.size(); ++i) {
    out << "score\t" << res.scores.object_ids[i] << '\t' << fixed(res.scores.scores[i], 6) << '\n';
  }
}

void cmd_embed(const RunConfig& config, std::ostream& out) {
  const WacModel model = load_model_arg(config);
  const EmbeddingTable table = embedding_table(model);
  const std::string path = config.out.empty() ? "embeddings.txt" : config.out;
  save_embeddings(table, path);
  out << report_header(config, "embed") << '\n';
  out << "embeddings\t" << path << '\n';
  out << "words\t" << table.vectors.size() << '\n';
  out << "dim\t" << table.dim << '\n';
}

void cmd_sim(const RunConfig& config, std::ostream& out) {
  const auto pairs = load_similarity_pairs(require(config.pairs, "similarity pairs (--pairs)"));
  std::vector<EmbeddingTable> owned;
  std::vector<std::string> names;
  if (!config.model.empty()) {
    owned.push_back(embedding_table(load_model(config.model)));
    names.push_back("wac");
  }
  if (!config.external.empty()) {
    owned.push_back(load_external_embeddings(config.external));
    names.push_back("external");
  }
  if (owned.empty()) throw ConfigError("sim needs --model, --external or both");
  std::vector<std::pair<std::string, const EmbeddingTable*>> tables;
  for (std::size_t i = 0; i < owned.size(); ++i) tables.emplace_back(names[i], &owned[i]);

  const SimilarityReport report = eval_similarity(tables, pairs);
  emit(config, out, [&](std::ostream& o) {
    o << report_header(config, "sim") << '\n';
    o << "table\trho\tcoverage\ttotal\n";
    auto row = [&](const SimilarityResult& r) {
      o << r.name << '\t' << fixed(r.rho) << '\t' << r.coverage << '\t' << report.total_pairs << '\n';
    };
    for (const auto& r : report.tables) row(r);
    if (report.combined) row(*report.combined);
  });
}

void cmd_cluster(const RunConfig& config, std::ostream& out) {
  const EmbeddingTable table = embedding_table(load_model_arg(config));
  std::vector<std::string> words;
  Matrix x(table.vectors.size(), table.dim);
  for (const auto& [word, vec] : table.vectors) {
    std::copy(vec.begin(), vec.end(), x.data.begin() + static_cast<long>(words.size() * table.dim));
    words.push_back(word);
  }
  TsneConfig tsne_config = config.tsne;
  tsne_config.seed = config.seed;
  const TsneResult result = tsne(x, tsne_config);
  const std::vector<int> labels = dbscan(standardize(result.embedding), config.cluster);

  std::map<int, std::vector<std::string>> groups;
  for (std::size_t i = 0; i < words.size(); ++i) groups[labels[i]].push_back(words[i]);
  emit(config, out, [&](std::ostream& o) {
    o << report_header(config, "cluster") << '\n';
    o << "words\t" << words.size() << '\n';
    o << "kl\t" << fixed(result.initial_kl) << '\t' << fixed(result.final_kl) << '\n';
    for (const auto& [label, members] : groups) {
      o << (label == kNoise ? std::string("noise") : "cluster " + std::to_string(label)) << ':';
      for (const auto& w : members) o << ' ' << w;
      o << '\n';
    }
    for (std::size_t i = 0; i < words.size(); ++i) {
      o << "point\t" << words[i] << '\t' << labels[i] << '\t' << fixed(result.embedding(i, 0)) << '\t'
        << fixed(result.embedding(i, 1)) << '\n';
    }
  });
}

void cmd_probe(const RunConfig& config, std::ostream& out) {
  const WacModel model = load_model_arg(config);
  const std::size_t fixed_dims = 4 + kPositionalFeatureCount;
  if (model.feature_dim <= fixed_dims) {
    throw DimensionMismatchError(fixed_dims + 1, model.feature_dim, "probe needs a generated feature layout");
  }
  if (config.probe_samples == 0) throw ConfigError("probe.samples must be positive");
  HueSweep sweep;
  sweep.layout.prototype_dim = model.feature_dim - fixed_dims;
  sweep.samples = config.probe_samples;
  sweep.hue_start = config.probe_hue_start;
  sweep.hue_end = config.probe_hue_end;
  const auto curve = probe_classifier(model, require(config.word, "word (--word)"), sweep);
  emit(config, out, [&](std::ostream& o) {
    o << report_header(config, "probe") << '\n';
    write_probe_tsv(curve, o);
  });
}

// --- argument parsing -------------------------------------------------------

int run(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Words-as-classifiers reference resolution toolkit", "wac"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  struct Flags {
    std::string config_file;
    std::vector<std::string> sets;
    std::map<std::string, std::string> values;
  };
  Flags flags;

  const std::map<std::string, std::string> descriptions = {
      {"gen", "generate a synthetic dataset (train/dev/test)"},
      {"train", "train word classifiers"},
      {"eval", "accuracy report on a split"},
      {"resolve", "resolve one expression in one scene"},
      {"embed", "write MLP coefficient embeddings"},
      {"sim", "word-similarity correlation"},
      {"cluster", "t-SNE + DBSCAN clustering of embeddings"},
      {"probe", "classifier response across hues"},
  };
  // Flag name -> config key, per subcommand.
  const std::map<std::string, std::vector<std::pair<std::string, std::string>>> extra = {
      {"gen", {}},
      {"train", {{"--data", "data"}, {"--lexicons", "lexicons"}}},
      {"eval", {{"--data", "data"}, {"--model", "model"}, {"--lexicons", "lexicons"}, {"--split", "split"}}},
      {"resolve",
       {{"--model", "model"}, {"--lexicons", "lexicons"}, {"--data", "data"}, {"--expression", "expression"},
        {"--scene", "scene"}}},
      {"embed", {{"--model", "model"}}},
      {"sim", {{"--model", "model"}, {"--external", "external"}, {"--pairs", "pairs"}}},
      {"cluster", {{"--model", "model"}}},
      {"probe", {{"--model", "model"}, {"--word", "word"}, {"--samples", "probe.samples"}}},
  };
  const std::vector<std::pair<std::string, std::string>> common = {
      {"--seed", "seed"}, {"--backend", "backend"}, {"--strategy", "strategy"}, {"--out", "out"}};

  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, description] : descriptions) {
    CLI::App* sub = app.add_subcommand(name, description);
    sub->add_option("--config", flags.config_file, "key=value config file");
    sub->add_option("--set", flags.sets, "override one config key (key=value)");
    auto add = [&](const std::string& flag, const std::string& key) {
      sub->add_option_function<std::string>(
          flag, [&flags, key](const std::string& v) { flags.values[key] = v; }, "sets " + key);
    };
    for (const auto& [flag, key] : common) add(flag, key);
    for (const auto& [flag, key] : extra.at(name)) add(flag, key);
    subs[name] = sub;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  std::string command;
  for (const auto& [name, sub] : subs) {
    if (sub->parsed()) command = name;
  }

  try {
    RunConfig config;
    if (!flags.config_file.empty()) apply_config_file(config, flags.config_file);
    for (const auto& kv : flags.sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      apply_setting(config, kv.substr(0, eq), kv.substr(eq + 1));
    }
    for (const auto& [key, value] : flags.values) apply_setting(config, key, value);
    config.propagate_seed();

    err << "# resolved config (" << command << ")\n" << render_config(config);

    if (command == "gen") cmd_gen(config, out);
    else if (command == "train") cmd_train(config, out);
    else if (command == "eval") cmd_eval(config, out);
    else if (command == "resolve") cmd_resolve(config, in, out);
    else if (command == "embed") cmd_embed(config, out);
    else if (command == "sim") cmd_sim(config, out);
    else if (command == "cluster") cmd_cluster(config, out);
    else if (command == "probe") cmd_probe(config, out);
    out.flush();
    return 0;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace wac::cli
