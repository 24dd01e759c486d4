#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "wac/cli.hpp"
#include "wac/error.hpp"
#include "wac/rng.hpp"

namespace wac::cli {

namespace {

std::string fmt(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("bad value '" + std::string(value) + "' for '" + std::string(key) + "'");
  }
  return out;
}

struct Key {
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Key number(T RunConfig::*member) {
  return {[member](RunConfig& c, std::string_view v) { c.*member = parse_number<T>("", v); },
          [member](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return fmt(c.*member);
            else return std::to_string(c.*member);
          }};
}

template <typename T, typename S>
Key nested(S RunConfig::*outer, T S::*member) {
  return {[=](RunConfig& c, std::string_view v) { (c.*outer).*member = parse_number<T>("", v); },
          [=](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return fmt((c.*outer).*member);
            else return std::to_string((c.*outer).*member);
          }};
}

Key text(std::string RunConfig::*member) {
  return {[member](RunConfig& c, std::string_view v) { c.*member = std::string(v); },
          [member](const RunConfig& c) { return c.*member; }};
}

const std::map<std::string, Key, std::less<>>& registry() {
  static const std::map<std::string, Key, std::less<>> keys = [] {
    std::map<std::string, Key, std::less<>> k;
    k["seed"] = number(&RunConfig::seed);
    k["gen.n_scenes"] = nested(&RunConfig::gen, &GenConfig::n_scenes);
    k["gen.objects_per_scene"] = nested(&RunConfig::gen, &GenConfig::objects_per_scene);
    k["gen.expressions_per_scene"] = nested(&RunConfig::gen, &GenConfig::expressions_per_scene);
    k["gen.noise_sigma"] = nested(&RunConfig::gen, &GenConfig::noise_sigma);
    k["gen.relation_fraction"] = nested(&RunConfig::gen, &GenConfig::relation_fraction);
    k["gen.prototype_dim"] = nested(&RunConfig::gen, &GenConfig::prototype_dim);
    k["gen.grid_size"] = nested(&RunConfig::gen, &GenConfig::grid_size);
    k["gen.next_to_threshold"] = nested(&RunConfig::gen, &GenConfig::next_to_threshold);
    k["gen.max_retries"] = nested(&RunConfig::gen, &GenConfig::max_retries);
    k["gen.train_fraction"] = number(&RunConfig::train_fraction);
    k["gen.dev_fraction"] = number(&RunConfig::dev_fraction);
    k["sampling.neg_ratio"] = nested(&RunConfig::sampling, &SamplingConfig::neg_ratio);
    k["sampling.min_positives"] = nested(&RunConfig::sampling, &SamplingConfig::min_positives);
    k["train.max_epochs"] = nested(&RunConfig::train, &TrainConfig::max_epochs);
    k["train.l2_alpha"] = nested(&RunConfig::train, &TrainConfig::l2_alpha);
    k["train.l1_lambda"] = nested(&RunConfig::train, &TrainConfig::l1_lambda);
    k["train.tree_max_depth"] = nested(&RunConfig::train, &TrainConfig::tree_max_depth);
    k["train.min_leaf"] = nested(&RunConfig::train, &TrainConfig::min_leaf);
    k["train.convergence_tol"] = nested(&RunConfig::train, &TrainConfig::convergence_tol);
    k["train.learning_rate"] = {
        [](RunConfig& c, std::string_view v) {
          c.train.adam.learning_rate = parse_number<double>("train.learning_rate", v);
        },
        [](const RunConfig& c) { return fmt(c.train.adam.learning_rate); }};
    k["backend"] = {[](RunConfig& c, std::string_view v) { c.backend = backend_from_string(v); },
                    [](const RunConfig& c) { return std::string(to_string(c.backend)); }};
    k["strategy"] = text(&RunConfig::strategy);
    k["tsne.perplexity"] = nested(&RunConfig::tsne, &TsneConfig::perplexity);
    k["tsne.iterations"] = nested(&RunConfig::tsne, &TsneConfig::iterations);
    k["tsne.learning_rate"] = nested(&RunConfig::tsne, &TsneConfig::learning_rate);
    k["cluster.eps"] = nested(&RunConfig::cluster, &ClusterConfig::eps);
    k["cluster.min_pts"] = nested(&RunConfig::cluster, &ClusterConfig::min_pts);
    k["probe.samples"] = number(&RunConfig::probe_samples);
    k["probe.hue_start"] = number(&RunConfig::probe_hue_start);
    k["probe.hue_end"] = number(&RunConfig::probe_hue_end);
    k["data"] = text(&RunConfig::data);
    k["split"] = {[](RunConfig& c, std::string_view v) {
                    split_from_string(v);
                    c.split = std::string(v);
                  },
                  [](const RunConfig& c) { return c.split; }};
    k["model"] = text(&RunConfig::model);
    k["lexicons"] = text(&RunConfig::lexicons);
    k["out"] = text(&RunConfig::out);
    k["pairs"] = text(&RunConfig::pairs);
    k["external"] = text(&RunConfig::external);
    k["word"] = text(&RunConfig::word);
    k["expression"] = text(&RunConfig::expression);
    k["scene"] = text(&RunConfig::scene);
    return k;
  }();
  return keys;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

void RunConfig::propagate_seed() {
  gen.seed = seed;
  sampling.seed = seed;
  train.seed = seed;
  tsne.seed = seed;
}

void apply_setting(RunConfig& config, std::string_view key, std::string_view value) {
  const auto& keys = registry();
  const auto it = keys.find(key);
  if (it == keys.end()) throw ConfigError("unknown config key '" + std::string(key) + "'");
  try {
    it->second.set(config, trim(value));
  } catch (const ConfigError&) {
    throw ConfigError("bad value '" + std::string(value) + "' for '" + std::string(key) + "'");
  } catch (const InvalidInputError& ex) {
    throw ConfigError(std::string(key) + ": " + ex.what());
  }
}

void apply_config_file(RunConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path.string() + "'");
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    const std::string_view s = trim(line);
    if (s.empty() || s.front() == '#') continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError(path.string(), line_no, "expected key=value");
    }
    try {
      apply_setting(config, trim(s.substr(0, eq)), s.substr(eq + 1));
    } catch (const ConfigError& ex) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": " + ex.what());
    }
  }
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& [k, _] : registry()) out.push_back(k);
  return out;
}

std::string render_config(const RunConfig& config) {
  std::string out;
  for (const auto& [k, key] : registry()) out += k + "=" + key.get(config) + "\n";
  return out;
}

std::uint64_t config_hash(const RunConfig& config) { return fnv1a64(render_config(config)); }

std::string report_header(const RunConfig& config, std::string_view command) {
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(config_hash(config)));
  return "# wac " + std::string(kVersion) + " " + std::string(command) + " config=" + hash;
}

}  // namespace wac::cli
