#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "wac/analysis.hpp"
#include "wac/classifiers.hpp"
#include "wac/model.hpp"
#include "wac/scenegen.hpp"

namespace wac::cli {

inline constexpr std::string_view kVersion = "0.1.0";

struct RunConfig {
  std::uint64_t seed = 1;
  GenConfig gen;
  double train_fraction = 0.8;
  double dev_fraction = 0.1;
  SamplingConfig sampling;
  TrainConfig train;
  Backend backend = Backend::LogReg;
  std::string strategy;  // empty: command default
  TsneConfig tsne{.perplexity = 5.0};
  ClusterConfig cluster;
  std::size_t probe_samples = 73;
  double probe_hue_start = 0.0;
  double probe_hue_end = 360.0;

  std::string data;  // directory written by gen
  std::string split = "test";
  std::string model;
  std::string lexicons;  // defaults to <data>/lexicons.txt when present
  std::string out;
  std::string pairs;
  std::string external;
  std::string word;
  std::string expression;
  std::string scene;  // file with one scene line; "-" or empty reads stdin

  // Pushes the global seed into every seeded sub-config.
  void propagate_seed();
};

// Throws ConfigError for unknown keys or unparsable values.
void apply_setting(RunConfig& config, std::string_view key, std::string_view value);
// key=value lines; '#' comments and blank lines ignored.
void apply_config_file(RunConfig& config, const std::filesystem::path& path);
std::vector<std::string> config_keys();

// Every key as sorted "key=value" lines.
std::string render_config(const RunConfig& config);
std::uint64_t config_hash(const RunConfig& config);
// "# wac <version> <command> config=<hash>"
std::string report_header(const RunConfig& config, std::string_view command);

struct DataPaths {
  std::filesystem::path scenes;
  std::filesystem::path refexps;
};
DataPaths data_paths(const std::filesystem::path& dir, Split split);

void cmd_gen(const RunConfig& config, std::ostream& out);
void cmd_train(const RunConfig& config, std::ostream& out);
void cmd_eval(const RunConfig& config, std::ostream& out);
void cmd_resolve(const RunConfig& config, std::istream& in, std::ostream& out);
void cmd_embed(const RunConfig& config, std::ostream& out);
void cmd_sim(const RunConfig& config, std::ostream& out);
void cmd_cluster(const RunConfig& config, std::ostream& out);
void cmd_probe(const RunConfig& config, std::ostream& out);

// Parses arguments and dispatches; returns the process exit code.
int run(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace wac::cli
