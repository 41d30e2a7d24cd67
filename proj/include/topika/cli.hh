// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace topika {

// Everything a command needs. Every field has a long flag of the same name
// (underscores become dashes) and the same key in a --config file.
struct RunConfig {
  std::string command;

  std::filesystem::path docword;
  std::filesystem::path vocab;
  std::filesystem::path labels;
  std::filesystem::path out;
  std::filesystem::path results;  // metrics CSV; <out>/results.csv if empty
  std::vector<std::filesystem::path> model;

  std::vector<std::string> algo{"cvb0"};
  std::vector<std::string> estimator;  // per-algorithm default if empty
  std::size_t topics = 10;
  double alpha = 0.5;
  double eta = 0.5;
  std::size_t iters = 500;
  std::uint64_t seed = 1;
  bool minka = false;
  std::size_t minka_start = 15;
  std::size_t workers = 4;
  std::size_t sync_every = 4096;
  std::size_t samples = 1;
  std::vector<double> grid_alpha{0.01, 0.1, 0.25, 0.5, 0.75, 1.0};
  std::vector<double> grid_eta{0.01, 0.1, 0.25, 0.5, 0.75, 1.0};
  std::optional<double> threshold;

  std::size_t test_docs = 0;
  std::size_t validation_docs = 0;
  std::size_t eval_every = 2;
  std::size_t patience = 5;
  std::size_t runs = 3;
  std::size_t grid_threads = 1;
  std::size_t top_words = 20;
  std::size_t oracle_instances = 20;
  std::size_t oracle_sweeps = 100000;
};

// Exit codes besides 0: command-line errors use CLI11's codes, 2 is an invalid
// configuration, 1 any other failure, 3 a failed oracle check.
inline constexpr int kExitConfig = 2;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitCheckFailed = 3;

// Parses `topika <command> [flags]` and runs the command.
int run_cli(int argc, const char* const* argv);

// Individual commands; they throw on failure.
void cmd_train(const RunConfig& config, const std::string& config_text);
void cmd_evaluate(const RunConfig& config, const std::string& config_text);
void cmd_grid(const RunConfig& config, const std::string& config_text);
void cmd_bench(const RunConfig& config, const std::string& config_text);
// Returns false when a check did not pass.
bool cmd_oracle_check(const RunConfig& config, const std::string& config_text);

// The configuration as TOML accepted by --config; reproduces the run.
std::string config_toml(const RunConfig& config);

// Hash git would give the file as a blob: SHA-1 of "blob <size>\0" + content.
std::string git_blob_sha1(const std::filesystem::path& path);

}  // namespace topika
