/**
 * @file config.hpp
 * @brief JSON run configuration: TrainConfig plus paths, with strict key
 *        validation and `--set key=value` overrides.
 */
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "fusiongan/pretrain.hpp"

namespace fusiongan {

struct RunConfig {
  TrainConfig train;
  std::string corpus_a;
  std::string corpus_b;
  std::string out_dir;
};

RunConfig load_run_config(const std::filesystem::path& path);

// `key=value`; the value is parsed as JSON when possible (numbers, arrays),
// otherwise taken as a string. Unknown keys are rejected.
void apply_override(RunConfig& cfg, const std::string& assignment);

// Canonical JSON dump (sorted keys); used for the resolved-config copy.
std::string run_config_json(const RunConfig& cfg);
void save_run_config(const RunConfig& cfg, const std::filesystem::path& path);

// One line per key with its default, for --help.
std::string run_config_help();

}  // namespace fusiongan
