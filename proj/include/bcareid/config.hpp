#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "bcareid/dataset.hpp"
#include "bcareid/probe.hpp"
#include "bcareid/trainer.hpp"

namespace bcareid {

struct EvalSettings {
  std::size_t max_rank = 20;  // CMC length and rank-probability curve length
  std::size_t nauc_k = 10;
  bool l2_normalize = false;
};

// Everything a run needs, read from one flat `key = value` file.
struct RunConfig {
  std::uint64_t seed = 0;
  GeneratorConfig generator;
  double query_fraction = 0.25;
  BranchConfig branch;
  ProbeConfig probe;
  EvalSettings eval;

  // Pushes the run seed into the branch and probe configs.
  void sync_seeds();
};

// Parses `key = value` lines; `#` starts a comment. Unknown or repeated keys
// and malformed values raise ConfigError naming the line. Keys absent from
// the text keep the values already in `base`.
RunConfig parse_run_config(std::string_view text, RunConfig base = {});
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});

// Canonical text with every key; parse_run_config(format_run_config(c)) == c.
std::string format_run_config(const RunConfig& cfg);

// Documentation of every accepted key, one per line.
std::string config_key_help();

std::vector<std::string> preset_names();
// Throws ConfigError for unknown names.
RunConfig preset(std::string_view name);
std::string preset_text(std::string_view name);

}  // namespace bcareid
