#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "relicd/data.hpp"
#include "relicd/diagnostics.hpp"
#include "relicd/training.hpp"

namespace relicd {

// Everything a `train` run needs. Serialized as flat `key = value` lines with
// `#` comments; keys mirror the field names below.
struct RunConfig {
  std::filesystem::path logs;
  std::filesystem::path qmatrix;
  std::filesystem::path output_dir;
  std::size_t min_logs = 15;
  DiagnosticConfig diagnostic;
  TrainConfig train;
  SplitSpec split;  // split.seed is derived from train.seed

  // Canonical key -> value map; every key is present.
  std::map<std::string, std::string> to_pairs() const;

  // Builds a config from key/value pairs, resolving relative paths against
  // base_dir. Unknown keys and bad values are collected and reported together
  // in one ValidationError. Missing keys keep their defaults.
  static RunConfig from_pairs(const std::map<std::string, std::string>& pairs,
                              const std::filesystem::path& base_dir = {});

  // Range checks plus existence of the input files; reports all failures at once.
  void validate() const;
};

std::map<std::string, std::string> parse_key_values(std::istream& in, const std::string& source = "<config>");
RunConfig load_config(const std::filesystem::path& path);
std::string render_config(const RunConfig& cfg);

}  // namespace relicd
