#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "contpat/encoder.hpp"
#include "contpat/patterning.hpp"
#include "contpat/training.hpp"

namespace contpat {

struct PatternConfig {
  PatternFamily family = PatternFamily::beta;
  std::size_t n = 5;
  std::size_t k = 2;
  std::vector<std::string> discrete_texts;  // family == discrete only; n = count
};

struct DataConfig {
  std::filesystem::path train;
  std::filesystem::path dev;
  std::optional<std::filesystem::path> test;
  std::size_t max_vocab = 10000;
  bool lowercase = true;
};

struct RunConfig {
  std::string preset = "toy";
  std::uint64_t seed = 0;
  PatternConfig pattern;
  EncoderConfig encoder;  // vocab_size is filled in at run time
  TrainConfig train;      // seed mirrors RunConfig::seed
  DataConfig data;
  std::filesystem::path output_dir = "runs";

  // Range checks that need no file access; dataset paths may be unset.
  void validate() const;
  // validate() plus presence and existence checks on the dataset files.
  void validate_inputs() const;

  // Sorted-key JSON of every field except output_dir.
  std::string canonical_json() const;
  // Content hash of canonical_json(); names the run directory.
  std::string run_id() const;
};

// Parses a config document. Unknown keys and out-of-range values throw
// ConfigError. Relative data paths resolve against `base_dir`.
RunConfig parse_run_config(const std::string& json_text, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace contpat
