#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "contpat/classifier.hpp"
#include "contpat/tokenizer.hpp"

namespace contpat {

// File layout: 8-byte magic "CPATCKPT", uint32 format version, uint64 header
// length, JSON header, then every tensor as little-endian float64 in header
// order. All integers are little-endian.
inline constexpr std::string_view kCheckpointMagic = "CPATCKPT";
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::string config_json = "{}";  // canonical run config echo
  Tokenizer tokenizer;
  Model model;
  std::optional<double> theta;  // dev-tuned decision threshold
};

std::string serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint deserialize_checkpoint(std::string_view bytes);

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// 64-bit FNV-1a as 16 lowercase hex digits.
std::string content_hash(std::string_view bytes);
std::string file_hash(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
// Writes via a sibling temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace contpat
