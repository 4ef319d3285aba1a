#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "bcareid/numerics.hpp"

namespace bcareid {

// Self-describing binary key-value container (layout in docs/checkpoint.md).
// All numbers are little-endian; reals are IEEE-754 binary64 bit patterns.
class KvContainer {
 public:
  using Value = std::variant<std::vector<double>, std::vector<std::int64_t>, std::string>;

  void put(const std::string& key, Value v) { entries_[key] = std::move(v); }
  bool contains(const std::string& key) const { return entries_.count(key) != 0; }
  const std::vector<double>& reals(const std::string& key) const;
  const std::vector<std::int64_t>& ints(const std::string& key) const;
  const std::string& text(const std::string& key) const;
  const std::map<std::string, Value>& entries() const { return entries_; }

  std::vector<std::uint8_t> serialize() const;
  // Throws CheckpointError on bad magic, version mismatch, truncation or checksum failure.
  static KvContainer deserialize(std::span<const std::uint8_t> bytes);

 private:
  std::map<std::string, Value> entries_;
};

constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  EncoderParams params;
  AdamState adam;
  int epoch = 0;
  std::string config;  // originating run config, key = value text
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void checkpoint_save(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint checkpoint_load(const std::filesystem::path& path);

}  // namespace bcareid
