#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "tfcast/errors.hpp"
#include "tfcast/train.hpp"

namespace tfcast {

// Layout (all integers little-endian):
//   "TFCK" | u32 version | u64 payload length | payload | u32 CRC-32
// The CRC covers every byte before it. The payload holds the config as
// key-value strings, the normalization statistics, the epoch index, the best
// validation loss and each named parameter matrix (u64 rows, u64 cols,
// row-major IEEE-754 doubles).
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public DataError {
 public:
  enum class Kind { io, bad_magic, version_mismatch, truncated, checksum, malformed };

  CheckpointError(Kind kind, const std::string& what) : DataError(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

std::string serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint deserialize_checkpoint(std::string_view bytes);

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace tfcast
