#include "tfcast/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <fstream>
#include <iterator>
#include <sstream>

namespace tfcast {
namespace {

using Kind = CheckpointError::Kind;

class Writer {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int k = 0; k < 4; ++k) u8(static_cast<std::uint8_t>(v >> (8 * k)));
  }
  void u64(std::uint64_t v) {
    for (int k = 0; k < 8; ++k) u8(static_cast<std::uint8_t>(v >> (8 * k)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes_ += s;
  }
  void raw(std::string_view s) { bytes_ += s; }

  std::string& bytes() { return bytes_; }

 private:
  std::string bytes_;
};

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(bytes_[pos_++]);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k)
      v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes_[pos_++])) << (8 * k);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k)
      v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(bytes_[pos_++])) << (8 * k);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(bytes_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw CheckpointError(Kind::malformed, "checkpoint payload is malformed");
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t crc32_of(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

constexpr std::string_view kMagic = "TFCK";
constexpr std::size_t kHeaderSize = 4 + 4 + 8;

}  // namespace

std::string serialize_checkpoint(const Checkpoint& c) {
  Writer payload;
  const KeyValues config = to_key_values(c.config);
  payload.u32(static_cast<std::uint32_t>(config.entries().size()));
  for (const auto& [k, v] : config.entries()) {
    payload.str(k);
    payload.str(v);
  }
  payload.u8(static_cast<std::uint8_t>(c.norm.scheme));
  payload.u8(static_cast<std::uint8_t>(c.norm.scope));
  payload.f64(c.norm.center);
  payload.f64(c.norm.scale);
  payload.u64(c.norm.fit_begin);
  payload.u64(c.norm.fit_end);
  payload.u64(c.epoch);
  payload.f64(c.best_val_loss);
  payload.u32(static_cast<std::uint32_t>(c.parameters.size()));
  for (const auto& p : c.parameters) {
    payload.str(p.name);
    payload.u64(p.value.rows());
    payload.u64(p.value.cols());
    for (double v : p.value.values()) payload.f64(v);
  }

  Writer file;
  file.raw(kMagic);
  file.u32(kCheckpointVersion);
  file.u64(payload.bytes().size());
  file.raw(payload.bytes());
  file.u32(crc32_of(file.bytes()));
  return std::move(file.bytes());
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  if (bytes.size() < kMagic.size()) throw CheckpointError(Kind::truncated, "checkpoint is truncated");
  if (bytes.substr(0, 4) != kMagic) throw CheckpointError(Kind::bad_magic, "not a checkpoint (bad magic)");
  if (bytes.size() < kHeaderSize) throw CheckpointError(Kind::truncated, "checkpoint is truncated");
  Reader header(bytes.substr(4, kHeaderSize - 4));
  const std::uint32_t version = header.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointError(Kind::version_mismatch,
                          "checkpoint version " + std::to_string(version) + " is not supported (expected " +
                              std::to_string(kCheckpointVersion) + ")");
  }
  const std::uint64_t payload_len = header.u64();
  if (bytes.size() - kHeaderSize < 4 || bytes.size() - kHeaderSize - 4 < payload_len) {
    throw CheckpointError(Kind::truncated, "checkpoint is truncated");
  }
  if (bytes.size() != kHeaderSize + payload_len + 4) {
    throw CheckpointError(Kind::malformed, "checkpoint has trailing bytes");
  }
  const std::string_view body = bytes.substr(0, kHeaderSize + payload_len);
  Reader trailer(bytes.substr(kHeaderSize + payload_len));
  if (trailer.u32() != crc32_of(body)) {
    throw CheckpointError(Kind::checksum, "checkpoint checksum mismatch");
  }

  Reader in(bytes.substr(kHeaderSize, payload_len));
  Checkpoint c;
  KeyValues config;
  const std::uint32_t n_config = in.u32();
  for (std::uint32_t k = 0; k < n_config; ++k) {
    std::string key = in.str();
    config.set(key, in.str());
  }
  try {
    c.config = apply_key_values(TrainConfig{}, config);
  } catch (const UsageError& e) {
    throw CheckpointError(Kind::malformed, std::string("checkpoint config: ") + e.what());
  }
  const std::uint8_t scheme = in.u8();
  const std::uint8_t scope = in.u8();
  if (scheme > 1 || scope > 1) throw CheckpointError(Kind::malformed, "checkpoint normalization is malformed");
  c.norm.scheme = static_cast<NormScheme>(scheme);
  c.norm.scope = static_cast<FitScope>(scope);
  c.norm.center = in.f64();
  c.norm.scale = in.f64();
  c.norm.fit_begin = in.u64();
  c.norm.fit_end = in.u64();
  c.epoch = in.u64();
  c.best_val_loss = in.f64();
  const std::uint32_t n_params = in.u32();
  for (std::uint32_t k = 0; k < n_params; ++k) {
    NamedMatrix p;
    p.name = in.str();
    const std::uint64_t rows = in.u64();
    const std::uint64_t cols = in.u64();
    if (cols != 0 && rows > payload_len / 8 / cols) {
      throw CheckpointError(Kind::malformed, "checkpoint parameter " + p.name + " has an impossible shape");
    }
    std::vector<double> data(rows * cols);
    for (double& v : data) v = in.f64();
    p.value = Matrix(rows, cols, std::move(data));
    c.parameters.push_back(std::move(p));
  }
  if (!in.done()) throw CheckpointError(Kind::malformed, "checkpoint payload has unread bytes");
  return c;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(checkpoint);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError(Kind::io, "cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError(Kind::io, "failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(Kind::io, "cannot read checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace tfcast
