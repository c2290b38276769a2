#include <doctest.h>

#include <bit>
#include <cstring>

#include "test_support.hpp"
#include "tfcast/checkpoint.hpp"

using namespace tfcast;

namespace {

Checkpoint sample_checkpoint(std::uint64_t seed = 1) {
  TrainConfig config;
  config.seed = seed;
  config.topology.hidden_sizes = {3, 2};
  config.learning_rate = 0.1 + 0.2;  // not exactly representable in short decimal
  Rng rng(seed);
  auto model = make_model(config.topology, rng);
  NormStats norm;
  norm.center = 123.456;
  norm.scale = 1.0 / 3.0;
  norm.fit_begin = 0;
  norm.fit_end = 4011;
  return make_checkpoint(*model, config, norm, 17, 0.0625);
}

std::uint64_t le64(const std::string& bytes, std::size_t at) {
  std::uint64_t v = 0;
  for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[at + k])) << (8 * k);
  return v;
}

std::uint32_t le32(const std::string& bytes, std::size_t at) {
  return static_cast<std::uint32_t>(le64(bytes.substr(at, 4) + std::string(4, '\0'), 0));
}

CheckpointError::Kind kind_of(const std::string& bytes) {
  try {
    deserialize_checkpoint(bytes);
  } catch (const CheckpointError& e) {
    return e.kind();
  }
  FAIL("expected CheckpointError");
  return CheckpointError::Kind::io;
}

}  // namespace

TEST_CASE("round trip preserves every field exactly") {
  const Checkpoint c = sample_checkpoint();
  const Checkpoint back = deserialize_checkpoint(serialize_checkpoint(c));
  CHECK(to_key_values(back.config).entries() == to_key_values(c.config).entries());
  CHECK(back.config.learning_rate == c.config.learning_rate);
  CHECK(back.norm == c.norm);
  CHECK(back.epoch == 17);
  CHECK(back.best_val_loss == 0.0625);
  CHECK(back.parameters == c.parameters);
  CHECK(serialize_checkpoint(back) == serialize_checkpoint(c));
}

TEST_CASE("byte layout: magic, version, length, trailing CRC-32") {
  const std::string bytes = serialize_checkpoint(sample_checkpoint());
  CHECK(bytes.substr(0, 4) == "TFCK");
  CHECK(le32(bytes, 4) == kCheckpointVersion);
  CHECK(le64(bytes, 8) == bytes.size() - 16 - 4);
  const std::string body = bytes.substr(0, bytes.size() - 4);
  CHECK(le32(bytes, bytes.size() - 4) == testing::crc32_bitwise(body));
}

TEST_CASE("corruption is detected and classified") {
  using Kind = CheckpointError::Kind;
  const std::string good = serialize_checkpoint(sample_checkpoint());

  std::string flipped = good;
  flipped[40] ^= 0x01;
  CHECK(kind_of(flipped) == Kind::checksum);

  std::string magic = good;
  magic[0] = 'X';
  CHECK(kind_of(magic) == Kind::bad_magic);

  std::string version = good;
  version[4] = 2;
  CHECK(kind_of(version) == Kind::version_mismatch);

  CHECK(kind_of(good.substr(0, good.size() - 9)) == Kind::truncated);
  CHECK(kind_of(good.substr(0, 10)) == Kind::truncated);
  CHECK(kind_of("TF") == Kind::truncated);
  CHECK(kind_of(good + "x") == Kind::malformed);
}

TEST_CASE("files on disk") {
  testing::TempDir dir("ckpt");
  const Checkpoint c = sample_checkpoint(5);
  save_checkpoint(c, dir / "a.tfck");
  CHECK(load_checkpoint(dir / "a.tfck").parameters == c.parameters);
  save_checkpoint(c, dir / "b.tfck");
  CHECK(testing::read_file(dir / "a.tfck") == testing::read_file(dir / "b.tfck"));
  try {
    load_checkpoint(dir / "missing.tfck");
    FAIL("expected CheckpointError");
  } catch (const CheckpointError& e) {
    CHECK(e.kind() == CheckpointError::Kind::io);
  }
}

TEST_CASE("a checkpoint restores its model") {
  const Checkpoint c = sample_checkpoint(9);
  const auto model = model_from_checkpoint(c);
  const Sequence xs(12, Matrix{{0.5, -0.25}});
  Rng rng(9);
  auto original = make_model(c.config.topology, rng);
  CHECK(model->predict(xs) == original->predict(xs));
}
