// Copyright 2026 The dynrm-kit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dynrm/checkpoint.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <fstream>
#include <random>

namespace dynrm {
namespace {

class CheckpointFile : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("dynrm-ckpt-" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
            "-" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }

  std::filesystem::path path(const std::string& name) const { return dir_ / name; }

  std::filesystem::path dir_;
};

TEST(Fnv1a64, KnownVectors) {
  EXPECT_EQ(fnv1a64({}), 0xcbf29ce484222325ull);
  const std::byte a[] = {std::byte{'a'}};
  EXPECT_EQ(fnv1a64(a), 0xaf63dc4c8601ec8cull);
}

TEST(Encode, LayoutIsBitExact) {
  const auto p = CheckpointPayload::make(
      0x01020304, {std::byte{0xAA}, std::byte{0xBB}});
  const auto bytes = encode_checkpoint(p);
  ASSERT_EQ(bytes.size(), 8u + 4 + 8 + 2 + 8);
  EXPECT_EQ(std::memcmp(bytes.data(), kCheckpointMagic.data(), 8), 0);
  EXPECT_EQ(bytes[8], std::byte{0x04});  // little-endian generation
  EXPECT_EQ(bytes[11], std::byte{0x01});
  EXPECT_EQ(bytes[12], std::byte{2});  // length
  EXPECT_EQ(bytes[20], std::byte{0xAA});
  std::uint64_t sum = 0;
  for (int i = 0; i < 8; ++i) {
    sum |= std::to_integer<std::uint64_t>(bytes[22 + i]) << (8 * i);
  }
  EXPECT_EQ(sum, p.checksum);
}

TEST(Decode, BadMagic) {
  auto bytes = encode_checkpoint(CheckpointPayload::make(1, {}));
  bytes[0] = std::byte{'X'};
  try {
    decode_checkpoint(bytes);
    FAIL();
  } catch (const CheckpointError& e) {
    EXPECT_EQ(e.code(), CheckpointErrc::BadMagic);
  }
}

TEST(Decode, FlippedPayloadBit) {
  auto bytes = encode_checkpoint(CheckpointPayload::make(1, seeded_bytes(64, 1)));
  bytes[30] ^= std::byte{0x01};
  try {
    decode_checkpoint(bytes);
    FAIL();
  } catch (const CheckpointError& e) {
    EXPECT_EQ(e.code(), CheckpointErrc::ChecksumMismatch);
  }
}

TEST(Decode, TruncationAtEveryLength) {
  const auto bytes = encode_checkpoint(CheckpointPayload::make(3, seeded_bytes(40, 2)));
  for (std::size_t n = 0; n < bytes.size(); ++n) {
    try {
      decode_checkpoint(std::span(bytes).first(n));
      FAIL() << "accepted " << n << " bytes";
    } catch (const CheckpointError& e) {
      EXPECT_EQ(e.code(), CheckpointErrc::ChecksumMismatch) << n;
    }
  }
}

TEST_F(CheckpointFile, RoundtripKilobyte) {
  const auto p = CheckpointPayload::make(1, seeded_bytes(1024, 42));
  write_checkpoint(path("a.bin"), p);
  EXPECT_EQ(read_checkpoint(path("a.bin")), p);
}

TEST_F(CheckpointFile, RoundtripEmpty) {
  const auto p = CheckpointPayload::make(1, {});
  write_checkpoint(path("e.bin"), p);
  EXPECT_EQ(read_checkpoint(path("e.bin")), p);
}

TEST_F(CheckpointFile, TruncatedFile) {
  write_checkpoint(path("t.bin"), CheckpointPayload::make(1, seeded_bytes(1024, 42)));
  std::filesystem::resize_file(path("t.bin"), std::filesystem::file_size(path("t.bin")) - 1);
  try {
    read_checkpoint(path("t.bin"));
    FAIL();
  } catch (const CheckpointError& e) {
    EXPECT_EQ(e.code(), CheckpointErrc::ChecksumMismatch);
  }
}

TEST_F(CheckpointFile, MissingFileIsIoError) {
  try {
    read_checkpoint(path("absent.bin"));
    FAIL();
  } catch (const CheckpointError& e) {
    EXPECT_EQ(e.code(), CheckpointErrc::IoError);
  }
}

TEST_F(CheckpointFile, RoundtripPropertyUpToOneMebibyte) {
  std::mt19937_64 rng(7);
  std::vector<std::size_t> sizes = {0, 1, 7, 8, 4095, std::size_t{1} << 20};
  for (int i = 0; i < 24; ++i) sizes.push_back(rng() % (std::size_t{1} << 20));
  for (std::size_t size : sizes) {
    const auto p = CheckpointPayload::make(static_cast<std::uint32_t>(rng()),
                                           seeded_bytes(size, rng()));
    write_checkpoint(path("p.bin"), p);
    const auto back = read_checkpoint(path("p.bin"));
    ASSERT_EQ(back, p) << size;
    ASSERT_TRUE(back.verifies());
    ASSERT_EQ(decode_checkpoint(encode_checkpoint(p)), p);
  }
}

TEST(SeededBytes, Deterministic) {
  EXPECT_EQ(seeded_bytes(100, 5), seeded_bytes(100, 5));
  EXPECT_NE(seeded_bytes(100, 5), seeded_bytes(100, 6));
}

}  // namespace
}  // namespace dynrm
