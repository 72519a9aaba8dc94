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

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dynrm {

// On-disk layout, all integers little-endian:
//   magic "DMRCKPT\0" (8) | generation u32 | payload length u64 | payload |
//   FNV-1a 64 checksum of payload u64
inline constexpr std::array<char, 8> kCheckpointMagic = {'D', 'M', 'R', 'C',
                                                         'K', 'P', 'T', '\0'};

std::uint64_t fnv1a64(std::span<const std::byte> data) noexcept;

struct CheckpointPayload {
  std::uint32_t generation = 0;
  std::vector<std::byte> data;
  std::uint64_t checksum = 0;

  static CheckpointPayload make(std::uint32_t generation,
                                std::vector<std::byte> data);

  bool verifies() const noexcept { return fnv1a64(data) == checksum; }

  friend bool operator==(const CheckpointPayload&,
                         const CheckpointPayload&) = default;
};

/// Deterministic pseudo-random bytes, for test payloads.
std::vector<std::byte> seeded_bytes(std::size_t size, std::uint64_t seed);

enum class CheckpointErrc { IoError, BadMagic, ChecksumMismatch };

class CheckpointError : public std::runtime_error {
 public:
  CheckpointError(CheckpointErrc code, const std::string& what);
  CheckpointErrc code() const noexcept { return code_; }

 private:
  CheckpointErrc code_;
};

std::vector<std::byte> encode_checkpoint(const CheckpointPayload& payload);

/// Truncated or trailing-garbage input is reported as ChecksumMismatch.
CheckpointPayload decode_checkpoint(std::span<const std::byte> bytes);

void write_checkpoint(const std::filesystem::path& path,
                      const CheckpointPayload& payload);
CheckpointPayload read_checkpoint(const std::filesystem::path& path);

}  // namespace dynrm
