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

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iterator>
#include <random>

namespace dynrm {

namespace {

constexpr std::size_t kHeaderSize = 8 + 4 + 8;
constexpr std::size_t kTrailerSize = 8;

template <typename T>
void put_le(std::vector<std::byte>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<std::byte>((value >> (8 * i)) & 0xFF));
  }
}

template <typename T>
T get_le(std::span<const std::byte> in) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    value |= static_cast<T>(std::to_integer<std::uint8_t>(in[i])) << (8 * i);
  }
  return value;
}

}  // namespace

std::uint64_t fnv1a64(std::span<const std::byte> data) noexcept {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (std::byte b : data) {
    hash ^= std::to_integer<std::uint8_t>(b);
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

CheckpointPayload CheckpointPayload::make(std::uint32_t generation,
                                          std::vector<std::byte> data) {
  CheckpointPayload p{generation, std::move(data), 0};
  p.checksum = fnv1a64(p.data);
  return p;
}

std::vector<std::byte> seeded_bytes(std::size_t size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::byte> out(size);
  for (std::size_t i = 0; i < size; i += 8) {
    std::uint64_t word = rng();
    for (std::size_t k = 0; k < 8 && i + k < size; ++k) {
      out[i + k] = static_cast<std::byte>((word >> (8 * k)) & 0xFF);
    }
  }
  return out;
}

CheckpointError::CheckpointError(CheckpointErrc code, const std::string& what)
    : std::runtime_error(what), code_(code) {}

std::vector<std::byte> encode_checkpoint(const CheckpointPayload& payload) {
  std::vector<std::byte> out;
  out.reserve(kHeaderSize + payload.data.size() + kTrailerSize);
  for (char c : kCheckpointMagic) out.push_back(static_cast<std::byte>(c));
  put_le<std::uint32_t>(out, payload.generation);
  put_le<std::uint64_t>(out, payload.data.size());
  out.insert(out.end(), payload.data.begin(), payload.data.end());
  put_le<std::uint64_t>(out, payload.checksum);
  return out;
}

CheckpointPayload decode_checkpoint(std::span<const std::byte> bytes) {
  const std::size_t probe = std::min(bytes.size(), kCheckpointMagic.size());
  if (std::memcmp(bytes.data(), kCheckpointMagic.data(), probe) != 0) {
    throw CheckpointError(CheckpointErrc::BadMagic, "not a DMR checkpoint");
  }
  if (bytes.size() < kHeaderSize + kTrailerSize) {
    throw CheckpointError(CheckpointErrc::ChecksumMismatch,
                          "checkpoint truncated inside header");
  }
  CheckpointPayload p;
  p.generation = get_le<std::uint32_t>(bytes.subspan(8));
  const auto length = get_le<std::uint64_t>(bytes.subspan(12));
  if (length != bytes.size() - kHeaderSize - kTrailerSize) {
    throw CheckpointError(CheckpointErrc::ChecksumMismatch,
                          "payload length " + std::to_string(length) +
                              " does not match file size " +
                              std::to_string(bytes.size()));
  }
  auto body = bytes.subspan(kHeaderSize, length);
  p.data.assign(body.begin(), body.end());
  p.checksum = get_le<std::uint64_t>(bytes.subspan(kHeaderSize + length));
  if (!p.verifies()) {
    throw CheckpointError(CheckpointErrc::ChecksumMismatch,
                          "payload checksum mismatch");
  }
  return p;
}

void write_checkpoint(const std::filesystem::path& path,
                      const CheckpointPayload& payload) {
  const auto bytes = encode_checkpoint(payload);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw CheckpointError(CheckpointErrc::IoError,
                          "cannot open " + path.string() + " for writing");
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw CheckpointError(CheckpointErrc::IoError,
                          "short write to " + path.string());
  }
}

CheckpointPayload read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw CheckpointError(CheckpointErrc::IoError,
                          "cannot open " + path.string());
  }
  std::vector<char> raw{std::istreambuf_iterator<char>(in),
                        std::istreambuf_iterator<char>()};
  return decode_checkpoint(
      std::as_bytes(std::span<const char>(raw.data(), raw.size())));
}

}  // namespace dynrm
