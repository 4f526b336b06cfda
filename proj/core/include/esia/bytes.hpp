#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace esia {

using Bytes = std::vector<uint8_t>;

// 32-byte identity digest; OIDs, fog ids and RSU ids share this layout.
using Identity32 = std::array<uint8_t, 32>;
using Digest32 = std::array<uint8_t, 32>;

inline void put_u32be(Bytes& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v >> 24));
  out.push_back(static_cast<uint8_t>(v >> 16));
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v));
}

inline void put_u64be(Bytes& out, uint64_t v) {
  for (int s = 56; s >= 0; s -= 8) out.push_back(static_cast<uint8_t>(v >> s));
}

inline uint32_t read_u32be(std::span<const uint8_t> in, size_t off) {
  return (uint32_t{in[off]} << 24) | (uint32_t{in[off + 1]} << 16) |
         (uint32_t{in[off + 2]} << 8) | uint32_t{in[off + 3]};
}

inline uint64_t read_u64be(std::span<const uint8_t> in, size_t off) {
  uint64_t v = 0;
  for (size_t i = 0; i < 8; ++i) v = (v << 8) | in[off + i];
  return v;
}

std::string to_hex(std::span<const uint8_t> data);
std::optional<Bytes> from_hex(std::string_view hex);

template <size_t N>
std::optional<std::array<uint8_t, N>> array_from_hex(std::string_view hex) {
  auto raw = from_hex(hex);
  if (!raw || raw->size() != N) return std::nullopt;
  std::array<uint8_t, N> out{};
  std::memcpy(out.data(), raw->data(), N);
  return out;
}

}  // namespace esia
