#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace v2vkey {

/// Ordered binary sequence. Each element is 0 or 1.
/// `source_indices`, when present, records the trace sample that produced each bit;
/// it is dropped once bits stop being tied to samples (after reconciliation or hashing).
struct BitString {
  std::vector<std::uint8_t> bits;
  std::optional<std::vector<std::size_t>> source_indices;

  BitString() = default;
  explicit BitString(std::vector<std::uint8_t> b) : bits(std::move(b)) {}
  BitString(std::vector<std::uint8_t> b, std::vector<std::size_t> idx)
      : bits(std::move(b)), source_indices(std::move(idx)) {}

  std::size_t size() const noexcept { return bits.size(); }
  bool empty() const noexcept { return bits.empty(); }
  std::span<const std::uint8_t> view() const noexcept { return bits; }
};

/// 64-bit FNV-1a digest over the packed bits and the bit count.
/// Not a security primitive; only used as a reconciliation check value.
std::uint64_t digest64(std::span<const std::uint8_t> bits) noexcept;

/// Pack bits MSB-first into bytes; the final byte is zero-padded.
std::vector<std::uint8_t> pack_msb_first(std::span<const std::uint8_t> bits);

/// Inverse of pack_msb_first for a known bit count.
std::vector<std::uint8_t> unpack_msb_first(std::span<const std::uint8_t> bytes, std::size_t bit_count);

std::size_t hamming_distance(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);

}  // namespace v2vkey
