#include "v2vkey/bits.hpp"

#include <stdexcept>

namespace v2vkey {

std::uint64_t digest64(std::span<const std::uint8_t> bits) noexcept {
  constexpr std::uint64_t kPrime = 0x100000001b3ULL;
  std::uint64_t h = 0xcbf29ce484222325ULL;
  std::uint64_t n = bits.size();
  for (int i = 0; i < 8; ++i) {
    h = (h ^ (n & 0xff)) * kPrime;
    n >>= 8;
  }
  std::uint8_t acc = 0;
  int fill = 0;
  for (std::uint8_t b : bits) {
    acc = static_cast<std::uint8_t>((acc << 1) | (b & 1));
    if (++fill == 8) {
      h = (h ^ acc) * kPrime;
      acc = 0;
      fill = 0;
    }
  }
  if (fill != 0) h = (h ^ static_cast<std::uint8_t>(acc << (8 - fill))) * kPrime;
  return h;
}

std::vector<std::uint8_t> pack_msb_first(std::span<const std::uint8_t> bits) {
  std::vector<std::uint8_t> out((bits.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < bits.size(); ++i)
    if (bits[i]) out[i / 8] |= static_cast<std::uint8_t>(0x80u >> (i % 8));
  return out;
}

std::vector<std::uint8_t> unpack_msb_first(std::span<const std::uint8_t> bytes, std::size_t bit_count) {
  if (bytes.size() * 8 < bit_count) throw std::invalid_argument("unpack_msb_first: not enough bytes");
  std::vector<std::uint8_t> out(bit_count);
  for (std::size_t i = 0; i < bit_count; ++i) out[i] = (bytes[i / 8] >> (7 - i % 8)) & 1u;
  return out;
}

std::size_t hamming_distance(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  if (a.size() != b.size()) throw std::invalid_argument("hamming_distance: length mismatch");
  std::size_t d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] != b[i]);
  return d;
}

}  // namespace v2vkey
