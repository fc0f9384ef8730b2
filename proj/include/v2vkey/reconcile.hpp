#pragma once

// Turbo-code information reconciliation with side information.
//
// Bob turbo-encodes his quantized block and publishes only the (punctured)
// parity streams, the encoder-1 tail and a 64-bit check digest. Alice treats
// her own correlated bits as a noisy systematic stream, decodes, and accepts
// the result only when its digest matches Bob's.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "v2vkey/bits.hpp"
#include "v2vkey/turbo.hpp"

namespace v2vkey {

inline constexpr std::size_t kCheckBits = 64;

struct ReconciliationMessage {
  std::uint32_t block_id = 0;
  std::uint64_t interleaver_seed = 0;
  BitString payload;  // parity1 || parity2 || tail, after puncturing
  std::uint64_t check_value = 0;

  bool operator==(const ReconciliationMessage& o) const {
    return block_id == o.block_id && interleaver_seed == o.interleaver_seed && payload.bits == o.payload.bits &&
           check_value == o.check_value;
  }
};

/// Wire layout, all integers big-endian:
///   block_id u32 | interleaver_seed u64 | payload bit count u32 | payload (MSB-first, zero padded) | check u64
std::vector<std::uint8_t> serialize(const ReconciliationMessage& msg);
/// Throws std::invalid_argument on truncated or oversized input.
ReconciliationMessage deserialize(std::span<const std::uint8_t> bytes);

/// Number of payload bits bob_prepare emits for `cfg`.
std::size_t payload_length(const TurboConfig& cfg);

struct KeyMaterial {
  BitString bits;
  std::size_t leaked_bits = 0;
  bool verified = false;
};

ReconciliationMessage bob_prepare(const TurboConfig& cfg, std::span<const std::uint8_t> bob_bits,
                                  std::uint32_t block_id = 0);

struct ReconcileResult {
  std::optional<KeyMaterial> key;      // set only when the digest matched
  std::vector<std::uint8_t> decoded;   // Alice's decoder output, kept for mismatch accounting
  int iterations = 0;
  std::string failure;                 // "reconciliation failed" when key is empty

  bool ok() const { return key.has_value(); }
};

/// `p_hat` is Alice's estimate of the bit mismatch probability, 0 < p_hat < 0.5.
/// The message's interleaver seed overrides cfg.interleaver_seed.
ReconcileResult alice_reconcile(const TurboConfig& cfg, std::span<const std::uint8_t> alice_bits,
                                const ReconciliationMessage& msg, double p_hat);

/// Binary Toeplitz universal hash seeded by `seed`. Output length may not exceed
/// |bits| - leaked_bits; throws std::domain_error("insufficient residual entropy").
BitString privacy_amplify(const KeyMaterial& km, std::uint64_t seed, std::size_t out_len);

bool verify_keys(const BitString& a, const BitString& b);

}  // namespace v2vkey
