#pragma once

// Parallel-concatenated convolutional (turbo) codec.
//
// Two identical recursive systematic convolutional (RSC) encoders; the second
// sees the input through a seeded pseudo-random interleaver. Encoder 1 is
// terminated to the zero state, encoder 2 is left open. Decoding alternates
// two BCJR (forward-backward) soft-in/soft-out decoders that exchange
// extrinsic LLRs.
//
// LLR sign convention: positive means bit 0 is more likely.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace v2vkey {

inline constexpr double kLlrMax = 50.0;

using LlrSeq = std::vector<double>;

/// Polynomials are octal-style integers; bit (constraint_length - 1) is the D^0 tap.
/// The classic (7, 5) code: feedback 1 + D + D^2, feedforward 1 + D^2.
struct RscSpec {
  int constraint_length = 3;
  unsigned feedback = 07;
  unsigned feedforward = 05;
  bool terminated = true;

  int memory() const { return constraint_length - 1; }
  int states() const { return 1 << memory(); }
  /// Tail steps appended after the K information steps.
  std::size_t tail_steps() const { return terminated ? static_cast<std::size_t>(memory()) : 0; }
};

void validate(const RscSpec& spec);

enum class Puncture {
  None,      ///< rate 1/3
  HalfRate,  ///< parity1 on even positions, parity2 on odd positions
  Periodic,  ///< keep one parity bit of each encoder per `puncture_period` positions
};

enum class DecoderAlgorithm { LogMap, MaxLogMap };

struct TurboConfig {
  RscSpec rsc;
  std::size_t block_len = 512;
  std::uint64_t interleaver_seed = 0x7c0de5eedULL;
  Puncture puncture = Puncture::None;
  std::size_t puncture_period = 2;  // only read for Puncture::Periodic
  int iterations = 8;
  DecoderAlgorithm algorithm = DecoderAlgorithm::LogMap;
  double extrinsic_scale = 1.0;
};

void validate(const TurboConfig& cfg);

struct RscCodeword {
  std::vector<std::uint8_t> systematic;
  std::vector<std::uint8_t> parity;
  std::vector<std::uint8_t> tail;  // (input, parity) pairs per tail step
};

RscCodeword rsc_encode(const RscSpec& spec, std::span<const std::uint8_t> bits);

/// Seeded Fisher-Yates permutation of 0..k-1. Encoder 2 input is x[perm[i]].
std::vector<std::size_t> make_interleaver(std::size_t k, std::uint64_t seed);

struct TurboCodeword {
  std::vector<std::uint8_t> systematic;
  std::vector<std::uint8_t> parity1;  // kept positions only
  std::vector<std::uint8_t> parity2;  // kept positions only
  std::vector<std::uint8_t> tail;     // encoder 1 tail, never punctured

  std::size_t transmitted() const { return systematic.size() + parity1.size() + parity2.size() + tail.size(); }
};

/// Which parity positions of encoder `which` (0 or 1) survive puncturing.
std::vector<bool> parity_kept(const TurboConfig& cfg, int which);

TurboCodeword turbo_encode(const TurboConfig& cfg, std::span<const std::uint8_t> bits);

/// Observed 0 -> +ln((1-p)/p), observed 1 -> -ln((1-p)/p). Requires 0 < p < 0.5.
LlrSeq bits_to_llr(std::span<const std::uint8_t> bits, double crossover_p);

struct BcjrOutput {
  LlrSeq posterior;  // K values
  LlrSeq extrinsic;  // posterior - systematic - apriori
};

/// Forward-backward a-posteriori LLRs over the RSC trellis. `systematic` and
/// `parity` cover K + spec.tail_steps() trellis steps; `apriori` covers the K
/// information steps.
BcjrOutput bcjr_decode(const RscSpec& spec, std::span<const double> systematic, std::span<const double> parity,
                       std::span<const double> apriori, DecoderAlgorithm algorithm = DecoderAlgorithm::LogMap);

/// Decoder input with punctured positions already expanded to zero LLR.
/// `systematic` and `parity1` carry K + tail_steps values (tail last), `parity2` carries K.
struct TurboLlrs {
  LlrSeq systematic;
  LlrSeq parity1;
  LlrSeq parity2;
};

/// Expand per-stream received LLRs (kept parity positions only, tail as (input, parity) pairs).
TurboLlrs assemble_llrs(const TurboConfig& cfg, std::span<const double> systematic,
                        std::span<const double> parity1_kept, std::span<const double> parity2_kept,
                        std::span<const double> tail);

struct TurboDecodeResult {
  std::vector<std::uint8_t> bits;
  LlrSeq posterior;
  int iterations_used = 0;
  bool converged = false;
};

/// Iterative decoding: decoder 1, interleave extrinsic, decoder 2, deinterleave.
/// Stops early once hard decisions repeat across a full iteration.
TurboDecodeResult turbo_decode(const TurboConfig& cfg, const TurboLlrs& llrs);

}  // namespace v2vkey
