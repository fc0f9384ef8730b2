#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "v2vkey/bits.hpp"

namespace v2vkey {

enum class Scheme { Indexing, TurboNR };

std::string to_string(Scheme s);

/// Binary entropy -p0 log2 p0 - (1-p0) log2 (1-p0), with 0 log 0 = 0.
double entropy_per_bit(double p0);

struct WindowedEntropy {
  std::vector<double> per_window;
  double mean = 0.0;
};

/// Plug-in entropy over disjoint windows (a trailing partial window is ignored).
WindowedEntropy empirical_entropy(std::span<const std::uint8_t> bits, std::size_t window);

/// Secret bit extraction rate 2 f_P p(A=1, B=1), bits/s.
double secret_bit_rate(double probe_rate_hz, double p_joint);

/// Probability that an N-bit string carries at least one mismatch: 1 - (1 - p_e)^N.
double mismatch_prob(double p_e, std::size_t n);

/// Conditional error frequency P(B=0 | A=1).
double estimate_pe(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);

/// Hamming distance / length.
double measure_bmr(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);

struct KeyOutcome {
  bool verified = false;
  std::size_t length = 0;
};

/// Good keys (verified and exactly key_len long) per minute of simulated channel time.
double measure_kgr(std::span<const KeyOutcome> log, std::size_t key_len, double simulated_seconds);

struct SessionReport {
  Scheme scheme = Scheme::TurboNR;
  std::size_t key_len = 0;
  double bmr = 0.0;       // indexing: (discarded + mismatched) / |L_a|; turbo: residual after reconciliation
  double raw_bmr = 0.0;   // mismatch of the bits right after thresholding
  double kgr_keys_per_min = 0.0;
  double entropy_per_bit_mean = 0.0;
  double secret_bit_rate = 0.0;
  std::size_t blocks_attempted = 0;
  std::size_t blocks_verified = 0;
  std::size_t keys_generated = 0;
  std::size_t leaked_bits_total = 0;
  double probe_rate_hz = 0.0;
  double simulated_seconds = 0.0;
  double sigma2 = 0.0;
  double p_hat = 0.0;                  // calibration estimate of the thresholded mismatch
  std::size_t puncture_period = 0;     // turbo only; 0 for indexing
  std::uint64_t config_fingerprint = 0;
  std::uint64_t trace_digest = 0;
};

}  // namespace v2vkey
