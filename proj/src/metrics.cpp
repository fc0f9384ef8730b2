#include "v2vkey/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace v2vkey {

std::string to_string(Scheme s) { return s == Scheme::Indexing ? "indexing" : "turbo"; }

double entropy_per_bit(double p0) {
  if (!(p0 >= 0.0 && p0 <= 1.0)) throw std::invalid_argument("entropy_per_bit: p0 must be in [0, 1]");
  auto term = [](double p) { return p > 0.0 ? -p * std::log2(p) : 0.0; };
  return term(p0) + term(1.0 - p0);
}

WindowedEntropy empirical_entropy(std::span<const std::uint8_t> bits, std::size_t window) {
  if (window < 8) throw std::invalid_argument("empirical_entropy: window must be >= 8");
  if (bits.size() < window) throw std::invalid_argument("empirical_entropy: fewer bits than one window");
  WindowedEntropy out;
  for (std::size_t start = 0; start + window <= bits.size(); start += window) {
    std::size_t zeros = 0;
    for (std::size_t i = start; i < start + window; ++i) zeros += (bits[i] == 0);
    out.per_window.push_back(entropy_per_bit(static_cast<double>(zeros) / static_cast<double>(window)));
  }
  double s = 0.0;
  for (double h : out.per_window) s += h;
  out.mean = s / static_cast<double>(out.per_window.size());
  return out;
}

double secret_bit_rate(double probe_rate_hz, double p_joint) {
  if (!(probe_rate_hz > 0.0)) throw std::invalid_argument("secret_bit_rate: f_P must be > 0");
  if (!(p_joint >= 0.0 && p_joint <= 1.0)) throw std::invalid_argument("secret_bit_rate: p_joint must be in [0, 1]");
  return 2.0 * probe_rate_hz * p_joint;
}

double mismatch_prob(double p_e, std::size_t n) {
  if (!(p_e >= 0.0 && p_e <= 1.0)) throw std::invalid_argument("mismatch_prob: p_e must be in [0, 1]");
  if (n < 1) throw std::invalid_argument("mismatch_prob: N must be >= 1");
  if (p_e == 1.0) return 1.0;
  // expm1/log1p keep full relative precision for tiny p_e.
  return -std::expm1(static_cast<double>(n) * std::log1p(-p_e));
}

double estimate_pe(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  if (a.size() != b.size()) throw std::invalid_argument("estimate_pe: length mismatch");
  std::size_t ones = 0, flips = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == 1) {
      ++ones;
      flips += (b[i] == 0);
    }
  }
  if (ones == 0) throw std::domain_error("undefined conditional");
  return static_cast<double>(flips) / static_cast<double>(ones);
}

double measure_bmr(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  if (a.size() != b.size()) throw std::invalid_argument("measure_bmr: length mismatch");
  if (a.empty()) throw std::invalid_argument("measure_bmr: empty input");
  return static_cast<double>(hamming_distance(a, b)) / static_cast<double>(a.size());
}

double measure_kgr(std::span<const KeyOutcome> log, std::size_t key_len, double simulated_seconds) {
  if (!(simulated_seconds > 0.0)) throw std::invalid_argument("measure_kgr: simulated time must be > 0");
  std::size_t good = 0;
  for (const auto& k : log) good += (k.verified && k.length == key_len);
  return static_cast<double>(good) / (simulated_seconds / 60.0);
}

}  // namespace v2vkey
