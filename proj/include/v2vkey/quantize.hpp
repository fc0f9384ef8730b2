#pragma once

// Envelope-to-bit quantizers.
//
// Lossy path: two thresholds q- <= q+. Samples strictly above q+ map to 1,
// strictly below q- map to 0, everything in [q-, q+] is discarded. Runs of at
// least m consecutive same-side samples ("excursions") feed the indexing protocol.
//
// Lossless path: one threshold; env >= q maps to 1, otherwise 0. One bit per sample.
//
// Thresholds are piecewise constant over refresh epochs (ThresholdSchedule). A
// refresh happens after `region_budget` coherence regions, or earlier when the
// Doppler-spectrum correlation against the spectrum the thresholds were fitted on
// drops below `rho_threshold`.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "v2vkey/bits.hpp"
#include "v2vkey/channel.hpp"
#include "v2vkey/rng.hpp"

namespace v2vkey {

enum class QuantMode { DualLossy, SingleLossless };

struct Thresholds {
  QuantMode mode = QuantMode::DualLossy;
  double lower = 0.0;   // q-
  double upper = 0.0;   // q+
  double single = 0.0;  // lossless threshold
  double gamma = 0.0;
  std::size_t window_id = 0;
};

/// DualLossy: q+- = mean +- gamma * stddev (population). SingleLossless: median.
/// Throws std::domain_error("degenerate envelope") for a constant envelope in DualLossy mode.
Thresholds compute_thresholds(std::span<const double> env, double gamma, QuantMode mode);

/// Epoch i covers samples [starts[i], starts[i+1]); the last epoch runs to the end.
struct ThresholdSchedule {
  std::vector<std::size_t> starts;
  std::vector<Thresholds> epochs;

  static ThresholdSchedule constant(const Thresholds& th);
  const Thresholds& at(std::size_t sample) const;
};

/// Fits one Thresholds per epoch on the `window` samples that start at each refresh point
/// (clipped to the end of the envelope).
ThresholdSchedule build_schedule(std::span<const double> env, std::span<const std::size_t> refresh_points,
                                 std::size_t window, double gamma, QuantMode mode);

struct Excursion {
  std::size_t start = 0;  // inclusive
  std::size_t end = 0;    // inclusive
  std::uint8_t bit = 0;
  std::size_t center = 0;  // floor((start + end) / 2)
};

/// Maximal runs of >= m samples strictly above q+ (bit 1) or strictly below q- (bit 0).
std::vector<Excursion> find_excursions(std::span<const double> env, const Thresholds& th, std::size_t m);
std::vector<Excursion> find_excursions(std::span<const double> env, const ThresholdSchedule& schedule,
                                       std::size_t m);

struct IndexingResult {
  BitString alice;
  BitString bob;
  std::vector<std::size_t> alice_list;  // L_a: centers Alice announces
  std::vector<std::size_t> bob_list;    // L_b: centers Bob confirms, subset of L_a
  std::size_t discarded = 0;            // |L_a| - |L_b|
};

/// Excursion indexing: Alice announces the centers of a random `fraction` of her
/// excursions; Bob keeps a center when his m-sample window around it lies entirely
/// above q+ or entirely below q-; both quantize their own sample at each kept index.
IndexingResult index_reconcile(std::span<const double> alice_env, std::span<const double> bob_env,
                               const ThresholdSchedule& alice_th, const ThresholdSchedule& bob_th,
                               std::size_t m, double fraction, RandomStream& rng);
IndexingResult index_reconcile(std::span<const double> alice_env, std::span<const double> bob_env,
                               const Thresholds& th, std::size_t m, double fraction, RandomStream& rng);

BitString quantize_lossless(std::span<const double> env, const Thresholds& th);
BitString quantize_lossless(std::span<const double> env, const ThresholdSchedule& schedule);

struct DopplerSpectrum {
  std::vector<double> bins;
  bool normalized = false;
};

/// |DFT|^2 of a window of complex channel samples, normalized to sum 1 when possible.
DopplerSpectrum periodogram(std::span<const Complex> window);

/// Pearson correlation of two normalized spectra on the same grid.
/// Throws std::domain_error("flat spectrum") when either has zero variance.
double doppler_correlation(const DopplerSpectrum& x, const DopplerSpectrum& y);

bool refresh_due(std::size_t windows_elapsed, double rho, double rho_threshold, std::size_t region_budget);

struct RefreshPolicy {
  std::size_t region_budget = 10;
  std::size_t region_samples = 1;  // samples per coherence region
  double rho_threshold = 0.9;

  std::size_t window() const { return region_budget * region_samples; }
};

/// Refresh points (first is always 0) chosen from one party's complex trace.
std::vector<std::size_t> plan_refresh(std::span<const Complex> trace, const RefreshPolicy& policy);

}  // namespace v2vkey
