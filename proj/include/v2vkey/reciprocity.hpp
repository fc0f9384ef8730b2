#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <span>

#include "v2vkey/channel.hpp"
#include "v2vkey/rng.hpp"

namespace v2vkey {

/// Alice's view differs from Bob's by a complex offset plus circular Gaussian
/// discrepancy of total variance `sigma2`; optional measurement noise at
/// `snr_db` (relative to the trace's mean power) hits each party independently.
struct NonReciprocityModel {
  double sigma2 = 0.0;
  Complex mean_offset{0.0, 0.0};
  std::optional<double> snr_db;
};

struct DiscrepancyEstimate {
  Complex mean{0.0, 0.0};
  double variance = 0.0;
  std::size_t probes = 0;
};

/// alice[k] = bob[k] + mean_offset + d[k] + n_A[k].
ChannelTrace derive_alice_trace(const ChannelTrace& bob, const NonReciprocityModel& model,
                                RandomStream& rng);

/// Bob's own measurement noise n_B[k] under the same SNR. Identity when snr_db is unset.
ChannelTrace add_measurement_noise(const ChannelTrace& trace, std::optional<double> snr_db,
                                   RandomStream& rng);

/// Mean and modulus-squared variance of the Alice - Bob differences over M probe pairs.
DiscrepancyEstimate estimate_discrepancy(std::span<const Complex> alice, std::span<const Complex> bob);

/// Subtracts the estimated mean offset from every sample of Alice's trace.
ChannelTrace compensate(const ChannelTrace& alice, const DiscrepancyEstimate& estimate);

}  // namespace v2vkey
