#pragma once

// Monte Carlo synthesis of a 3D vehicle-to-vehicle Rayleigh channel: a sum of
// L constant-amplitude multipath components whose Doppler shifts combine
// transmitter, receiver and single-bounce mobile-scatterer motion.

#include <complex>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "v2vkey/rng.hpp"

namespace v2vkey {

using Complex = std::complex<double>;

/// Closed interval [min, max] in radians.
struct AngleInterval {
  double min = 0.0;
  double max = 0.0;
};

enum class Normalization {
  Sqrt2OverL,  ///< |a_l| = sqrt(2/L): total power 2
  UnitPower,        ///< |a_l| = sqrt(1/L): total power 1
};

struct V2VChannelParams {
  int paths = 20;
  double carrier_hz = 5.9e9;
  double propagation_speed = 3.0e8;
  double tx_speed = 30.0;  // m/s
  double rx_speed = 25.0;  // m/s
  AngleInterval azimuth_tx{-std::numbers::pi, std::numbers::pi};
  AngleInterval azimuth_rx{-std::numbers::pi, std::numbers::pi};
  AngleInterval elevation_tx{-std::numbers::pi / 2, std::numbers::pi / 2};
  AngleInterval elevation_rx{-std::numbers::pi / 2, std::numbers::pi / 2};
  double weibull_shape = 0.8;
  double weibull_scale = 0.0;         // set by default_channel_params()
  double scatterer_speed_cap = 0.0;   // u_Smax, used only for the Doppler bound
  Normalization normalization = Normalization::Sqrt2OverL;
  std::size_t n_samples = 100000;
  double probe_rate_factor = 1.0;

  double wavelength() const { return propagation_speed / carrier_hz; }
};

/// Default scenario: L = 20 at 5.9 GHz, full-range angle intervals, Weibull shape 0.8
/// with scale chosen for a 10 m/s mean scatterer speed, u_Smax at the 99.9th percentile.
V2VChannelParams default_channel_params();

/// Throws std::invalid_argument naming the first violated invariant.
void validate(const V2VChannelParams& params);

// Weibull speed law with density w u^(b-1) exp(-w u^b / b).
double weibull_cdf(double shape, double scale, double speed);
double weibull_quantile(double shape, double scale, double probability);
double weibull_mean(double shape, double scale);
/// Scale parameter w that gives the requested mean speed for shape b.
double weibull_scale_for_mean(double shape, double mean_speed);

struct DopplerBounds {
  double max_doppler_hz = 0.0;       // u_max
  double min_coherence_time_s = 0.0; // T_c_min = 1/u_max
  double probe_rate_hz = 0.0;        // f_P = factor / T_c_min
};

/// Maximum Doppler shift fc/c (u_T + u_R + 2 u_Smax) and the probing rate derived from it.
/// Throws std::domain_error("static channel: u_max = 0") when every speed is zero.
DopplerBounds doppler_bounds(const V2VChannelParams& params);

/// Draws one scatterer speed by inverse CDF: u = (-(b/w) ln(1 - U))^(1/b).
double sample_scatterer_speed(double shape, double scale, RandomStream& rng);

struct MultipathComponent {
  double amplitude = 0.0;
  double phase = 0.0;
  double doppler_tx = 0.0;         // Hz
  double doppler_scatterer = 0.0;  // Hz
  double doppler_rx = 0.0;         // Hz
  double scatterer_speed = 0.0;    // m/s, the realized draw behind doppler_scatterer

  double doppler() const { return doppler_tx + doppler_scatterer + doppler_rx; }
};

/// Doppler contribution of a moving terminal: (u/lambda) cos(elevation) cos(azimuth).
double terminal_doppler(double speed, double wavelength, double elevation, double azimuth);

/// Doppler contribution of a single bounce on a moving scatterer:
/// (u_S/lambda)(cos(aoa) + cos(aod)).
double scatterer_doppler(double speed, double wavelength, double aoa, double aod);

double component_amplitude(Normalization normalization, int paths);

std::vector<MultipathComponent> draw_components(const V2VChannelParams& params, RandomStream& rng);

struct ChannelTrace {
  std::vector<Complex> samples;
  double sample_interval = 0.0;
  std::uint64_t seed = 0;

  std::size_t size() const noexcept { return samples.size(); }
};

/// samples[k] = sum_l |a_l| exp(j phi_l) exp(j 2 pi v_l k / f_P), k = 0..n-1.
ChannelTrace synthesize_trace(std::span<const MultipathComponent> components, double probe_rate_hz,
                              std::size_t n);

std::vector<double> envelope(const ChannelTrace& trace);
std::vector<double> envelope(std::span<const Complex> samples);

/// Sum of squared component amplitudes (the analytic mean power of the trace).
double total_power(std::span<const MultipathComponent> components);

/// Draw components from `seed` and synthesize params.n_samples samples at the probing rate.
ChannelTrace generate_trace(const V2VChannelParams& params, std::uint64_t seed);

}  // namespace v2vkey
