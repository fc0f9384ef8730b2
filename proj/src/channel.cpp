#include "v2vkey/channel.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace v2vkey {
namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(std::string("V2VChannelParams: ") + what);
}

bool inside(const AngleInterval& iv, double lo, double hi) {
  return iv.min <= iv.max && iv.min >= lo && iv.max <= hi;
}

}  // namespace

double weibull_cdf(double shape, double scale, double speed) {
  if (speed <= 0.0) return 0.0;
  return -std::expm1(-scale * std::pow(speed, shape) / shape);
}

double weibull_quantile(double shape, double scale, double probability) {
  if (!(probability >= 0.0 && probability < 1.0))
    throw std::invalid_argument("weibull_quantile: probability must be in [0, 1)");
  return std::pow(-(shape / scale) * std::log1p(-probability), 1.0 / shape);
}

double weibull_mean(double shape, double scale) {
  // u^b/(b/w) is Exp(1), so u = lambda E^(1/b) with lambda = (b/w)^(1/b).
  const double lambda = std::pow(shape / scale, 1.0 / shape);
  return lambda * std::tgamma(1.0 + 1.0 / shape);
}

double weibull_scale_for_mean(double shape, double mean_speed) {
  const double lambda = mean_speed / std::tgamma(1.0 + 1.0 / shape);
  return shape / std::pow(lambda, shape);
}

V2VChannelParams default_channel_params() {
  V2VChannelParams p;
  p.weibull_scale = weibull_scale_for_mean(p.weibull_shape, 10.0);
  p.scatterer_speed_cap = weibull_quantile(p.weibull_shape, p.weibull_scale, 0.999);
  return p;
}

void validate(const V2VChannelParams& p) {
  constexpr double pi = std::numbers::pi;
  require(p.paths >= 1, "paths must be >= 1");
  require(p.carrier_hz > 0.0, "carrier frequency must be > 0");
  require(p.propagation_speed > 0.0, "propagation speed must be > 0");
  require(p.tx_speed >= 0.0 && p.rx_speed >= 0.0 && p.scatterer_speed_cap >= 0.0,
          "speeds must be >= 0");
  require(inside(p.azimuth_tx, -pi, pi) && inside(p.azimuth_rx, -pi, pi),
          "azimuth intervals must lie in [-pi, pi]");
  require(inside(p.elevation_tx, -pi / 2, pi / 2) && inside(p.elevation_rx, -pi / 2, pi / 2),
          "elevation intervals must lie in [-pi/2, pi/2]");
  require(p.weibull_shape > 0.0 && p.weibull_shape <= 1.0, "Weibull shape must be in (0, 1]");
  require(p.weibull_scale > 0.0, "Weibull scale must be > 0");
  require(p.n_samples >= 1, "n_samples must be >= 1");
  require(p.probe_rate_factor > 0.0 && p.probe_rate_factor <= 1.0,
          "probe_rate_factor must be in (0, 1]");
}

DopplerBounds doppler_bounds(const V2VChannelParams& p) {
  const double speed_sum = p.tx_speed + p.rx_speed + 2.0 * p.scatterer_speed_cap;
  if (speed_sum <= 0.0) throw std::domain_error("static channel: u_max = 0");
  DopplerBounds b;
  b.max_doppler_hz = p.carrier_hz / p.propagation_speed * speed_sum;
  b.min_coherence_time_s = 1.0 / b.max_doppler_hz;
  b.probe_rate_hz = p.probe_rate_factor / b.min_coherence_time_s;
  return b;
}

double sample_scatterer_speed(double shape, double scale, RandomStream& rng) {
  const double u = rng.uniform();  // [0, 1)
  return std::pow(-(shape / scale) * std::log1p(-u), 1.0 / shape);
}

double terminal_doppler(double speed, double wavelength, double elevation, double azimuth) {
  return speed / wavelength * std::cos(elevation) * std::cos(azimuth);
}

double scatterer_doppler(double speed, double wavelength, double aoa, double aod) {
  return speed / wavelength * (std::cos(aoa) + std::cos(aod));
}

double component_amplitude(Normalization normalization, int paths) {
  const double power = normalization == Normalization::Sqrt2OverL ? 2.0 : 1.0;
  return std::sqrt(power / paths);
}

std::vector<MultipathComponent> draw_components(const V2VChannelParams& p, RandomStream& rng) {
  validate(p);
  constexpr double pi = std::numbers::pi;
  const double lambda = p.wavelength();
  const double amplitude = component_amplitude(p.normalization, p.paths);
  std::vector<MultipathComponent> out(static_cast<std::size_t>(p.paths));
  // Fixed draw order per component keeps traces reproducible when fields are added.
  for (auto& c : out) {
    c.amplitude = amplitude;
    c.phase = rng.uniform(-pi, pi);
    const double az_t = rng.uniform(p.azimuth_tx.min, p.azimuth_tx.max);
    const double el_t = rng.uniform(p.elevation_tx.min, p.elevation_tx.max);
    const double az_r = rng.uniform(p.azimuth_rx.min, p.azimuth_rx.max);
    const double el_r = rng.uniform(p.elevation_rx.min, p.elevation_rx.max);
    const double aoa_s = rng.uniform(-pi, pi);
    const double aod_s = rng.uniform(-pi, pi);
    c.scatterer_speed = sample_scatterer_speed(p.weibull_shape, p.weibull_scale, rng);
    c.doppler_tx = terminal_doppler(p.tx_speed, lambda, el_t, az_t);
    c.doppler_rx = terminal_doppler(p.rx_speed, lambda, el_r, az_r);
    c.doppler_scatterer = scatterer_doppler(c.scatterer_speed, lambda, aoa_s, aod_s);
  }
  return out;
}

ChannelTrace synthesize_trace(std::span<const MultipathComponent> components, double probe_rate_hz,
                              std::size_t n) {
  if (components.empty()) throw std::invalid_argument("synthesize_trace: empty component list");
  if (n < 1) throw std::invalid_argument("synthesize_trace: n must be >= 1");
  if (!(probe_rate_hz > 0.0)) throw std::invalid_argument("synthesize_trace: probe rate must be > 0");

  ChannelTrace trace;
  trace.sample_interval = 1.0 / probe_rate_hz;
  trace.samples.assign(n, Complex{});
  for (const auto& c : components) {
    const Complex weight = std::polar(c.amplitude, c.phase);
    // Cycles per sample, reduced to [0, 1) each step so k * step never loses precision.
    const double step = c.doppler() / probe_rate_hz;
    for (std::size_t k = 0; k < n; ++k) {
      const double cycles = step * static_cast<double>(k);
      const double frac = cycles - std::floor(cycles);
      trace.samples[k] += weight * std::polar(1.0, 2.0 * std::numbers::pi * frac);
    }
  }
  return trace;
}

std::vector<double> envelope(std::span<const Complex> samples) {
  std::vector<double> out(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) out[i] = std::abs(samples[i]);
  return out;
}

std::vector<double> envelope(const ChannelTrace& trace) { return envelope(trace.samples); }

double total_power(std::span<const MultipathComponent> components) {
  double s = 0.0;
  for (const auto& c : components) s += c.amplitude * c.amplitude;
  return s;
}

ChannelTrace generate_trace(const V2VChannelParams& params, std::uint64_t seed) {
  RandomStream rng(seed);
  const auto components = draw_components(params, rng);
  const auto bounds = doppler_bounds(params);
  auto trace = synthesize_trace(components, bounds.probe_rate_hz, params.n_samples);
  trace.seed = seed;
  return trace;
}

}  // namespace v2vkey
