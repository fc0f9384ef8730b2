#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include "oracles.hpp"
#include "v2vkey/channel.hpp"
#include "v2vkey/quantize.hpp"

using namespace v2vkey;

namespace {

constexpr double pi = std::numbers::pi;

V2VChannelParams eq2_example() {
  V2VChannelParams p = default_channel_params();
  p.tx_speed = 30.0;
  p.rx_speed = 25.0;
  p.scatterer_speed_cap = 10.0;
  return p;
}

// Weibull density integrated by composite Simpson on a u = t^(1/b) substitution
// (keeps the integrand finite at 0 for b < 1).
double weibull_cdf_by_quadrature(double b, double w, double x) {
  const double tmax = std::pow(x, b);
  const int n = 20000;
  const double h = tmax / n;
  auto f = [&](double t) { return (w / b) * std::exp(-w * t / b); };  // density in t = u^b
  double s = f(0.0) + f(tmax);
  for (int i = 1; i < n; ++i) s += f(i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

}  // namespace

TEST_CASE("doppler bounds of the 30/25/10 m/s example") {
  const auto b = doppler_bounds(eq2_example());
  CHECK(b.max_doppler_hz == doctest::Approx(oracle::hp_max_doppler(5.9e9, 3e8, 30, 25, 10)).epsilon(1e-14));
  CHECK(b.max_doppler_hz == doctest::Approx(1475.0).epsilon(1e-12));
  CHECK(b.min_coherence_time_s == doctest::Approx(6.7797e-4).epsilon(1e-4));
  CHECK(b.probe_rate_hz == doctest::Approx(b.max_doppler_hz));
}

TEST_CASE("static channel is rejected") {
  auto p = eq2_example();
  p.tx_speed = p.rx_speed = p.scatterer_speed_cap = 0.0;
  CHECK_THROWS_WITH_AS(doppler_bounds(p), "static channel: u_max = 0", std::domain_error);
}

TEST_CASE("doubling every speed doubles u_max and halves the coherence time") {
  auto p = eq2_example();
  const auto a = doppler_bounds(p);
  p.tx_speed *= 2;
  p.rx_speed *= 2;
  p.scatterer_speed_cap *= 2;
  const auto b = doppler_bounds(p);
  CHECK(b.max_doppler_hz == doctest::Approx(2 * a.max_doppler_hz));
  CHECK(b.min_coherence_time_s == doctest::Approx(a.min_coherence_time_s / 2));
}

TEST_CASE("probe rate never exceeds u_max") {
  auto p = default_channel_params();
  for (double f : {0.1, 0.5, 0.999, 1.0}) {
    p.probe_rate_factor = f;
    const auto b = doppler_bounds(p);
    CHECK(b.probe_rate_hz <= b.max_doppler_hz);
    CHECK(b.probe_rate_hz == doctest::Approx(f * b.max_doppler_hz));
  }
  p.probe_rate_factor = 1.5;
  CHECK_THROWS_AS(validate(p), std::invalid_argument);
}

TEST_CASE("parameter validation") {
  auto p = default_channel_params();
  CHECK_NOTHROW(validate(p));
  auto bad = p;
  bad.paths = 0;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  bad = p;
  bad.weibull_shape = 1.2;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  bad = p;
  bad.azimuth_tx = {-4.0, 0.0};
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  bad = p;
  bad.elevation_rx = {0.5, 0.2};
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  bad = p;
  bad.rx_speed = -1.0;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
}

TEST_CASE("default preset: 10 m/s mean speed, cap at the 99.9th percentile") {
  const auto p = default_channel_params();
  CHECK(weibull_mean(p.weibull_shape, p.weibull_scale) == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(weibull_cdf(p.weibull_shape, p.weibull_scale, p.scatterer_speed_cap) == doctest::Approx(0.999).epsilon(1e-12));
}

TEST_CASE("Weibull CDF agrees with numerical integration of the density") {
  for (double b : {0.5, 0.8, 1.0})
    for (double w : {0.3, 2.0})
      for (double x : {0.1, 1.0, 5.0})
        CHECK(weibull_cdf(b, w, x) == doctest::Approx(weibull_cdf_by_quadrature(b, w, x)).epsilon(1e-8));
}

TEST_CASE("b = 1 reduces to an exponential with rate w") {
  RandomStream rng(11);
  double sum = 0.0;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) sum += sample_scatterer_speed(1.0, 2.0, rng);
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("empirical CDF at the analytic median is one half, all draws non-negative") {
  const double b = 0.8, w = 0.4;
  const double median = std::pow(-(b / w) * std::log(0.5), 1.0 / b);
  RandomStream rng(12);
  int below = 0, negative = 0;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) {
    const double u = sample_scatterer_speed(b, w, rng);
    below += u <= median;
    negative += u < 0.0;
  }
  CHECK(static_cast<double>(below) / n == doctest::Approx(0.5).epsilon(0.02));
  CHECK(std::abs(static_cast<double>(below) / n - 0.5) <= 0.01);
  CHECK(negative == 0);
}

TEST_CASE("per-component Doppler terms") {
  const double lambda = 3e8 / 5.9e9;
  CHECK(terminal_doppler(30.0, lambda, 0.0, 0.0) == 30.0 / lambda);
  CHECK(scatterer_doppler(10.0, lambda, 0.0, 0.0) == doctest::Approx(393.3333333333).epsilon(1e-10));
  CHECK(scatterer_doppler(10.0, lambda, 0.0, 0.0) ==
        doctest::Approx(oracle::hp_max_doppler(5.9e9, 3e8, 0.0, 0.0, 10.0)).epsilon(1e-14));
}

TEST_CASE("drawn components respect amplitude and terminal Doppler limits") {
  auto p = default_channel_params();
  const double vt = p.tx_speed / p.wavelength(), vr = p.rx_speed / p.wavelength();
  for (auto norm : {Normalization::Sqrt2OverL, Normalization::UnitPower}) {
    p.normalization = norm;
    RandomStream rng(3);
    const auto comps = draw_components(p, rng);
    REQUIRE(comps.size() == 20u);
    const double expected = std::sqrt((norm == Normalization::Sqrt2OverL ? 2.0 : 1.0) / 20.0);
    for (const auto& c : comps) {
      CHECK(c.amplitude == doctest::Approx(expected).epsilon(1e-15));
      CHECK(std::abs(c.doppler_tx) <= vt);
      CHECK(std::abs(c.doppler_rx) <= vr);
      CHECK(c.phase >= -pi);
      CHECK(c.phase <= pi);
      CHECK(c.scatterer_speed >= 0.0);
      CHECK(std::abs(c.doppler_scatterer) <= 2.0 * c.scatterer_speed / p.wavelength() + 1e-9);
    }
    CHECK(total_power(comps) == doctest::Approx(norm == Normalization::Sqrt2OverL ? 2.0 : 1.0));
  }
}

TEST_CASE("component phases are uniform on [-pi, pi]") {
  const auto p = default_channel_params();
  RandomStream rng(21);
  std::vector<double> phases;
  while (phases.size() < 100000)
    for (const auto& c : draw_components(p, rng)) phases.push_back(c.phase);
  const auto n = phases.size();
  const double d = oracle::ks_distance(std::move(phases), [](double x) { return std::clamp((x + pi) / (2 * pi), 0.0, 1.0); });
  CHECK(oracle::ks_pvalue(d, n) > 0.01);
}

TEST_CASE("narrow angle intervals confine the terminal Doppler") {
  auto p = default_channel_params();
  p.azimuth_tx = {0.0, 0.0};
  p.elevation_tx = {0.0, 0.0};
  RandomStream rng(4);
  for (const auto& c : draw_components(p, rng)) CHECK(c.doppler_tx == p.tx_speed / p.wavelength());
}

TEST_CASE("synthesize: zero Doppler gives a constant trace") {
  const MultipathComponent c{std::sqrt(2.0), 0.0, 0.0, 0.0, 0.0, 0.0};
  const auto t = synthesize_trace(std::span(&c, 1), 1000.0, 16);
  REQUIRE(t.size() == 16u);
  CHECK(t.sample_interval == doctest::Approx(1e-3));
  for (const auto& s : t.samples) {
    CHECK(s.real() == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
    CHECK(s.imag() == doctest::Approx(0.0));
  }
}

TEST_CASE("synthesize: single tone at 100 Hz sampled at 1 kHz") {
  const MultipathComponent c{std::sqrt(2.0), 0.0, 100.0, 0.0, 0.0, 0.0};
  const auto t = synthesize_trace(std::span(&c, 1), 1000.0, 1000);
  for (std::size_t k = 0; k < t.size(); ++k) {
    const Complex want = std::sqrt(2.0) * std::exp(Complex(0.0, 2.0 * pi * 0.1 * static_cast<double>(k)));
    CHECK(std::abs(t.samples[k] - want) < 1e-12);
  }
}

TEST_CASE("synthesize argument checks") {
  const MultipathComponent c{1.0, 0.0, 1.0, 0.0, 0.0, 0.0};
  CHECK_THROWS_AS(synthesize_trace({}, 1000.0, 4), std::invalid_argument);
  CHECK_THROWS_AS(synthesize_trace(std::span(&c, 1), 0.0, 4), std::invalid_argument);
  CHECK_THROWS_AS(synthesize_trace(std::span(&c, 1), 1000.0, 0), std::invalid_argument);
}

TEST_CASE("envelope is the element-wise modulus") {
  const std::vector<Complex> s{{3.0, 4.0}};
  CHECK(envelope(s) == std::vector<double>{5.0});
  const std::vector<Complex> zeros(7);
  CHECK(envelope(zeros) == std::vector<double>(7, 0.0));
}

TEST_CASE("mean power matches the analytic power sum over 20 seeds") {
  const auto p = default_channel_params();
  double acc = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto t = generate_trace(p, seed);
    double s = 0.0;
    for (const auto& g : t.samples) s += std::norm(g);
    acc += s / static_cast<double>(t.size());
  }
  CHECK(acc / 20.0 == doctest::Approx(2.0).epsilon(0.02));
}

TEST_CASE("in-phase component carries the kurtosis of a 20-phasor sum") {
  // X = a sum cos(phi_l): variance L a^2 / 2, excess kurtosis -3/(2L) for iid uniform phases.
  // Pooled over 20 traces the time samples follow that marginal.
  const auto p = default_channel_params();
  double m2 = 0.0, m4 = 0.0, m1 = 0.0;
  std::size_t n = 0;
  for (std::uint64_t seed = 100; seed < 120; ++seed) {
    const auto t = generate_trace(p, seed);
    for (const auto& g : t.samples) {
      const double x = g.real();
      m1 += x;
      m2 += x * x;
      m4 += x * x * x * x;
      ++n;
    }
  }
  m1 /= n;
  m2 /= n;
  m4 /= n;
  CHECK(std::abs(m1) < 0.05);
  CHECK(m2 == doctest::Approx(1.0).epsilon(0.05));
  const double kurt = m4 / (m2 * m2);
  CHECK(kurt == doctest::Approx(3.0 - 3.0 / 40.0).epsilon(0.02));
}

TEST_CASE("lag-1 correlation follows the component Doppler phases") {
  // For distinct Dopplers the time-averaged lag-1 correlation tends to
  // sum |a_l|^2 exp(j 2 pi v_l / f_P) / sum |a_l|^2.
  const auto p = default_channel_params();
  const auto bounds = doppler_bounds(p);
  double err = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    RandomStream rng(seed);
    const auto comps = draw_components(p, rng);
    const auto t = synthesize_trace(comps, bounds.probe_rate_hz, 100000);
    Complex num{}, predicted{};
    double den = 0.0, power = 0.0;
    for (std::size_t k = 0; k + 1 < t.size(); ++k) {
      num += t.samples[k + 1] * std::conj(t.samples[k]);
      den += std::norm(t.samples[k]);
    }
    for (const auto& c : comps) {
      predicted += c.amplitude * c.amplitude * std::exp(Complex(0.0, 2 * pi * c.doppler() / bounds.probe_rate_hz));
      power += c.amplitude * c.amplitude;
    }
    err += std::abs(std::abs(num / den) - std::abs(predicted / power));
  }
  CHECK(err / 50.0 < 0.02);
}

TEST_CASE("successive probes decorrelate when the speed cap sits at the mean speed") {
  auto p = default_channel_params();
  p.scatterer_speed_cap = 10.0;
  double acc = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto t = generate_trace(p, seed);
    Complex num{};
    double den = 0.0;
    for (std::size_t k = 0; k + 1 < t.size(); ++k) {
      num += t.samples[k + 1] * std::conj(t.samples[k]);
      den += std::norm(t.samples[k]);
    }
    acc += std::abs(num / den);
  }
  CHECK(acc / 50.0 < 0.6);
}

TEST_CASE("Doppler energy stays inside the realized maximum shift") {
  // Sample fast enough to avoid aliasing, Hann-window, and integrate the periodogram.
  const auto p = default_channel_params();
  const std::size_t n = 2048;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    RandomStream rng(seed);
    const auto comps = draw_components(p, rng);
    double max_speed = 0.0;
    for (const auto& c : comps) max_speed = std::max(max_speed, c.scatterer_speed);
    const double u_max = (p.tx_speed + p.rx_speed + 2.0 * max_speed) / p.wavelength();
    const double fs = 4.0 * u_max;
    auto t = synthesize_trace(comps, fs, n);
    for (std::size_t k = 0; k < n; ++k) t.samples[k] *= 0.5 - 0.5 * std::cos(2 * pi * static_cast<double>(k) / n);
    const auto spec = periodogram(t.samples);
    double inside = 0.0;
    for (std::size_t f = 0; f < n; ++f) {
      const double hz = (f < n / 2 ? static_cast<double>(f) : static_cast<double>(f) - n) * fs / n;
      if (std::abs(hz) <= u_max) inside += spec.bins[f];
    }
    CHECK(inside >= 0.99);
  }
}

TEST_CASE("identical params and seed give a bit-identical trace") {
  auto p = default_channel_params();
  p.n_samples = 5000;
  const auto a = generate_trace(p, 77), b = generate_trace(p, 77), c = generate_trace(p, 78);
  CHECK(a.samples == b.samples);
  CHECK(a.samples != c.samples);
  CHECK(a.seed == 77u);
  CHECK(a.size() == p.n_samples);
  CHECK(a.sample_interval == doctest::Approx(1.0 / doppler_bounds(p).probe_rate_hz));
}
