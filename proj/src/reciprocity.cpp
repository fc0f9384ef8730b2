#include "v2vkey/reciprocity.hpp"

#include <cmath>
#include <stdexcept>

namespace v2vkey {
namespace {

double mean_power(std::span<const Complex> s) {
  double acc = 0.0;
  for (const auto& x : s) acc += std::norm(x);
  return s.empty() ? 0.0 : acc / static_cast<double>(s.size());
}

Complex circular_gaussian(double variance, RandomStream& rng) {
  const double sd = std::sqrt(variance / 2.0);
  const double re = rng.normal();
  const double im = rng.normal();
  return {sd * re, sd * im};
}

double noise_variance(std::span<const Complex> s, double snr_db) {
  return mean_power(s) * std::pow(10.0, -snr_db / 10.0);
}

}  // namespace

ChannelTrace derive_alice_trace(const ChannelTrace& bob, const NonReciprocityModel& model,
                                RandomStream& rng) {
  if (bob.samples.empty()) throw std::invalid_argument("derive_alice_trace: empty trace");
  if (model.sigma2 < 0.0) throw std::invalid_argument("derive_alice_trace: sigma2 must be >= 0");

  ChannelTrace alice = bob;
  const double nv = model.snr_db ? noise_variance(bob.samples, *model.snr_db) : 0.0;
  for (auto& s : alice.samples) {
    s += model.mean_offset;
    if (model.sigma2 > 0.0) s += circular_gaussian(model.sigma2, rng);
    if (nv > 0.0) s += circular_gaussian(nv, rng);
  }
  return alice;
}

ChannelTrace add_measurement_noise(const ChannelTrace& trace, std::optional<double> snr_db,
                                   RandomStream& rng) {
  ChannelTrace out = trace;
  if (!snr_db) return out;
  const double nv = noise_variance(trace.samples, *snr_db);
  for (auto& s : out.samples) s += circular_gaussian(nv, rng);
  return out;
}

DiscrepancyEstimate estimate_discrepancy(std::span<const Complex> alice, std::span<const Complex> bob) {
  if (alice.size() != bob.size()) throw std::invalid_argument("estimate_discrepancy: length mismatch");
  if (alice.empty()) throw std::invalid_argument("estimate_discrepancy: M must be >= 1");

  const auto m = static_cast<double>(alice.size());
  Complex mean{};
  for (std::size_t i = 0; i < alice.size(); ++i) mean += alice[i] - bob[i];
  mean /= m;
  double var = 0.0;
  for (std::size_t i = 0; i < alice.size(); ++i) var += std::norm(alice[i] - bob[i] - mean);
  return {mean, var / m, alice.size()};
}

ChannelTrace compensate(const ChannelTrace& alice, const DiscrepancyEstimate& estimate) {
  ChannelTrace out = alice;
  for (auto& s : out.samples) s -= estimate.mean;
  return out;
}

}  // namespace v2vkey
