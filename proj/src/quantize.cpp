#include "v2vkey/quantize.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace v2vkey {
namespace {

double median_of(std::span<const double> env) {
  std::vector<double> v(env.begin(), env.end());
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

// +1 strictly above q+, -1 strictly below q-, 0 inside [q-, q+].
std::vector<std::int8_t> classify(std::span<const double> env, const ThresholdSchedule& sched) {
  std::vector<std::int8_t> cls(env.size(), 0);
  for (std::size_t e = 0; e < sched.starts.size(); ++e) {
    const std::size_t begin = sched.starts[e];
    const std::size_t end = e + 1 < sched.starts.size() ? sched.starts[e + 1] : env.size();
    const Thresholds& th = sched.epochs[e];
    for (std::size_t k = begin; k < std::min(end, env.size()); ++k) {
      if (env[k] > th.upper)
        cls[k] = 1;
      else if (env[k] < th.lower)
        cls[k] = -1;
    }
  }
  return cls;
}

std::vector<Excursion> runs_of(std::span<const std::int8_t> cls, std::size_t m) {
  std::vector<Excursion> out;
  std::size_t i = 0;
  while (i < cls.size()) {
    if (cls[i] == 0) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < cls.size() && cls[j + 1] == cls[i]) ++j;
    if (j - i + 1 >= m)
      out.push_back({i, j, static_cast<std::uint8_t>(cls[i] > 0 ? 1 : 0), (i + j) / 2});
    i = j + 1;
  }
  return out;
}

void check_schedule(const ThresholdSchedule& s, QuantMode mode) {
  if (s.starts.empty() || s.starts.size() != s.epochs.size() || s.starts.front() != 0)
    throw std::invalid_argument("ThresholdSchedule: malformed epochs");
  for (const auto& th : s.epochs)
    if (th.mode != mode) throw std::invalid_argument("ThresholdSchedule: wrong quantization mode");
}

}  // namespace

Thresholds compute_thresholds(std::span<const double> env, double gamma, QuantMode mode) {
  if (env.empty()) throw std::invalid_argument("compute_thresholds: empty envelope");
  if (gamma < 0.0) throw std::invalid_argument("compute_thresholds: gamma must be >= 0");

  Thresholds th;
  th.mode = mode;
  th.gamma = gamma;
  if (mode == QuantMode::SingleLossless) {
    th.single = median_of(env);
    return th;
  }
  const double n = static_cast<double>(env.size());
  const double mean = std::accumulate(env.begin(), env.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : env) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / n);
  if (sd == 0.0) throw std::domain_error("degenerate envelope");
  th.lower = mean - gamma * sd;
  th.upper = mean + gamma * sd;
  return th;
}

ThresholdSchedule ThresholdSchedule::constant(const Thresholds& th) { return {{0}, {th}}; }

const Thresholds& ThresholdSchedule::at(std::size_t sample) const {
  const auto it = std::upper_bound(starts.begin(), starts.end(), sample);
  return epochs[static_cast<std::size_t>(std::distance(starts.begin(), it)) - 1];
}

ThresholdSchedule build_schedule(std::span<const double> env, std::span<const std::size_t> refresh_points,
                                 std::size_t window, double gamma, QuantMode mode) {
  if (env.empty()) throw std::invalid_argument("build_schedule: empty envelope");
  if (refresh_points.empty() || refresh_points.front() != 0)
    throw std::invalid_argument("build_schedule: refresh points must start at 0");
  if (window == 0) throw std::invalid_argument("build_schedule: window must be >= 1");

  ThresholdSchedule s;
  s.starts.assign(refresh_points.begin(), refresh_points.end());
  s.epochs.reserve(s.starts.size());
  const std::size_t w = std::min(window, env.size());
  for (std::size_t i = 0; i < s.starts.size(); ++i) {
    if (i > 0 && s.starts[i] <= s.starts[i - 1])
      throw std::invalid_argument("build_schedule: refresh points must increase");
    // Near the end the fitting window slides back so it always holds `w` samples.
    const std::size_t begin = std::min(s.starts[i], env.size() - w);
    Thresholds th = compute_thresholds(env.subspan(begin, w), gamma, mode);
    th.window_id = i;
    s.epochs.push_back(th);
  }
  return s;
}

std::vector<Excursion> find_excursions(std::span<const double> env, const ThresholdSchedule& schedule,
                                       std::size_t m) {
  if (m < 1) throw std::invalid_argument("find_excursions: m must be >= 1");
  check_schedule(schedule, QuantMode::DualLossy);
  const auto cls = classify(env, schedule);
  return runs_of(cls, m);
}

std::vector<Excursion> find_excursions(std::span<const double> env, const Thresholds& th, std::size_t m) {
  return find_excursions(env, ThresholdSchedule::constant(th), m);
}

IndexingResult index_reconcile(std::span<const double> alice_env, std::span<const double> bob_env,
                               const ThresholdSchedule& alice_th, const ThresholdSchedule& bob_th,
                               std::size_t m, double fraction, RandomStream& rng) {
  if (alice_env.size() != bob_env.size()) throw std::invalid_argument("index_reconcile: length mismatch");
  if (m < 1) throw std::invalid_argument("index_reconcile: m must be >= 1");
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw std::invalid_argument("index_reconcile: fraction must be in (0, 1]");
  check_schedule(alice_th, QuantMode::DualLossy);
  check_schedule(bob_th, QuantMode::DualLossy);

  const auto a_cls = classify(alice_env, alice_th);
  const auto b_cls = classify(bob_env, bob_th);
  const auto excursions = runs_of(a_cls, m);

  // Alice's random selection; order of L_a is by sample index.
  std::vector<std::size_t> chosen(excursions.size());
  std::iota(chosen.begin(), chosen.end(), std::size_t{0});
  if (fraction < 1.0) {
    const auto keep = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(chosen.size())));
    for (std::size_t i = 0; i < keep; ++i)
      std::swap(chosen[i], chosen[i + rng.below(chosen.size() - i)]);
    chosen.resize(keep);
    std::sort(chosen.begin(), chosen.end());
  }

  IndexingResult r;
  r.alice_list.reserve(chosen.size());
  for (std::size_t e : chosen) r.alice_list.push_back(excursions[e].center);

  std::vector<std::uint8_t> a_bits, b_bits;
  const std::size_t half = (m - 1) / 2;
  const std::size_t n = bob_env.size();
  for (std::size_t c : r.alice_list) {
    if (c < half || c - half + m > n) continue;
    const std::size_t lo = c - half;
    const std::int8_t side = b_cls[lo];
    if (side == 0) continue;
    bool same = true;
    for (std::size_t k = lo; k < lo + m && same; ++k) same = (b_cls[k] == side);
    if (!same) continue;
    r.bob_list.push_back(c);
    a_bits.push_back(a_cls[c] > 0 ? 1 : 0);
    b_bits.push_back(b_cls[c] > 0 ? 1 : 0);
  }
  r.discarded = r.alice_list.size() - r.bob_list.size();
  r.alice = BitString(std::move(a_bits), r.bob_list);
  r.bob = BitString(std::move(b_bits), r.bob_list);
  return r;
}

IndexingResult index_reconcile(std::span<const double> alice_env, std::span<const double> bob_env,
                               const Thresholds& th, std::size_t m, double fraction, RandomStream& rng) {
  const auto sched = ThresholdSchedule::constant(th);
  return index_reconcile(alice_env, bob_env, sched, sched, m, fraction, rng);
}

BitString quantize_lossless(std::span<const double> env, const ThresholdSchedule& schedule) {
  check_schedule(schedule, QuantMode::SingleLossless);
  std::vector<std::uint8_t> bits(env.size());
  std::vector<std::size_t> idx(env.size());
  for (std::size_t e = 0; e < schedule.starts.size(); ++e) {
    const std::size_t begin = schedule.starts[e];
    const std::size_t end = e + 1 < schedule.starts.size() ? schedule.starts[e + 1] : env.size();
    const double q = schedule.epochs[e].single;
    for (std::size_t k = begin; k < std::min(end, env.size()); ++k) {
      bits[k] = env[k] >= q ? 1 : 0;
      idx[k] = k;
    }
  }
  return BitString(std::move(bits), std::move(idx));
}

BitString quantize_lossless(std::span<const double> env, const Thresholds& th) {
  return quantize_lossless(env, ThresholdSchedule::constant(th));
}

DopplerSpectrum periodogram(std::span<const Complex> window) {
  const std::size_t n = window.size();
  thread_local std::vector<Complex> twiddle;
  if (twiddle.size() != n) {
    twiddle.resize(n);
    for (std::size_t k = 0; k < n; ++k)
      twiddle[k] = std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n));
  }
  DopplerSpectrum s;
  s.bins.assign(n, 0.0);
  for (std::size_t f = 0; f < n; ++f) {
    Complex acc{};
    for (std::size_t k = 0; k < n; ++k) acc += window[k] * twiddle[(f * k) % n];
    s.bins[f] = std::norm(acc);
  }
  const double total = std::accumulate(s.bins.begin(), s.bins.end(), 0.0);
  if (total > 0.0) {
    for (double& b : s.bins) b /= total;
    s.normalized = true;
  }
  return s;
}

double doppler_correlation(const DopplerSpectrum& x, const DopplerSpectrum& y) {
  if (x.bins.size() != y.bins.size() || x.bins.empty())
    throw std::invalid_argument("doppler_correlation: spectra on different grids");
  if (!x.normalized || !y.normalized) throw std::invalid_argument("doppler_correlation: spectra must be normalized");
  const double n = static_cast<double>(x.bins.size());
  const double mx = std::accumulate(x.bins.begin(), x.bins.end(), 0.0) / n;
  const double my = std::accumulate(y.bins.begin(), y.bins.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.bins.size(); ++i) {
    const double dx = x.bins[i] - mx;
    const double dy = y.bins[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw std::domain_error("flat spectrum");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

bool refresh_due(std::size_t windows_elapsed, double rho, double rho_threshold, std::size_t region_budget) {
  if (region_budget < 1) throw std::invalid_argument("refresh_due: region_budget must be >= 1");
  return windows_elapsed >= region_budget || rho < rho_threshold;
}

std::vector<std::size_t> plan_refresh(std::span<const Complex> trace, const RefreshPolicy& policy) {
  if (policy.region_budget < 1 || policy.region_samples < 1)
    throw std::invalid_argument("plan_refresh: region budget and size must be >= 1");
  const std::size_t n = trace.size();
  const std::size_t w = std::min(policy.window(), n);
  std::vector<std::size_t> points{0};
  if (n == 0) return points;

  auto spectrum_at = [&](std::size_t begin) {
    begin = std::min(begin, n - w);
    return periodogram(trace.subspan(begin, w));
  };
  auto correlation = [](const DopplerSpectrum& a, const DopplerSpectrum& b) {
    if (!a.normalized || !b.normalized) return 1.0;
    try {
      return doppler_correlation(a, b);
    } catch (const std::domain_error&) {
      return 1.0;  // flat spectra carry no evidence of change
    }
  };

  DopplerSpectrum reference = spectrum_at(0);
  std::size_t regions = 0;
  for (std::size_t pos = policy.region_samples; pos < n; pos += policy.region_samples) {
    ++regions;
    double rho = 1.0;
    if (pos >= w) rho = correlation(reference, periodogram(trace.subspan(pos - w, w)));
    if (refresh_due(regions, rho, policy.rho_threshold, policy.region_budget)) {
      points.push_back(pos);
      regions = 0;
      reference = spectrum_at(pos);
    }
  }
  return points;
}

}  // namespace v2vkey
