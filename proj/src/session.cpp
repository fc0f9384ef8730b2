#include <algorithm>
#include <cmath>
#include <cstring>

#include "v2vkey/harness.hpp"
#include "v2vkey/reconcile.hpp"
#include "v2vkey/rng.hpp"

namespace v2vkey {
namespace {

// Sub-stream tags under derive_seed(master, {trial, tag, ...}).
enum : std::uint64_t { kChannelTag = 1, kAliceTag = 2, kBobTag = 3, kIndexTag = 4, kBlockTag = 5, kAmplifyTag = 6 };

std::uint64_t trace_digest(const ChannelTrace& alice, const ChannelTrace& bob) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto eat = [&](const ChannelTrace& t) {
    for (const auto& z : t.samples) {
      for (double part : {z.real(), z.imag()}) {
        std::uint64_t u = 0;
        std::memcpy(&u, &part, sizeof u);
        for (int i = 0; i < 8; ++i) {
          h ^= (u >> (8 * i)) & 0xff;
          h *= 0x100000001b3ULL;
        }
      }
    }
  };
  eat(alice);
  eat(bob);
  return h;
}

// Everything both branches share: compensated traces, refresh plan and p_hat.
struct Prepared {
  double probe_rate = 0.0;
  std::size_t total_samples = 0;
  std::vector<double> env_alice;  // key window only
  std::vector<double> env_bob;
  std::vector<std::size_t> refresh_points;
  std::size_t fit_window = 0;
  double p_hat = 0.0;
  std::uint64_t digest = 0;
};

Prepared prepare(const ExperimentConfig& cfg, std::size_t trial) {
  const std::uint64_t t = trial;
  Prepared out;
  out.probe_rate = doppler_bounds(cfg.channel).probe_rate_hz;
  out.total_samples = session_samples(cfg);

  RandomStream channel_rng(derive_seed(cfg.master_seed, {t, kChannelTag}));
  const auto components = draw_components(cfg.channel, channel_rng);
  ChannelTrace bob = synthesize_trace(components, out.probe_rate, out.total_samples);
  bob.seed = derive_seed(cfg.master_seed, {t, kChannelTag});

  RandomStream alice_rng(derive_seed(cfg.master_seed, {t, kAliceTag}));
  RandomStream bob_rng(derive_seed(cfg.master_seed, {t, kBobTag}));
  ChannelTrace alice = derive_alice_trace(bob, cfg.nr, alice_rng);
  bob = add_measurement_noise(bob, cfg.nr.snr_db, bob_rng);

  // Calibration: both parties exchange the first M probes in the clear.
  const std::size_t m = cfg.reconcile.calibration_probes;
  const std::span<const Complex> a_all(alice.samples), b_all(bob.samples);
  const auto estimate = estimate_discrepancy(a_all.first(m), b_all.first(m));
  alice = compensate(alice, estimate);
  out.digest = trace_digest(alice, bob);

  const auto env_a = envelope(alice);
  const auto env_b = envelope(bob);
  out.fit_window = cfg.quant.fit_window ? cfg.quant.fit_window : cfg.quant.refresh.window();

  // Mismatch estimate from single-threshold bits of the public calibration prefix.
  const std::size_t mp = cfg.reconcile.mismatch_probes;
  {
    const std::span<const double> ca(env_a.data(), mp), cb(env_b.data(), mp);
    const auto points = plan_refresh(b_all.first(mp), cfg.quant.refresh);
    const auto sa = build_schedule(ca, points, out.fit_window, cfg.quant.gamma, QuantMode::SingleLossless);
    const auto sb = build_schedule(cb, points, out.fit_window, cfg.quant.gamma, QuantMode::SingleLossless);
    const double p = measure_bmr(quantize_lossless(ca, sa).view(), quantize_lossless(cb, sb).view());
    out.p_hat = std::clamp(p, cfg.reconcile.min_p_hat, cfg.reconcile.max_p_hat);
  }

  out.env_alice.assign(env_a.begin() + static_cast<std::ptrdiff_t>(mp), env_a.end());
  out.env_bob.assign(env_b.begin() + static_cast<std::ptrdiff_t>(mp), env_b.end());
  // Bob decides when thresholds are refitted and publishes the points.
  out.refresh_points = plan_refresh(b_all.subspan(mp), cfg.quant.refresh);
  return out;
}

double windowed_entropy(std::span<const std::uint8_t> bits, std::size_t window) {
  if (bits.size() < 8) return 0.0;
  return empirical_entropy(bits, std::min(window, bits.size())).mean;
}

double joint_ones(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  std::size_t both = 0;
  for (std::size_t i = 0; i < a.size(); ++i) both += (a[i] & b[i]);
  return static_cast<double>(both);
}

SessionReport base_report(const ExperimentConfig& cfg, const Prepared& prep, Scheme scheme) {
  SessionReport r;
  r.scheme = scheme;
  r.probe_rate_hz = prep.probe_rate;
  r.simulated_seconds = static_cast<double>(prep.total_samples) / prep.probe_rate;
  r.sigma2 = cfg.nr.sigma2;
  r.p_hat = prep.p_hat;
  r.config_fingerprint = config_fingerprint(cfg);
  r.trace_digest = prep.digest;
  return r;
}

void run_indexing(const ExperimentConfig& cfg, std::size_t trial, const Prepared& prep,
                  const std::vector<std::size_t>& key_lengths, std::vector<SessionReport>& out) {
  const auto sa = build_schedule(prep.env_alice, prep.refresh_points, prep.fit_window, cfg.quant.gamma,
                                 QuantMode::DualLossy);
  const auto sb = build_schedule(prep.env_bob, prep.refresh_points, prep.fit_window, cfg.quant.gamma,
                                 QuantMode::DualLossy);
  RandomStream rng(derive_seed(cfg.master_seed, {trial, kIndexTag}));
  const auto idx = index_reconcile(prep.env_alice, prep.env_bob, sa, sb, cfg.quant.m, cfg.quant.fraction, rng);

  const auto a = idx.alice.view();
  const auto b = idx.bob.view();
  const std::size_t mism = hamming_distance(a, b);

  SessionReport common = base_report(cfg, prep, Scheme::Indexing);
  // Announced indexes Bob could not confirm count against the scheme.
  common.bmr = idx.alice_list.empty()
                   ? 0.0
                   : static_cast<double>(idx.discarded + mism) / static_cast<double>(idx.alice_list.size());
  common.raw_bmr = b.empty() ? 0.0 : static_cast<double>(mism) / static_cast<double>(b.size());
  common.entropy_per_bit_mean = windowed_entropy(b, cfg.quant.entropy_window);
  common.secret_bit_rate =
      secret_bit_rate(prep.probe_rate, joint_ones(a, b) / static_cast<double>(prep.env_bob.size()));

  for (std::size_t key_len : key_lengths) {
    SessionReport r = common;
    r.key_len = key_len;
    const std::size_t chunk = key_len + kCheckBits;
    std::vector<KeyOutcome> log;
    for (std::size_t c = 0; (c + 1) * chunk <= a.size(); ++c) {
      const auto ca = a.subspan(c * chunk, chunk);
      const auto cb = b.subspan(c * chunk, chunk);
      ++r.blocks_attempted;
      r.leaked_bits_total += kCheckBits;
      if (digest64(ca) != digest64(cb)) {
        log.push_back({false, key_len});
        continue;
      }
      ++r.blocks_verified;
      const std::uint64_t seed = derive_seed(cfg.master_seed, {trial, kAmplifyTag, 0, key_len, c});
      const auto ka = privacy_amplify({BitString({ca.begin(), ca.end()}), kCheckBits, true}, seed, key_len);
      const auto kb = privacy_amplify({BitString({cb.begin(), cb.end()}), kCheckBits, true}, seed, key_len);
      log.push_back({verify_keys(ka, kb), key_len});
    }
    r.keys_generated = static_cast<std::size_t>(std::count_if(log.begin(), log.end(), [](auto& k) { return k.verified; }));
    r.kgr_keys_per_min = measure_kgr(log, key_len, r.simulated_seconds);
    out.push_back(r);
  }
}

void run_turbo(const ExperimentConfig& cfg, std::size_t trial, const Prepared& prep,
               const std::vector<std::size_t>& key_lengths, std::vector<SessionReport>& out) {
  const auto sa = build_schedule(prep.env_alice, prep.refresh_points, prep.fit_window, cfg.quant.gamma,
                                 QuantMode::SingleLossless);
  const auto sb = build_schedule(prep.env_bob, prep.refresh_points, prep.fit_window, cfg.quant.gamma,
                                 QuantMode::SingleLossless);
  const auto alice_bits = quantize_lossless(prep.env_alice, sa);
  const auto bob_bits = quantize_lossless(prep.env_bob, sb);
  const auto a = alice_bits.view();
  const auto b = bob_bits.view();

  TurboConfig tc = cfg.turbo;
  if (cfg.reconcile.adaptive_rate) {
    tc.puncture = Puncture::Periodic;
    tc.puncture_period = adaptive_puncture_period(cfg.reconcile, tc.rsc, prep.p_hat);
  }
  const std::size_t k = tc.block_len;
  const std::size_t blocks = a.size() / k;

  struct Block {
    std::size_t index = 0;
    std::vector<std::uint8_t> decoded;
    std::size_t leaked = 0;
  };
  std::vector<Block> verified;  // in block order
  std::size_t leaked_total = 0, residual = 0;
  for (std::size_t i = 0; i < blocks; ++i) {
    tc.interleaver_seed = derive_seed(cfg.master_seed, {trial, kBlockTag, i});
    const auto msg = bob_prepare(tc, b.subspan(i * k, k), static_cast<std::uint32_t>(i));
    auto res = alice_reconcile(tc, a.subspan(i * k, k), msg, prep.p_hat);
    residual += hamming_distance(res.decoded, b.subspan(i * k, k));
    leaked_total += msg.payload.size() + kCheckBits;
    if (res.ok()) verified.push_back({i, std::move(res.decoded), res.key->leaked_bits});
  }

  SessionReport common = base_report(cfg, prep, Scheme::TurboNR);
  common.raw_bmr = measure_bmr(a, b);
  common.bmr = blocks ? static_cast<double>(residual) / static_cast<double>(blocks * k) : common.raw_bmr;
  common.blocks_attempted = blocks;
  common.puncture_period = tc.puncture == Puncture::Periodic ? tc.puncture_period : 0;
  common.blocks_verified = verified.size();
  common.leaked_bits_total = leaked_total;
  common.entropy_per_bit_mean = windowed_entropy(b, cfg.quant.entropy_window);
  common.secret_bit_rate = secret_bit_rate(prep.probe_rate, joint_ones(a, b) / static_cast<double>(a.size()));

  for (std::size_t key_len : key_lengths) {
    SessionReport r = common;
    r.key_len = key_len;
    std::vector<KeyOutcome> log;
    // Verified blocks are pooled until the unleaked residue covers whole keys.
    std::vector<std::uint8_t> pool_a, pool_b;
    std::size_t pool_leak = 0, batch = 0;
    for (const auto& blk : verified) {
      const auto bob_block = b.subspan(blk.index * k, k);
      pool_a.insert(pool_a.end(), blk.decoded.begin(), blk.decoded.end());
      pool_b.insert(pool_b.end(), bob_block.begin(), bob_block.end());
      pool_leak += blk.leaked;
      if (pool_a.size() <= pool_leak || pool_a.size() - pool_leak < key_len) continue;
      const std::size_t n_keys = (pool_a.size() - pool_leak) / key_len;
      const std::uint64_t seed = derive_seed(cfg.master_seed, {trial, kAmplifyTag, 1, key_len, batch++});
      const auto ka = privacy_amplify({BitString(std::move(pool_a)), pool_leak, true}, seed, n_keys * key_len);
      const auto kb = privacy_amplify({BitString(std::move(pool_b)), pool_leak, true}, seed, n_keys * key_len);
      for (std::size_t j = 0; j < n_keys; ++j) {
        const bool same = std::equal(ka.bits.begin() + static_cast<std::ptrdiff_t>(j * key_len),
                                     ka.bits.begin() + static_cast<std::ptrdiff_t>((j + 1) * key_len),
                                     kb.bits.begin() + static_cast<std::ptrdiff_t>(j * key_len));
        log.push_back({same, key_len});
      }
      pool_a.clear();
      pool_b.clear();
      pool_leak = 0;
    }
    r.keys_generated = static_cast<std::size_t>(std::count_if(log.begin(), log.end(), [](auto& x) { return x.verified; }));
    r.kgr_keys_per_min = measure_kgr(log, key_len, r.simulated_seconds);
    out.push_back(r);
  }
}

}  // namespace

std::size_t session_samples(const ExperimentConfig& cfg) {
  if (cfg.simulated_minutes > 0.0)
    return static_cast<std::size_t>(std::ceil(cfg.simulated_minutes * 60.0 * doppler_bounds(cfg.channel).probe_rate_hz));
  return cfg.channel.n_samples;
}

std::size_t feedback_period(const RscSpec& rsc) {
  validate(rsc);
  const int m = rsc.memory();
  const unsigned mask = (1u << m) - 1;
  // Register holds a_{t-1} .. a_{t-m} in bits 0 .. m-1; a_t = u_t + sum g_i a_{t-i}.
  auto step = [&](unsigned state, unsigned u) {
    unsigned a = u;
    for (int i = 1; i <= m; ++i) a ^= ((rsc.feedback >> (m - i)) & 1u) & ((state >> (i - 1)) & 1u);
    return ((state << 1) | a) & mask;
  };
  const unsigned start = step(0, 1);
  unsigned s = start;
  for (std::size_t n = 1; n <= (std::size_t{1} << m); ++n) {
    s = step(s, 0);
    if (s == start) return n;
  }
  return 0;  // impulse response dies out (non-recursive feedback)
}

std::size_t adaptive_puncture_period(const ReconcileConfig& rc, const RscSpec& rsc, double p_hat) {
  const double need = rc.rate_margin * entropy_per_bit(std::clamp(p_hat, 0.0, 0.5)) + rc.rate_floor;
  std::size_t p = need > 0.0 ? static_cast<std::size_t>(std::min(std::floor(2.0 / need), 1e6)) : rc.max_puncture_period;
  p = std::clamp<std::size_t>(p, 1, rc.max_puncture_period);
  const std::size_t cycle = feedback_period(rsc);
  while (p > 1 && cycle > 0 && p > cycle && p % cycle == 0) --p;
  return p;
}

std::vector<SessionReport> run_session(const ExperimentConfig& cfg, std::size_t trial) {
  return run_session(cfg, trial, {cfg.key_len});
}

std::vector<SessionReport> run_session(const ExperimentConfig& cfg, std::size_t trial,
                                       const std::vector<std::size_t>& key_lengths) {
  validate(cfg);
  if (key_lengths.empty()) throw ConfigError("run_session: no key lengths requested");
  for (auto kl : key_lengths)
    if (kl < 1) throw ConfigError("run_session: key length must be >= 1");
  const Prepared prep = prepare(cfg, trial);
  std::vector<SessionReport> out;
  if (cfg.scheme != SchemeChoice::TurboNR) run_indexing(cfg, trial, prep, key_lengths, out);
  if (cfg.scheme != SchemeChoice::Indexing) run_turbo(cfg, trial, prep, key_lengths, out);
  return out;
}

}  // namespace v2vkey
