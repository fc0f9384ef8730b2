#include "v2vkey/turbo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "v2vkey/rng.hpp"

namespace v2vkey {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

unsigned tap(unsigned poly, int constraint_length, int delay) {
  return (poly >> (constraint_length - 1 - delay)) & 1u;
}

// State bit i holds the register value delayed by i + 1 steps.
struct Trellis {
  int states = 0;
  std::vector<int> next;            // [state * 2 + input]
  std::vector<std::uint8_t> out;    // parity bit for the same transition
  std::vector<std::uint8_t> flush;  // input that drives the feedback sum to zero

  explicit Trellis(const RscSpec& spec) {
    const int nu = spec.memory();
    states = spec.states();
    next.resize(static_cast<std::size_t>(states) * 2);
    out.resize(next.size());
    flush.resize(static_cast<std::size_t>(states));
    for (int s = 0; s < states; ++s) {
      unsigned fb = 0, ff_mem = 0;
      for (int i = 1; i <= nu; ++i) {
        const unsigned a = (static_cast<unsigned>(s) >> (i - 1)) & 1u;
        fb ^= tap(spec.feedback, spec.constraint_length, i) & a;
        ff_mem ^= tap(spec.feedforward, spec.constraint_length, i) & a;
      }
      flush[static_cast<std::size_t>(s)] = static_cast<std::uint8_t>(fb);
      for (unsigned u = 0; u < 2; ++u) {
        const unsigned a = u ^ fb;
        const unsigned p = (tap(spec.feedforward, spec.constraint_length, 0) & a) ^ ff_mem;
        const auto idx = static_cast<std::size_t>(s) * 2 + u;
        next[idx] = static_cast<int>(((static_cast<unsigned>(s) << 1) | a) & static_cast<unsigned>(states - 1));
        out[idx] = static_cast<std::uint8_t>(p);
      }
    }
  }
};

double max_star(double a, double b, DecoderAlgorithm alg) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  if (alg == DecoderAlgorithm::MaxLogMap) return m;
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

double clamp_llr(double x) { return std::clamp(x, -kLlrMax, kLlrMax); }

template <typename T>
std::vector<T> interleave(std::span<const T> v, std::span<const std::size_t> perm) {
  std::vector<T> out(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) out[i] = v[perm[i]];
  return out;
}

template <typename T>
std::vector<T> deinterleave(std::span<const T> v, std::span<const std::size_t> perm) {
  std::vector<T> out(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) out[perm[i]] = v[i];
  return out;
}

RscSpec open_variant(RscSpec spec) {
  spec.terminated = false;
  return spec;
}

}  // namespace

void validate(const RscSpec& spec) {
  if (spec.constraint_length < 2 || spec.constraint_length > 16)
    throw std::invalid_argument("RscSpec: constraint length must be in [2, 16]");
  const unsigned limit = 1u << spec.constraint_length;
  if (spec.feedback >= limit || spec.feedforward >= limit)
    throw std::invalid_argument("RscSpec: polynomial degree must be below the constraint length");
  if (tap(spec.feedback, spec.constraint_length, 0) != 1u)
    throw std::invalid_argument("RscSpec: feedback polynomial needs a leading 1");
}

void validate(const TurboConfig& cfg) {
  validate(cfg.rsc);
  if (cfg.block_len < static_cast<std::size_t>(cfg.rsc.constraint_length))
    throw std::invalid_argument("TurboConfig: block length must be >= constraint length");
  if (cfg.iterations < 1) throw std::invalid_argument("TurboConfig: iterations must be >= 1");
  if (!(cfg.extrinsic_scale > 0.0 && cfg.extrinsic_scale <= 1.0))
    throw std::invalid_argument("TurboConfig: extrinsic_scale must be in (0, 1]");
  if (cfg.puncture == Puncture::Periodic && cfg.puncture_period < 1)
    throw std::invalid_argument("TurboConfig: puncture period must be >= 1");
}

RscCodeword rsc_encode(const RscSpec& spec, std::span<const std::uint8_t> bits) {
  validate(spec);
  if (bits.empty()) throw std::invalid_argument("rsc_encode: empty input");
  const Trellis tr(spec);
  RscCodeword cw;
  cw.systematic.assign(bits.begin(), bits.end());
  cw.parity.reserve(bits.size());
  int state = 0;
  for (std::uint8_t b : bits) {
    const auto idx = static_cast<std::size_t>(state) * 2 + (b & 1u);
    cw.parity.push_back(tr.out[idx]);
    state = tr.next[idx];
  }
  for (std::size_t t = 0; t < spec.tail_steps(); ++t) {
    const std::uint8_t u = tr.flush[static_cast<std::size_t>(state)];
    const auto idx = static_cast<std::size_t>(state) * 2 + u;
    cw.tail.push_back(u);
    cw.tail.push_back(tr.out[idx]);
    state = tr.next[idx];
  }
  return cw;
}

std::vector<std::size_t> make_interleaver(std::size_t k, std::uint64_t seed) {
  if (k < 1) throw std::invalid_argument("make_interleaver: K must be >= 1");
  std::vector<std::size_t> perm(k);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  RandomStream rng(seed);
  for (std::size_t i = k - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
  return perm;
}

std::vector<bool> parity_kept(const TurboConfig& cfg, int which) {
  std::vector<bool> kept(cfg.block_len, true);
  std::size_t period = 1;
  if (cfg.puncture == Puncture::HalfRate) period = 2;
  if (cfg.puncture == Puncture::Periodic) period = cfg.puncture_period;
  if (period <= 1) return kept;
  const std::size_t offset = which == 0 ? 0 : period / 2;
  for (std::size_t i = 0; i < kept.size(); ++i) kept[i] = (i % period) == offset;
  return kept;
}

TurboCodeword turbo_encode(const TurboConfig& cfg, std::span<const std::uint8_t> bits) {
  validate(cfg);
  if (bits.size() != cfg.block_len) throw std::invalid_argument("turbo_encode: input length must equal block length");
  const auto perm = make_interleaver(cfg.block_len, cfg.interleaver_seed);
  const auto c1 = rsc_encode(cfg.rsc, bits);
  const auto shuffled = interleave<std::uint8_t>(bits, perm);
  const auto c2 = rsc_encode(open_variant(cfg.rsc), shuffled);

  TurboCodeword cw;
  cw.systematic.assign(bits.begin(), bits.end());
  const auto k1 = parity_kept(cfg, 0);
  const auto k2 = parity_kept(cfg, 1);
  for (std::size_t i = 0; i < cfg.block_len; ++i) {
    if (k1[i]) cw.parity1.push_back(c1.parity[i]);
    if (k2[i]) cw.parity2.push_back(c2.parity[i]);
  }
  cw.tail = c1.tail;
  return cw;
}

LlrSeq bits_to_llr(std::span<const std::uint8_t> bits, double crossover_p) {
  if (!(crossover_p > 0.0 && crossover_p < 0.5))
    throw std::invalid_argument("bits_to_llr: crossover probability must be in (0, 0.5)");
  const double mag = clamp_llr(std::log((1.0 - crossover_p) / crossover_p));
  LlrSeq out(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) out[i] = bits[i] ? -mag : mag;
  return out;
}

BcjrOutput bcjr_decode(const RscSpec& spec, std::span<const double> systematic, std::span<const double> parity,
                       std::span<const double> apriori, DecoderAlgorithm algorithm) {
  validate(spec);
  const std::size_t k = apriori.size();
  const std::size_t steps = k + spec.tail_steps();
  if (k == 0 || systematic.size() != steps || parity.size() != steps)
    throw std::invalid_argument("bcjr_decode: LLR lengths inconsistent with the trellis");

  const Trellis tr(spec);
  const auto S = static_cast<std::size_t>(tr.states);

  // Branch metric for input u, parity p: ((1-2u)(Ls + La) + (1-2p) Lp) / 2.
  std::vector<double> gamma(steps * S * 2);
  for (std::size_t t = 0; t < steps; ++t) {
    const double ls = clamp_llr(systematic[t]) + (t < k ? clamp_llr(apriori[t]) : 0.0);
    const double lp = clamp_llr(parity[t]);
    for (std::size_t s = 0; s < S; ++s)
      for (std::size_t u = 0; u < 2; ++u) {
        const double su = u ? -1.0 : 1.0;
        const double sp = tr.out[s * 2 + u] ? -1.0 : 1.0;
        gamma[(t * S + s) * 2 + u] = 0.5 * (su * ls + sp * lp);
      }
  }

  std::vector<double> alpha((steps + 1) * S, kNegInf);
  alpha[0] = 0.0;
  for (std::size_t t = 0; t < steps; ++t) {
    double* next = &alpha[(t + 1) * S];
    const double* cur = &alpha[t * S];
    for (std::size_t s = 0; s < S; ++s) {
      if (cur[s] == kNegInf) continue;
      for (std::size_t u = 0; u < 2; ++u) {
        if (t >= k && u != tr.flush[s]) continue;  // tail inputs are forced
        const auto ns = static_cast<std::size_t>(tr.next[s * 2 + u]);
        next[ns] = max_star(next[ns], cur[s] + gamma[(t * S + s) * 2 + u], algorithm);
      }
    }
    const double norm = *std::max_element(next, next + S);
    for (std::size_t s = 0; s < S; ++s) next[s] -= norm;
  }

  std::vector<double> beta((steps + 1) * S, spec.terminated ? kNegInf : 0.0);
  if (spec.terminated) beta[steps * S] = 0.0;
  for (std::size_t t = steps; t-- > 0;) {
    double* cur = &beta[t * S];
    const double* nxt = &beta[(t + 1) * S];
    for (std::size_t s = 0; s < S; ++s) {
      double acc = kNegInf;
      for (std::size_t u = 0; u < 2; ++u) {
        if (t >= k && u != tr.flush[s]) continue;
        const auto ns = static_cast<std::size_t>(tr.next[s * 2 + u]);
        if (nxt[ns] == kNegInf) continue;
        acc = max_star(acc, gamma[(t * S + s) * 2 + u] + nxt[ns], algorithm);
      }
      cur[s] = acc;
    }
    const double norm = *std::max_element(cur, cur + S);
    if (norm != kNegInf)
      for (std::size_t s = 0; s < S; ++s) cur[s] -= norm;
  }

  BcjrOutput out;
  out.posterior.resize(k);
  out.extrinsic.resize(k);
  for (std::size_t t = 0; t < k; ++t) {
    double l0 = kNegInf, l1 = kNegInf;
    for (std::size_t s = 0; s < S; ++s) {
      const double a = alpha[t * S + s];
      if (a == kNegInf) continue;
      for (std::size_t u = 0; u < 2; ++u) {
        const auto ns = static_cast<std::size_t>(tr.next[s * 2 + u]);
        const double b = beta[(t + 1) * S + ns];
        if (b == kNegInf) continue;
        const double m = a + gamma[(t * S + s) * 2 + u] + b;
        if (u == 0)
          l0 = max_star(l0, m, algorithm);
        else
          l1 = max_star(l1, m, algorithm);
      }
    }
    const double post = l0 - l1;
    out.posterior[t] = clamp_llr(post);
    out.extrinsic[t] = clamp_llr(post - clamp_llr(systematic[t]) - clamp_llr(apriori[t]));
  }
  return out;
}

TurboLlrs assemble_llrs(const TurboConfig& cfg, std::span<const double> systematic,
                        std::span<const double> parity1_kept, std::span<const double> parity2_kept,
                        std::span<const double> tail) {
  validate(cfg);
  const std::size_t k = cfg.block_len;
  const std::size_t ts = cfg.rsc.tail_steps();
  if (systematic.size() != k || tail.size() != 2 * ts)
    throw std::invalid_argument("assemble_llrs: systematic or tail length mismatch");
  const auto k1 = parity_kept(cfg, 0);
  const auto k2 = parity_kept(cfg, 1);
  const auto n1 = static_cast<std::size_t>(std::count(k1.begin(), k1.end(), true));
  const auto n2 = static_cast<std::size_t>(std::count(k2.begin(), k2.end(), true));
  if (parity1_kept.size() != n1 || parity2_kept.size() != n2)
    throw std::invalid_argument("assemble_llrs: parity length inconsistent with puncturing");

  TurboLlrs in;
  in.systematic.assign(systematic.begin(), systematic.end());
  in.parity1.assign(k, 0.0);
  in.parity2.assign(k, 0.0);
  for (std::size_t i = 0, j1 = 0, j2 = 0; i < k; ++i) {
    if (k1[i]) in.parity1[i] = parity1_kept[j1++];
    if (k2[i]) in.parity2[i] = parity2_kept[j2++];
  }
  for (std::size_t t = 0; t < ts; ++t) {
    in.systematic.push_back(tail[2 * t]);
    in.parity1.push_back(tail[2 * t + 1]);
  }
  return in;
}

TurboDecodeResult turbo_decode(const TurboConfig& cfg, const TurboLlrs& llrs) {
  validate(cfg);
  const std::size_t k = cfg.block_len;
  const std::size_t steps = k + cfg.rsc.tail_steps();
  if (llrs.systematic.size() != steps || llrs.parity1.size() != steps || llrs.parity2.size() != k)
    throw std::invalid_argument("turbo_decode: LLR lengths inconsistent with the configuration");

  const auto perm = make_interleaver(k, cfg.interleaver_seed);
  const RscSpec rsc2 = open_variant(cfg.rsc);
  const std::span<const double> sys_info(llrs.systematic.data(), k);
  const LlrSeq sys2 = interleave<double>(sys_info, perm);

  LlrSeq feedback(k, 0.0);  // deinterleaved extrinsic from decoder 2
  TurboDecodeResult res;
  std::vector<std::uint8_t> previous;
  for (int it = 1; it <= cfg.iterations; ++it) {
    LlrSeq apr1(k);
    for (std::size_t i = 0; i < k; ++i) apr1[i] = cfg.extrinsic_scale * feedback[i];
    const auto d1 = bcjr_decode(cfg.rsc, llrs.systematic, llrs.parity1, apr1, cfg.algorithm);

    LlrSeq apr2 = interleave<double>(d1.extrinsic, perm);
    for (double& v : apr2) v *= cfg.extrinsic_scale;
    const auto d2 = bcjr_decode(rsc2, sys2, llrs.parity2, apr2, cfg.algorithm);

    feedback = deinterleave<double>(d2.extrinsic, perm);
    res.posterior = deinterleave<double>(d2.posterior, perm);
    res.bits.resize(k);
    for (std::size_t i = 0; i < k; ++i) res.bits[i] = res.posterior[i] < 0.0 ? 1 : 0;
    res.iterations_used = it;
    if (it > 1 && res.bits == previous) {
      res.converged = true;
      break;
    }
    previous = res.bits;
  }
  return res;
}

}  // namespace v2vkey
