#include "v2vkey/reconcile.hpp"

#include <algorithm>
#include <bit>
#include <stdexcept>

#include "v2vkey/rng.hpp"

namespace v2vkey {
namespace {

void put_be(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
  for (int i = bytes - 1; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_be(std::span<const std::uint8_t> in, std::size_t& pos, int bytes) {
  if (pos + static_cast<std::size_t>(bytes) > in.size())
    throw std::invalid_argument("deserialize: truncated message");
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v = (v << 8) | in[pos++];
  return v;
}

// LSB-first packed bit vector with arbitrary-offset 64-bit reads.
struct Words {
  std::vector<std::uint64_t> w;

  std::uint64_t window(std::size_t bit) const {
    const std::size_t q = bit / 64;
    const unsigned s = bit % 64;
    const std::uint64_t lo = q < w.size() ? w[q] : 0;
    if (s == 0) return lo;
    const std::uint64_t hi = q + 1 < w.size() ? w[q + 1] : 0;
    return (lo >> s) | (hi << (64 - s));
  }
};

}  // namespace

std::vector<std::uint8_t> serialize(const ReconciliationMessage& msg) {
  std::vector<std::uint8_t> out;
  put_be(out, msg.block_id, 4);
  put_be(out, msg.interleaver_seed, 8);
  put_be(out, msg.payload.size(), 4);
  const auto packed = pack_msb_first(msg.payload.bits);
  out.insert(out.end(), packed.begin(), packed.end());
  put_be(out, msg.check_value, 8);
  return out;
}

ReconciliationMessage deserialize(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  ReconciliationMessage msg;
  msg.block_id = static_cast<std::uint32_t>(get_be(bytes, pos, 4));
  msg.interleaver_seed = get_be(bytes, pos, 8);
  const auto n = static_cast<std::size_t>(get_be(bytes, pos, 4));
  const std::size_t nbytes = (n + 7) / 8;
  if (pos + nbytes > bytes.size()) throw std::invalid_argument("deserialize: truncated payload");
  msg.payload = BitString(unpack_msb_first(bytes.subspan(pos, nbytes), n));
  pos += nbytes;
  msg.check_value = get_be(bytes, pos, 8);
  if (pos != bytes.size()) throw std::invalid_argument("deserialize: trailing bytes");
  return msg;
}

std::size_t payload_length(const TurboConfig& cfg) {
  const auto k1 = parity_kept(cfg, 0);
  const auto k2 = parity_kept(cfg, 1);
  return static_cast<std::size_t>(std::count(k1.begin(), k1.end(), true) + std::count(k2.begin(), k2.end(), true)) +
         2 * cfg.rsc.tail_steps();
}

ReconciliationMessage bob_prepare(const TurboConfig& cfg, std::span<const std::uint8_t> bob_bits,
                                  std::uint32_t block_id) {
  if (bob_bits.size() != cfg.block_len) throw std::invalid_argument("bob_prepare: block must hold K bits");
  const auto cw = turbo_encode(cfg, bob_bits);
  ReconciliationMessage msg;
  msg.block_id = block_id;
  msg.interleaver_seed = cfg.interleaver_seed;
  auto& p = msg.payload.bits;
  p.reserve(cw.parity1.size() + cw.parity2.size() + cw.tail.size());
  p.insert(p.end(), cw.parity1.begin(), cw.parity1.end());
  p.insert(p.end(), cw.parity2.begin(), cw.parity2.end());
  p.insert(p.end(), cw.tail.begin(), cw.tail.end());
  msg.check_value = digest64(bob_bits);
  return msg;
}

ReconcileResult alice_reconcile(const TurboConfig& cfg_in, std::span<const std::uint8_t> alice_bits,
                                const ReconciliationMessage& msg, double p_hat) {
  TurboConfig cfg = cfg_in;
  cfg.interleaver_seed = msg.interleaver_seed;
  if (alice_bits.size() != cfg.block_len) throw std::invalid_argument("alice_reconcile: block must hold K bits");
  if (msg.payload.size() != payload_length(cfg))
    throw std::invalid_argument("alice_reconcile: payload length inconsistent with the configuration");

  // Public channel is error-free: disclosed bits enter at full confidence.
  const auto& p = msg.payload.bits;
  const auto k1 = parity_kept(cfg, 0);
  const auto n1 = static_cast<std::size_t>(std::count(k1.begin(), k1.end(), true));
  const std::size_t nt = 2 * cfg.rsc.tail_steps();
  const std::size_t n2 = p.size() - n1 - nt;
  auto sure = [&](std::size_t from, std::size_t count) {
    LlrSeq out(count);
    for (std::size_t i = 0; i < count; ++i) out[i] = p[from + i] ? -kLlrMax : kLlrMax;
    return out;
  };
  const auto llrs = assemble_llrs(cfg, bits_to_llr(alice_bits, p_hat), sure(0, n1), sure(n1, n2), sure(n1 + n2, nt));
  auto dec = turbo_decode(cfg, llrs);

  ReconcileResult r;
  r.iterations = dec.iterations_used;
  r.decoded = std::move(dec.bits);
  if (digest64(r.decoded) == msg.check_value) {
    r.key = KeyMaterial{BitString(r.decoded), p.size() + kCheckBits, true};
  } else {
    r.failure = "reconciliation failed";
  }
  return r;
}

BitString privacy_amplify(const KeyMaterial& km, std::uint64_t seed, std::size_t out_len) {
  if (!km.verified) throw std::invalid_argument("privacy_amplify: key material is not verified");
  const std::size_t n = km.bits.size();
  if (km.leaked_bits > n || out_len > n - km.leaked_bits) throw std::domain_error("insufficient residual entropy");
  if (out_len == 0) return {};

  // Row i of the Toeplitz matrix is T[i][j] = r[i - j + n - 1]. With x reversed
  // (y[j'] = x[n-1-j']) row i dotted with x is r[i .. i+n) dotted with y.
  Words y;
  y.w.assign((n + 63) / 64, 0);
  for (std::size_t j = 0; j < n; ++j)
    if (km.bits.bits[n - 1 - j]) y.w[j / 64] |= std::uint64_t{1} << (j % 64);

  Words r;
  RandomStream rng(seed);
  r.w.resize((n + out_len - 1 + 63) / 64);
  for (auto& word : r.w) word = rng.next_u64();
  const std::size_t used = n + out_len - 1;
  if (used % 64 != 0) r.w.back() &= (std::uint64_t{1} << (used % 64)) - 1;

  std::vector<std::uint8_t> out(out_len);
  for (std::size_t i = 0; i < out_len; ++i) {
    unsigned parity = 0;
    for (std::size_t q = 0; q < y.w.size(); ++q) parity ^= std::popcount(r.window(i + 64 * q) & y.w[q]) & 1u;
    out[i] = static_cast<std::uint8_t>(parity);
  }
  return BitString(std::move(out));
}

bool verify_keys(const BitString& a, const BitString& b) { return a.bits == b.bits; }

}  // namespace v2vkey
