#include "v2vkey/harness.hpp"
#include "v2vkey/rng.hpp"

namespace v2vkey {

BscBenchPoint bsc_bench(const TurboConfig& cfg_in, double crossover, std::size_t blocks, std::uint64_t seed) {
  validate(cfg_in);
  if (!(crossover > 0.0 && crossover < 0.5)) throw std::invalid_argument("bsc_bench: crossover must be in (0, 0.5)");
  if (blocks == 0) throw std::invalid_argument("bsc_bench: blocks must be >= 1");
  BscBenchPoint out;
  out.crossover = crossover;
  out.blocks = blocks;
  TurboConfig cfg = cfg_in;
  std::size_t bit_errors = 0, frame_errors = 0, iterations = 0;
  for (std::size_t b = 0; b < blocks; ++b) {
    RandomStream rng(derive_seed(seed, {b}));
    cfg.interleaver_seed = rng.next_u64();
    std::vector<std::uint8_t> info(cfg.block_len);
    for (auto& x : info) x = static_cast<std::uint8_t>(rng.below(2));
    const auto cw = turbo_encode(cfg, info);
    auto flip = [&](std::vector<std::uint8_t> v) {
      for (auto& x : v) x ^= static_cast<std::uint8_t>(rng.uniform() < crossover);
      return v;
    };
    const auto llrs = assemble_llrs(cfg, bits_to_llr(flip(cw.systematic), crossover),
                                    bits_to_llr(flip(cw.parity1), crossover), bits_to_llr(flip(cw.parity2), crossover),
                                    bits_to_llr(flip(cw.tail), crossover));
    const auto dec = turbo_decode(cfg, llrs);
    const std::size_t e = hamming_distance(dec.bits, info);
    bit_errors += e;
    frame_errors += (e > 0);
    iterations += static_cast<std::size_t>(dec.iterations_used);
  }
  const double n = static_cast<double>(blocks);
  out.ber = static_cast<double>(bit_errors) / (n * static_cast<double>(cfg.block_len));
  out.fer = static_cast<double>(frame_errors) / n;
  out.mean_iterations = static_cast<double>(iterations) / n;
  return out;
}

}  // namespace v2vkey
