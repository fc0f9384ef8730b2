#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <streambuf>
#include <string>
#include <vector>

#include "v2vkey/harness.hpp"
#include "v2vkey/reconcile.hpp"

using namespace v2vkey;
namespace fs = std::filesystem;

namespace {

// 4096 calibration samples plus 20 turbo blocks of 512.
ExperimentConfig small_config(SchemeChoice scheme = SchemeChoice::Both) {
  ExperimentConfig cfg;
  cfg.channel.n_samples = 4096 + 20 * 512;
  cfg.scheme = scheme;
  return cfg;
}

fs::path temp_file(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "v2vkey_harness_test";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

// Records the text written so far each time the stream is flushed.
class FlushRecorder : public std::stringbuf {
 public:
  std::vector<std::string> snapshots;

 protected:
  int sync() override {
    snapshots.push_back(str());
    return 0;
  }
};

SessionReport fake(Scheme s, double sigma2, std::size_t key_len, double kgr, double bmr) {
  SessionReport r;
  r.scheme = s;
  r.sigma2 = sigma2;
  r.key_len = key_len;
  r.kgr_keys_per_min = kgr;
  r.bmr = bmr;
  return r;
}

}  // namespace

TEST_CASE("config text parses on top of the defaults") {
  const auto cfg = parse_config(
      "# scenario\n"
      "channel.L = 12\n"
      "channel.fc = 2.4e9   # carrier\n"
      "\n"
      "nr.sigma2 = 0.05\n"
      "nr.snr_db = 25\n"
      "quant.gamma = 0.5\n"
      "turbo.feedback = 13\n"
      "turbo.feedforward = 15\n"
      "turbo.constraint_length = 4\n"
      "session.scheme = turbo\n"
      "session.master_seed = 0x10\n"
      "sweep.sigma2 = 0.01, 0.1\n"
      "sweep.key_len = 128 256\n");
  CHECK(cfg.channel.paths == 12);
  CHECK(cfg.channel.carrier_hz == 2.4e9);
  CHECK(cfg.nr.sigma2 == 0.05);
  REQUIRE(cfg.nr.snr_db.has_value());
  CHECK(*cfg.nr.snr_db == 25.0);
  CHECK(cfg.quant.gamma == 0.5);
  CHECK(cfg.turbo.rsc.feedback == 013u);
  CHECK(cfg.turbo.rsc.feedforward == 015u);
  CHECK(cfg.scheme == SchemeChoice::TurboNR);
  CHECK(cfg.master_seed == 16u);
  CHECK(cfg.sweep_sigma2 == std::vector<double>{0.01, 0.1});
  CHECK(key_lengths_of(cfg) == std::vector<std::size_t>{128, 256});
  CHECK(expand_grid(cfg).size() == 2u);
  CHECK(expand_grid(cfg)[1].nr.sigma2 == 0.1);
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(parse_config("channel.nope = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("channel.L 20\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("channel.L = twenty\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("channel.L = 20\nchannel.L = 21\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("channel.weibull_b = 1.5\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("session.scheme = cascade\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("channel.u_tx = 0\nchannel.u_rx = 0\nchannel.u_s_max = 0\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("session.trials = 0\n"), ConfigError);
  CHECK_THROWS_AS(load_config(temp_file("does_not_exist.cfg")), IoError);
}

TEST_CASE("mean scatterer speed drives the Weibull scale and the Doppler cap") {
  const auto cfg = parse_config("channel.weibull_mean = 20\n");
  CHECK(weibull_mean(cfg.channel.weibull_shape, cfg.channel.weibull_scale) == doctest::Approx(20.0));
  CHECK(weibull_cdf(cfg.channel.weibull_shape, cfg.channel.weibull_scale, cfg.channel.scatterer_speed_cap) ==
        doctest::Approx(0.999));
  const auto pinned = parse_config("channel.weibull_mean = 20\nchannel.u_s_max = 10\n");
  CHECK(pinned.channel.scatterer_speed_cap == 10.0);
}

TEST_CASE("dump and parse round trip") {
  auto cfg = parse_config("nr.sigma2 = 0.0301\nsweep.sigma2 = 0.001, 0.3\nnr.mu_im = -0.25\nturbo.puncture = periodic\n");
  const auto text = dump_config(cfg);
  const auto again = parse_config(text);
  CHECK(dump_config(again) == text);
  CHECK(config_fingerprint(again) == config_fingerprint(cfg));
  cfg.key_len = 256;
  CHECK(config_fingerprint(cfg) != config_fingerprint(again));
}

TEST_CASE("adaptive puncture period") {
  const ReconcileConfig rc;
  const RscSpec rsc;
  CHECK(feedback_period(rsc) == 3u);
  std::size_t last = 100;
  for (double p : {0.001, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.4}) {
    const auto period = adaptive_puncture_period(rc, rsc, p);
    CHECK(period >= 1);
    CHECK(period <= rc.max_puncture_period);
    CHECK(period <= last);
    CHECK((period <= 3 || period % 3 != 0));
    // Disclosed parity fraction covers the requirement.
    CHECK(2.0 / static_cast<double>(period) >= rc.rate_margin * entropy_per_bit(p) + rc.rate_floor);
    last = period;
  }
  CHECK(adaptive_puncture_period(rc, rsc, 0.001) == 10u);
}

TEST_CASE("noiseless turbo session reaches the closed-form key rate") {
  auto cfg = small_config(SchemeChoice::TurboNR);
  cfg.nr = {0.0, {0.0, 0.0}, std::nullopt};
  const auto reports = run_session(cfg, 0);
  REQUIRE(reports.size() == 1u);
  const auto& r = reports[0];

  // p_hat clamps to its floor; the period follows from 2/P >= 1.2 H(0.001) + 0.18.
  const double need = 1.2 * (-0.001 * std::log2(0.001) - 0.999 * std::log2(0.999)) + 0.18;
  std::size_t period = static_cast<std::size_t>(std::floor(2.0 / need));
  while (period % 3 == 0) --period;
  const std::size_t k = 512;
  auto kept = [&](std::size_t offset) { return (k - offset + period - 1) / period; };
  const std::size_t leak_per_block = kept(0) + kept(period / 2) + 4 + 64;
  const std::size_t blocks = (cfg.channel.n_samples - 4096) / k;
  // Blocks are pooled until the unleaked residue covers a whole key, then the pool empties.
  std::size_t keys = 0, pool = 0, pool_leak = 0;
  for (std::size_t b = 0; b < blocks; ++b) {
    pool += k;
    pool_leak += leak_per_block;
    if (pool > pool_leak && pool - pool_leak >= cfg.key_len) {
      keys += (pool - pool_leak) / cfg.key_len;
      pool = pool_leak = 0;
    }
  }
  const double fp = doppler_bounds(cfg.channel).probe_rate_hz;
  const double seconds = static_cast<double>(cfg.channel.n_samples) / fp;

  CHECK(r.p_hat == cfg.reconcile.min_p_hat);
  CHECK(r.puncture_period == period);
  CHECK(r.bmr == 0.0);
  CHECK(r.raw_bmr == 0.0);
  CHECK(r.blocks_attempted == blocks);
  CHECK(r.blocks_verified == blocks);
  CHECK(r.leaked_bits_total == blocks * leak_per_block);
  CHECK(r.keys_generated == keys);
  CHECK(r.kgr_keys_per_min == doctest::Approx(static_cast<double>(keys) * 60.0 / seconds).epsilon(1e-12));
  CHECK(r.simulated_seconds == doctest::Approx(seconds));
}

TEST_CASE("noiseless indexing session: every announced index confirmed") {
  auto cfg = small_config(SchemeChoice::Indexing);
  cfg.nr = {0.0, {0.0, 0.0}, std::nullopt};
  const auto r = run_session(cfg, 0).at(0);
  CHECK(r.bmr == 0.0);
  CHECK(r.blocks_verified == r.blocks_attempted);
  CHECK(r.leaked_bits_total == 64 * r.blocks_attempted);
  CHECK(r.keys_generated == r.blocks_verified);
}

TEST_CASE("same (cfg, trial) gives identical reports; other trials differ") {
  auto cfg = small_config();
  cfg.nr.sigma2 = 0.02;
  const auto a = run_session(cfg, 3), b = run_session(cfg, 3), c = run_session(cfg, 4);
  REQUIRE(a.size() == 2u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(format_csv_row({0, 3, a[i], 0, 0}) == format_csv_row({0, 3, b[i], 0, 0}));
    CHECK(a[i].trace_digest == b[i].trace_digest);
  }
  CHECK(a[0].trace_digest != c[0].trace_digest);
}

TEST_CASE("both schemes consume the same traces") {
  auto cfg = small_config();
  cfg.nr.sigma2 = 0.05;
  const auto both = run_session(cfg, 1, {128, 256});
  REQUIRE(both.size() == 4u);
  CHECK(both[0].scheme == Scheme::Indexing);
  CHECK(both[1].scheme == Scheme::Indexing);
  CHECK(both[2].scheme == Scheme::TurboNR);
  CHECK(both[1].key_len == 256u);
  for (const auto& r : both) CHECK(r.trace_digest == both[0].trace_digest);
  cfg.scheme = SchemeChoice::TurboNR;
  CHECK(run_session(cfg, 1).at(0).trace_digest == both[0].trace_digest);
}

TEST_CASE("report invariants and leakage ledger") {
  auto cfg = small_config();
  for (double s2 : {0.0, 0.01, 0.1}) {
    cfg.nr.sigma2 = s2;
    for (const auto& r : run_session(cfg, 2)) {
      CHECK(r.bmr >= 0.0);
      CHECK(r.bmr <= 1.0);
      CHECK(r.blocks_verified <= r.blocks_attempted);
      CHECK(r.entropy_per_bit_mean >= 0.0);
      CHECK(r.entropy_per_bit_mean <= 1.0);
      if (r.scheme == Scheme::TurboNR) {
        TurboConfig tc = cfg.turbo;
        tc.puncture = Puncture::Periodic;
        tc.puncture_period = r.puncture_period;
        CHECK(r.leaked_bits_total == r.blocks_attempted * (payload_length(tc) + kCheckBits));
      } else {
        CHECK(r.leaked_bits_total == r.blocks_attempted * kCheckBits);
      }
    }
  }
}

TEST_CASE("sweep: 1 point x 3 trials gives 3 data rows and 1 aggregate") {
  auto cfg = small_config(SchemeChoice::TurboNR);
  cfg.trials = 3;
  std::ostringstream out;
  const auto rows = run_sweep({cfg}, {128}, out);
  CHECK(rows.size() == 4u);
  const auto text = out.str();
  CHECK(count_lines(text) == 5u);
  CHECK(text.rfind(std::string(kCsvHeader) + "\n", 0) == 0);
  CHECK(text.find(",agg,") != std::string::npos);
  CHECK(rows[3].report.blocks_attempted ==
        rows[0].report.blocks_attempted + rows[1].report.blocks_attempted + rows[2].report.blocks_attempted);
}

TEST_CASE("sweep flushes after every point, each snapshot parses") {
  auto cfg = small_config(SchemeChoice::Indexing);
  cfg.sweep_sigma2 = {0.01, 0.05};
  cfg.trials = 2;
  FlushRecorder buf;
  std::ostream out(&buf);
  run_sweep(expand_grid(cfg), {128}, out);
  REQUIRE(buf.snapshots.size() >= 3u);
  // Header, then after point 0 (2 rows + agg), then after point 1.
  std::vector<std::size_t> lines;
  for (const auto& s : buf.snapshots) lines.push_back(count_lines(s));
  CHECK(std::find(lines.begin(), lines.end(), 1u) != lines.end());
  CHECK(std::find(lines.begin(), lines.end(), 4u) != lines.end());
  CHECK(std::find(lines.begin(), lines.end(), 7u) != lines.end());
  const auto partial = temp_file("partial.csv");
  for (const auto& s : buf.snapshots) {
    std::ofstream(partial, std::ios::binary) << s;
    CHECK_NOTHROW(read_sweep_csv(partial));
  }
}

TEST_CASE("rerunning a sweep reproduces the file byte for byte") {
  auto cfg = small_config();
  cfg.trials = 2;
  cfg.sweep_sigma2 = {0.02};
  const auto a = temp_file("a.csv"), b = temp_file("b.csv");
  run_sweep(expand_grid(cfg), {128, 256}, a);
  run_sweep(expand_grid(cfg), {128, 256}, b);
  CHECK(slurp(a) == slurp(b));
  const auto rows = read_sweep_csv(a);
  CHECK(rows.size() == 2u * 2u * 2u);
  CHECK(rows[0].report.sigma2 == 0.02);
}

TEST_CASE("unwritable sweep path fails before simulating") {
  auto cfg = small_config();
  CHECK_THROWS_AS(run_sweep({cfg}, {128}, fs::path("/nonexistent_dir/x/out.csv")), IoError);
  std::ostringstream out;
  CHECK_THROWS_AS(run_sweep({}, {128}, out), ConfigError);
}

TEST_CASE("comparison table") {
  const std::vector<SessionReport> equal{fake(Scheme::TurboNR, 0.03, 128, 12.0, 0.1),
                                         fake(Scheme::Indexing, 0.03, 128, 12.0, 0.1)};
  const auto rows = emit_comparison(equal);
  REQUIRE(rows.size() == 1u);
  CHECK(rows[0].kgr_ratio == 1.0);
  CHECK(rows[0].bmr_ratio == 1.0);
  CHECK(rows[0].kgr_turbo == 12.0);
  CHECK(rows[0].kgr_indexing == 12.0);

  const std::vector<SessionReport> zero{fake(Scheme::TurboNR, 0.03, 128, 30.0, 0.0),
                                        fake(Scheme::Indexing, 0.03, 128, 0.0, 0.2)};
  const auto z = emit_comparison(zero);
  CHECK(std::isinf(z[0].kgr_ratio));
  CHECK(comparison_csv(z).find("inf") != std::string::npos);
  CHECK(comparison_text(z).find("inf") != std::string::npos);

  const std::vector<SessionReport> spread{
      fake(Scheme::TurboNR, 0.03, 128, 35.0, 0.0), fake(Scheme::Indexing, 0.03, 128, 3.0, 0.2),
      fake(Scheme::Indexing, 0.03, 128, 7.0, 0.2), fake(Scheme::TurboNR, 0.03, 256, 17.0, 0.0),
      fake(Scheme::Indexing, 0.03, 256, 2.0, 0.2)};
  const auto s = emit_comparison(spread);
  REQUIRE(s.size() == 2u);
  CHECK(s[0].key_len == 128u);
  CHECK(s[0].kgr_indexing == 5.0);
  CHECK(s[0].kgr_indexing_min == 3.0);
  CHECK(s[0].kgr_indexing_max == 7.0);
  CHECK(s[0].kgr_ratio == 7.0);

  const std::vector<SessionReport> unmatched{fake(Scheme::TurboNR, 0.03, 128, 1.0, 0.0),
                                             fake(Scheme::Indexing, 0.1, 128, 1.0, 0.0)};
  CHECK_THROWS_AS(emit_comparison(unmatched), std::invalid_argument);
}

TEST_CASE("BSC benchmark reports a low error rate at small crossover") {
  TurboConfig tc;
  const auto pt = bsc_bench(tc, 0.02, 50, 1);
  CHECK(pt.blocks == 50u);
  CHECK(pt.ber < 1e-3);
  CHECK(pt.fer <= 0.1);
  CHECK(pt.mean_iterations >= 1.0);
  const auto again = bsc_bench(tc, 0.02, 50, 1);
  CHECK(again.ber == pt.ber);
}

TEST_CASE("SVG plot is written") {
  auto cfg = small_config();
  cfg.sweep_sigma2 = {0.01, 0.1};
  std::ostringstream out;
  const auto rows = run_sweep(expand_grid(cfg), {128}, out);
  const auto path = temp_file("plot.svg");
  write_svg_plot(rows, path);
  const auto svg = slurp(path);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
}
