// Command-line front end: simulate, channel, turbo-bench, report.
// Exit codes: 0 success, 1 configuration error, 2 I/O error.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "v2vkey/harness.hpp"
#include "v2vkey/rng.hpp"

namespace {

using namespace v2vkey;

constexpr int kConfigError = 1;
constexpr int kIoError = 2;

// "-" selects stdout.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (path == "-") return;
    file_.open(path, std::ios::binary | std::ios::trunc);
    if (!file_) throw IoError("cannot open " + path + " for writing");
  }
  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }
  void finish(const std::string& path) {
    stream().flush();
    if (!stream()) throw IoError("write failed: " + path);
  }

 private:
  std::ofstream file_;
};

ExperimentConfig base_config(const std::string& path) { return path.empty() ? ExperimentConfig{} : load_config(path); }

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw ConfigError("--p-grid: not a number: '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError("--p-grid: empty grid");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"V2V physical-layer key generation simulator"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Run sessions over the configured grid and write CSV rows");
  std::string sim_config, sim_out = "-", sim_plot, sim_scheme;
  std::optional<std::uint64_t> sim_seed;
  std::optional<std::size_t> sim_trials;
  std::optional<double> sim_minutes;
  sim->add_option("--config", sim_config, "Config file (key = value lines)");
  sim->add_option("--seed", sim_seed, "Master seed");
  sim->add_option("--trials", sim_trials, "Trials per grid point")->check(CLI::PositiveNumber);
  sim->add_option("--scheme", sim_scheme, "indexing|turbo|both")->check(CLI::IsMember({"indexing", "turbo", "both"}));
  sim->add_option("--minutes", sim_minutes, "Simulated channel minutes per session");
  sim->add_option("--out", sim_out, "Output CSV path, '-' for stdout");
  sim->add_option("--plot", sim_plot, "Also write BMR/KGR vs sigma2 plots to this SVG");

  // channel
  auto* ch = app.add_subcommand("channel", "Write one synthesized trace as CSV (index,re,im,envelope)");
  std::string ch_config, ch_out = "-";
  std::uint64_t ch_seed = 1;
  std::optional<std::size_t> ch_samples;
  ch->add_option("--config", ch_config, "Config file");
  ch->add_option("--seed", ch_seed, "Trace seed");
  ch->add_option("--samples", ch_samples, "Number of samples")->check(CLI::PositiveNumber);
  ch->add_option("--out", ch_out, "Output CSV path, '-' for stdout");

  // turbo-bench
  auto* tb = app.add_subcommand("turbo-bench", "Turbo BER/FER versus BSC crossover probability");
  std::string tb_grid = "0.01,0.02,0.05,0.08", tb_out = "-", tb_config;
  std::optional<std::size_t> tb_block_len;
  std::optional<int> tb_iterations;
  std::size_t tb_blocks = 200;
  std::uint64_t tb_seed = 1;
  tb->add_option("--config", tb_config, "Config file (turbo.* keys are used)");
  tb->add_option("--p-grid", tb_grid, "Comma-separated crossover probabilities");
  tb->add_option("--block-len", tb_block_len, "Information block length K")->check(CLI::PositiveNumber);
  tb->add_option("--iterations", tb_iterations, "Decoder iterations")->check(CLI::PositiveNumber);
  tb->add_option("--blocks", tb_blocks, "Blocks per grid point")->check(CLI::PositiveNumber);
  tb->add_option("--seed", tb_seed, "Seed");
  tb->add_option("--out", tb_out, "Output CSV path, '-' for stdout");

  // report
  auto* rep = app.add_subcommand("report", "Turbo versus indexing comparison table from simulate CSVs");
  std::vector<std::string> rep_inputs;
  std::string rep_out;
  rep->add_option("inputs", rep_inputs, "CSV files written by simulate")->required();
  rep->add_option("--out", rep_out, "Also write the table as CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    if (*sim) {
      ExperimentConfig cfg = base_config(sim_config);
      if (sim_seed) cfg.master_seed = *sim_seed;
      if (sim_trials) cfg.trials = *sim_trials;
      if (!sim_scheme.empty()) cfg.scheme = parse_scheme(sim_scheme);
      if (sim_minutes) cfg.simulated_minutes = *sim_minutes;
      validate(cfg);

      Output out(sim_out);  // opened before any simulation work
      const auto t0 = std::chrono::steady_clock::now();
      const auto rows = run_sweep(expand_grid(cfg), key_lengths_of(cfg), out.stream());
      out.finish(sim_out);
      const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

      std::size_t keys = 0;
      for (const auto& r : rows)
        if (r.trial) keys += r.report.keys_generated;
      std::fprintf(stderr, "wall clock %.2f s, %zu keys, %.1f keys per wall-clock minute\n", wall, keys,
                   wall > 0 ? keys / (wall / 60.0) : 0.0);
      if (cfg.scheme == SchemeChoice::Both) {
        std::vector<SessionReport> reports;
        for (const auto& r : rows)
          if (r.trial) reports.push_back(r.report);
        std::cerr << comparison_text(emit_comparison(reports));
      }
      if (!sim_plot.empty()) write_svg_plot(rows, sim_plot);
    } else if (*ch) {
      ExperimentConfig cfg = base_config(ch_config);
      if (ch_samples) cfg.channel.n_samples = *ch_samples;
      validate(cfg.channel);
      Output out(ch_out);
      const auto trace = generate_trace(cfg.channel, ch_seed);
      const auto env = envelope(trace);
      auto& os = out.stream();
      os << "index,re,im,envelope\n";
      char buf[128];
      for (std::size_t i = 0; i < trace.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", i, trace.samples[i].real(), trace.samples[i].imag(),
                      env[i]);
        os << buf;
      }
      out.finish(ch_out);
    } else if (*tb) {
      ExperimentConfig cfg = base_config(tb_config);
      TurboConfig tc = cfg.turbo;
      if (tb_block_len) tc.block_len = *tb_block_len;
      if (tb_iterations) tc.iterations = *tb_iterations;
      try {
        validate(tc);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
      const auto grid = parse_grid(tb_grid);
      for (double p : grid)
        if (!(p > 0.0 && p < 0.5)) throw ConfigError("--p-grid: crossover must be in (0, 0.5)");
      Output out(tb_out);
      auto& os = out.stream();
      os << "p,block_len,iterations,blocks,ber,fer,mean_iterations\n";
      char buf[160];
      for (double p : grid) {
        const auto r = bsc_bench(tc, p, tb_blocks, derive_seed(tb_seed, {static_cast<std::uint64_t>(p * 1e9)}));
        std::snprintf(buf, sizeof buf, "%.9g,%zu,%d,%zu,%.9g,%.9g,%.9g\n", p, tc.block_len, tc.iterations, r.blocks,
                      r.ber, r.fer, r.mean_iterations);
        os << buf;
        os.flush();
      }
      out.finish(tb_out);
    } else if (*rep) {
      std::vector<SessionReport> reports;
      for (const auto& path : rep_inputs)
        for (const auto& row : read_sweep_csv(path)) reports.push_back(row.report);
      const auto table = emit_comparison(reports);
      if (!rep_out.empty()) {
        Output out(rep_out);
        out.stream() << comparison_csv(table);
        out.finish(rep_out);
      }
      std::cout << comparison_text(table);
    }
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIoError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  }
  return 0;
}
