#pragma once

// End-to-end key generation sessions, parameter sweeps and comparison tables.
//
// Session pipeline (one trial):
//   draw channel -> Bob trace -> Alice trace (non-reciprocity model)
//   -> calibration window: estimate discrepancy, compensate Alice, measure p_hat
//   -> threshold refresh plan (decided by Bob, published)
//   -> Indexing branch:  dual thresholds, excursion indexing, digest check, hash
//   -> TurboNR branch:   single threshold, turbo reconciliation per block, hash
//   -> metrics.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "v2vkey/channel.hpp"
#include "v2vkey/metrics.hpp"
#include "v2vkey/quantize.hpp"
#include "v2vkey/reciprocity.hpp"
#include "v2vkey/turbo.hpp"

namespace v2vkey {

/// Malformed or inconsistent configuration (CLI exit code 1).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File could not be read or written (CLI exit code 2).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SchemeChoice { Indexing, TurboNR, Both };

std::string to_string(SchemeChoice s);
/// "indexing", "turbo" or "both"; anything else throws ConfigError.
SchemeChoice parse_scheme(const std::string& s);

struct QuantConfig {
  double gamma = 0.35;
  std::size_t m = 5;
  double fraction = 1.0;
  RefreshPolicy refresh;
  std::size_t fit_window = 0;  // samples each threshold fit sees; 0 means refresh.window()
  std::size_t entropy_window = 64;
};

struct ReconcileConfig {
  std::size_t calibration_probes = 256;   // discrepancy estimate window M
  std::size_t mismatch_probes = 4096;     // public prefix used to measure p_hat (>= M)
  /// Periodic puncturing with the largest period P such that the disclosed
  /// parity fraction 2/P covers rate_margin * H(p_hat) + rate_floor.
  bool adaptive_rate = true;
  double rate_margin = 1.2;
  double rate_floor = 0.18;
  std::size_t max_puncture_period = 16;
  double min_p_hat = 1e-3;
  double max_p_hat = 0.45;
};

struct ExperimentConfig {
  V2VChannelParams channel = default_channel_params();
  NonReciprocityModel nr{0.01, {0.3, 0.0}, std::nullopt};
  QuantConfig quant;
  TurboConfig turbo;
  ReconcileConfig reconcile;
  std::size_t key_len = 128;
  SchemeChoice scheme = SchemeChoice::Both;
  std::uint64_t master_seed = 1;
  std::size_t trials = 1;
  double simulated_minutes = 0.0;  // > 0 overrides channel.n_samples

  std::vector<double> sweep_sigma2;      // empty: single point at nr.sigma2
  std::vector<std::size_t> sweep_key_len;  // empty: key_len only
};

/// Parses `key = value` lines (dotted keys, `#` comments) on top of the defaults.
/// Unknown keys and malformed values throw ConfigError.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Canonical text form; parse_config(dump_config(c)) reproduces c.
std::string dump_config(const ExperimentConfig& cfg);
std::uint64_t config_fingerprint(const ExperimentConfig& cfg);
void validate(const ExperimentConfig& cfg);

/// Samples per session (simulated_minutes wins over channel.n_samples).
std::size_t session_samples(const ExperimentConfig& cfg);

/// Parity puncture period for an estimated mismatch probability. Periods that are
/// multiples of the feedback register's cycle length are skipped: puncturing in step
/// with it hides weight-2 input patterns from the parity stream.
std::size_t adaptive_puncture_period(const ReconcileConfig& rc, const RscSpec& rsc, double p_hat);

/// Cycle length of the feedback register's impulse response (3 for feedback 7).
std::size_t feedback_period(const RscSpec& rsc);

/// Reports for every scheme selected by cfg.scheme, in order Indexing, TurboNR.
std::vector<SessionReport> run_session(const ExperimentConfig& cfg, std::size_t trial);

/// Same traces and reconciliation, keys assembled for each requested length.
/// Order: for each scheme, for each key length.
std::vector<SessionReport> run_session(const ExperimentConfig& cfg, std::size_t trial,
                                       const std::vector<std::size_t>& key_lengths);

/// Sweep points: one config per sigma2 value of cfg.sweep_sigma2 (or cfg itself).
std::vector<ExperimentConfig> expand_grid(const ExperimentConfig& cfg);
std::vector<std::size_t> key_lengths_of(const ExperimentConfig& cfg);

inline constexpr const char* kCsvHeader =
    "point_id,trial,scheme,key_len,sigma2,f_P_hz,bmr,kgr_keys_per_min,entropy_mean,secret_bit_rate,"
    "blocks_attempted,blocks_verified,leaked_bits,raw_bmr,bmr_sd,kgr_sd";

struct CsvRow {
  std::size_t point_id = 0;
  std::optional<std::size_t> trial;  // empty on aggregate rows
  SessionReport report;
  double bmr_sd = 0.0;
  double kgr_sd = 0.0;
};

std::string format_csv_row(const CsvRow& row);

/// Runs every point and trial, appending rows to `out` and flushing after each point.
/// Aggregate (mean/stddev) rows follow each point's data rows.
std::vector<CsvRow> run_sweep(const std::vector<ExperimentConfig>& points, const std::vector<std::size_t>& key_lengths,
                              std::ostream& out);
/// Opens `path` before any simulation starts; throws IoError when it cannot.
std::vector<CsvRow> run_sweep(const std::vector<ExperimentConfig>& points, const std::vector<std::size_t>& key_lengths,
                              const std::filesystem::path& path);

/// Data rows (aggregates skipped) from a sweep CSV.
std::vector<CsvRow> read_sweep_csv(const std::filesystem::path& path);

struct ComparisonRow {
  double sigma2 = 0.0;
  std::size_t key_len = 0;
  double kgr_turbo = 0.0;
  double kgr_indexing = 0.0;
  double kgr_indexing_min = 0.0;
  double kgr_indexing_max = 0.0;
  double bmr_turbo = 0.0;
  double bmr_indexing = 0.0;
  double kgr_ratio = 0.0;  // turbo / indexing, +inf when indexing is 0
  double bmr_ratio = 0.0;  // turbo / indexing
};

/// Groups reports by (sigma2, key length); each group needs both schemes.
std::vector<ComparisonRow> emit_comparison(const std::vector<SessionReport>& reports);
std::string comparison_text(const std::vector<ComparisonRow>& rows);
std::string comparison_csv(const std::vector<ComparisonRow>& rows);

struct BscBenchPoint {
  double crossover = 0.0;
  std::size_t blocks = 0;
  double ber = 0.0;  // decoded information-bit error rate
  double fer = 0.0;  // fraction of blocks with any residual error
  double mean_iterations = 0.0;
};

/// Channel-coding benchmark: random K-bit blocks, every transmitted coded bit
/// (systematic, kept parity, tail) through a BSC with the given crossover.
BscBenchPoint bsc_bench(const TurboConfig& cfg, double crossover, std::size_t blocks, std::uint64_t seed);

/// Best-effort SVG line plots of BMR and KGR versus sigma2.
void write_svg_plot(const std::vector<CsvRow>& rows, const std::filesystem::path& path);

}  // namespace v2vkey
