#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "v2vkey/harness.hpp"

namespace v2vkey {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : v) {
    if (ch == ',' || ch == ' ' || ch == '\t') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  double x = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc{} || p != v.data() + v.size() || !std::isfinite(x))
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  return x;
}

std::uint64_t to_u64(const std::string& key, const std::string& v, int base = 10) {
  std::uint64_t x = 0;
  std::string_view s = v;
  if (base == 10 && s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
    s.remove_prefix(2);
    base = 16;
  }
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x, base);
  if (s.empty() || ec != std::errc{} || p != s.data() + s.size())
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return x;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

AngleInterval to_interval(const std::string& key, const std::string& v) {
  const auto parts = split_list(v);
  if (parts.size() != 2) throw ConfigError(key + ": expected two numbers 'min, max'");
  return {to_double(key, parts[0]), to_double(key, parts[1])};
}

std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string octal(unsigned v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%o", v);
  return buf;
}

struct Field {
  const char* key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define V2V_SIZE_FIELD(name, member)                                                                 \
  Field {                                                                                            \
    name, [](ExperimentConfig& c, const std::string& v) { c.member = static_cast<std::size_t>(to_u64(name, v)); }, \
        [](const ExperimentConfig& c) { return std::to_string(c.member); }                           \
  }
#define V2V_DOUBLE_FIELD(name, member)                                                          \
  Field {                                                                                       \
    name, [](ExperimentConfig& c, const std::string& v) { c.member = to_double(name, v); },     \
        [](const ExperimentConfig& c) { return num(c.member); }                                 \
  }
#define V2V_INTERVAL_FIELD(name, member)                                                        \
  Field {                                                                                       \
    name, [](ExperimentConfig& c, const std::string& v) { c.member = to_interval(name, v); },   \
        [](const ExperimentConfig& c) { return num(c.member.min) + ", " + num(c.member.max); }  \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      Field{"channel.L",
            [](ExperimentConfig& c, const std::string& v) {
              const auto n = to_u64("channel.L", v);
              if (n > 100000) throw ConfigError("channel.L: too large");
              c.channel.paths = static_cast<int>(n);
            },
            [](const ExperimentConfig& c) { return std::to_string(c.channel.paths); }},
      V2V_DOUBLE_FIELD("channel.fc", channel.carrier_hz),
      V2V_DOUBLE_FIELD("channel.c", channel.propagation_speed),
      V2V_DOUBLE_FIELD("channel.u_tx", channel.tx_speed),
      V2V_DOUBLE_FIELD("channel.u_rx", channel.rx_speed),
      V2V_INTERVAL_FIELD("channel.azimuth_tx", channel.azimuth_tx),
      V2V_INTERVAL_FIELD("channel.azimuth_rx", channel.azimuth_rx),
      V2V_INTERVAL_FIELD("channel.elevation_tx", channel.elevation_tx),
      V2V_INTERVAL_FIELD("channel.elevation_rx", channel.elevation_rx),
      V2V_DOUBLE_FIELD("channel.weibull_b", channel.weibull_shape),
      V2V_DOUBLE_FIELD("channel.weibull_w", channel.weibull_scale),
      V2V_DOUBLE_FIELD("channel.u_s_max", channel.scatterer_speed_cap),
      Field{"channel.normalization",
            [](ExperimentConfig& c, const std::string& v) {
              if (v == "sqrt2_over_l") c.channel.normalization = Normalization::Sqrt2OverL;
              else if (v == "unit_power") c.channel.normalization = Normalization::UnitPower;
              else throw ConfigError("channel.normalization: expected sqrt2_over_l or unit_power");
            },
            [](const ExperimentConfig& c) {
              return std::string(c.channel.normalization == Normalization::UnitPower ? "unit_power" : "sqrt2_over_l");
            }},
      V2V_SIZE_FIELD("channel.n_samples", channel.n_samples),
      V2V_DOUBLE_FIELD("channel.probe_rate_factor", channel.probe_rate_factor),

      V2V_DOUBLE_FIELD("nr.sigma2", nr.sigma2),
      Field{"nr.mu_re", [](ExperimentConfig& c, const std::string& v) { c.nr.mean_offset.real(to_double("nr.mu_re", v)); },
            [](const ExperimentConfig& c) { return num(c.nr.mean_offset.real()); }},
      Field{"nr.mu_im", [](ExperimentConfig& c, const std::string& v) { c.nr.mean_offset.imag(to_double("nr.mu_im", v)); },
            [](const ExperimentConfig& c) { return num(c.nr.mean_offset.imag()); }},
      Field{"nr.snr_db",
            [](ExperimentConfig& c, const std::string& v) {
              if (v == "none") c.nr.snr_db.reset();
              else c.nr.snr_db = to_double("nr.snr_db", v);
            },
            [](const ExperimentConfig& c) { return c.nr.snr_db ? num(*c.nr.snr_db) : std::string("none"); }},

      V2V_DOUBLE_FIELD("quant.gamma", quant.gamma),
      V2V_SIZE_FIELD("quant.m", quant.m),
      V2V_DOUBLE_FIELD("quant.fraction", quant.fraction),
      V2V_SIZE_FIELD("quant.region_budget", quant.refresh.region_budget),
      V2V_SIZE_FIELD("quant.region_samples", quant.refresh.region_samples),
      V2V_DOUBLE_FIELD("quant.rho_threshold", quant.refresh.rho_threshold),
      V2V_SIZE_FIELD("quant.fit_window", quant.fit_window),
      V2V_SIZE_FIELD("quant.entropy_window", quant.entropy_window),

      Field{"turbo.constraint_length",
            [](ExperimentConfig& c, const std::string& v) {
              c.turbo.rsc.constraint_length = static_cast<int>(std::min<std::uint64_t>(to_u64("turbo.constraint_length", v), 64));
            },
            [](const ExperimentConfig& c) { return std::to_string(c.turbo.rsc.constraint_length); }},
      Field{"turbo.feedback",
            [](ExperimentConfig& c, const std::string& v) {
              c.turbo.rsc.feedback = static_cast<unsigned>(to_u64("turbo.feedback", v, 8));
            },
            [](const ExperimentConfig& c) { return octal(c.turbo.rsc.feedback); }},
      Field{"turbo.feedforward",
            [](ExperimentConfig& c, const std::string& v) {
              c.turbo.rsc.feedforward = static_cast<unsigned>(to_u64("turbo.feedforward", v, 8));
            },
            [](const ExperimentConfig& c) { return octal(c.turbo.rsc.feedforward); }},
      V2V_SIZE_FIELD("turbo.block_len", turbo.block_len),
      Field{"turbo.interleaver_seed",
            [](ExperimentConfig& c, const std::string& v) { c.turbo.interleaver_seed = to_u64("turbo.interleaver_seed", v); },
            [](const ExperimentConfig& c) { return std::to_string(c.turbo.interleaver_seed); }},
      Field{"turbo.puncture",
            [](ExperimentConfig& c, const std::string& v) {
              if (v == "none") c.turbo.puncture = Puncture::None;
              else if (v == "half") c.turbo.puncture = Puncture::HalfRate;
              else if (v == "periodic") c.turbo.puncture = Puncture::Periodic;
              else throw ConfigError("turbo.puncture: expected none, half or periodic");
            },
            [](const ExperimentConfig& c) {
              switch (c.turbo.puncture) {
                case Puncture::HalfRate: return std::string("half");
                case Puncture::Periodic: return std::string("periodic");
                default: return std::string("none");
              }
            }},
      V2V_SIZE_FIELD("turbo.puncture_period", turbo.puncture_period),
      Field{"turbo.iterations",
            [](ExperimentConfig& c, const std::string& v) {
              c.turbo.iterations = static_cast<int>(std::min<std::uint64_t>(to_u64("turbo.iterations", v), 1000));
            },
            [](const ExperimentConfig& c) { return std::to_string(c.turbo.iterations); }},
      Field{"turbo.algorithm",
            [](ExperimentConfig& c, const std::string& v) {
              if (v == "logmap") c.turbo.algorithm = DecoderAlgorithm::LogMap;
              else if (v == "maxlogmap") c.turbo.algorithm = DecoderAlgorithm::MaxLogMap;
              else throw ConfigError("turbo.algorithm: expected logmap or maxlogmap");
            },
            [](const ExperimentConfig& c) {
              return std::string(c.turbo.algorithm == DecoderAlgorithm::MaxLogMap ? "maxlogmap" : "logmap");
            }},
      V2V_DOUBLE_FIELD("turbo.extrinsic_scale", turbo.extrinsic_scale),

      V2V_SIZE_FIELD("reconcile.calibration_probes", reconcile.calibration_probes),
      V2V_SIZE_FIELD("reconcile.mismatch_probes", reconcile.mismatch_probes),
      Field{"reconcile.adaptive_rate",
            [](ExperimentConfig& c, const std::string& v) { c.reconcile.adaptive_rate = to_bool("reconcile.adaptive_rate", v); },
            [](const ExperimentConfig& c) { return std::string(c.reconcile.adaptive_rate ? "true" : "false"); }},
      V2V_DOUBLE_FIELD("reconcile.rate_margin", reconcile.rate_margin),
      V2V_DOUBLE_FIELD("reconcile.rate_floor", reconcile.rate_floor),
      V2V_SIZE_FIELD("reconcile.max_puncture_period", reconcile.max_puncture_period),
      V2V_DOUBLE_FIELD("reconcile.min_p_hat", reconcile.min_p_hat),
      V2V_DOUBLE_FIELD("reconcile.max_p_hat", reconcile.max_p_hat),

      V2V_SIZE_FIELD("session.key_len", key_len),
      Field{"session.scheme",
            [](ExperimentConfig& c, const std::string& v) { c.scheme = parse_scheme(v); },
            [](const ExperimentConfig& c) { return to_string(c.scheme); }},
      Field{"session.master_seed",
            [](ExperimentConfig& c, const std::string& v) { c.master_seed = to_u64("session.master_seed", v); },
            [](const ExperimentConfig& c) { return std::to_string(c.master_seed); }},
      V2V_SIZE_FIELD("session.trials", trials),
      V2V_DOUBLE_FIELD("session.simulated_minutes", simulated_minutes),

      Field{"sweep.sigma2",
            [](ExperimentConfig& c, const std::string& v) {
              c.sweep_sigma2.clear();
              for (const auto& s : split_list(v)) c.sweep_sigma2.push_back(to_double("sweep.sigma2", s));
            },
            [](const ExperimentConfig& c) {
              std::string out;
              for (double s : c.sweep_sigma2) out += (out.empty() ? "" : ", ") + num(s);
              return out;
            }},
      Field{"sweep.key_len",
            [](ExperimentConfig& c, const std::string& v) {
              c.sweep_key_len.clear();
              for (const auto& s : split_list(v)) c.sweep_key_len.push_back(static_cast<std::size_t>(to_u64("sweep.key_len", s)));
            },
            [](const ExperimentConfig& c) {
              std::string out;
              for (auto s : c.sweep_key_len) out += (out.empty() ? "" : ", ") + std::to_string(s);
              return out;
            }},
  };
  return table;
}

#undef V2V_SIZE_FIELD
#undef V2V_DOUBLE_FIELD
#undef V2V_INTERVAL_FIELD

}  // namespace

std::string to_string(SchemeChoice s) {
  switch (s) {
    case SchemeChoice::Indexing: return "indexing";
    case SchemeChoice::TurboNR: return "turbo";
    default: return "both";
  }
}

SchemeChoice parse_scheme(const std::string& s) {
  if (s == "indexing") return SchemeChoice::Indexing;
  if (s == "turbo") return SchemeChoice::TurboNR;
  if (s == "both") return SchemeChoice::Both;
  throw ConfigError("scheme: expected indexing, turbo or both, got '" + s + "'");
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  bool explicit_w = false, explicit_cap = false, speed_law_changed = false;
  std::optional<double> mean_speed;

  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> seen;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string value = trim(std::string_view(t).substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    if (std::find(seen.begin(), seen.end(), key) != seen.end())
      throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    seen.push_back(key);

    if (key == "channel.weibull_mean") {
      mean_speed = to_double(key, value);
      speed_law_changed = true;
      continue;
    }
    const auto& table = fields();
    const auto it = std::find_if(table.begin(), table.end(), [&](const Field& f) { return key == f.key; });
    if (it == table.end()) throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    it->set(cfg, value);
    if (key == "channel.weibull_w") explicit_w = true;
    if (key == "channel.u_s_max") explicit_cap = true;
    if (key == "channel.weibull_b" || key == "channel.weibull_w") speed_law_changed = true;
  }

  // The scale follows the mean speed and the Doppler cap follows the speed law
  // unless they were pinned explicitly.
  if (mean_speed && explicit_w) throw ConfigError("channel.weibull_mean and channel.weibull_w are mutually exclusive");
  try {
    if (!explicit_w && speed_law_changed) {
      if (!(cfg.channel.weibull_shape > 0.0)) throw ConfigError("channel.weibull_b must be > 0");
      cfg.channel.weibull_scale = weibull_scale_for_mean(cfg.channel.weibull_shape, mean_speed.value_or(10.0));
    }
    if (!explicit_cap && speed_law_changed)
      cfg.channel.scatterer_speed_cap = weibull_quantile(cfg.channel.weibull_shape, cfg.channel.weibull_scale, 0.999);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  validate(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error reading config file " + path.string());
  return parse_config(ss.str());
}

std::string dump_config(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& f : fields()) out += std::string(f.key) + " = " + f.get(cfg) + "\n";
  return out;
}

std::uint64_t config_fingerprint(const ExperimentConfig& cfg) {
  // FNV-1a over the canonical text form.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : dump_config(cfg)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void validate(const ExperimentConfig& cfg) {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  try {
    validate(cfg.channel);
    validate(cfg.turbo);
    (void)doppler_bounds(cfg.channel);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  } catch (const std::domain_error& e) {
    throw ConfigError(e.what());
  }
  require(cfg.channel.probe_rate_factor > 0.0 && cfg.channel.probe_rate_factor <= 1.0,
          "channel.probe_rate_factor must be in (0, 1]");
  require(cfg.nr.sigma2 >= 0.0, "nr.sigma2 must be >= 0");
  require(cfg.quant.gamma >= 0.0, "quant.gamma must be >= 0");
  require(cfg.quant.m >= 1, "quant.m must be >= 1");
  require(cfg.quant.fraction > 0.0 && cfg.quant.fraction <= 1.0, "quant.fraction must be in (0, 1]");
  require(cfg.quant.refresh.region_budget >= 1, "quant.region_budget must be >= 1");
  require(cfg.quant.refresh.region_samples >= 1, "quant.region_samples must be >= 1");
  require(cfg.quant.refresh.rho_threshold >= -1.0 && cfg.quant.refresh.rho_threshold <= 1.0,
          "quant.rho_threshold must be in [-1, 1]");
  require(cfg.quant.entropy_window >= 8, "quant.entropy_window must be >= 8");
  require(cfg.reconcile.calibration_probes >= 2, "reconcile.calibration_probes must be >= 2");
  require(cfg.reconcile.rate_margin > 0.0, "reconcile.rate_margin must be > 0");
  require(cfg.reconcile.rate_floor >= 0.0, "reconcile.rate_floor must be >= 0");
  require(cfg.reconcile.max_puncture_period >= 1, "reconcile.max_puncture_period must be >= 1");
  require(cfg.reconcile.min_p_hat > 0.0 && cfg.reconcile.min_p_hat <= cfg.reconcile.max_p_hat &&
              cfg.reconcile.max_p_hat < 0.5,
          "reconcile p_hat clamp must satisfy 0 < min <= max < 0.5");
  require(cfg.key_len >= 1, "session.key_len must be >= 1");
  for (auto k : cfg.sweep_key_len) require(k >= 1, "sweep.key_len entries must be >= 1");
  for (double s : cfg.sweep_sigma2) require(s >= 0.0, "sweep.sigma2 entries must be >= 0");
  require(cfg.trials >= 1, "session.trials must be >= 1");
  require(cfg.simulated_minutes >= 0.0, "session.simulated_minutes must be >= 0");
  require(cfg.reconcile.mismatch_probes >= cfg.reconcile.calibration_probes,
          "reconcile.mismatch_probes must be >= reconcile.calibration_probes");
  require(session_samples(cfg) > cfg.reconcile.mismatch_probes + 1,
          "session is shorter than the calibration window");
}

}  // namespace v2vkey
