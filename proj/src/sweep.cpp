#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "v2vkey/harness.hpp"

namespace v2vkey {
namespace {

std::string num(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (std::isnan(x)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// Sample standard deviation; 0 for fewer than two values.
double sd_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

double ratio(double tc, double idx) {
  if (tc == idx) return 1.0;
  if (idx == 0.0) return std::numeric_limits<double>::infinity();
  return tc / idx;
}

// Runs fn(i) for i in [0, n) on up to hardware_concurrency threads; the first
// exception (lowest index) is rethrown after all workers finish.
template <class Fn>
void parallel_for(std::size_t n, Fn fn) {
  const std::size_t workers = std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, std::max<std::size_t>(n, 1));
  std::vector<std::exception_ptr> errors(n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

std::vector<ExperimentConfig> expand_grid(const ExperimentConfig& cfg) {
  if (cfg.sweep_sigma2.empty()) return {cfg};
  std::vector<ExperimentConfig> out;
  for (double s : cfg.sweep_sigma2) {
    ExperimentConfig c = cfg;
    c.nr.sigma2 = s;
    c.sweep_sigma2.clear();
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<std::size_t> key_lengths_of(const ExperimentConfig& cfg) {
  return cfg.sweep_key_len.empty() ? std::vector<std::size_t>{cfg.key_len} : cfg.sweep_key_len;
}

std::string format_csv_row(const CsvRow& row) {
  const auto& r = row.report;
  std::string s;
  s += std::to_string(row.point_id) + ",";
  s += (row.trial ? std::to_string(*row.trial) : std::string("agg")) + ",";
  s += to_string(r.scheme) + ",";
  s += std::to_string(r.key_len) + ",";
  s += num(r.sigma2) + ",";
  s += num(r.probe_rate_hz) + ",";
  s += num(r.bmr) + ",";
  s += num(r.kgr_keys_per_min) + ",";
  s += num(r.entropy_per_bit_mean) + ",";
  s += num(r.secret_bit_rate) + ",";
  s += std::to_string(r.blocks_attempted) + ",";
  s += std::to_string(r.blocks_verified) + ",";
  s += std::to_string(r.leaked_bits_total) + ",";
  s += num(r.raw_bmr) + ",";
  if (!row.trial) s += num(row.bmr_sd);
  s += ",";
  if (!row.trial) s += num(row.kgr_sd);
  return s;
}

std::vector<CsvRow> run_sweep(const std::vector<ExperimentConfig>& points, const std::vector<std::size_t>& key_lengths,
                              std::ostream& out) {
  if (points.empty()) throw ConfigError("run_sweep: empty grid");
  for (const auto& p : points) validate(p);
  std::vector<CsvRow> all;
  out << kCsvHeader << '\n';
  out.flush();
  for (std::size_t pid = 0; pid < points.size(); ++pid) {
    const auto& cfg = points[pid];
    std::vector<std::vector<SessionReport>> per_trial(cfg.trials);
    parallel_for(cfg.trials, [&](std::size_t t) { per_trial[t] = run_session(cfg, t, key_lengths); });

    std::vector<CsvRow> rows;
    for (std::size_t t = 0; t < cfg.trials; ++t)
      for (const auto& r : per_trial[t]) rows.push_back({pid, t, r, 0.0, 0.0});

    // One aggregate per (scheme, key length): means of rates, totals of counts.
    const std::size_t per = per_trial[0].size();
    for (std::size_t j = 0; j < per; ++j) {
      std::vector<double> bmr, raw, kgr, ent, sbr;
      CsvRow agg{pid, std::nullopt, per_trial[0][j], 0.0, 0.0};
      agg.report.blocks_attempted = agg.report.blocks_verified = agg.report.leaked_bits_total = 0;
      agg.report.keys_generated = 0;
      for (std::size_t t = 0; t < cfg.trials; ++t) {
        const auto& r = per_trial[t][j];
        bmr.push_back(r.bmr);
        raw.push_back(r.raw_bmr);
        kgr.push_back(r.kgr_keys_per_min);
        ent.push_back(r.entropy_per_bit_mean);
        sbr.push_back(r.secret_bit_rate);
        agg.report.blocks_attempted += r.blocks_attempted;
        agg.report.blocks_verified += r.blocks_verified;
        agg.report.leaked_bits_total += r.leaked_bits_total;
        agg.report.keys_generated += r.keys_generated;
      }
      agg.report.bmr = mean_of(bmr);
      agg.report.raw_bmr = mean_of(raw);
      agg.report.kgr_keys_per_min = mean_of(kgr);
      agg.report.entropy_per_bit_mean = mean_of(ent);
      agg.report.secret_bit_rate = mean_of(sbr);
      agg.bmr_sd = sd_of(bmr);
      agg.kgr_sd = sd_of(kgr);
      rows.push_back(agg);
    }

    for (const auto& r : rows) out << format_csv_row(r) << '\n';
    out.flush();
    if (!out) throw IoError("run_sweep: write failed");
    all.insert(all.end(), rows.begin(), rows.end());
  }
  return all;
}

std::vector<CsvRow> run_sweep(const std::vector<ExperimentConfig>& points, const std::vector<std::size_t>& key_lengths,
                              const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return run_sweep(points, key_lengths, out);
}

std::vector<CsvRow> read_sweep_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path.string() + ": empty CSV");
  const auto header = split_csv_line(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const char* need : {"point_id", "trial", "scheme", "key_len", "sigma2", "f_P_hz", "bmr", "kgr_keys_per_min",
                           "entropy_mean", "secret_bit_rate", "blocks_attempted", "blocks_verified", "leaked_bits"})
    if (!col.count(need)) throw ConfigError(path.string() + ": missing column " + need);

  std::vector<CsvRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    if (f.size() != header.size())
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": wrong field count");
    if (f[col["trial"]] == "agg") continue;
    try {
      CsvRow row;
      row.point_id = std::stoul(f[col["point_id"]]);
      row.trial = std::stoul(f[col["trial"]]);
      auto& r = row.report;
      const auto& scheme = f[col["scheme"]];
      if (scheme == "indexing") r.scheme = Scheme::Indexing;
      else if (scheme == "turbo") r.scheme = Scheme::TurboNR;
      else throw std::invalid_argument("unknown scheme " + scheme);
      r.key_len = std::stoul(f[col["key_len"]]);
      r.sigma2 = std::stod(f[col["sigma2"]]);
      r.probe_rate_hz = std::stod(f[col["f_P_hz"]]);
      r.bmr = std::stod(f[col["bmr"]]);
      r.kgr_keys_per_min = std::stod(f[col["kgr_keys_per_min"]]);
      r.entropy_per_bit_mean = std::stod(f[col["entropy_mean"]]);
      r.secret_bit_rate = std::stod(f[col["secret_bit_rate"]]);
      r.blocks_attempted = std::stoul(f[col["blocks_attempted"]]);
      r.blocks_verified = std::stoul(f[col["blocks_verified"]]);
      r.leaked_bits_total = std::stoul(f[col["leaked_bits"]]);
      if (col.count("raw_bmr")) r.raw_bmr = std::stod(f[col["raw_bmr"]]);
      rows.push_back(row);
    } catch (const std::logic_error& e) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

std::vector<ComparisonRow> emit_comparison(const std::vector<SessionReport>& reports) {
  struct Group {
    std::vector<const SessionReport*> turbo, indexing;
  };
  std::map<std::pair<double, std::size_t>, Group> groups;
  for (const auto& r : reports) {
    auto& g = groups[{r.sigma2, r.key_len}];
    (r.scheme == Scheme::TurboNR ? g.turbo : g.indexing).push_back(&r);
  }
  std::vector<ComparisonRow> out;
  for (const auto& [key, g] : groups) {
    if (g.turbo.empty() || g.indexing.empty())
      throw std::invalid_argument("emit_comparison: unmatched configs at sigma2=" + num(key.first) +
                                  ", key_len=" + std::to_string(key.second));
    std::vector<double> kt, ki, bt, bi;
    for (auto* r : g.turbo) {
      kt.push_back(r->kgr_keys_per_min);
      bt.push_back(r->bmr);
    }
    for (auto* r : g.indexing) {
      ki.push_back(r->kgr_keys_per_min);
      bi.push_back(r->bmr);
    }
    ComparisonRow row;
    row.sigma2 = key.first;
    row.key_len = key.second;
    row.kgr_turbo = mean_of(kt);
    row.kgr_indexing = mean_of(ki);
    row.kgr_indexing_min = *std::min_element(ki.begin(), ki.end());
    row.kgr_indexing_max = *std::max_element(ki.begin(), ki.end());
    row.bmr_turbo = mean_of(bt);
    row.bmr_indexing = mean_of(bi);
    row.kgr_ratio = ratio(row.kgr_turbo, row.kgr_indexing);
    row.bmr_ratio = ratio(row.bmr_turbo, row.bmr_indexing);
    out.push_back(row);
  }
  return out;
}

std::string comparison_text(const std::vector<ComparisonRow>& rows) {
  std::ostringstream s;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-10s %7s %12s %12s %21s %10s %10s %9s %9s\n", "sigma2", "key_len", "KGR_turbo",
                "KGR_indexing", "indexing_min..max", "BMR_turbo", "BMR_index", "KGR_ratio", "BMR_ratio");
  s << buf;
  for (const auto& r : rows) {
    const std::string range = num(r.kgr_indexing_min) + ".." + num(r.kgr_indexing_max);
    std::snprintf(buf, sizeof buf, "%-10s %7zu %12s %12s %21s %10s %10s %9s %9s\n", num(r.sigma2).c_str(), r.key_len,
                  num(r.kgr_turbo).c_str(), num(r.kgr_indexing).c_str(), range.c_str(), num(r.bmr_turbo).c_str(),
                  num(r.bmr_indexing).c_str(), num(r.kgr_ratio).c_str(), num(r.bmr_ratio).c_str());
    s << buf;
  }
  return s.str();
}

std::string comparison_csv(const std::vector<ComparisonRow>& rows) {
  std::string s =
      "sigma2,key_len,kgr_turbo,kgr_indexing,kgr_indexing_min,kgr_indexing_max,bmr_turbo,bmr_indexing,kgr_ratio,"
      "bmr_ratio\n";
  for (const auto& r : rows) {
    s += num(r.sigma2) + "," + std::to_string(r.key_len) + "," + num(r.kgr_turbo) + "," + num(r.kgr_indexing) + "," +
         num(r.kgr_indexing_min) + "," + num(r.kgr_indexing_max) + "," + num(r.bmr_turbo) + "," +
         num(r.bmr_indexing) + "," + num(r.kgr_ratio) + "," + num(r.bmr_ratio) + "\n";
  }
  return s;
}

void write_svg_plot(const std::vector<CsvRow>& rows, const std::filesystem::path& path) {
  // series name -> sigma2 -> values
  std::map<std::string, std::map<double, std::vector<double>>> bmr, kgr;
  for (const auto& row : rows) {
    if (!row.trial || !(row.report.sigma2 > 0.0)) continue;
    const std::string name = to_string(row.report.scheme) + " " + std::to_string(row.report.key_len);
    bmr[name][row.report.sigma2].push_back(row.report.bmr);
    kgr[name][row.report.sigma2].push_back(row.report.kgr_keys_per_min);
  }

  constexpr double W = 480, H = 320, M = 50;
  const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << 2 * W << "\" height=\"" << H + 20
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n";

  auto panel = [&](const std::map<std::string, std::map<double, std::vector<double>>>& data, double x0,
                   const char* title) {
    double xmin = 1e300, xmax = -1e300, ymax = 0.0;
    for (const auto& [name, pts] : data)
      for (const auto& [x, ys] : pts) {
        xmin = std::min(xmin, std::log10(x));
        xmax = std::max(xmax, std::log10(x));
        ymax = std::max(ymax, mean_of(ys));
      }
    if (xmax <= xmin) xmax = xmin + 1.0;
    if (ymax <= 0.0) ymax = 1.0;
    auto px = [&](double x) { return x0 + M + (std::log10(x) - xmin) / (xmax - xmin) * (W - 2 * M); };
    auto py = [&](double y) { return H - M + 10 - y / ymax * (H - 2 * M); };
    s << "<text x=\"" << x0 + W / 2 << "\" y=\"20\" text-anchor=\"middle\">" << title << "</text>\n";
    s << "<line x1=\"" << x0 + M << "\" y1=\"" << H - M + 10 << "\" x2=\"" << x0 + W - M << "\" y2=\"" << H - M + 10
      << "\" stroke=\"black\"/>\n";
    s << "<line x1=\"" << x0 + M << "\" y1=\"" << M - 10 << "\" x2=\"" << x0 + M << "\" y2=\"" << H - M + 10
      << "\" stroke=\"black\"/>\n";
    s << "<text x=\"" << x0 + W / 2 << "\" y=\"" << H - 5 << "\" text-anchor=\"middle\">log10 sigma2</text>\n";
    s << "<text x=\"" << x0 + 5 << "\" y=\"" << M - 15 << "\">max " << num(ymax) << "</text>\n";
    std::size_t c = 0;
    for (const auto& [name, pts] : data) {
      const char* color = colors[c % 6];
      s << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"";
      for (const auto& [x, ys] : pts) s << px(x) << "," << py(mean_of(ys)) << " ";
      s << "\"/>\n";
      s << "<text x=\"" << x0 + W - M - 90 << "\" y=\"" << M + 14 * c << "\" fill=\"" << color << "\">" << name
        << "</text>\n";
      ++c;
    }
  };
  panel(bmr, 0.0, "BMR vs sigma2");
  panel(kgr, W, "KGR (keys/min) vs sigma2");
  s << "</svg>\n";

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << s.str();
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace v2vkey
