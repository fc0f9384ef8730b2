#include <pybind11/complex.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "v2vkey/channel.hpp"
#include "v2vkey/harness.hpp"
#include "v2vkey/metrics.hpp"
#include "v2vkey/reconcile.hpp"

namespace py = pybind11;
using namespace v2vkey;

namespace {

py::dict report_dict(const SessionReport& r) {
  py::dict d;
  d["scheme"] = to_string(r.scheme);
  d["key_len"] = r.key_len;
  d["bmr"] = r.bmr;
  d["raw_bmr"] = r.raw_bmr;
  d["kgr_keys_per_min"] = r.kgr_keys_per_min;
  d["entropy_mean"] = r.entropy_per_bit_mean;
  d["secret_bit_rate"] = r.secret_bit_rate;
  d["blocks_attempted"] = r.blocks_attempted;
  d["blocks_verified"] = r.blocks_verified;
  d["keys_generated"] = r.keys_generated;
  d["leaked_bits"] = r.leaked_bits_total;
  d["probe_rate_hz"] = r.probe_rate_hz;
  d["simulated_seconds"] = r.simulated_seconds;
  d["sigma2"] = r.sigma2;
  d["p_hat"] = r.p_hat;
  d["puncture_period"] = r.puncture_period;
  d["trace_digest"] = r.trace_digest;
  return d;
}

ExperimentConfig config_from(const std::string& text) {
  auto cfg = parse_config(text);
  validate(cfg);
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Channel simulation, turbo reconciliation and key generation sessions";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  m.def("entropy_per_bit", &entropy_per_bit, py::arg("p0"));
  m.def("secret_bit_rate", &secret_bit_rate, py::arg("probe_rate_hz"), py::arg("p_joint"));
  m.def("mismatch_prob", &mismatch_prob, py::arg("p_e"), py::arg("n"));
  m.def(
      "bmr", [](const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) { return measure_bmr(a, b); },
      py::arg("a"), py::arg("b"));

  m.def(
      "max_doppler",
      [](const std::string& config_text) { return doppler_bounds(config_from(config_text).channel).max_doppler_hz; },
      py::arg("config_text") = "");

  m.def(
      "channel_trace",
      [](std::uint64_t seed, std::size_t samples, const std::string& config_text) {
        auto p = config_from(config_text).channel;
        p.n_samples = samples;
        return generate_trace(p, seed).samples;
      },
      py::arg("seed"), py::arg("samples"), py::arg("config_text") = "",
      "Complex channel samples at the probing rate of the configured scenario.");

  m.def(
      "reconcile_block",
      [](const std::vector<std::uint8_t>& alice, const std::vector<std::uint8_t>& bob, double p_hat,
         std::size_t puncture_period) {
        TurboConfig cfg;
        cfg.block_len = bob.size();
        if (puncture_period > 1) {
          cfg.puncture = Puncture::Periodic;
          cfg.puncture_period = puncture_period;
        }
        const auto wire = serialize(bob_prepare(cfg, bob));
        const auto r = alice_reconcile(cfg, alice, deserialize(wire), p_hat);
        py::dict d;
        d["ok"] = r.ok();
        d["decoded"] = r.decoded;
        d["iterations"] = r.iterations;
        d["message"] = py::bytes(reinterpret_cast<const char*>(wire.data()), wire.size());
        d["leaked_bits"] = r.ok() ? r.key->leaked_bits : payload_length(cfg) + kCheckBits;
        return d;
      },
      py::arg("alice"), py::arg("bob"), py::arg("p_hat"), py::arg("puncture_period") = 1,
      "Bob prepares a message for his block, it goes through the wire format, and Alice decodes.");

  m.def(
      "run_session",
      [](const std::string& config_text, std::size_t trial) {
        const auto cfg = config_from(config_text);
        py::list out;
        for (const auto& r : run_session(cfg, trial)) out.append(report_dict(r));
        return out;
      },
      py::arg("config_text") = "", py::arg("trial") = 0);

  m.def(
      "simulate_csv",
      [](const std::string& config_text) {
        const auto cfg = config_from(config_text);
        std::ostringstream out;
        run_sweep(expand_grid(cfg), key_lengths_of(cfg), out);
        return out.str();
      },
      py::arg("config_text") = "", "Sweep CSV text, the same bytes `v2vkey simulate` writes.");

  m.def(
      "dump_config", [](const std::string& config_text) { return dump_config(config_from(config_text)); },
      py::arg("config_text") = "");
}
