#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const fs::path kDir = fs::temp_directory_path() / "v2vkey_cli_test";

int run(const std::string& args) {
  const std::string cmd = std::string(V2VKEY_CLI) + " " + args + " >" + (kDir / "stdout.txt").string() + " 2>" +
                          (kDir / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path write(const std::string& name, const std::string& text) {
  fs::create_directories(kDir);
  const auto p = kDir / name;
  std::ofstream(p, std::ios::binary) << text;
  return p;
}

const std::string kSmall =
    "channel.n_samples = 9216\n"
    "sweep.sigma2 = 0.01, 0.05\n";

}  // namespace

TEST_CASE("simulate writes identical CSV bytes for identical config and seed") {
  const auto cfg = write("small.cfg", kSmall);
  const auto a = kDir / "a.csv", b = kDir / "b.csv", c = kDir / "c.csv";
  CHECK(run("simulate --config " + cfg.string() + " --seed 7 --trials 2 --scheme both --out " + a.string()) == 0);
  CHECK(run("simulate --config " + cfg.string() + " --seed 7 --trials 2 --scheme both --out " + b.string()) == 0);
  CHECK(run("simulate --config " + cfg.string() + " --seed 8 --trials 2 --scheme both --out " + c.string()) == 0);
  const auto text = slurp(a);
  CHECK(!text.empty());
  CHECK(text == slurp(b));
  CHECK(text != slurp(c));
  CHECK(text.rfind("point_id,trial,scheme,key_len,sigma2,f_P_hz,bmr,kgr_keys_per_min,entropy_mean,secret_bit_rate,"
                   "blocks_attempted,blocks_verified,leaked_bits",
                   0) == 0);
}

TEST_CASE("report and plot from a simulate CSV") {
  const auto cfg = write("small.cfg", kSmall);
  const auto csv = kDir / "r.csv", table = kDir / "table.csv", svg = kDir / "plot.svg";
  REQUIRE(run("simulate --config " + cfg.string() + " --scheme both --out " + csv.string() + " --plot " + svg.string()) == 0);
  CHECK(slurp(svg).find("<svg") != std::string::npos);
  CHECK(run("report " + csv.string() + " --out " + table.string()) == 0);
  CHECK(slurp(kDir / "stdout.txt").find("KGR_ratio") != std::string::npos);
  CHECK(!slurp(table).empty());

  const auto turbo_only = kDir / "t.csv";
  REQUIRE(run("simulate --config " + cfg.string() + " --scheme turbo --out " + turbo_only.string()) == 0);
  CHECK(run("report " + turbo_only.string()) == 1);  // nothing to pair with
}

TEST_CASE("channel trace CSV") {
  const auto out = kDir / "trace.csv";
  fs::create_directories(kDir);
  CHECK(run("channel --seed 3 --samples 50 --out " + out.string()) == 0);
  std::istringstream in(slurp(out));
  std::string line;
  std::getline(in, line);
  CHECK(line == "index,re,im,envelope");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 50);
  const auto again = kDir / "trace2.csv";
  CHECK(run("channel --seed 3 --samples 50 --out " + again.string()) == 0);
  CHECK(slurp(out) == slurp(again));
}

TEST_CASE("turbo-bench grid") {
  CHECK(run("turbo-bench --p-grid 0.01,0.05 --block-len 128 --iterations 4 --blocks 10 --out -") == 0);
  const auto text = slurp(kDir / "stdout.txt");
  std::istringstream in(text);
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 3);
}

TEST_CASE("exit codes: 1 for configuration errors, 2 for I/O errors") {
  const auto bad = write("bad.cfg", "channel.unknown = 1\n");
  CHECK(run("simulate --config " + bad.string()) == 1);
  const auto malformed = write("malformed.cfg", "session.trials = many\n");
  CHECK(run("simulate --config " + malformed.string()) == 1);
  CHECK(run("simulate --scheme cascade") == 1);
  CHECK(run("simulate --config " + (kDir / "missing.cfg").string()) == 2);
  const auto cfg = write("small.cfg", kSmall);
  CHECK(run("simulate --config " + cfg.string() + " --out /nonexistent_dir/out.csv") == 2);
  CHECK(run("report " + (kDir / "missing.csv").string()) == 2);
  CHECK(run("--help") == 0);
}
