#include <doctest.h>

#include "semm/io.hpp"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <regex>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Scratch {
  fs::path dir;
  Scratch() {
    dir = fs::temp_directory_path() / ("stark-sim-cli-" + std::to_string(::getpid()) + "-" +
                                       std::to_string(counter++));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
  fs::path operator/(const std::string& s) const { return dir / s; }
  static inline int counter = 0;
};

int run(const std::string& args) {
  const std::string cmd = std::string("\"") + STARK_SIM_PATH + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

double number_after(const std::string& text, const std::string& key) {
  std::smatch m;
  const std::regex re(key + R"(\s*=\s*([-+0-9.eE]+))");
  REQUIRE(std::regex_search(text, m, re));
  return std::stod(m[1]);
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("exit codes") {
  Scratch s;
  const std::string out = "--out \"" + s.dir.string() + "\" ";
  CHECK(run(out + "--ions 500 stark-sweep --area-step 10") == 0);
  CHECK(run(out + "--ions -5 semm") == 2);
  CHECK(run(out + "--mode glass semm") == 2);
  CHECK(run(out + "semm --t1 4 --t2p 12") == 2);
  CHECK(run(out + "run \"" + (s / "missing.seq").string() + "\"") == 2);
  CHECK(run(out + "bogus") != 0);

  std::ofstream(s / "bad.seq") << "optical start=0 dur=1 rabi=0.25 phase=0\n";
  CHECK(run(out + "run \"" + (s / "bad.seq").string() + "\"") == 2);

  std::ofstream(s / "zeros.csv") << "x,y\n0,0\n1,0\n2,0\n3,0\n4,0\n5,0\n";
  CHECK(run(out + "fit --model cos --x x --y y \"" + (s / "zeros.csv").string() + "\"") == 3);
  CHECK(run(out + "fit --x nope \"" + (s / "zeros.csv").string() + "\"") == 2);
}

TEST_CASE("semm rerun is byte identical") {
  Scratch a, b;
  const std::string args = "--ions 100000 --mode powder --seed 1 semm";
  REQUIRE(run("--out \"" + a.dir.string() + "\" " + args) == 0);
  REQUIRE(run("--out \"" + b.dir.string() + "\" " + args) == 0);
  int files = 0;
  for (const auto& e : fs::directory_iterator(a.dir)) {
    ++files;
    const fs::path other = b.dir / e.path().filename();
    CAPTURE(e.path().filename().string());
    REQUIRE(fs::exists(other));
    CHECK(slurp(e.path()) == slurp(other));
  }
  CHECK(files >= 15);
  const std::string report = slurp(a / "semm_report.csv");
  CHECK(report.find("# seed=1\n") != std::string::npos);
  CHECK(report.find("# config_hash=") != std::string::npos);
  CHECK(report.find("# version=") != std::string::npos);
  CHECK(report.find("# command=stark-sim") != std::string::npos);
}

TEST_CASE("ceramic sweep and fit recover k") {
  // 1e6 ions: at 1e5 the Monte-Carlo scatter alone is about 2% in k.
  Scratch s;
  const std::string out = "--out \"" + s.dir.string() + "\" ";
  REQUIRE(run(out + "--ions 1000000 --mode ceramic --k 0.048 --seed 2 stark-sweep --area-step 1") == 0);
  REQUIRE(run(out + "fit --model ceramic \"" + (s / "stark_sweep.csv").string() + "\"") == 0);
  const double k = number_after(slurp(s / "fit_ceramic.txt"), "k");
  CHECK(k == doctest::Approx(0.048).epsilon(0.02));
}

TEST_CASE("fidelity phase sweep correlates") {
  Scratch s;
  REQUIRE(run("--out \"" + s.dir.string() + "\" --ions 20000 fidelity --phases 8") == 0);
  const std::string fit = slurp(s / "fidelity_fit.txt");
  CHECK(number_after(fit, "r") >= 0.99);
  CHECK(number_after(fit, "slope") == doctest::Approx(1.0).epsilon(0.02));
  const semm::Table t = semm::read_table_csv(slurp(s / "fidelity.csv"));
  CHECK(t.rows.size() == 8);
  CHECK(t.columns.front() == "phase_in");
}

TEST_CASE("run replays a sequence file") {
  Scratch s;
  std::ofstream(s / "echo.seq") << "# two-pulse echo\n"
                                   "optical start=-0.5 dur=1 rabi=0.25 phase=0 offset=0\n"
                                   "optical start=3.5 dur=1 rabi=0.5 phase=0 offset=0\n"
                                   "detect start=7 dur=2 lo=30 dt=0.002\n";
  REQUIRE(run("--out \"" + s.dir.string() + "\" --ions 2000 run \"" + (s / "echo.seq").string() + "\"") == 0);
  REQUIRE(fs::exists(s / "run_window0_trace.csv"));
  const semm::Table t = semm::read_table_csv(slurp(s / "run_window0_trace.csv"));
  CHECK(t.rows.size() == 1000);
  CHECK(slurp(s / "run_sequence.seq") == slurp(s / "echo.seq").substr(17));
}

TEST_CASE("json output mirrors csv") {
  Scratch c, j;
  const std::string args = "--ions 1000 stark-sweep --area-step 5";
  REQUIRE(run("--out \"" + c.dir.string() + "\" " + args) == 0);
  REQUIRE(run("--out \"" + j.dir.string() + "\" --format json " + args) == 0);
  const semm::Table t = semm::read_table_csv(slurp(c / "stark_sweep.csv"));
  const auto doc = nlohmann::json::parse(slurp(j / "stark_sweep.json"));
  CHECK(doc["columns"].get<std::vector<std::string>>() == t.columns);
  REQUIRE(doc["data"].size() == t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i)
    for (std::size_t k = 0; k < t.columns.size(); ++k)
      CHECK(doc["data"][i][k].get<double>() == t.rows[i][k]);
  CHECK(doc["metadata"]["seed"] == 1);
}

}
