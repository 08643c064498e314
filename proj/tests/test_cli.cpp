#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "channel.hpp"
#include "spec_io.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
  std::string cmd = std::string(BINFORWARD_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct Workspace {
  fs::path dir;
  Workspace() {
    dir = fs::temp_directory_path() / ("binf_cli_" + std::to_string(::getpid()));
    fs::create_directories(dir);
  }
  ~Workspace() { fs::remove_all(dir); }
  std::string path(const std::string& name) const { return (dir / name).string(); }
};

}  // namespace

TEST_CASE("exit codes: success, input errors, budget errors") {
  Workspace ws;
  binf::save_spec(binf::make_toy_spec({0.4}), ws.path("toy.json"));
  binf::save_spec(testsup::make_state_mac_spec(), ws.path("mac.json"));

  CHECK(run_cli("toy --p 0.4 --out " + ws.path("t1")) == 0);
  CHECK(run_cli("toy --p 0.6 --out " + ws.path("t2")) == 2);   // out of range
  CHECK(run_cli("toy --out " + ws.path("t3")) == 2);           // missing flag
  CHECK(run_cli("nonsense") == 2);

  // wrong kind: capacity on a MAC spec, region on a relay spec
  CHECK(run_cli("capacity --spec " + ws.path("mac.json") + " --out " + ws.path("c1")) == 2);
  CHECK(run_cli("region --spec " + ws.path("toy.json") + " --out " + ws.path("r1")) == 2);
  // unreadable spec
  CHECK(run_cli("capacity --spec " + ws.path("missing.json") + " --out " + ws.path("c2")) == 2);
  // fmcheck usage errors
  CHECK(run_cli("fmcheck --spec " + ws.path("toy.json") + " --samples 0 --out " + ws.path("f1")) == 2);

  // simulate beyond the symbol budget
  CHECK(run_cli("simulate --spec " + ws.path("toy.json") + " --out " + ws.path("s1") +
                " --scale 0.7 --n 12 --trials 5 --budget 1000") == 3);
  // and the environment override unlocks it
  std::string cmd = std::string("BINFORWARD_BUDGET=67108864 ") + BINFORWARD_CLI_PATH + " simulate --spec " +
                    ws.path("toy.json") + " --out " + ws.path("s2") +
                    " --scale 0.7 --n 10 --blocks 3 --trials 5 >/dev/null 2>&1";
  CHECK(WEXITSTATUS(std::system(cmd.c_str())) == 0);
}

TEST_CASE("seed repeats are byte-identical and seeds matter") {
  Workspace ws;
  binf::save_spec(binf::make_toy_spec({0.4}), ws.path("toy.json"));
  std::string base = "simulate --spec " + ws.path("toy.json") +
                     " --scale 0.7 --n 10 --blocks 3 --trials 30 --seed 5 --out ";
  REQUIRE(run_cli(base + ws.path("a")) == 0);
  REQUIRE(run_cli(base + ws.path("b")) == 0);
  CHECK(slurp(ws.dir / "a" / "trials.csv") == slurp(ws.dir / "b" / "trials.csv"));
  CHECK(slurp(ws.dir / "a" / "summary.json") == slurp(ws.dir / "b" / "summary.json"));

  std::string other = "simulate --spec " + ws.path("toy.json") +
                      " --scale 0.7 --n 10 --blocks 3 --trials 30 --seed 6 --out " + ws.path("c");
  REQUIRE(run_cli(other) == 0);
  CHECK(slurp(ws.dir / "a" / "trials.csv") != slurp(ws.dir / "c" / "trials.csv"));
}

TEST_CASE("every command writes a replayable manifest") {
  Workspace ws;
  binf::save_spec(binf::make_toy_spec({0.4}), ws.path("toy.json"));
  binf::save_spec(testsup::make_mac_spec(0.1, false), ws.path("mac.json"));

  struct Case {
    std::string name;
    std::string args;
  };
  std::vector<Case> cases = {
      {"toy", "toy --p 0.3"},
      {"capacity", "capacity --spec " + ws.path("toy.json") + " --grid-step 0.1"},
      {"region", "region --spec " + ws.path("mac.json") + " --grid-step 0.1"},
      {"fmcheck", "fmcheck --spec " + ws.path("toy.json") + " --samples 5 --step 0.1"},
      {"simulate",
       "simulate --spec " + ws.path("toy.json") + " --scale 0.7 --n 10 --blocks 3 --trials 20"},
  };
  for (const auto& c : cases) {
    fs::path first = ws.dir / (c.name + "_run");
    fs::path second = ws.dir / (c.name + "_replay");
    REQUIRE(run_cli(c.args + " --out " + first.string()) == 0);
    REQUIRE(fs::exists(first / "manifest.json"));
    REQUIRE(run_cli("replay --manifest " + (first / "manifest.json").string() + " --out " +
                    second.string()) == 0);
    for (const auto& entry : fs::directory_iterator(first)) {
      fs::path other = second / entry.path().filename();
      REQUIRE(fs::exists(other));
      CHECK(slurp(entry.path()) == slurp(other));
    }
  }
}

TEST_CASE("degenerate unit-alphabet relay prints a zero capacity") {
  Workspace ws;
  std::ofstream(ws.path("unit.json")) << R"({
    "schema": 1, "kind": "relay",
    "alphabets": {"x": 1, "xr": 1, "y": 2, "z": 1},
    "channel": [[[0.5, 0.5]]],
    "det_links": {"z": [[0]]}
  })";
  std::string cmd = std::string(BINFORWARD_CLI_PATH) + " capacity --spec " + ws.path("unit.json") +
                    " --out " + ws.path("u") + " > " + ws.path("u.out") + " 2>/dev/null";
  REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0);
  CHECK(slurp(ws.dir / "u.out").find("optimum_lower_bound: 0.000000") != std::string::npos);
}

TEST_CASE("z1-independent causal region matches the strictly causal region") {
  Workspace ws;
  binf::save_spec(testsup::make_mac_spec(0.1, false), ws.path("strict.json"));
  binf::save_spec(testsup::make_mac_spec(0.1, true), ws.path("causal.json"));
  REQUIRE(run_cli("region --spec " + ws.path("strict.json") + " --out " + ws.path("a")) == 0);
  REQUIRE(run_cli("region --spec " + ws.path("causal.json") + " --z1-independent --out " +
                  ws.path("b")) == 0);
  std::istringstream sa(slurp(ws.dir / "a" / "boundary.csv"));
  std::istringstream sb(slurp(ws.dir / "b" / "boundary.csv"));
  std::string la, lb;
  std::getline(sa, la);
  std::getline(sb, lb);  // header
  int rows = 0;
  while (std::getline(sa, la) && std::getline(sb, lb)) {
    double r2a = std::stod(la.substr(la.find(',') + 1));
    double r2b = std::stod(lb.substr(lb.find(',') + 1));
    CHECK(std::abs(r2a - r2b) <= 0.02);
    ++rows;
  }
  CHECK(rows > 5);
}

TEST_CASE("a single-trial run emits exactly one transcript row group") {
  Workspace ws;
  binf::save_spec(binf::make_toy_spec({0.4}), ws.path("toy.json"));
  REQUIRE(run_cli("simulate --spec " + ws.path("toy.json") +
                  " --scale 0.5 --n 10 --blocks 3 --trials 1 --out " + ws.path("one")) == 0);
  std::istringstream csv(slurp(ws.dir / "one" / "trials.csv"));
  std::string line;
  std::getline(csv, line);  // header
  int rows = 0;
  while (std::getline(csv, line))
    if (!line.empty()) {
      CHECK(line.rfind("0,", 0) == 0);  // all rows belong to trial 0
      ++rows;
    }
  CHECK(rows == 3);
}

TEST_CASE("csv outputs use fixed six-decimal formatting") {
  Workspace ws;
  binf::save_spec(binf::make_toy_spec({0.4}), ws.path("toy.json"));
  REQUIRE(run_cli("toy --p 0.4 --out " + ws.path("t")) == 0);
  std::string csv = slurp(ws.dir / "t" / "toy.csv");
  CHECK(csv.find("bin_forward,0.600000") != std::string::npos);
  CHECK(csv.find("decode_forward,0.278072") != std::string::npos);
  CHECK(csv.find("gap,0.321928") != std::string::npos);
}
