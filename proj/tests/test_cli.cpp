#include <catch_amalgamated.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "kramers/report_io.hpp"

namespace fs = std::filesystem;
using namespace kramers;

namespace {

const fs::path& scratch() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / ("kramers_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

int run(const std::string& args, const std::string& stdout_file = "") {
  std::string line = std::string(KRAMERS_CLI_PATH) + " " + args;
  line += stdout_file.empty() ? " > /dev/null" : " > " + (scratch() / stdout_file).string();
  line += " 2> " + (scratch() / "stderr.txt").string();
  const int status = std::system(line.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& name) {
  std::ifstream is(scratch() / name);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

io::Table read_table(const std::string& name) {
  std::ifstream is(scratch() / name);
  return name.ends_with(".json") ? io::read_json(is) : io::read_csv(is);
}

}  // namespace

TEST_CASE("prefactor subcommand writes CSV and JSON", "[cli]") {
  REQUIRE(run("prefactor --mu 2 --n 1,4,16", "p.csv") == 0);
  const auto t = read_table("p.csv");
  CHECK(t.rows.size() == 3);
  CHECK(t.config.at("subcommand") == "prefactor");
  CHECK(t.config.at("mu") == 2.0);
  REQUIRE(run("prefactor --n 1,4,16 --format json --out " + (scratch() / "p.json").string()) == 0);
  const auto j = read_table("p.json");
  CHECK(j.summary == t.summary);
}

TEST_CASE("reruns with the same seed are bit-identical", "[cli]") {
  REQUIRE(run("hitting --n 2 --h 1.0,0.8 --paths 30 --seed 5", "a.csv") == 0);
  REQUIRE(run("hitting --n 2 --h 1.0,0.8 --paths 30 --seed 5 --threads 2", "b.csv") == 0);
  CHECK(slurp("a.csv") != "");
  const auto a = read_table("a.csv");
  const auto b = read_table("b.csv");
  CHECK(a.rows == b.rows);
  REQUIRE(run("hitting --n 2 --h 1.0,0.8 --paths 30 --seed 6", "c.csv") == 0);
  CHECK(read_table("c.csv").rows != a.rows);
}

TEST_CASE("exit codes", "[cli]") {
  CHECK(run("prefactor --mu 0.5") == 1);
  CHECK(run("spectrum --n 4 --h 0.1") == 1);
  CHECK(slurp("stderr.txt").find("sample") != std::string::npos);
  CHECK(run("verify --only poincare --tolerance-scale 0 --states 50") == 1);
  CHECK(run("verify --only gamma") == 0);
  CHECK(run("hitting --n 4 --h 0.05 --paths 4 --max-steps 2") == 2);
  CHECK(run("sample --n 1 --h 0.05 --mode relaxation --paths 2 --duration 5") == 2);
  CHECK(run("") == 1);
  CHECK(run("prefactor --bogus 1") == 1);
  CHECK(run("prefactor --format xml") == 1);
}

TEST_CASE("empty sweeps give a header-only table", "[cli]") {
  REQUIRE(run("spectrum --h \"\" --format json", "empty.json") == 0);
  const auto t = read_table("empty.json");
  CHECK(t.rows.empty());
  CHECK(t.columns.size() == 10);
}

TEST_CASE("config file sits below command-line flags", "[cli]") {
  {
    std::ofstream cfg(scratch() / "run.toml");
    cfg << "[prefactor]\nmu = 3.0\nn = \"2,8\"\n";
  }
  const std::string file = (scratch() / "run.toml").string();
  REQUIRE(run("prefactor --config " + file, "cfg1.csv") == 0);
  const auto a = read_table("cfg1.csv");
  CHECK(a.config.at("mu") == 3.0);
  CHECK(a.rows.size() == 2);
  REQUIRE(run("prefactor --config " + file + " --mu 4", "cfg2.csv") == 0);
  const auto b = read_table("cfg2.csv");
  CHECK(b.config.at("mu") == 4.0);
  CHECK(b.rows.size() == 2);
}

TEST_CASE("verify --only restricts the suites", "[cli]") {
  REQUIRE(run("verify --only sobolev,zratio --states 100", "v.csv") == 0);
  const auto t = read_table("v.csv");
  for (const auto& row : t.rows) {
    const auto& suite = std::get<std::string>(row[t.column("suite")]);
    CHECK((suite == "sobolev" || suite == "zratio"));
  }
  CHECK(run("verify --only nonsense") == 1);
}

TEST_CASE("raw hitting times are written per cell", "[cli]") {
  const std::string prefix = (scratch() / "raw").string();
  REQUIRE(run("hitting --n 2 --h 1 --paths 10 --raw-prefix " + prefix) == 0);
  bool found = false;
  for (const auto& e : fs::directory_iterator(scratch()))
    if (e.path().filename().string().starts_with("raw_N2_h")) {
      found = true;
      std::ifstream is(e.path());
      std::string header;
      std::getline(is, header);
      CHECK(header == "time");
      int lines = 0;
      for (std::string l; std::getline(is, l);) ++lines;
      CHECK(lines == 10);
    }
  CHECK(found);
}
