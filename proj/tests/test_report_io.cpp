#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "kramers/commands.hpp"
#include "kramers/report_io.hpp"

using namespace kramers;
using Catch::Matchers::WithinAbs;

namespace {

io::Table sample_table() {
  io::Table t;
  t.config = {{"subcommand", "prefactor"}, {"mu", 2.0}};
  t.summary = {{"rows", 3}};
  t.columns = {"N", "value", "label"};
  t.add_row({std::int64_t{1}, 0.1, std::string("plain")});
  t.add_row({std::int64_t{4}, 1.0 / 3.0, std::string("with, comma \"and\" quotes")});
  t.add_row({std::int64_t{16}, std::numeric_limits<double>::quiet_NaN(), std::string("nan row")});
  return t;
}

void check_same(const io::Table& a, const io::Table& b) {
  CHECK(a.config == b.config);
  CHECK(a.summary == b.summary);
  REQUIRE(a.columns == b.columns);
  REQUIRE(a.rows.size() == b.rows.size());
  for (std::size_t r = 0; r < a.rows.size(); ++r)
    for (std::size_t c = 0; c < a.columns.size(); ++c) {
      const auto& x = a.rows[r][c];
      const auto& y = b.rows[r][c];
      REQUIRE(x.index() == y.index());
      if (const auto* d = std::get_if<double>(&x)) {
        const double e = std::get<double>(y);
        if (std::isnan(*d)) CHECK(std::isnan(e));
        else CHECK(*d == e);
      } else {
        CHECK(x == y);
      }
    }
}

}  // namespace

TEST_CASE("doubles are written with 17 significant digits", "[io]") {
  CHECK(io::format_double(0.1) == "0.10000000000000001");
  CHECK(io::format_double(1.0 / 3.0) == "0.33333333333333331");
  CHECK(io::format_double(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(std::stod(io::format_double(std::nextafter(1.0, 2.0))) == std::nextafter(1.0, 2.0));
}

TEST_CASE("CSV round trip is exact", "[io]") {
  const io::Table t = sample_table();
  std::stringstream ss;
  io::write_csv(ss, t);
  const std::string text = ss.str();
  CHECK(text.rfind("# config: ", 0) == 0);
  check_same(t, io::read_csv(ss));
}

TEST_CASE("JSON round trip is exact", "[io]") {
  const io::Table t = sample_table();
  std::stringstream ss;
  io::write_json(ss, t);
  const auto j = nlohmann::ordered_json::parse(ss.str());
  CHECK(j.at("rows").at(2).at("value") == "nan");
  CHECK(j.at("columns").size() == 3);
  check_same(t, io::from_json(j));
}

TEST_CASE("row width is enforced", "[io]") {
  io::Table t;
  t.columns = {"a", "b"};
  CHECK_THROWS(t.add_row({std::int64_t{1}}));
  CHECK_THROWS(t.column("c"));
}

TEST_CASE("list parsing", "[cli]") {
  CHECK(cmd::parse_real_list("0.1, 0.05,1e-2", "--h") == std::vector<double>{0.1, 0.05, 0.01});
  CHECK(cmd::parse_real_list("", "--h").empty());
  CHECK(cmd::parse_size_list("1,4,16", "--n") == std::vector<std::size_t>{1, 4, 16});
  CHECK_THROWS_AS(cmd::parse_real_list("0.1,x", "--h"), ContractError);
  CHECK_THROWS_AS(cmd::parse_size_list("2.5", "--n"), ContractError);
  CHECK_THROWS_AS(cmd::parse_size_list("0", "--n"), ContractError);
}

TEST_CASE("summaries are reproduced from a re-read table", "[io][cli]") {
  cmd::CommonConfig c;
  c.n_list = {1, 4, 64};
  auto check_roundtrip = [](const cmd::CommandResult& res) {
    for (const std::string fmt : {"csv", "json"}) {
      std::stringstream ss;
      if (fmt == "csv") io::write_csv(ss, res.table);
      else io::write_json(ss, res.table);
      const io::Table back = fmt == "csv" ? io::read_csv(ss) : io::read_json(ss);
      CHECK(cmd::resummarize(back) == res.table.summary);
    }
  };
  SECTION("prefactor") {
    const auto res = cmd::cmd_prefactor(c);
    CHECK(res.exit_code == cmd::exit_ok);
    CHECK(res.table.rows.size() == 3);
    CHECK_THAT(res.table.number(0, "p_n"), WithinAbs(std::sqrt(2.0) / std::numbers::pi, 1e-15));
    check_roundtrip(res);
  }
  SECTION("spectrum") {
    c.n_list = {1};
    c.h_list = {0.2, 0.15};
    const auto res = cmd::cmd_spectrum(c);
    CHECK(res.table.rows.size() == 2);
    CHECK(res.table.number(1, "lam1") < res.table.number(0, "lam1"));
    check_roundtrip(res);
  }
  SECTION("verify") {
    VerifyOptions vo;
    vo.only = {"poincare", "gamma"};
    const auto res = cmd::cmd_verify(c, vo);
    CHECK(res.exit_code == cmd::exit_ok);
    CHECK(res.table.summary.at("all_passed") == true);
    check_roundtrip(res);
    vo.tolerance_scale = 0.0;
    vo.only = {"prefactor"};
    CHECK(cmd::cmd_verify(c, vo).exit_code == cmd::exit_violation);
  }
  SECTION("hitting") {
    c.n_list = {2};
    c.h_list = {1.0, 0.8};
    cmd::HittingConfig hc;
    hc.sim.paths = 20;
    const auto res = cmd::cmd_hitting(c, hc);
    CHECK(res.exit_code == cmd::exit_ok);
    check_roundtrip(res);
  }
}

TEST_CASE("command preconditions", "[cli][errors]") {
  cmd::CommonConfig c;
  c.mu = 0.5;
  c.n_list = {4};
  CHECK_THROWS_AS(cmd::cmd_prefactor(c), DomainError);
  c.mu = 2.0;
  c.h_list = {0.1};
  CHECK_THROWS_AS(cmd::cmd_spectrum(c), ContractError);
  VerifyOptions vo;
  vo.only = {"no_such_suite"};
  CHECK_THROWS_AS(cmd::cmd_verify(c, vo), ContractError);
}
