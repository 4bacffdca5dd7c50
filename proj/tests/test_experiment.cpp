#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "thinfb/experiment.hpp"

using namespace thinfb;
namespace fs = std::filesystem;

namespace {

std::string temp_dir(const std::string& tag) {
  std::string d = (fs::temp_directory_path() / ("thinfb_test_" + tag)).string();
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST_CASE("config parser: sections, comments, lists") {
  Config c = Config::parse(
      "kind = minimize  # trailing comment\n"
      "seed = 7\n"
      "\n"
      "[grid]\n"
      "n = 2\n"
      "h = 0.03125\n"
      "[barrier]\n"
      "deltas = 0.02, 0.04, 0.08\n");
  CHECK(c.str("kind") == "minimize");
  CHECK(c.integer_or("seed", 0) == 7);
  CHECK(c.num("grid.h") == Catch::Approx(0.03125));
  CHECK(c.list("barrier.deltas") == std::vector<double>{0.02, 0.04, 0.08});
  CHECK(c.str_or("missing", "fallback") == "fallback");
  CHECK_THROWS_AS(c.str("missing"), Error);
  CHECK_THROWS_AS(Config::parse("novalue\n"), Error);
  CHECK_THROWS_AS(Config::parse("[unterminated\n"), Error);
}

TEST_CASE("finalize, report, and tamper detection") {
  std::string dir = temp_dir("report");
  Config spec = Config::parse("kind = barrier-audit\nseed = 1\n");
  RunResult r;
  r.kind = "barrier-audit";
  r.seed = 1;
  r.assertions.push_back(Assertion::ge("demo_value", 2.0, 1.9));
  write_file(dir + "/table.csv", "# a,b\n1,2\n");
  r.files.push_back("table.csv");
  finalize_run(dir, spec, r);

  Report rep = read_report(dir);
  CHECK(rep.checksums_ok);
  CHECK(rep.pass());
  CHECK(rep.kind == "barrier-audit");
  REQUIRE(rep.inventory.size() == 2);

  // tamper with the results file: checksum must catch it
  std::string tampered = read_file(dir + "/results.json");
  tampered.replace(tampered.find("2.0"), 3, "9.9");
  write_file(dir + "/results.json", tampered);
  Report rep2 = read_report(dir);
  CHECK_FALSE(rep2.checksums_ok);
  CHECK_FALSE(rep2.pass());

  CHECK_THROWS_AS(read_report(temp_dir("empty")), Error);
}

TEST_CASE("spec-driven barrier audit runs deterministically") {
  Config spec = Config::parse(
      "kind = barrier-audit\n"
      "seed = 11\n"
      "[barrier]\n"
      "deltas = 0.04, 0.08\n"
      "count = 4\n"
      "subsolution_count = 3\n"
      "[grid]\n"
      "lattice_h = 0.125\n"
      "flatness_h = 0.125\n");
  std::string d1 = temp_dir("audit1"), d2 = temp_dir("audit2");
  RunResult r1 = run_spec(spec, d1);
  RunResult r2 = run_spec(spec, d2);
  CHECK(r1.pass());
  CHECK(read_file(d1 + "/results.json") == read_file(d2 + "/results.json"));
  CHECK(read_file(d1 + "/separation.csv") == read_file(d2 + "/separation.csv"));
  CHECK(read_file(d1 + "/manifest.txt") == read_file(d2 + "/manifest.txt"));
}

TEST_CASE("spec validation failures exit through ConfigError") {
  std::string dir = temp_dir("badspec");
  CHECK_THROWS_AS(run_spec(Config::parse("kind = unknown-kind\n"), dir), Error);
  try {
    run_spec(Config::parse("kind = unknown-kind\n"), dir);
  } catch (const Error& e) {
    CHECK(e.code() == Err::ConfigError);
  }
}

TEST_CASE("minimize spec writes snapshots and tables") {
  Config spec = Config::parse(
      "kind = minimize\n"
      "seed = 3\n"
      "[grid]\n"
      "n = 1\n"
      "h = 0.03125\n"
      "[data]\n"
      "kind = planar\n"
      "[output]\n"
      "snapshots = 1\n");
  std::string dir = temp_dir("minspec");
  RunResult r = run_spec(spec, dir);
  CHECK(r.pass());
  CHECK(fs::exists(dir + "/state.grid"));
  CHECK(fs::exists(dir + "/fb_points.csv"));
  CHECK(fs::exists(dir + "/energy_trace.csv"));
  GridFunction g = GridFunction::load_binary(dir + "/state.grid");
  CHECK(g.grid.n == 1);
  Report rep = read_report(dir);
  CHECK(rep.pass());
}

TEST_CASE("linearized-extract spec at reduced resolution") {
  Config spec = Config::parse(
      "kind = linearized-extract\n"
      "seed = 5\n"
      "[linearized]\n"
      "nr = 96\n"
      "c0 = 0.2\n"
      "c1 = 0.5\n");
  std::string dir = temp_dir("linspec");
  RunResult r = run_spec(spec, dir);
  CHECK(r.pass());
  nlohmann::ordered_json j = nlohmann::ordered_json::parse(read_file(dir + "/expansion.json"));
  CHECK(j["a0"].get<double>() == Catch::Approx(4.0).margin(1e-4));
}
