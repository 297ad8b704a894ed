#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "bmix/error.hpp"
#include "bmix/scenario.hpp"

using namespace bmix;
namespace fs = std::filesystem;

namespace {

Scenario parse(const std::string& text) {
  std::istringstream in(text);
  return parse_scenario(in, "t.scn");
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const ParseError& e) {
    return e.what();
  }
  return {};
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("bmix-test-" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

nlohmann::json summary(const std::string& name, const std::string& group, bool pass) {
  return {{"scenario", name},
          {"checks",
           {{{"id", "c"},
             {"group", group},
             {"claim", "claim"},
             {"value", 1.0},
             {"bound", 2.0},
             {"relation", "<="},
             {"pass", pass}}}},
          {"pass", pass}};
}

}  // namespace

TEST_CASE("scenario parser reads globals, params and comments") {
  const auto sc = parse(
      "# comment\n"
      "name = demo   # trailing\n"
      "suite = nontight\n"
      "sequence = explicit:2,64,65600\n"
      "truncation = 2\n"
      "noise = rademacher\n"
      "seed = 7\n"
      "trials = 100\n"
      "threshold = 1/2\n");
  CHECK(sc.name == "demo");
  CHECK(sc.suite == "nontight");
  CHECK(sc.truncation == 2u);
  CHECK(sc.noise == NoiseLaw::rademacher);
  CHECK(sc.seed == 7u);
  CHECK(sc.trials == 100u);
  CHECK(sc.params.at("threshold") == "1/2");
  CHECK(sc.lines.at("threshold") == 9);
}

TEST_CASE("scenario parse errors cite line and field") {
  CHECK(error_of("name = a\nsuite = clt\nseed = x\n") ==
        "t.scn:3: field 'seed': expected an unsigned integer, got 'x'");
  CHECK(error_of("name = a\nsuite = clt\nscales = 1,b\n") ==
        "t.scn:3: field 'scales': expected an unsigned integer, got 'b'");
  CHECK(error_of("name = a\nsuite = clt\nlevel = 2\n") ==
        "t.scn:3: unknown field 'level' for suite 'clt'");
  CHECK(error_of("name = a\nsuite = nope\n") == "t.scn:2: field 'suite': unknown suite 'nope'");
  CHECK(error_of("name = a\nname = b\n") == "t.scn:2: duplicate key 'name'");
  CHECK(error_of("name = a\njunk\n") == "t.scn:2: expected 'key = value'");
  CHECK(error_of("suite = clt\n") == "t.scn: missing required field 'name'");
  CHECK(error_of("name = a\nsuite = nontight\nmode = sideways\n").starts_with(
      "t.scn:3: field 'mode': "));
  CHECK(error_of("name = a\nsuite = nontight\nfdd = maybe\n") ==
        "t.scn:3: field 'fdd': expected true or false, got 'maybe'");
}

TEST_CASE("suite all accepts every suite's keys") {
  const auto sc = parse("name = a\nsuite = all\nscales = 256\nbell_p = 5\n");
  CHECK(sc.params.size() == 2);
}

TEST_CASE("invalid sequence is rejected before any output") {
  auto sc = parse("name = bad\nsuite = moments\nsequence = explicit:2,3\n");
  const auto dir = scratch("invalid");
  CHECK_THROWS_AS(run_scenario(sc, dir), InvalidSequenceError);
  CHECK_FALSE(fs::exists(dir / "bad"));
}

TEST_CASE("moments scenario writes artifacts and a passing summary") {
  const auto dir = scratch("moments");
  const auto r = run_scenario(default_scenario("moments"), dir, Exec::serial);
  CHECK(r.passed());
  CHECK(r.summary.at("checks").size() == 2);
  for (const auto& a : r.artifacts) CHECK(fs::exists(dir / "moments-default" / a));
  const auto text = slurp(dir / "moments-default" / "moments.csv");
  CHECK(text.starts_with("n,p,E_abs_h_p,E_abs_g_p,h_bound,g_bound\n"));
  CHECK(text.find("\r") == std::string::npos);
}

TEST_CASE("serial and parallel scenario runs are byte-identical") {
  auto sc = parse("name = id\nsuite = identities\nn_values = 2,3\nfields = 10\n");
  const auto a = scratch("serial");
  const auto b = scratch("parallel");
  const auto ra = run_scenario(sc, a, Exec::serial);
  const auto rb = run_scenario(sc, b, Exec::parallel);
  CHECK(ra.summary == rb.summary);
  REQUIRE(ra.artifacts == rb.artifacts);
  for (const auto& f : ra.artifacts) CHECK(slurp(a / "id" / f) == slurp(b / "id" / f));
}

TEST_CASE("one summary reports every check") {
  const std::vector<nlohmann::json> in{summary("s", "mixing rate", true)};
  const auto rep = emit_report(in);
  CHECK(rep.json.at("checks") == 1);
  CHECK(rep.json.at("pass") == true);
  CHECK(rep.markdown.find("## mixing rate") != std::string::npos);
  CHECK(rep.markdown.find("| s | c | claim | 1 | <= | 2 | pass |") != std::string::npos);
}

TEST_CASE("report groups in a fixed order regardless of input order") {
  const std::vector<nlohmann::json> ab{summary("b", "mixing rate", true),
                                       summary("a", "central limit theorem", false)};
  const std::vector<nlohmann::json> ba{ab[1], ab[0]};
  const auto r1 = emit_report(ab);
  const auto r2 = emit_report(ba);
  CHECK(r1.markdown == r2.markdown);
  CHECK(r1.json == r2.json);
  CHECK(r1.markdown.find("central limit theorem") < r1.markdown.find("mixing rate"));
  CHECK(r1.json.at("pass") == false);
}

TEST_CASE("report merges duplicates and rejects conflicting names") {
  const auto s = summary("s", "mixing rate", true);
  const std::vector<nlohmann::json> dup{s, s};
  CHECK(emit_report(dup).json.at("checks") == 1);
  const std::vector<nlohmann::json> clash{s, summary("s", "mixing rate", false)};
  CHECK_THROWS_AS(emit_report(clash), MergeError);
  CHECK_THROWS_AS(emit_report(std::span<const nlohmann::json>{}), MergeError);
}
