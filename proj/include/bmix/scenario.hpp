#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "bmix/exec.hpp"
#include "bmix/field.hpp"

namespace bmix {

/// Suites a scenario can run.
inline constexpr const char* kSuites[] = {"identities", "clt",     "nontight",   "variance",
                                          "mixing",     "moments", "divergence", "all"};

/// A parsed scenario file. Scenario files are flat "key = value" lines;
/// '#' starts a comment. Numbers stay decimal strings until a suite reads
/// them, so nothing depends on locale or float parsing at load time.
struct Scenario {
  std::string name;
  std::string suite;
  std::string sequence = "explicit:2,64,65600";
  std::size_t levels = 3;  // K for generated sequences
  std::optional<std::size_t> truncation;
  NoiseLaw noise = NoiseLaw::gaussian;
  std::uint64_t seed = 1;
  std::uint64_t trials = 2000;
  /// Suite-specific keys, validated by run_scenario.
  std::map<std::string, std::string> params;
  std::string source = "<memory>";
  /// Line of each key in the source file, for error messages.
  std::map<std::string, int> lines;
};

/// ParseError naming the source, line and field on malformed input.
Scenario parse_scenario(std::istream& in, const std::string& source_name);
Scenario load_scenario(const std::filesystem::path& path);
/// Defaults for `bmix verify <suite>` without a file.
Scenario default_scenario(const std::string& suite);

/// One acceptance check inside a summary.
struct Check {
  std::string id;
  std::string group;
  std::string claim;
  double value = 0.0;
  double bound = 0.0;
  std::string relation;  // how value is compared with bound
  bool pass = false;

  nlohmann::json to_json() const;
};

struct ScenarioResult {
  nlohmann::json summary;
  std::vector<std::string> artifacts;
  bool passed() const { return summary.value("pass", false); }
};

/// Runs the scenario, writing <out_dir>/<name>/{artifacts, summary.json}.
/// Serial and parallel execution write identical files.
ScenarioResult run_scenario(const Scenario& scenario, const std::filesystem::path& out_dir,
                            Exec exec = Exec::parallel);

/// BMIX_OUT_DIR if set, else "bmix-out".
std::filesystem::path default_output_dir();

struct Report {
  std::string markdown;
  nlohmann::json json;
};

/// Merges summaries into one report grouped by the claim each check tests.
/// Output depends only on the inputs. MergeError when two different
/// summaries share a scenario name.
Report emit_report(std::span<const nlohmann::json> summaries);

}  // namespace bmix
