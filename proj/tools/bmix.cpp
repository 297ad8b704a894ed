// bmix: command-line front end for the simulation and verification lab.
//
// Exit status: 0 success, 1 a check failed, 2 usage, parse or validation
// error, 3 runtime or capacity error.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "bmix/error.hpp"
#include "bmix/field.hpp"
#include "bmix/scenario.hpp"
#include "bmix/sequence.hpp"
#include "bmix/sums.hpp"

namespace fs = std::filesystem;
using namespace bmix;

namespace {

constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
}

int cmd_seq_validate(const std::string& spec, std::size_t levels, bool as_json) {
  const auto seq = parse_sequence(spec, levels, IntegerWidth::big);
  const auto rep = validate_lacunary(seq);
  if (as_json) {
    std::cout << nlohmann::json{{"sequence", seq.to_json()}, {"validation", rep.to_json()}}.dump(2)
              << "\n";
  } else {
    std::cout << "levels: " << seq.size() << "\n";
    for (std::size_t k = 1; k <= seq.size(); ++k) std::cout << "  n_" << k << " = " << seq.n(k) << "\n";
    for (const auto& r : rep.rows) {
      std::cout << "  k=" << r.k << " doubling=" << r.doubling << " square_sum=" << r.square_sum
                << " polynomial=" << r.polynomial << "\n";
    }
    std::cout << "K0 = " << rep.k0 << "\n";
    for (const auto& f : rep.failures()) std::cout << "FAIL: " << f << "\n";
    std::cout << (rep.passes() ? "valid" : "invalid") << "\n";
  }
  if (!rep.passes()) {
    for (const auto& f : rep.failures()) std::cerr << "bmix: " << f << "\n";
    return kExitUsage;
  }
  return 0;
}

int cmd_seq_build(const std::string& spec, std::size_t levels, const std::string& out) {
  const auto seq = parse_sequence(spec, levels, IntegerWidth::big);
  const auto text = seq.to_json().dump(2) + "\n";
  if (out.empty()) std::cout << text;
  else write_file(out, text);
  return 0;
}

struct SimulateOptions {
  std::string sequence = "explicit:2,64,65600";
  std::size_t levels = 3;
  std::optional<std::size_t> truncation;
  std::string noise = "gaussian";
  std::uint64_t seed = 1;
  std::size_t focus = 2;
  std::int64_t first = 1;
  std::optional<std::int64_t> last;
  std::string mode = "full";
  bool no_noise = false;
  std::uint64_t trial = 0;
  std::string functional;
  std::optional<std::int64_t> scale;
  std::size_t grid = 1000;
  std::string series = "Y";
  bool dump_fields = false;
  std::string out;
};

int cmd_simulate(const SimulateOptions& o) {
  ProcessConfig config;
  config.seq = parse_sequence(o.sequence, o.levels, IntegerWidth::big);
  config.truncation = o.truncation.value_or(config.seq.size());
  config.noise = NoiseSpec{parse_noise_law(o.noise), 0};
  config.seed = o.seed;
  config.validate();

  PathRequest req;
  req.focus_level = o.focus;
  req.first_N = o.first;
  const auto n_focus = config.seq.n64(o.focus);
  req.last_N = o.last.value_or(n_focus * n_focus);
  req.mode = parse_path_mode(o.mode);
  req.with_noise = !o.no_noise;
  req.trial = o.trial;

  const fs::path dir = o.out.empty() ? default_output_dir() / "simulate" : fs::path(o.out);
  const auto path = path_profile(config, req);
  std::ostringstream csv;
  write_path_csv(csv, path);
  write_file(dir / "path.csv", csv.str());
  std::cout << "wrote " << (dir / "path.csv").string() << "\n";

  if (!o.functional.empty()) {
    PathSeries series = PathSeries::y;
    if (o.series == "h") series = PathSeries::h;
    else if (o.series == "m") series = PathSeries::m;
    else if (o.series != "Y" && o.series != "y") throw ParseError("unknown series '" + o.series + "' (h|m|Y)");
    std::ostringstream fcsv;
    write_functional_csv(fcsv, path, o.scale.value_or(req.last_N), parse_functional_kind(o.functional),
                         o.grid, series);
    write_file(dir / "functional.csv", fcsv.str());
    std::cout << "wrote " << (dir / "functional.csv").string() << "\n";
  }
  if (o.dump_fields) {
    const auto levels = sample_path_levels(config, req);
    std::ostringstream fcsv;
    std::vector<SparseLevelField> all = levels.exact;
    all.insert(all.end(), levels.intrusion.begin(), levels.intrusion.end());
    write_field_csv(fcsv, all);
    write_file(dir / "fields.csv", fcsv.str());
    std::cout << "wrote " << (dir / "fields.csv").string() << "\n";
  }
  return 0;
}

int cmd_verify(const std::string& target, const std::string& out, const std::string& exec,
               std::optional<std::uint64_t> seed, std::optional<std::uint64_t> trials) {
  Scenario sc = target.ends_with(".scn") || fs::exists(target) ? load_scenario(target)
                                                               : default_scenario(target);
  if (seed) sc.seed = *seed;
  if (trials) sc.trials = *trials;
  const fs::path dir = out.empty() ? default_output_dir() : fs::path(out);
  const auto result = run_scenario(sc, dir, parse_exec(exec));
  for (const auto& c : result.summary.at("checks")) {
    std::cout << (c.at("pass").get<bool>() ? "PASS " : "FAIL ") << sc.name << "/"
              << c.at("id").get<std::string>() << ": " << c.at("claim").get<std::string>()
              << " (value " << c.at("value").dump() << " " << c.at("relation").get<std::string>()
              << " " << c.at("bound").dump() << ")\n";
  }
  std::cout << "summary: " << (dir / sc.name / "summary.json").string() << "\n";
  return result.passed() ? 0 : kExitCheckFailed;
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& md_out,
               const std::string& json_out) {
  std::vector<nlohmann::json> summaries;
  for (const auto& p : inputs) {
    std::ifstream in(p);
    if (!in) throw ParseError("cannot open summary " + p);
    try {
      summaries.push_back(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(p + ": " + e.what());
    }
  }
  const auto rep = emit_report(summaries);
  if (md_out.empty()) std::cout << rep.markdown;
  else write_file(md_out, rep.markdown);
  if (!json_out.empty()) write_file(json_out, rep.json.dump(2) + "\n");
  return rep.json.at("pass").get<bool>() ? 0 : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation and exact-verification lab for a beta-mixing process"};
  app.require_subcommand(1);

  auto* seq = app.add_subcommand("seq", "Validate or build a level sequence");
  seq->require_subcommand(1);
  std::string seq_spec = "explicit:2,64,65600";
  std::size_t seq_levels = 3;
  bool seq_json = false;
  std::string seq_out;
  auto* seq_validate = seq->add_subcommand("validate", "Check the growth conditions");
  auto* seq_build = seq->add_subcommand("build", "Print the sequence as JSON");
  for (auto* sub : {seq_validate, seq_build}) {
    sub->add_option("--sequence", seq_spec, "explicit:a,b,.. | delta:<d> | adaptive:<budget>[:nolac]");
    sub->add_option("--levels", seq_levels, "K for generated sequences");
  }
  seq_validate->add_flag("--json", seq_json, "Print the report as JSON");
  seq_build->add_option("--out", seq_out, "Write to a file instead of stdout");

  SimulateOptions sim;
  auto* simulate = app.add_subcommand("simulate", "Sample one path and write CSV files");
  simulate->add_option("--sequence", sim.sequence);
  simulate->add_option("--levels", sim.levels);
  simulate->add_option("--truncation", sim.truncation, "Levels actually simulated");
  simulate->add_option("--noise", sim.noise, "gaussian | rademacher");
  simulate->add_option("--seed", sim.seed);
  simulate->add_option("--focus", sim.focus, "Level k whose window n_k^2 bounds the path");
  simulate->add_option("--first", sim.first, "First N");
  simulate->add_option("--last", sim.last, "Last N (default n_k^2)");
  simulate->add_option("--mode", sim.mode, "full | focus+intrusion");
  simulate->add_flag("--no-noise", sim.no_noise, "Skip the independent noise component");
  simulate->add_option("--trial", sim.trial, "Trial index selecting the random streams");
  simulate->add_option("--functional", sim.functional, "polygonal | step");
  simulate->add_option("--scale", sim.scale, "n in the rescaled path (default last N)");
  simulate->add_option("--grid", sim.grid, "Grid points on [0,1]");
  simulate->add_option("--series", sim.series, "h | m | Y");
  simulate->add_flag("--dump-fields", sim.dump_fields, "Also write the sampled field events");
  simulate->add_option("--out", sim.out, "Output directory");

  std::string target, verify_out, verify_exec = "parallel";
  std::optional<std::uint64_t> verify_seed, verify_trials;
  auto* verify = app.add_subcommand("verify", "Run a suite or a scenario file");
  verify->add_option("target", target, "Suite name or .scn file")->required();
  verify->add_option("--out", verify_out, "Output directory (default $BMIX_OUT_DIR or bmix-out)");
  verify->add_option("--exec", verify_exec, "serial | parallel");
  verify->add_option("--seed", verify_seed, "Override the scenario seed");
  verify->add_option("--trials", verify_trials, "Override the scenario trial count");

  std::vector<std::string> report_inputs;
  std::string report_md, report_json;
  auto* report = app.add_subcommand("report", "Merge summary files into one report");
  report->add_option("summaries", report_inputs, "summary.json files")->required();
  report->add_option("--markdown", report_md, "Markdown output (default stdout)");
  report->add_option("--json", report_json, "JSON output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (seq_validate->parsed()) return cmd_seq_validate(seq_spec, seq_levels, seq_json);
    if (seq_build->parsed()) return cmd_seq_build(seq_spec, seq_levels, seq_out);
    if (simulate->parsed()) return cmd_simulate(sim);
    if (verify->parsed()) {
      return cmd_verify(target, verify_out, verify_exec, verify_seed, verify_trials);
    }
    if (report->parsed()) return cmd_report(report_inputs, report_md, report_json);
  } catch (const ParseError& e) {
    std::cerr << "bmix: " << e.what() << "\n";
    return kExitUsage;
  } catch (const InvalidSequenceError& e) {
    std::cerr << "bmix: " << e.what() << "\n";
    return kExitUsage;
  } catch (const MergeError& e) {
    std::cerr << "bmix: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "bmix: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
