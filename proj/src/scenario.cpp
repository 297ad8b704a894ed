#include "bmix/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "bmix/error.hpp"
#include "bmix/mixing.hpp"
#include "bmix/stats.hpp"
#include "bmix/sums.hpp"

namespace bmix {

namespace fs = std::filesystem;

namespace {

// ------------------------------------------------------------ key schema

const std::set<std::string> kCommonKeys = {"name",       "suite", "sequence", "levels",
                                           "truncation", "noise", "seed",     "trials"};

const std::map<std::string, std::map<std::string, std::string>> kSuiteDefaults = {
    {"identities", {{"n_values", "2,3,5,8"}, {"fields", "100"}, {"n_cap", "400"}}},
    {"clt", {{"scales", "256,1024,4096"}, {"ks_max", "0.06"}}},
    {"nontight",
     {{"level", "2"},
      {"mode", "level"},
      {"threshold", "1"},
      {"fdd", "false"},
      {"fdd_factor", "3"},
      {"window_lo", ""},
      {"window_hi", ""},
      {"sigmas", "3"}}},
    {"variance",
     {{"n_min", "4"},
      {"n_max", "4096"},
      {"ratio_max", "4"},
      {"mc_n", "64"},
      {"mc_N", "256"},
      {"mc_trials", "20000"},
      {"mc_tolerance", "0.05"}}},
    {"mixing",
     {{"chain_n", "8"},
      {"chain_self_expected", "0.3947"},
      {"chain_atom_expected", "0.4455"},
      {"chain_tolerance", "0.001"},
      {"oracle_n", "2"},
      {"oracle_L", "2"},
      {"rate_delta", "0.1"},
      {"rate_levels", "5"},
      {"rate_hi", "1000000"},
      {"budget", "inv-linear"},
      {"budget_levels", "5"}}},
    {"moments", {{"n_values", "2,3,4"}, {"p_values", "1/2,1,2,3,4"}, {"bell_p", "10"},
                 {"bell_expected", "115975"}}},
    {"divergence", {{"non_decay_factor", "0.9"}}},
};

const std::map<std::string, std::string> kGroups = {
    {"identities", "exact identities"},
    {"clt", "central limit theorem"},
    {"nontight", "invariance principle fails"},
    {"variance", "variance growth"},
    {"mixing", "mixing rate"},
    {"moments", "finite moments"},
    {"divergence", "non-integrable transfer function"},
};

const std::vector<std::string> kGroupOrder = {
    "exact identities", "central limit theorem", "invariance principle fails", "variance growth",
    "mixing rate",      "finite moments",        "non-integrable transfer function"};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

/// Field accessor that reports the scenario source and line on failure.
class Fields {
 public:
  Fields(const Scenario& sc, const std::string& suite) : sc_(sc), suite_(suite) {}

  std::string text(const std::string& key) const {
    if (auto it = sc_.params.find(key); it != sc_.params.end()) return it->second;
    return kSuiteDefaults.at(suite_).at(key);
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    std::string where = sc_.source;
    if (auto it = sc_.lines.find(key); it != sc_.lines.end()) {
      where += ":" + std::to_string(it->second);
    }
    throw ParseError(where + ": field '" + key + "': " + what);
  }

  std::uint64_t u64(const std::string& key) const { return parse_u64(key, text(key)); }
  std::int64_t i64(const std::string& key) const {
    const auto v = u64(key);
    if (v > static_cast<std::uint64_t>(INT64_MAX)) fail(key, "value too large");
    return static_cast<std::int64_t>(v);
  }
  std::optional<std::int64_t> optional_i64(const std::string& key) const {
    if (text(key).empty()) return std::nullopt;
    return i64(key);
  }
  Rational rational(const std::string& key) const {
    try {
      return parse_rational(text(key));
    } catch (const Error&) {
      fail(key, "expected a decimal or fraction, got '" + text(key) + "'");
    }
  }
  double real(const std::string& key) const { return to_double(rational(key)); }
  bool flag(const std::string& key) const {
    const auto t = text(key);
    if (t == "true" || t == "yes" || t == "1") return true;
    if (t == "false" || t == "no" || t == "0") return false;
    fail(key, "expected true or false, got '" + t + "'");
  }
  std::vector<std::int64_t> i64_list(const std::string& key) const {
    std::vector<std::int64_t> out;
    for (const auto& item : split_list(text(key))) {
      out.push_back(static_cast<std::int64_t>(parse_u64(key, item)));
    }
    if (out.empty()) fail(key, "expected a nonempty list");
    return out;
  }
  std::vector<Rational> rational_list(const std::string& key) const {
    std::vector<Rational> out;
    for (const auto& item : split_list(text(key))) {
      try {
        out.push_back(parse_rational(item));
      } catch (const Error&) {
        fail(key, "bad list item '" + item + "'");
      }
    }
    if (out.empty()) fail(key, "expected a nonempty list");
    return out;
  }

 private:
  std::uint64_t parse_u64(const std::string& key, const std::string& t) const {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
      fail(key, "expected an unsigned integer, got '" + t + "'");
    }
    return v;
  }

  const Scenario& sc_;
  std::string suite_;
};

enum class Kind { integer, optional_integer, rational, integer_list, rational_list, flag, text };

const std::map<std::string, Kind> kKinds = {
    {"n_values", Kind::integer_list},   {"fields", Kind::integer},
    {"n_cap", Kind::integer},           {"scales", Kind::integer_list},
    {"ks_max", Kind::rational},         {"level", Kind::integer},
    {"mode", Kind::text},               {"threshold", Kind::rational},
    {"fdd", Kind::flag},                {"fdd_factor", Kind::rational},
    {"window_lo", Kind::optional_integer}, {"window_hi", Kind::optional_integer},
    {"sigmas", Kind::rational},         {"n_min", Kind::integer},
    {"n_max", Kind::integer},           {"ratio_max", Kind::rational},
    {"mc_n", Kind::integer},            {"mc_N", Kind::integer},
    {"mc_trials", Kind::integer},       {"mc_tolerance", Kind::rational},
    {"chain_n", Kind::integer},         {"chain_self_expected", Kind::rational},
    {"chain_atom_expected", Kind::rational}, {"chain_tolerance", Kind::rational},
    {"oracle_n", Kind::integer},        {"oracle_L", Kind::integer},
    {"rate_delta", Kind::rational},     {"rate_levels", Kind::integer},
    {"rate_hi", Kind::integer},         {"budget", Kind::text},
    {"budget_levels", Kind::integer},   {"p_values", Kind::rational_list},
    {"bell_p", Kind::integer},          {"bell_expected", Kind::rational},
    {"non_decay_factor", Kind::rational},
};

void check_kind(const Fields& f, const std::string& key) {
  switch (kKinds.at(key)) {
    case Kind::integer: f.i64(key); break;
    case Kind::optional_integer: f.optional_i64(key); break;
    case Kind::rational: f.rational(key); break;
    case Kind::integer_list: f.i64_list(key); break;
    case Kind::rational_list: f.rational_list(key); break;
    case Kind::flag: f.flag(key); break;
    case Kind::text:
      try {
        if (key == "mode") parse_nontight_mode(f.text(key));
        if (key == "budget") RateBudget::parse(f.text(key));
      } catch (const Error& e) {
        f.fail(key, e.what());
      }
      break;
  }
}

Check make_check(const std::string& suite, std::string id, std::string claim, double value,
                 std::string relation, double bound) {
  Check c;
  c.id = std::move(id);
  c.group = kGroups.at(suite);
  c.claim = std::move(claim);
  c.value = value;
  c.bound = bound;
  c.relation = std::move(relation);
  if (c.relation == "<") c.pass = value < bound;
  else if (c.relation == "<=") c.pass = value <= bound;
  else if (c.relation == ">") c.pass = value > bound;
  else if (c.relation == ">=") c.pass = value >= bound;
  else c.pass = value == bound;
  return c;
}

struct SuiteContext {
  const Scenario& sc;
  const LevelSequence& seq;
  ProcessConfig config;
  fs::path dir;
  Exec exec;
  std::vector<Check>& checks;
  std::vector<std::string>& artifacts;

  void write(const std::string& name, const std::string& content) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw Error("cannot write " + (dir / name).string());
    out << content;
    artifacts.push_back(name);
  }
  void write_json(const std::string& name, const nlohmann::json& j) { write(name, j.dump(2) + "\n"); }
};

// ---------------------------------------------------------------- suites

void run_identities(SuiteContext& cx) {
  const Fields f(cx.sc, "identities");
  const auto fields = f.u64("fields");
  const auto cap = f.i64("n_cap");
  nlohmann::json out = nlohmann::json::array();
  std::uint64_t closed = 0, telescope = 0, comparisons = 0;
  for (auto n : f.i64_list("n_values")) {
    const auto r = identity_sweep(n, std::min(6 * n * n, cap), fields, cx.sc.seed, cx.exec);
    closed += r.closed_mismatches + r.contraction_mismatches;
    telescope += r.telescope_mismatches;
    comparisons += r.comparisons;
    out.push_back({{"n", n},
                   {"N_max", r.N_max},
                   {"fields", r.fields},
                   {"events", r.events},
                   {"comparisons", r.comparisons},
                   {"closed_mismatches", r.closed_mismatches},
                   {"contraction_mismatches", r.contraction_mismatches},
                   {"telescope_mismatches", r.telescope_mismatches}});
  }
  cx.write_json("identities.json", {{"comparisons", comparisons}, {"rows", out}});
  cx.checks.push_back(make_check("identities", "closed_form",
                                 "closed form, direct sum and coefficient contraction agree",
                                 static_cast<double>(closed), "==", 0));
  cx.checks.push_back(make_check("identities", "telescope",
                                 "partial sums telescope through the transfer function",
                                 static_cast<double>(telescope), "==", 0));
}

void run_clt(SuiteContext& cx) {
  const Fields f(cx.sc, "clt");
  const auto scales = f.i64_list("scales");
  std::vector<CltResult> results;
  std::ostringstream csv;
  csv << "n,ks,ks_band,ks_critical,mean,variance\n";
  nlohmann::json rows = nlohmann::json::array();
  for (auto n : scales) {
    results.push_back(clt_test(cx.config, n, cx.sc.trials, 0, cx.exec));
    const auto& r = results.back();
    csv << n << ',' << format_double(r.ks) << ',' << format_double(r.ks_band) << ','
        << format_double(r.ks_critical) << ',' << format_double(r.mean) << ','
        << format_double(r.variance) << '\n';
    rows.push_back(r.to_json());
  }
  cx.write("clt.csv", csv.str());
  cx.write_json("clt.json", {{"rows", rows}});
  double worst_rise = -1.0;
  for (std::size_t i = 0; i + 1 < results.size(); ++i) {
    worst_rise = std::max(worst_rise, results[i + 1].ks - results[i].ks - results[i + 1].ks_band);
  }
  if (results.size() > 1) {
    cx.checks.push_back(make_check("clt", "ks_trend",
                                   "KS distance nonincreasing along scales within one band",
                                   worst_rise, "<=", 0.0));
  }
  cx.checks.push_back(make_check("clt", "ks_final",
                                 "KS distance to the standard normal at the largest scale",
                                 results.back().ks, "<", f.real("ks_max")));
}

void run_nontight(SuiteContext& cx) {
  const Fields f(cx.sc, "nontight");
  NontightRequest req;
  req.k = static_cast<std::size_t>(f.u64("level"));
  try {
    req.mode = parse_nontight_mode(f.text("mode"));
  } catch (const ParseError& e) {
    f.fail("mode", e.what());
  }
  req.threshold = f.rational("threshold");
  req.trials = cx.sc.trials;
  req.lo = f.optional_i64("window_lo");
  req.hi = f.optional_i64("window_hi");
  const double sigmas = f.real("sigmas");
  const auto rep = nontight_prob(cx.config, req, cx.exec);
  cx.write_json("nontight.json", rep.to_json());

  const std::string claim =
      req.mode == NontightMode::level
          ? "single-level window maximum exceeds the threshold with probability above 1/4"
          : "full-process window maximum exceeds the threshold with probability at least 1/8";
  cx.checks.push_back(make_check("nontight", "window_exceedance", claim, rep.window.lower(sigmas),
                                 ">", rep.analytic_bound));
  if (f.flag("fdd")) {
    if (!rep.single_point) f.fail("fdd", "the single-point contrast needs level or full mode");
    const double factor = f.real("fdd_factor");
    cx.checks.push_back(make_check(
        "nontight", "fdd_contrast",
        "single-point exceedance at N = n_k^2 is a small fraction of the window exceedance",
        rep.single_point->estimate, "<=", rep.window.estimate / factor));
  }
}

void run_variance(SuiteContext& cx) {
  const Fields f(cx.sc, "variance");
  std::vector<std::int64_t> Ns;
  for (auto N = f.i64("n_min"); N <= f.i64("n_max"); ++N) Ns.push_back(N);
  if (Ns.empty()) f.fail("n_max", "empty N range");
  const auto prof = variance_profile(cx.config, Ns, cx.exec);
  std::ostringstream csv;
  prof.write_csv(csv);
  cx.write("variance.csv", csv.str());
  auto j = prof.to_json();
  j.erase("rows");  // the CSV carries the table
  cx.write_json("variance.json", j);

  bool constant = true;
  for (std::int64_t N = 4; N <= 64; ++N) constant &= variance_level_exact(2, N) == 3;
  cx.checks.push_back(make_check("variance", "level_constant",
                                 "E S_N(h_k)^2 = 3 for n_k = 2 and every N >= 4",
                                 constant ? 3.0 : 0.0, "==", 3.0));
  cx.checks.push_back(make_check("variance", "ratio_sup", "sup over the grid of sigma_N^2(h)/N",
                                 prof.sup_ratio_h, "<=", f.real("ratio_max")));

  const auto mc = variance_monte_carlo(f.i64("mc_n"), f.i64("mc_N"), f.u64("mc_trials"),
                                       cx.sc.seed, cx.exec);
  cx.write_json("variance-mc.json", mc.to_json());
  cx.checks.push_back(make_check("variance", "monte_carlo",
                                 "Monte Carlo variance within tolerance of the exact value",
                                 mc.relative_error(), "<=", f.real("mc_tolerance")));
}

void run_mixing(SuiteContext& cx) {
  const Fields f(cx.sc, "mixing");
  nlohmann::json out;

  // Exact zero once the windows read disjoint coordinates.
  const auto on = f.i64("oracle_n");
  const auto oL = f.i64("oracle_L");
  Rational worst_disjoint;
  nlohmann::json oracle = nlohmann::json::array();
  for (std::int64_t N = 0; N <= 2 * on; ++N) {
    const auto r = finite_window_beta_exact(on, N, oL, cx.exec);
    oracle.push_back(r.to_json());
    if (N >= 2 * on) worst_disjoint = std::max(worst_disjoint, r.beta);
  }
  out["window_oracle"] = oracle;
  cx.checks.push_back(make_check("mixing", "disjoint_zero",
                                 "exact beta vanishes for windows at distance >= 2 n_k",
                                 to_double(worst_disjoint), "==", 0.0));

  // Bound chain at one level.
  const auto cn = f.i64("chain_n");
  const auto law = level_site_law(cn);
  const auto m = static_cast<std::size_t>(2 * cn);
  const double self = to_double(self_beta_product(law, m));
  const double atom = to_double(atom_beta_bound(law, m));
  const double four = 4.0 / static_cast<double>(cn);
  const double oracle_at_zero = to_double(finite_window_beta_exact(on, 0, oL, cx.exec).beta);
  const double self_oracle = to_double(self_beta_product(level_site_law(on), 2 * on + oL));
  out["chain"] = {{"n", cn}, {"self_beta", self}, {"atom_bound", atom}, {"four_over_n", four}};
  const double tol = f.real("chain_tolerance");
  cx.checks.push_back(make_check("mixing", "chain_order", "self beta <= atom bound <= 4/n_k",
                                 std::max(self - atom, atom - four), "<=", 0.0));
  cx.checks.push_back(make_check("mixing", "chain_self", "self beta matches its expected value",
                                 std::abs(self - f.real("chain_self_expected")), "<=", tol));
  cx.checks.push_back(make_check("mixing", "chain_atom", "atom bound matches its expected value",
                                 std::abs(atom - f.real("chain_atom_expected")), "<=", tol));
  cx.checks.push_back(make_check("mixing", "oracle_below_self",
                                 "finite-window beta at distance 0 <= self beta of its coordinates",
                                 oracle_at_zero - self_oracle, "<=", 0.0));

  // Aggregate bound on the scenario sequence.
  std::vector<std::int64_t> grid{0, 1};
  for (const auto& n : cx.seq.levels()) {
    const auto two = to_i64(BigInt(2 * n));
    if (!two || *two > (std::int64_t{1} << 40)) continue;
    for (std::int64_t d = -1; d <= 1; ++d) grid.push_back(*two + d);
  }
  for (std::int64_t g = 2; g <= (std::int64_t{1} << 20); g *= 2) grid.push_back(g);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  const auto prof = beta_bound_profile(cx.seq, grid);
  std::ostringstream csv;
  prof.write_csv(csv);
  cx.write("mixing-profile.csv", csv.str());
  out["profile"] = prof.to_json();
  cx.checks.push_back(make_check("mixing", "aggregate_monotone", "aggregate bound B(N) nonincreasing",
                                 prof.nonincreasing ? 1.0 : 0.0, "==", 1.0));

  // Rate product for the delta rule.
  const auto delta = f.rational("rate_delta");
  const auto dseq = delta_sequence(delta, f.u64("rate_levels"), IntegerWidth::big);
  const std::vector<std::int64_t> one{1};
  const auto rate = beta_bound_profile(dseq, one, delta, nullptr, 0, f.i64("rate_hi"));
  out["rate"] = rate.to_json();
  // Every level with n_j > N contributes 4 N^e / n_j <= 4 n_j^(e-1).
  double envelope = 0.0;
  for (const auto& n : dseq.levels()) {
    envelope += 4.0 * std::pow(to_double(Rational(n)), rate.rate->exponent - 1.0);
  }
  cx.checks.push_back(make_check("mixing", "rate_bounded",
                                 "sup of B(2N) N^{1/(2+delta)} over the rate range",
                                 rate.rate->sup_exact, "<=", envelope));
  cx.checks.push_back(make_check("mixing", "rate_stable",
                                 "rate product sup agrees on coarse, refined and exact grids",
                                 rate.rate->stable() ? 1.0 : 0.0, "==", 1.0));

  // Budgeted sequence.
  const auto budget = RateBudget::parse(f.text("budget"));
  const auto bseq = adaptive_sequence(budget, f.u64("budget_levels"), true);
  const auto bprof = beta_bound_profile(bseq, one, std::nullopt, &budget);
  out["budget"] = bprof.to_json();
  out["budget_sequence"] = bseq.to_json();
  double worst = 0.0;
  for (const auto& row : bprof.budget_rows) worst = std::max(worst, to_double(row.bound / row.budget));
  cx.checks.push_back(make_check("mixing", "budget", "B(2 n_k) <= c_{2 n_k} at every level", worst,
                                 "<=", 1.0));
  cx.write_json("mixing.json", out);
}

void run_moments(SuiteContext& cx) {
  const Fields f(cx.sc, "moments");
  const auto ps = f.rational_list("p_values");
  nlohmann::json rows = nlohmann::json::array();
  std::ostringstream csv;
  csv << "n,p,E_abs_h_p,E_abs_g_p,h_bound,g_bound\n";
  auto cell = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  double worst = 0.0;
  for (auto n : f.i64_list("n_values")) {
    const auto rep = moment_suite(n, ps, cx.exec);
    rows.push_back(rep.to_json());
    for (const auto& r : rep.rows) {
      csv << n << ',' << to_string(r.p) << ',' << cell(r.h_moment) << ',' << cell(r.g_moment)
          << ',' << cell(r.h_bound) << ',' << cell(r.g_bound) << '\n';
      if (r.h_bound && r.h_moment) worst = std::max(worst, *r.h_moment / *r.h_bound);
      if (r.g_bound && r.g_moment) worst = std::max(worst, *r.g_moment / *r.g_bound);
    }
    if (!rep.enumerated) f.fail("n_values", "n = " + std::to_string(n) + " is beyond the enumeration budget");
  }
  const auto bp = static_cast<unsigned>(f.u64("bell_p"));
  const auto b = bell(bp);
  cx.write("moments.csv", csv.str());
  cx.write_json("moments.json", {{"rows", rows}, {"bell_p", bp}, {"bell", to_string(b)}});
  cx.checks.push_back(make_check("moments", "bounds",
                                 "exact moments within 2 B_p / n_k (h) and 3 n_k^{p-1} (g, p < 1)",
                                 worst, "<=", 1.0));
  cx.checks.push_back(make_check("moments", "bell", "Bell number by the binomial recursion",
                                 to_double(b), "==", f.real("bell_expected")));
}

void run_divergence(SuiteContext& cx) {
  const Fields f(cx.sc, "divergence");
  const auto rep = transfer_divergence(cx.seq, cx.config.truncation);
  std::ostringstream csv;
  rep.write_csv(csv);
  cx.write("divergence.csv", csv.str());
  cx.write_json("divergence.json", rep.to_json());
  double min_term = INFINITY, min_ratio = INFINITY;
  for (std::size_t i = 0; i < rep.rows.size(); ++i) {
    min_term = std::min(min_term, rep.rows[i].term);
    if (i + 1 < rep.rows.size()) min_ratio = std::min(min_ratio, rep.rows[i].term / rep.rows[i + 1].term);
  }
  cx.checks.push_back(make_check("divergence", "positive", "per-level lower bounds are positive",
                                 min_term, ">", 0.0));
  if (rep.rows.size() > 1) {
    cx.checks.push_back(make_check("divergence", "non_decaying",
                                   "per-level lower bounds do not decay with k", min_ratio, ">=",
                                   f.real("non_decay_factor")));
  }
}

using SuiteFn = void (*)(SuiteContext&);
const std::vector<std::pair<std::string, SuiteFn>> kSuiteRunners = {
    {"identities", run_identities}, {"clt", run_clt},         {"nontight", run_nontight},
    {"variance", run_variance},     {"mixing", run_mixing},   {"moments", run_moments},
    {"divergence", run_divergence}};

bool known_suite(const std::string& s) {
  return std::find(std::begin(kSuites), std::end(kSuites), s) != std::end(kSuites);
}

}  // namespace

nlohmann::json Check::to_json() const {
  return {{"id", id},       {"group", group},       {"claim", claim}, {"value", value},
          {"bound", bound}, {"relation", relation}, {"pass", pass}};
}

Scenario parse_scenario(std::istream& in, const std::string& source_name) {
  Scenario sc;
  sc.source = source_name;
  std::string line;
  int number = 0;
  auto fail = [&](const std::string& what) -> void {
    throw ParseError(source_name + ":" + std::to_string(number) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) fail("expected 'key = value'");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    if (key.empty()) fail("missing key before '='");
    if (sc.lines.count(key)) fail("duplicate key '" + key + "'");
    sc.lines[key] = number;
    auto as_u64 = [&](const std::string& field) {
      std::uint64_t v = 0;
      const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
      if (ec != std::errc() || ptr != value.data() + value.size() || value.empty()) {
        fail("field '" + field + "': expected an unsigned integer, got '" + value + "'");
      }
      return v;
    };
    if (key == "name") sc.name = value;
    else if (key == "suite") sc.suite = value;
    else if (key == "sequence") sc.sequence = value;
    else if (key == "levels") sc.levels = as_u64(key);
    else if (key == "truncation") sc.truncation = as_u64(key);
    else if (key == "seed") sc.seed = as_u64(key);
    else if (key == "trials") sc.trials = as_u64(key);
    else if (key == "noise") {
      try {
        sc.noise = parse_noise_law(value);
      } catch (const ParseError& e) {
        fail(std::string("field 'noise': ") + e.what());
      }
    } else {
      sc.params[key] = value;
    }
  }
  number = 0;
  if (sc.name.empty()) throw ParseError(source_name + ": missing required field 'name'");
  if (sc.suite.empty()) throw ParseError(source_name + ": missing required field 'suite'");
  if (!known_suite(sc.suite)) {
    throw ParseError(source_name + ":" + std::to_string(sc.lines["suite"]) +
                     ": field 'suite': unknown suite '" + sc.suite + "'");
  }
  for (const auto& [key, value] : sc.params) {
    std::string owner;
    for (const auto& [suite, defaults] : kSuiteDefaults) {
      if ((sc.suite == "all" || sc.suite == suite) && defaults.count(key)) owner = suite;
    }
    if (owner.empty()) {
      throw ParseError(source_name + ":" + std::to_string(sc.lines[key]) + ": unknown field '" +
                       key + "' for suite '" + sc.suite + "'");
    }
    check_kind(Fields(sc, owner), key);
  }
  return sc;
}

Scenario load_scenario(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open scenario file " + path.string());
  return parse_scenario(in, path.filename().string());
}

Scenario default_scenario(const std::string& suite) {
  if (!known_suite(suite)) throw ParseError("unknown suite '" + suite + "'");
  Scenario sc;
  sc.name = suite + "-default";
  sc.suite = suite;
  sc.source = "<defaults>";
  if (suite == "nontight") sc.trials = 4000;
  return sc;
}

fs::path default_output_dir() {
  if (const char* env = std::getenv("BMIX_OUT_DIR"); env && *env) return env;
  return "bmix-out";
}

ScenarioResult run_scenario(const Scenario& sc, const fs::path& out_dir, Exec exec) {
  LevelSequence seq;
  try {
    seq = parse_sequence(sc.sequence, sc.levels, IntegerWidth::big);
  } catch (const ParseError& e) {
    std::string where = sc.source;
    if (auto it = sc.lines.find("sequence"); it != sc.lines.end()) {
      where += ":" + std::to_string(it->second);
    }
    throw ParseError(where + ": field 'sequence': " + e.what());
  }
  const auto validation = validate_lacunary(seq);
  if (!validation.passes()) {
    std::string msg = "sequence " + sc.sequence + " fails validation:";
    for (const auto& reason : validation.failures()) msg += "\n  " + reason;
    throw InvalidSequenceError(msg);
  }

  const fs::path dir = out_dir / sc.name;
  fs::create_directories(dir);
  std::vector<Check> checks;
  std::vector<std::string> artifacts;
  SuiteContext cx{sc, seq, ProcessConfig{}, dir, exec, checks, artifacts};
  cx.config.seq = seq;
  cx.config.truncation = sc.truncation.value_or(seq.size());
  cx.config.noise = NoiseSpec{sc.noise, 0};
  cx.config.seed = sc.seed;
  cx.config.validate();
  cx.write_json("sequence.json", {{"sequence", seq.to_json()}, {"validation", validation.to_json()}});

  for (const auto& [suite, fn] : kSuiteRunners) {
    if (sc.suite == suite || sc.suite == "all") fn(cx);
  }

  std::sort(artifacts.begin(), artifacts.end());
  nlohmann::json checks_json = nlohmann::json::array();
  bool pass = true;
  for (const auto& c : checks) {
    checks_json.push_back(c.to_json());
    pass &= c.pass;
  }
  nlohmann::json summary{{"scenario", sc.name},
                         {"suite", sc.suite},
                         {"seed", sc.seed},
                         {"trials", sc.trials},
                         {"sequence", sc.sequence},
                         {"truncation", cx.config.truncation},
                         {"artifacts", artifacts},
                         {"checks", checks_json},
                         {"pass", pass}};
  {
    std::ofstream out(dir / "summary.json", std::ios::binary);
    out << summary.dump(2) << "\n";
  }
  artifacts.push_back("summary.json");
  return ScenarioResult{std::move(summary), std::move(artifacts)};
}

Report emit_report(std::span<const nlohmann::json> summaries) {
  if (summaries.empty()) throw MergeError("report needs at least one summary");
  std::map<std::string, nlohmann::json> by_name;
  for (const auto& s : summaries) {
    const auto name = s.at("scenario").get<std::string>();
    auto [it, inserted] = by_name.emplace(name, s);
    if (!inserted && it->second != s) {
      throw MergeError("two different summaries share the scenario name '" + name + "'");
    }
  }

  std::map<std::string, nlohmann::json> groups;
  std::size_t total = 0, passed = 0;
  for (const auto& [name, s] : by_name) {
    for (const auto& c : s.at("checks")) {
      auto row = c;
      row["scenario"] = name;
      groups[c.at("group").get<std::string>()].push_back(row);
      ++total;
      passed += c.at("pass").get<bool>();
    }
  }
  std::vector<std::string> order = kGroupOrder;
  for (const auto& [g, _] : groups) {
    if (std::find(order.begin(), order.end(), g) == order.end()) order.push_back(g);
  }

  Report rep;
  std::ostringstream md;
  md << "# Verification report\n\n";
  md << "Scenarios:";
  for (const auto& [name, s] : by_name) md << ' ' << name;
  md << "\n\nChecks passed: " << passed << " of " << total << "\n";
  nlohmann::json groups_json = nlohmann::json::array();
  for (const auto& g : order) {
    auto it = groups.find(g);
    if (it == groups.end()) continue;
    md << "\n## " << g << "\n\n";
    md << "| scenario | check | claim | value | relation | bound | result |\n";
    md << "|---|---|---|---|---|---|---|\n";
    for (const auto& c : it->second) {
      md << "| " << c.at("scenario").get<std::string>() << " | " << c.at("id").get<std::string>()
         << " | " << c.at("claim").get<std::string>() << " | "
         << format_double(c.at("value").get<double>()) << " | "
         << c.at("relation").get<std::string>() << " | "
         << format_double(c.at("bound").get<double>()) << " | "
         << (c.at("pass").get<bool>() ? "pass" : "FAIL") << " |\n";
    }
    groups_json.push_back({{"group", g}, {"checks", it->second}});
  }
  nlohmann::json names = nlohmann::json::array();
  for (const auto& [name, _] : by_name) names.push_back(name);
  rep.markdown = md.str();
  rep.json = {{"scenarios", names},
              {"groups", groups_json},
              {"checks", total},
              {"passed", passed},
              {"pass", passed == total}};
  return rep;
}

}  // namespace bmix
