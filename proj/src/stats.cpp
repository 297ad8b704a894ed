#include "bmix/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include "bmix/accumulators.hpp"
#include "bmix/error.hpp"

namespace bmix {

namespace {

constexpr double kKolmogorovSd = 0.2605;
constexpr double kKolmogorovCritical95 = 1.358;

std::uint64_t pow3(unsigned m) {
  std::uint64_t r = 1;
  for (unsigned i = 0; i < m; ++i) r *= 3;
  return r;
}

bool is_integer(const Rational& q) { return q.get_den() == 1; }

std::string rational_text(const Rational& q) { return to_string(q); }

}  // namespace

nlohmann::json EstimateWithCI::to_json() const {
  return {{"estimate", estimate}, {"se", standard_error}, {"trials", trials}, {"seed", seed}};
}

// ---------------------------------------------------------------- variance

Rational variance_level_exact(std::int64_t n, std::int64_t N) {
  if (n < 1 || N < 1) throw RangeError("variance_level_exact needs n, N >= 1");
  Rational v(coefficient_square_sum(n, N), BigInt(n) * n);
  v.canonicalize();
  return v;
}

VarianceReport variance_profile(const ProcessConfig& config, std::span<const std::int64_t> Ns,
                                Exec exec) {
  config.validate();
  VarianceReport report;
  report.truncation = config.truncation;
  for (std::size_t j = 1; j <= config.truncation; ++j) report.levels.push_back(config.seq.n64(j));
  report.rows.resize(Ns.size());

  for_each_index(exec, static_cast<std::int64_t>(Ns.size()), [&](std::int64_t r) {
    VarianceRow row;
    row.N = Ns[static_cast<std::size_t>(r)];
    if (row.N < 1) throw RangeError("variance_profile needs N >= 1");
    row.level_index = row.N < report.levels.front()
                          ? 0
                          : std::min(level_index(config.seq, row.N), config.truncation);
    for (std::size_t j = 1; j <= config.truncation; ++j) {
      row.per_level.push_back(variance_level_exact(report.levels[j - 1], row.N));
      row.sigma2_h += row.per_level.back();
      (j <= row.level_index ? row.low_part : row.high_part) += row.per_level.back();
    }
    row.sigma2_y = row.sigma2_h + Rational(row.N);
    report.rows[static_cast<std::size_t>(r)] = std::move(row);
  });

  for (const auto& row : report.rows) {
    if (row.ratio_h() > report.sup_ratio_h) {
      report.sup_ratio_h = row.ratio_h();
      report.sup_ratio_at = row.N;
    }
    if (row.level_index >= 1) {
      const double ni = static_cast<double>(report.levels[row.level_index - 1]);
      report.sup_low_ratio = std::max(report.sup_low_ratio, to_double(row.low_part) / ni);
    }
    if (row.level_index < config.truncation) {
      const double next = static_cast<double>(report.levels[row.level_index]);
      const double scale = static_cast<double>(row.N) * static_cast<double>(row.N) / next;
      report.sup_high_ratio = std::max(report.sup_high_ratio, to_double(row.high_part) / scale);
    }
  }
  return report;
}

nlohmann::json VarianceReport::to_json() const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& row : rows) {
    nlohmann::json per = nlohmann::json::array();
    for (const auto& v : row.per_level) per.push_back(rational_text(v));
    rows_json.push_back({{"N", row.N},
                         {"i_N", row.level_index},
                         {"per_level", per},
                         {"sigma2_h", rational_text(row.sigma2_h)},
                         {"sigma2_y", rational_text(row.sigma2_y)},
                         {"ratio_h", row.ratio_h()},
                         {"ratio_y", row.ratio_y()},
                         {"low_part", to_double(row.low_part)},
                         {"high_part", to_double(row.high_part)}});
  }
  return {{"truncation", truncation},
          {"levels", levels},
          {"sup_ratio_h", sup_ratio_h},
          {"sup_ratio_at", sup_ratio_at},
          {"sup_low_ratio", sup_low_ratio},
          {"sup_high_ratio", sup_high_ratio},
          {"rows", rows_json}};
}

void VarianceReport::write_csv(std::ostream& out) const {
  out << "N,i_N,sigma2_h,sigma2_Y,ratio_h,low_part,high_part";
  for (std::size_t j = 1; j <= truncation; ++j) out << ",level_" << j;
  out << '\n';
  for (const auto& row : rows) {
    out << row.N << ',' << row.level_index << ',' << format_double(to_double(row.sigma2_h)) << ','
        << format_double(to_double(row.sigma2_y)) << ',' << format_double(row.ratio_h()) << ','
        << format_double(to_double(row.low_part)) << ','
        << format_double(to_double(row.high_part));
    for (const auto& v : row.per_level) out << ',' << format_double(to_double(v));
    out << '\n';
  }
}

double MonteCarloVariance::relative_error() const {
  const double e = to_double(exact);
  return std::abs(estimate.estimate - e) / e;
}

nlohmann::json MonteCarloVariance::to_json() const {
  return {{"n", n},
          {"N", N},
          {"exact", rational_text(exact)},
          {"exact_value", to_double(exact)},
          {"estimate", estimate.to_json()},
          {"relative_error", relative_error()}};
}

MonteCarloVariance variance_monte_carlo(std::int64_t n, std::int64_t N, std::uint64_t trials,
                                        std::uint64_t seed, Exec exec) {
  if (trials < 2) throw RangeError("variance_monte_carlo needs at least two trials");
  std::vector<std::int64_t> sums(trials);
  for_each_index(exec, static_cast<std::int64_t>(trials), [&](std::int64_t t) {
    Stream rng(seed, StreamId{StreamTag::level_field, static_cast<std::uint64_t>(n),
                              static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(N)});
    const auto f = sample_level_field(1, n, Interval{1 - 2 * n, N - 1}, rng);
    sums[static_cast<std::size_t>(t)] = sum_closed(f, N);
  });
  IntegerMoments acc;
  for (auto s : sums) acc.push(s);
  MonteCarloVariance out;
  out.n = n;
  out.N = N;
  out.exact = variance_level_exact(n, N);
  // The mean is exactly zero, so E[S^2] is the variance.
  out.estimate = {acc.second_moment(), acc.second_moment_se(), trials, seed};
  return out;
}

// --------------------------------------------------------------------- CLT

double standard_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double ks_distance(std::vector<double> sample) {
  if (sample.empty()) throw RangeError("ks_distance needs a nonempty sample");
  std::sort(sample.begin(), sample.end());
  const double T = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double F = standard_normal_cdf(sample[i]);
    d = std::max({d, static_cast<double>(i + 1) / T - F, F - static_cast<double>(i) / T});
  }
  return d;
}

nlohmann::json CltResult::to_json() const {
  return {{"n", n},          {"trials", trials},         {"seed", seed},
          {"ks", ks},        {"ks_band", ks_band},       {"ks_critical", ks_critical},
          {"mean", mean},    {"variance", variance}};
}

CltResult clt_test(const ProcessConfig& config, std::int64_t n, std::uint64_t trials,
                   std::uint64_t salt, Exec exec) {
  config.validate();
  if (trials < 100) {
    throw RangeError("clt_test refuses fewer than 100 trials (got " + std::to_string(trials) + ")");
  }
  if (n < 1) throw RangeError("clt_test needs n >= 1");
  const std::uint64_t stream_salt = mix64(salt) ^ static_cast<std::uint64_t>(n);
  std::vector<double> values(trials);
  for_each_index(exec, static_cast<std::int64_t>(trials), [&](std::int64_t t) {
    const auto trial = static_cast<std::uint64_t>(t);
    std::int64_t s_h = 0;
    for (std::size_t j = 1; j <= config.truncation; ++j) {
      const std::int64_t nj = config.seq.n64(j);
      Stream rng = level_stream(config, j, trial, stream_salt);
      const auto f = sample_level_field(j, nj, Interval{1 - 2 * nj, n - 1}, rng);
      s_h += sum_closed(f, n);
    }
    Stream noise = noise_stream(config, trial, stream_salt);
    const auto m = sample_noise(config.noise, Interval{0, n - 1}, noise);
    double sum = 0.0, comp = 0.0;
    for (double x : m) {
      const double y = sum + x;
      comp += std::abs(sum) >= std::abs(x) ? (sum - y) + x : (x - y) + sum;
      sum = y;
    }
    values[static_cast<std::size_t>(t)] =
        (static_cast<double>(s_h) + sum + comp) / std::sqrt(static_cast<double>(n));
  });
  RunningStats rs;
  for (double v : values) rs.push(v);
  CltResult out;
  out.n = n;
  out.trials = trials;
  out.seed = config.seed;
  out.mean = rs.mean();
  out.variance = rs.variance_sample();
  out.ks = ks_distance(std::move(values));
  out.ks_band = kKolmogorovSd / std::sqrt(static_cast<double>(trials));
  out.ks_critical = kKolmogorovCritical95 / std::sqrt(static_cast<double>(trials));
  return out;
}

// ------------------------------------------------------------ non-tightness

double bonferroni_bound(std::span<const double> p, const std::vector<std::vector<double>>& q) {
  const std::size_t n = p.size();
  if (q.size() != n) throw RangeError("bonferroni_bound: q must be |p| x |p|");
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(p[i] >= 0.0 && p[i] <= 1.0)) throw RangeError("bonferroni_bound: p_i outside [0, 1]");
    if (q[i].size() != n) throw RangeError("bonferroni_bound: q must be |p| x |p|");
    total += p[i];
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (q[i][j] != q[j][i]) throw RangeError("bonferroni_bound: q must be symmetric");
      total -= q[i][j];
    }
  }
  return total;
}

Rational exceedance_lower_bound(std::int64_t n) {
  const Rational a = Rational(1) - Rational(2, n);
  Rational r = a * (a * a * a - Rational(1, 2));
  r.canonicalize();
  return r;
}

std::int64_t threshold_N0() {
  for (std::int64_t n = 3;; ++n) {
    if (exceedance_lower_bound(n) > Rational(1, 4)) return n;
  }
}

NontightMode parse_nontight_mode(std::string_view text) {
  if (text == "level") return NontightMode::level;
  if (text == "full") return NontightMode::full;
  if (text == "focus" || text == "focus+intrusion") return NontightMode::focus;
  throw ParseError("unknown nontight mode '" + std::string(text) + "' (level|full|focus)");
}

std::string_view to_string(NontightMode mode) {
  switch (mode) {
    case NontightMode::level: return "level";
    case NontightMode::full: return "full";
    case NontightMode::focus: return "focus+intrusion";
  }
  return "level";
}

nlohmann::json NontightReport::to_json() const {
  nlohmann::json j{{"k", k},
                   {"n_k", n_k},
                   {"mode", std::string(to_string(mode))},
                   {"threshold", rational_text(threshold)},
                   {"window", {lo, hi}},
                   {"truncation", truncation},
                   {"estimate", window.to_json()},
                   {"analytic_bound", analytic_bound},
                   {"intrusion_bound", intrusion_bound},
                   {"pass", passes()}};
  if (single_point) j["single_point"] = single_point->to_json();
  if (intrusion) j["intrusion"] = intrusion->to_json();
  if (mode == NontightMode::focus) j["focus_threshold"] = focus_threshold;
  return j;
}

NontightReport nontight_prob(const ProcessConfig& config, const NontightRequest& request,
                             Exec exec) {
  config.validate();
  const std::size_t k = request.k;
  if (k < 1 || k > config.truncation) {
    throw RangeError("level k = " + std::to_string(k) + " outside 1.." +
                     std::to_string(config.truncation));
  }
  if (request.trials < 1) throw RangeError("nontight_prob needs at least one trial");
  NontightReport rep;
  rep.k = k;
  rep.n_k = config.seq.n64(k);
  rep.mode = request.mode;
  rep.threshold = request.threshold;
  rep.truncation = config.truncation;
  rep.lo = request.lo.value_or(2 * rep.n_k);
  rep.hi = request.hi.value_or(rep.n_k * rep.n_k);
  if (rep.lo < 1 || rep.hi < rep.lo || rep.hi > rep.n_k * rep.n_k) {
    throw RangeError("window [" + std::to_string(rep.lo) + ", " + std::to_string(rep.hi) +
                     "] must lie in [1, n_k^2]");
  }
  rep.analytic_bound = request.mode == NontightMode::level ? 0.25 : 0.125;
  for (std::size_t j = k + 1; j <= config.truncation; ++j) {
    rep.intrusion_bound += 2.0 * static_cast<double>(rep.n_k) / to_double(config.seq.n(j));
  }

  // |S| >= theta n_k  <=>  |S| >= ceil(theta n_k) for integer S.
  const std::int64_t target = *to_i64(ceil(request.threshold * Rational(rep.n_k)));
  std::int64_t envelope = 0;
  for (std::size_t j = 1; j < k; ++j) {
    const std::int64_t nj = config.seq.n64(j);
    envelope += 2 * nj * nj;
  }
  rep.focus_threshold = target + envelope;

  if (request.mode == NontightMode::full) {
    double expected = 0.0;
    for (std::size_t j = 1; j <= config.truncation; ++j) {
      const double nj = to_double(config.seq.n(j));
      expected += (static_cast<double>(rep.hi) + 2.0 * nj) / (nj * nj);
    }
    if (expected > request.event_budget) {
      throw CapacityError("full mode needs about " + format_double(expected) +
                          " events per trial, above the budget of " +
                          format_double(request.event_budget) + "; use focus+intrusion mode");
    }
  }

  struct Outcome {
    bool window = false;
    bool point = false;
    bool intrusion = false;
  };
  std::vector<Outcome> outcomes(request.trials);
  const bool check_intrusion = request.mode != NontightMode::level && k < config.truncation;

  for_each_index(exec, static_cast<std::int64_t>(request.trials), [&](std::int64_t t) {
    const auto trial = static_cast<std::uint64_t>(t);
    auto sample = [&](std::size_t j) {
      const std::int64_t nj = config.seq.n64(j);
      Stream rng = level_stream(config, j, trial, request.salt);
      return sample_level_field(j, nj, Interval{1 - 2 * nj, rep.hi - 1}, rng);
    };
    std::vector<SparseLevelField> exact;
    Outcome o;
    if (request.mode == NontightMode::full) {
      for (std::size_t j = 1; j <= config.truncation; ++j) {
        exact.push_back(sample(j));
        if (j > k && !exact.back().events().empty()) o.intrusion = true;
      }
    } else {
      exact.push_back(sample(k));
      if (check_intrusion) {
        for (std::size_t j = k + 1; j <= config.truncation && !o.intrusion; ++j) {
          o.intrusion = !sample(j).events().empty();
        }
      }
    }
    const std::int64_t wmax = window_max_abs(exact, rep.lo, rep.hi);
    if (request.mode == NontightMode::focus) {
      o.window = wmax >= rep.focus_threshold && !o.intrusion;
    } else {
      o.window = wmax >= target;
      std::int64_t s = 0;
      for (const auto& f : exact) s += sum_closed(f, rep.hi);
      o.point = std::abs(s) >= target;
    }
    outcomes[static_cast<std::size_t>(t)] = o;
  });

  BinomialCount window, point, intrusion;
  for (const auto& o : outcomes) {
    window.push(o.window);
    point.push(o.point);
    intrusion.push(o.intrusion);
  }
  auto to_estimate = [&](const BinomialCount& c) {
    return EstimateWithCI{c.estimate(), c.standard_error(), c.trials, config.seed};
  };
  rep.window = to_estimate(window);
  if (request.mode != NontightMode::focus) rep.single_point = to_estimate(point);
  if (check_intrusion) rep.intrusion = to_estimate(intrusion);
  return rep;
}

// ----------------------------------------------------------------- moments

BigInt bell(unsigned p) {
  std::vector<BigInt> b{1};
  for (unsigned m = 0; m < p; ++m) {
    // B_{m+1} = sum_k C(m, k) B_k
    BigInt next = 0;
    BigInt binom = 1;
    for (unsigned k = 0; k <= m; ++k) {
      next += binom * b[k];
      binom = binom * (m - k) / (k + 1);
    }
    b.push_back(next);
  }
  return b[p];
}

std::uint64_t bell_u64(unsigned p) {
  const auto v = to_u64(bell(p));
  if (!v) throw CapacityError("B_" + std::to_string(p) + " does not fit in 64 bits");
  return *v;
}

bool MomentRow::within_bounds() const {
  if (h_bound && h_moment && *h_moment > *h_bound) return false;
  if (g_bound && g_moment && *g_moment > *g_bound) return false;
  return true;
}

bool MomentReport::within_bounds() const {
  return std::all_of(rows.begin(), rows.end(), [](const MomentRow& r) { return r.within_bounds(); });
}

nlohmann::json MomentReport::to_json() const {
  nlohmann::json rows_json = nlohmann::json::array();
  auto opt = [](const auto& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  for (const auto& r : rows) {
    nlohmann::json j{{"p", rational_text(r.p)},
                     {"E_abs_h_p", opt(r.h_moment)},
                     {"E_abs_g_p", opt(r.g_moment)},
                     {"h_bound", opt(r.h_bound)},
                     {"g_bound", opt(r.g_bound)},
                     {"within_bounds", r.within_bounds()}};
    if (r.h_moment_exact) j["E_abs_h_p_exact"] = rational_text(*r.h_moment_exact);
    if (r.g_moment_exact) j["E_abs_g_p_exact"] = rational_text(*r.g_moment_exact);
    rows_json.push_back(std::move(j));
  }
  return {{"n", n},
          {"enumerated", enumerated},
          {"configurations_h", configurations_h},
          {"configurations_g", configurations_g},
          {"rows", rows_json}};
}

namespace {

/// Law of |sum_i a_i e_i| for i.i.d. ternary e_i, aggregated as counts of
/// configurations by (|value|, number of nonzero coordinates).
struct AbsLaw {
  std::int64_t max_value = 0;
  unsigned coords = 0;
  std::vector<std::uint64_t> counts;  // [value * (coords + 1) + z]

  std::uint64_t& at(std::int64_t v, unsigned z) {
    return counts[static_cast<std::size_t>(v) * (coords + 1) + z];
  }
  std::uint64_t at(std::int64_t v, unsigned z) const {
    return counts[static_cast<std::size_t>(v) * (coords + 1) + z];
  }
};

AbsLaw enumerate_abs_law(const std::vector<std::int64_t>& coef, Exec exec) {
  AbsLaw law;
  law.coords = static_cast<unsigned>(coef.size());
  for (auto c : coef) law.max_value += std::abs(c);
  const std::size_t cells = static_cast<std::size_t>(law.max_value + 1) * (law.coords + 1);
  const std::uint64_t total = pow3(law.coords);
  const std::int64_t blocks = static_cast<std::int64_t>(std::min<std::uint64_t>(total, 256));
  std::vector<std::vector<std::uint64_t>> partial(static_cast<std::size_t>(blocks));

  for_each_index(exec, blocks, [&](std::int64_t b) {
    std::vector<std::uint64_t> local(cells, 0);
    const std::uint64_t begin = total * static_cast<std::uint64_t>(b) / blocks;
    const std::uint64_t end = total * static_cast<std::uint64_t>(b + 1) / blocks;
    for (std::uint64_t c = begin; c < end; ++c) {
      std::uint64_t x = c;
      std::int64_t v = 0;
      unsigned z = 0;
      for (unsigned i = 0; i < law.coords; ++i, x /= 3) {
        const int d = static_cast<int>(x % 3);
        if (d == 0) continue;
        ++z;
        v += d == 1 ? coef[i] : -coef[i];
      }
      ++local[static_cast<std::size_t>(std::abs(v)) * (law.coords + 1) + z];
    }
    partial[static_cast<std::size_t>(b)] = std::move(local);
  });
  law.counts.assign(cells, 0);
  for (const auto& p : partial) {
    for (std::size_t i = 0; i < cells; ++i) law.counts[i] += p[i];
  }
  return law;
}

/// E|X|^p. Exact for integer p; double otherwise.
std::pair<std::optional<Rational>, double> abs_moment(const AbsLaw& law, std::int64_t n,
                                                      const Rational& p) {
  const Rational site(1, 2 * n * n);                 // P(e = +1) = P(e = -1)
  const Rational zero = Rational(1) - Rational(2) * site;
  std::vector<Rational> weight(law.coords + 1);
  for (unsigned z = 0; z <= law.coords; ++z) {
    weight[z] = pow(site, z) * pow(zero, law.coords - z);
  }
  if (is_integer(p)) {
    const unsigned long e = p.get_num().get_ui();
    Rational total;
    for (std::int64_t v = 1; v <= law.max_value; ++v) {
      Rational at_v;
      for (unsigned z = 0; z <= law.coords; ++z) {
        if (const auto c = law.at(v, z)) at_v += Rational(from_u64(c)) * weight[z];
      }
      total += at_v * pow(Rational(v), e);
    }
    total.canonicalize();
    return {total, to_double(total)};
  }
  const long double pd = to_double(p);
  long double total = 0;
  for (std::int64_t v = 1; v <= law.max_value; ++v) {
    Rational at_v;
    for (unsigned z = 0; z <= law.coords; ++z) {
      if (const auto c = law.at(v, z)) at_v += Rational(from_u64(c)) * weight[z];
    }
    total += static_cast<long double>(to_double(at_v)) * std::pow(static_cast<long double>(v), pd);
  }
  return {std::nullopt, static_cast<double>(total)};
}

}  // namespace

MomentReport moment_suite(std::int64_t n, std::span<const Rational> ps, Exec exec,
                          std::uint64_t budget) {
  if (n < 2) throw RangeError("moment_suite needs n >= 2");
  MomentReport rep;
  rep.n = n;
  const unsigned mh = static_cast<unsigned>(2 * n);
  const unsigned mg = mh - 1;
  const bool fits = mh < 40 && pow3(mh) <= budget;
  rep.configurations_h = mh < 40 ? pow3(mh) : 0;
  rep.configurations_g = mg < 40 ? pow3(mg) : 0;
  rep.enumerated = fits;

  std::optional<AbsLaw> h_law, g_law;
  if (fits) {
    // h: +1 at lags 0..n-1, -1 at lags n..2n-1.
    std::vector<std::int64_t> hc(mh);
    for (unsigned i = 0; i < mh; ++i) hc[i] = i < static_cast<unsigned>(n) ? 1 : -1;
    // g: 1..n at lags 1..n, then n-1..1.
    std::vector<std::int64_t> gc(mg);
    for (unsigned i = 0; i < mg; ++i) {
      const std::int64_t lag = i + 1;
      gc[i] = lag <= n ? lag : 2 * n - lag;
    }
    h_law = enumerate_abs_law(hc, exec);
    g_law = enumerate_abs_law(gc, exec);
  }

  for (const auto& p : ps) {
    if (p <= 0) throw RangeError("moment order p must be positive");
    MomentRow row;
    row.p = p;
    row.exact = fits;
    if (is_integer(p)) {
      const unsigned pi = static_cast<unsigned>(p.get_num().get_ui());
      row.h_bound = 2.0 * to_double(bell(pi)) / static_cast<double>(n);
    }
    if (p < 1) {
      row.g_bound = 3.0 * std::pow(static_cast<double>(n), to_double(p) - 1.0);
    }
    if (fits) {
      auto [he, hd] = abs_moment(*h_law, n, p);
      auto [ge, gd] = abs_moment(*g_law, n, p);
      row.h_moment = hd;
      row.g_moment = gd;
      row.h_moment_exact = he;
      row.g_moment_exact = ge;
    }
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

// -------------------------------------------------------------- divergence

bool DivergenceReport::all_positive() const {
  return std::all_of(rows.begin(), rows.end(), [](const DivergenceRow& r) { return r.term > 0; });
}

bool DivergenceReport::non_decaying(double factor) const {
  for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
    if (rows[i].term < factor * rows[i + 1].term) return false;
  }
  return true;
}

nlohmann::json DivergenceReport::to_json() const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json j{{"k", r.k}, {"n_k", r.n_k}, {"term", r.term}, {"partial_sum", r.partial_sum}};
    if (r.term_exact) j["term_exact"] = rational_text(*r.term_exact);
    rows_json.push_back(std::move(j));
  }
  return {{"truncation", truncation},
          {"exact", exact},
          {"all_positive", all_positive()},
          {"non_decaying", non_decaying()},
          {"rows", rows_json}};
}

void DivergenceReport::write_csv(std::ostream& out) const {
  out << "k,n_k,term,partial_sum\n";
  for (const auto& r : rows) {
    out << r.k << ',' << r.n_k << ',' << format_double(r.term) << ','
        << format_double(r.partial_sum) << '\n';
  }
}

DivergenceReport transfer_divergence(const LevelSequence& seq, std::size_t K,
                                     std::uint64_t exact_bits) {
  if (K < 1 || K > seq.size()) {
    throw RangeError("truncation K = " + std::to_string(K) + " outside 1.." +
                     std::to_string(seq.size()));
  }
  DivergenceReport rep;
  rep.truncation = K;
  double bits = 0.0;
  for (std::size_t l = 1; l <= K; ++l) {
    const double nl = to_double(seq.n(l));
    bits += 2.0 * nl * 2.0 * std::log2(nl);
  }
  rep.exact = bits <= static_cast<double>(exact_bits);

  std::vector<Rational> factor_exact;  // (1 - n_l^-2)^(2 n_l - 1)
  std::vector<long double> log_factor;
  for (std::size_t l = 1; l <= K; ++l) {
    const BigInt& nl = seq.n(l);
    const long double nd = to_double(nl);
    log_factor.push_back((2 * nd - 1) * std::log1p(-1.0L / (nd * nd)));
    if (rep.exact) {
      const Rational q = Rational(1) - Rational(BigInt(1), BigInt(nl * nl));
      factor_exact.push_back(pow(q, BigInt(2 * nl - 1).get_ui()));
    }
  }

  double partial = 0.0;
  for (std::size_t k = 1; k <= K; ++k) {
    const BigInt& nk = seq.n(k);
    DivergenceRow row;
    row.k = k;
    row.n_k = to_string(nk);
    if (rep.exact) {
      // sum_{j<=n} j * n^-2 * (1 - n^-2)^(2n-2) * prod_{l!=k} ...
      Rational t(BigInt(nk * (nk + 1) / 2), BigInt(nk * nk));
      t *= pow(Rational(1) - Rational(BigInt(1), BigInt(nk * nk)), BigInt(2 * nk - 2).get_ui());
      for (std::size_t l = 1; l <= K; ++l) {
        if (l != k) t *= factor_exact[l - 1];
      }
      t.canonicalize();
      row.term = to_double(t);
      row.term_exact = std::move(t);
    } else {
      const long double nd = to_double(nk);
      long double lt = std::log((nd + 1) / (2 * nd)) + (2 * nd - 2) * std::log1p(-1.0L / (nd * nd));
      for (std::size_t l = 1; l <= K; ++l) {
        if (l != k) lt += log_factor[l - 1];
      }
      row.term = static_cast<double>(std::exp(lt));
    }
    partial += row.term;
    row.partial_sum = partial;
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

}  // namespace bmix
