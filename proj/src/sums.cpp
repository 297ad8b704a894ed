#include "bmix/sums.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

#include "bmix/error.hpp"

namespace bmix {

namespace {

std::int64_t overlap(std::int64_t a, std::int64_t b, std::int64_t lo, std::int64_t hi) {
  return std::max<std::int64_t>(0, std::min(b, hi) - std::max(a, lo) + 1);
}

std::int64_t count_coefficient(std::int64_t n, std::int64_t N, std::int64_t i) {
  return overlap(i, i + n - 1, 0, N - 1) - overlap(i + n, i + 2 * n - 1, 0, N - 1);
}

BigInt from_i128(__int128 v) {
  const bool negative = v < 0;
  unsigned __int128 u = negative ? static_cast<unsigned __int128>(-(v + 1)) + 1
                                 : static_cast<unsigned __int128>(v);
  BigInt z = from_u64(static_cast<std::uint64_t>(u >> 64));
  z <<= 64;
  z += from_u64(static_cast<std::uint64_t>(u));
  return negative ? BigInt(-z) : z;
}

void require_field_covers(const SparseLevelField& f, std::int64_t a, std::int64_t b) {
  if (!f.interval().covers(a, b)) {
    throw CoverageError("level " + std::to_string(f.level()) + " field covers [" +
                        std::to_string(f.interval().lo) + ", " + std::to_string(f.interval().hi) +
                        "] but the sum needs [" + std::to_string(a) + ", " + std::to_string(b) +
                        "]");
  }
}

}  // namespace

std::int64_t CoefficientMap::coefficient(std::int64_t i) const {
  if (i < first_index || i > last_index()) return 0;
  return coeffs[static_cast<std::size_t>(i - first_index)];
}

std::int64_t CoefficientMap::total() const {
  std::int64_t s = 0;
  for (auto c : coeffs) s += c;
  return s;
}

BigInt CoefficientMap::square_sum() const {
  __int128 s = 0;
  for (auto c : coeffs) s += static_cast<__int128>(c) * c;
  return from_i128(s);
}

std::int64_t CoefficientMap::contract(const SparseLevelField& field) const {
  require_field_covers(field, first_index, last_index());
  std::int64_t s = 0;
  for (const auto& e : field.events_in(first_index, last_index())) {
    s += coefficient(e.index) * e.value;
  }
  return s;
}

CoefficientMap coefficient_map(std::int64_t n, std::int64_t N) {
  if (n < 1) throw RangeError("coefficient_map needs n >= 1");
  if (N < 1) throw RangeError("coefficient_map needs N >= 1");
  CoefficientMap map;
  map.n = n;
  map.N = N;
  map.first_index = 1 - 2 * n;
  map.coeffs.resize(static_cast<std::size_t>(N + 2 * n - 1));
  for (std::size_t idx = 0; idx < map.coeffs.size(); ++idx) {
    map.coeffs[idx] = count_coefficient(n, N, map.first_index + static_cast<std::int64_t>(idx));
  }
  return map;
}

BigInt coefficient_square_sum(std::int64_t n, std::int64_t N) {
  if (n < 1 || N < 1) throw RangeError("coefficient_square_sum needs n, N >= 1");
  const std::int64_t lo = 1 - 2 * n;
  const std::int64_t hi = N - 1;
  // Kinks of i -> |[0,N-1] ∩ [i+a, i+a+n-1]| for a in {0, n}, with neighbours.
  std::vector<std::int64_t> cuts{lo, hi + 1};
  for (std::int64_t a : {std::int64_t{0}, n}) {
    for (std::int64_t base : {-a - n, -a, N - a - n, N - a}) {
      for (std::int64_t d = -1; d <= 1; ++d) {
        const std::int64_t c = base + d;
        if (c > lo && c <= hi) cuts.push_back(c);
      }
    }
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  __int128 total = 0;
  for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
    const std::int64_t a = cuts[s];
    const __int128 m = cuts[s + 1] - a;  // segment [a, a+m-1]
    const __int128 c0 = count_coefficient(n, N, a);
    const __int128 d = m > 1 ? count_coefficient(n, N, a + 1) - c0 : 0;
    // sum_{t<m} (c0 + t d)^2
    const __int128 st = m * (m - 1) / 2;
    const __int128 st2 = (m - 1) * m * (2 * m - 1) / 6;
    total += m * c0 * c0 + 2 * c0 * d * st + d * d * st2;
  }
  return from_i128(total);
}

std::int64_t sum_direct(const SparseLevelField& field, std::int64_t N) {
  if (N < 0) throw RangeError("sum_direct needs N >= 0");
  require_field_covers(field, 1 - 2 * field.n(), N - 1);
  std::int64_t s = 0;
  for (std::int64_t j = 0; j < N; ++j) s += eval_h_level(field, j);
  return s;
}

std::int64_t closed_coefficient(std::int64_t n, std::int64_t N, std::int64_t x) {
  if (x < 1 - 2 * n || x > N - 1) return 0;
  if (N >= n) {
    std::int64_t c = 0;
    if (const std::int64_t d = x - (N - 2 * n); 1 <= d && d <= n) c += d;
    if (const std::int64_t e = x - (N - n); 1 <= e && e <= n - 1) c += n - e;
    if (const std::int64_t f = x + 2 * n; 1 <= f && f <= n) c -= f;
    if (const std::int64_t g = x + n; 1 <= g && g <= n - 1) c -= n - g;
    return c;
  }
  // N < n: (I - U^{-n}) applied to the short-range profile P.
  auto profile = [n, N](std::int64_t y) -> std::int64_t {
    if (1 - n <= y && y <= N - 1 - n) return y + n;
    if (N - n <= y && y <= 0) return N;
    if (1 <= y && y <= N - 1) return N - y;
    return 0;
  };
  return profile(x) - profile(x + n);
}

std::int64_t sum_closed(const SparseLevelField& field, std::int64_t N) {
  if (N < 0) throw RangeError("sum_closed needs N >= 0");
  if (N == 0) return 0;
  const std::int64_t n = field.n();
  require_field_covers(field, 1 - 2 * n, N - 1);
  std::int64_t s = 0;
  for (const auto& e : field.events_in(1 - 2 * n, N - 1)) {
    s += closed_coefficient(n, N, e.index) * e.value;
  }
  return s;
}

PathMode parse_path_mode(std::string_view text) {
  if (text == "full") return PathMode::full;
  if (text == "focus" || text == "focus+intrusion") return PathMode::focus_intrusion;
  throw ParseError("unknown path mode '" + std::string(text) + "' (full|focus)");
}

std::string_view to_string(PathMode mode) {
  return mode == PathMode::full ? "full" : "focus+intrusion";
}

PathSample::PathSample(std::int64_t first_N, std::vector<std::int64_t> s_h,
                       std::vector<double> s_m)
    : first_N_(first_N), s_h_(std::move(s_h)), s_m_(std::move(s_m)) {
  if (first_N_ < 1) throw RangeError("path must start at N >= 1");
  if (!s_m_.empty() && s_m_.size() != s_h_.size()) {
    throw RangeError("path h-part and noise part have different lengths");
  }
}

void PathSample::require(std::int64_t N) const {
  if (!covers(N)) {
    throw RangeError("N = " + std::to_string(N) + " outside path range [" +
                     std::to_string(first_N_) + ", " + std::to_string(last_N()) + "]");
  }
}

std::int64_t PathSample::s_h(std::int64_t N) const {
  require(N);
  return N == 0 ? 0 : s_h_[static_cast<std::size_t>(N - first_N_)];
}

double PathSample::s_m(std::int64_t N) const {
  require(N);
  if (N == 0 || s_m_.empty()) return 0.0;
  return s_m_[static_cast<std::size_t>(N - first_N_)];
}

double PathSample::s_y(std::int64_t N) const {
  return static_cast<double>(s_h(N)) + s_m(N);
}

double PathSample::value(PathSeries series, std::int64_t N) const {
  switch (series) {
    case PathSeries::h: return static_cast<double>(s_h(N));
    case PathSeries::m: return s_m(N);
    case PathSeries::y: return s_y(N);
  }
  return 0.0;
}

std::vector<std::int64_t> dense_partial_sums(std::span<const SparseLevelField> fields,
                                             std::int64_t first_N, std::int64_t last_N) {
  if (first_N < 1 || last_N < first_N) {
    throw RangeError("dense_partial_sums needs 1 <= first_N <= last_N");
  }
  // h(j) for j in [0, last_N - 1]; breakpoints at or before 0 fold into slot 0.
  std::vector<std::int64_t> diff(static_cast<std::size_t>(last_N), 0);
  auto add = [&](std::int64_t p, std::int64_t w) {
    if (p > last_N - 1) return;
    diff[static_cast<std::size_t>(std::max<std::int64_t>(p, 0))] += w;
  };
  for (const auto& f : fields) {
    const std::int64_t n = f.n();
    require_field_covers(f, 1 - 2 * n, last_N - 1);
    for (const auto& e : f.events_in(1 - 2 * n, last_N - 1)) {
      add(e.index, e.value);
      add(e.index + n, -2 * e.value);
      add(e.index + 2 * n, e.value);
    }
  }
  std::vector<std::int64_t> out(static_cast<std::size_t>(last_N - first_N + 1));
  std::int64_t h = 0;
  std::int64_t s = 0;
  for (std::int64_t j = 0; j < last_N; ++j) {
    h += diff[static_cast<std::size_t>(j)];
    s += h;  // s = S_{j+1}
    if (j + 1 >= first_N) out[static_cast<std::size_t>(j + 1 - first_N)] = s;
  }
  return out;
}

std::int64_t window_max_abs(std::span<const SparseLevelField> fields, std::int64_t lo,
                            std::int64_t hi) {
  if (lo < 1 || hi < lo) throw RangeError("window_max_abs needs 1 <= lo <= hi");
  struct Break {
    std::int64_t at;
    std::int64_t weight;
  };
  std::vector<Break> breaks;
  std::int64_t s = 0;      // S_lo
  std::int64_t slope = 0;  // h(lo) = S_{lo+1} - S_lo
  for (const auto& f : fields) {
    const std::int64_t n = f.n();
    require_field_covers(f, 1 - 2 * n, hi - 1);
    for (const auto& e : f.events_in(1 - 2 * n, hi - 1)) {
      s += closed_coefficient(n, lo, e.index) * e.value;
      for (const Break b : {Break{e.index, e.value}, Break{e.index + n, -2 * e.value},
                            Break{e.index + 2 * n, e.value}}) {
        if (b.at <= lo) {
          slope += b.weight;
        } else if (b.at < hi) {
          breaks.push_back(b);
        }
      }
    }
  }
  std::sort(breaks.begin(), breaks.end(),
            [](const Break& a, const Break& b) { return a.at < b.at; });
  std::int64_t best = std::abs(s);
  std::int64_t N = lo;
  for (std::size_t i = 0; i < breaks.size();) {
    const std::int64_t at = breaks[i].at;
    s += slope * (at - N);
    N = at;
    best = std::max(best, std::abs(s));
    for (; i < breaks.size() && breaks[i].at == at; ++i) slope += breaks[i].weight;
  }
  s += slope * (hi - N);
  return std::max(best, std::abs(s));
}

SampledLevels sample_path_levels(const ProcessConfig& config, const PathRequest& request) {
  config.validate();
  const std::size_t k = request.focus_level;
  if (k < 1 || k > config.truncation) {
    throw RangeError("focus level " + std::to_string(k) + " outside the simulated levels 1.." +
                     std::to_string(config.truncation));
  }
  const std::int64_t n_k = config.seq.n64(k);
  if (request.first_N < 1 || request.last_N < request.first_N || request.last_N > n_k * n_k) {
    throw RangeError("N-range [" + std::to_string(request.first_N) + ", " +
                     std::to_string(request.last_N) + "] must lie in [1, n_k^2] = [1, " +
                     std::to_string(n_k * n_k) + "]");
  }
  SampledLevels out;
  auto sample = [&](std::size_t level) {
    const std::int64_t n = config.seq.n64(level);
    Stream rng = level_stream(config, level, request.trial, request.salt);
    return sample_level_field(level, n, Interval{1 - 2 * n, request.last_N - 1}, rng);
  };
  if (request.mode == PathMode::full) {
    for (std::size_t j = 1; j <= config.truncation; ++j) out.exact.push_back(sample(j));
  } else {
    out.exact.push_back(sample(k));
  }
  for (std::size_t j = k + 1; j <= config.truncation; ++j) {
    if (request.mode == PathMode::full) continue;
    out.intrusion.push_back(sample(j));
  }
  return out;
}

PathSample path_profile(const ProcessConfig& config, const PathRequest& request) {
  if (request.last_N > request.dense_budget) {
    throw CapacityError("dense path over N <= " + std::to_string(request.last_N) +
                        " exceeds the sweep budget of " + std::to_string(request.dense_budget) +
                        "; use focus+intrusion mode with the breakpoint maximum instead");
  }
  SampledLevels levels = sample_path_levels(config, request);
  std::vector<std::int64_t> s_h =
      dense_partial_sums(levels.exact, request.first_N, request.last_N);

  std::vector<double> s_m;
  if (request.with_noise) {
    Stream rng = noise_stream(config, request.trial, request.salt);
    const std::vector<double> m = sample_noise(config.noise, Interval{0, request.last_N - 1}, rng);
    s_m.resize(s_h.size());
    // Neumaier-compensated prefix sums.
    double sum = 0.0, comp = 0.0;
    for (std::int64_t j = 0; j < request.last_N; ++j) {
      const double x = m[static_cast<std::size_t>(j)];
      const double t = sum + x;
      comp += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
      sum = t;
      if (j + 1 >= request.first_N) s_m[static_cast<std::size_t>(j + 1 - request.first_N)] = sum + comp;
    }
  }

  PathSample path(request.first_N, std::move(s_h), std::move(s_m));
  path.mode = request.mode;
  path.focus_level = request.focus_level;
  path.truncation = config.truncation;
  if (request.mode == PathMode::full) {
    for (const auto& f : levels.exact) {
      if (f.level() > request.focus_level && !f.events().empty()) path.intrusion = true;
    }
  } else {
    for (const auto& f : levels.intrusion) {
      if (!f.events().empty()) path.intrusion = true;
    }
  }
  return path;
}

FunctionalKind parse_functional_kind(std::string_view text) {
  if (text == "polygonal") return FunctionalKind::polygonal;
  if (text == "step") return FunctionalKind::step;
  throw ParseError("unknown functional kind '" + std::string(text) + "' (polygonal|step)");
}

double path_functional(const PathSample& path, std::int64_t n, double t, FunctionalKind kind,
                       PathSeries series) {
  if (n < 1) throw RangeError("path_functional needs n >= 1");
  if (!(t >= 0.0 && t <= 1.0)) throw RangeError("path_functional needs t in [0, 1]");
  const double nt = static_cast<double>(n) * t;
  const auto whole = static_cast<std::int64_t>(std::floor(nt));
  const double frac = nt - static_cast<double>(whole);
  if (!path.covers(whole)) {
    throw RangeError("path does not cover N = " + std::to_string(whole));
  }
  const double base = path.value(series, whole);
  if (kind == FunctionalKind::step || frac == 0.0) return base;
  if (!path.covers(whole + 1)) {
    throw RangeError("path does not cover N = " + std::to_string(whole + 1));
  }
  return base + frac * (path.value(series, whole + 1) - base);
}

double max_statistic(const PathSample& path, std::int64_t n_k, std::int64_t lo, std::int64_t hi) {
  if (n_k < 1 || hi < lo) throw RangeError("max_statistic needs n_k >= 1 and lo <= hi");
  if (!path.covers(lo) || !path.covers(hi)) {
    throw RangeError("path range [" + std::to_string(path.first_N()) + ", " +
                     std::to_string(path.last_N()) + "] does not cover [" + std::to_string(lo) +
                     ", " + std::to_string(hi) + "]");
  }
  std::int64_t best = 0;
  for (std::int64_t N = lo; N <= hi; ++N) best = std::max(best, std::abs(path.s_h(N)));
  return static_cast<double>(best) / static_cast<double>(n_k);
}

double max_statistic(const PathSample& path, std::int64_t n_k) {
  return max_statistic(path, n_k, 2 * n_k, n_k * n_k);
}

IdentitySweep identity_sweep(std::int64_t n, std::int64_t N_max, std::uint64_t fields,
                             std::uint64_t seed, Exec exec) {
  if (n < 2 || N_max < 1) throw RangeError("identity_sweep needs n >= 2 and N_max >= 1");
  std::vector<CoefficientMap> maps;
  for (std::int64_t N = 1; N <= N_max; ++N) maps.push_back(coefficient_map(n, N));
  std::vector<IdentitySweep> per(fields);
  for_each_index(exec, static_cast<std::int64_t>(fields), [&](std::int64_t f) {
    Stream rng(seed, StreamId{StreamTag::generic, static_cast<std::uint64_t>(n),
                              static_cast<std::uint64_t>(f), static_cast<std::uint64_t>(N_max)});
    const auto field = sample_level_field(1, n, Interval{1 - 2 * n, N_max - 1}, rng);
    IdentitySweep& r = per[static_cast<std::size_t>(f)];
    r.events = field.events().size();
    const std::int64_t t0 = eval_transfer_level(field, 0);
    std::int64_t direct = 0;
    for (std::int64_t N = 1; N <= N_max; ++N) {
      direct += eval_h_level(field, N - 1);
      ++r.comparisons;
      r.closed_mismatches += sum_closed(field, N) != direct;
      r.contraction_mismatches += maps[static_cast<std::size_t>(N - 1)].contract(field) != direct;
      r.telescope_mismatches += t0 - eval_transfer_level(field, N) != direct;
    }
  });
  IdentitySweep total;
  total.n = n;
  total.N_max = N_max;
  total.fields = fields;
  for (const auto& r : per) {
    total.comparisons += r.comparisons;
    total.events += r.events;
    total.closed_mismatches += r.closed_mismatches;
    total.contraction_mismatches += r.contraction_mismatches;
    total.telescope_mismatches += r.telescope_mismatches;
  }
  return total;
}

void write_path_csv(std::ostream& out, const PathSample& path) {
  out << "N,S_h,S_m,S_Y\n";
  for (std::int64_t N = path.first_N(); N <= path.last_N(); ++N) {
    out << N << ',' << path.s_h(N) << ',' << format_double(path.s_m(N)) << ','
        << format_double(path.s_y(N)) << '\n';
  }
}

void write_functional_csv(std::ostream& out, const PathSample& path, std::int64_t n,
                          FunctionalKind kind, std::size_t grid_points, PathSeries series) {
  if (grid_points < 2) throw RangeError("functional grid needs at least two points");
  out << "t,value\n";
  for (std::size_t g = 0; g < grid_points; ++g) {
    const double t = static_cast<double>(g) / static_cast<double>(grid_points - 1);
    out << format_double(t) << ',' << format_double(path_functional(path, n, t, kind, series))
        << '\n';
  }
}

}  // namespace bmix
