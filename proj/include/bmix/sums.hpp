#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "bmix/exec.hpp"
#include "bmix/field.hpp"

namespace bmix {

/// Integer coefficients c_i with S_N(h_k) = sum_i c_i e_k(i), for
/// i in [1 - 2n, N - 1].
struct CoefficientMap {
  std::int64_t n = 0;
  std::int64_t N = 0;
  std::int64_t first_index = 0;
  std::vector<std::int64_t> coeffs;

  std::int64_t last_index() const {
    return first_index + static_cast<std::int64_t>(coeffs.size()) - 1;
  }
  std::int64_t coefficient(std::int64_t i) const;
  std::int64_t total() const;
  BigInt square_sum() const;
  /// sum_i c_i e(i) over the field's events.
  std::int64_t contract(const SparseLevelField& field) const;
};

/// Coefficients by interval counting: c_i = |[0,N-1] ∩ [i, i+n-1]| -
/// |[0,N-1] ∩ [i+n, i+2n-1]|.
CoefficientMap coefficient_map(std::int64_t n, std::int64_t N);

/// sum_i c_i^2 for the map above in O(1): c is piecewise linear in i, so the
/// sum is taken segment by segment in closed form.
BigInt coefficient_square_sum(std::int64_t n, std::int64_t N);

/// S_N(h_k) straight from the definition, sum_{j<N} h_k(j).
std::int64_t sum_direct(const SparseLevelField& field, std::int64_t N);

/// S_N(h_k) from the closed forms: the two-block expansion for N >= n (the
/// blocks overlap additively for n <= N < 2n) and the short-range expansion
/// for N < n. Costs O(events in [1-2n, N-1]).
std::int64_t sum_closed(const SparseLevelField& field, std::int64_t N);

/// Closed-form coefficient of e(x) in S_N(h_k); zero outside [1-2n, N-1].
std::int64_t closed_coefficient(std::int64_t n, std::int64_t N, std::int64_t x);

enum class PathMode { full, focus_intrusion };

PathMode parse_path_mode(std::string_view text);
std::string_view to_string(PathMode mode);

enum class PathSeries { h, m, y };

/// S_N for the h-part, the noise part and their sum Y, for N in
/// [first_N, last_N]. S_0 = 0 is implicit.
class PathSample {
 public:
  PathSample() = default;
  PathSample(std::int64_t first_N, std::vector<std::int64_t> s_h, std::vector<double> s_m);

  std::int64_t first_N() const { return first_N_; }
  std::int64_t last_N() const { return first_N_ + static_cast<std::int64_t>(s_h_.size()) - 1; }
  bool covers(std::int64_t N) const { return N == 0 || (first_N_ <= N && N <= last_N()); }

  std::int64_t s_h(std::int64_t N) const;
  double s_m(std::int64_t N) const;
  double s_y(std::int64_t N) const;
  double value(PathSeries series, std::int64_t N) const;

  bool has_noise() const { return !s_m_.empty(); }

  // Simulation metadata.
  PathMode mode = PathMode::full;
  std::size_t focus_level = 0;
  std::size_t truncation = 0;
  /// Some level above the focus level had an event that can move S_N in range.
  bool intrusion = false;

 private:
  void require(std::int64_t N) const;

  std::int64_t first_N_ = 1;
  std::vector<std::int64_t> s_h_;
  std::vector<double> s_m_;
};

/// Dense S_N(h) for N in [first_N, last_N] from explicit fields, by a
/// second-order difference sweep: every event contributes three slope
/// changes (at x, x+n, x+2n), so the cost is O(events + last_N).
/// Each field must cover [1 - 2n_j, last_N - 1].
std::vector<std::int64_t> dense_partial_sums(std::span<const SparseLevelField> fields,
                                             std::int64_t first_N, std::int64_t last_N);

/// max_{lo <= N <= hi} |S_N(sum of fields)| using only breakpoints: S_N is
/// linear in N between event breakpoints, so the maximum is attained at one
/// of them or at an end. Works for ranges far beyond memory.
std::int64_t window_max_abs(std::span<const SparseLevelField> fields, std::int64_t lo,
                            std::int64_t hi);

/// Options for path_profile.
struct PathRequest {
  std::size_t focus_level = 1;
  std::int64_t first_N = 1;
  std::int64_t last_N = 1;
  PathMode mode = PathMode::full;
  bool with_noise = true;
  std::uint64_t trial = 0;
  std::uint64_t salt = 0;
  /// Largest last_N a dense full-mode sweep may allocate.
  std::int64_t dense_budget = std::int64_t{1} << 26;
};

/// The fields a path_profile call samples, exposed for dumps and checks.
struct SampledLevels {
  std::vector<SparseLevelField> exact;     // levels entering S_N(h)
  std::vector<SparseLevelField> intrusion; // levels above the focus (focus mode)
};

SampledLevels sample_path_levels(const ProcessConfig& config, const PathRequest& request);

/// Samples the configured levels (full mode: 1..K; focus mode: the focus
/// level, plus an intrusion check for levels above it) and the noise, and
/// returns the dense path. Range must lie in [1, n_k^2].
PathSample path_profile(const ProcessConfig& config, const PathRequest& request);

enum class FunctionalKind { polygonal, step };

FunctionalKind parse_functional_kind(std::string_view text);

/// polygonal: S_[nt] + (nt - [nt]) (S_[nt]+1 - S_[nt]); step: S_[nt].
double path_functional(const PathSample& path, std::int64_t n, double t, FunctionalKind kind,
                       PathSeries series = PathSeries::y);

/// max_{2n_k <= N <= n_k^2} |S_N(h)| / n_k.
double max_statistic(const PathSample& path, std::int64_t n_k);
/// Same over an explicit sub-range [lo, hi].
double max_statistic(const PathSample& path, std::int64_t n_k, std::int64_t lo, std::int64_t hi);

struct IdentitySweep {
  std::int64_t n = 0;
  std::int64_t N_max = 0;
  std::uint64_t fields = 0;
  std::uint64_t comparisons = 0;
  std::uint64_t events = 0;
  /// sum_closed != sum_direct.
  std::uint64_t closed_mismatches = 0;
  /// coefficient-map contraction != sum_direct.
  std::uint64_t contraction_mismatches = 0;
  /// sum_direct != t_k(0) - t_k(N).
  std::uint64_t telescope_mismatches = 0;

  bool exact() const {
    return closed_mismatches == 0 && contraction_mismatches == 0 && telescope_mismatches == 0;
  }
};

/// Compares every route to S_N(h_k) for N in [1, N_max] on `fields`
/// independently sampled fields over [1 - 2n, N_max - 1].
IdentitySweep identity_sweep(std::int64_t n, std::int64_t N_max, std::uint64_t fields,
                             std::uint64_t seed, Exec exec = Exec::serial);

void write_path_csv(std::ostream& out, const PathSample& path);
void write_functional_csv(std::ostream& out, const PathSample& path, std::int64_t n,
                          FunctionalKind kind, std::size_t grid_points,
                          PathSeries series = PathSeries::y);

}  // namespace bmix
