#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "bmix/exec.hpp"
#include "bmix/sums.hpp"

namespace bmix {

/// A Monte Carlo estimate with its standard error.
struct EstimateWithCI {
  double estimate = 0.0;
  double standard_error = 0.0;
  std::uint64_t trials = 0;
  std::uint64_t seed = 0;

  double lower(double sigmas) const { return estimate - sigmas * standard_error; }
  nlohmann::json to_json() const;
};

// ---------------------------------------------------------------- variance

/// E[S_N(h_k)^2] = (1/n^2) sum_i c_i^2, exact.
Rational variance_level_exact(std::int64_t n, std::int64_t N);

struct VarianceRow {
  std::int64_t N = 0;
  /// i(N); 0 when N < n_1.
  std::size_t level_index = 0;
  std::vector<Rational> per_level;
  Rational sigma2_h;
  Rational sigma2_y;
  /// Levels <= i(N) and levels > i(N).
  Rational low_part;
  Rational high_part;

  double ratio_h() const { return to_double(sigma2_h) / static_cast<double>(N); }
  double ratio_y() const { return to_double(sigma2_y) / static_cast<double>(N); }
};

struct VarianceReport {
  std::size_t truncation = 0;
  std::vector<std::int64_t> levels;
  std::vector<VarianceRow> rows;

  double sup_ratio_h = 0.0;
  std::int64_t sup_ratio_at = 0;
  /// max over rows of low_part / n_{i(N)}.
  double sup_low_ratio = 0.0;
  /// max over rows of high_part / (N^2 / n_{i(N)+1}).
  double sup_high_ratio = 0.0;

  nlohmann::json to_json() const;
  void write_csv(std::ostream& out) const;
};

/// Exact per-level variances for the truncated process with Var(m) = 1.
VarianceReport variance_profile(const ProcessConfig& config, std::span<const std::int64_t> Ns,
                                Exec exec = Exec::serial);

struct MonteCarloVariance {
  std::int64_t n = 0;
  std::int64_t N = 0;
  Rational exact;
  EstimateWithCI estimate;  // sample variance and its standard error
  double relative_error() const;
  nlohmann::json to_json() const;
};

/// Sample variance of S_N(h_k) for a single level over independent fields.
MonteCarloVariance variance_monte_carlo(std::int64_t n, std::int64_t N, std::uint64_t trials,
                                        std::uint64_t seed, Exec exec = Exec::serial);

// --------------------------------------------------------------------- CLT

/// sup_x |F_T(x) - Phi(x)| for the empirical CDF of `sample`.
double ks_distance(std::vector<double> sample);
double standard_normal_cdf(double x);

struct CltResult {
  std::int64_t n = 0;
  std::uint64_t trials = 0;
  std::uint64_t seed = 0;
  double ks = 0.0;
  /// Standard deviation of the null KS distance, 0.2605/sqrt(trials).
  double ks_band = 0.0;
  /// 95% null critical value, 1.358/sqrt(trials).
  double ks_critical = 0.0;
  double mean = 0.0;
  double variance = 0.0;
  nlohmann::json to_json() const;
};

/// Empirical law of S_n(Y)/sqrt(n) against the standard normal. Each trial
/// samples every configured level on [1-2n_j, n-1] and n noise values.
CltResult clt_test(const ProcessConfig& config, std::int64_t n, std::uint64_t trials,
                   std::uint64_t salt = 0, Exec exec = Exec::serial);

// ------------------------------------------------------------ non-tightness

/// Lower bound sum p_i - sum_{i<j} q_ij on the probability of a union.
double bonferroni_bound(std::span<const double> p, const std::vector<std::vector<double>>& q);

/// Smallest n >= 3 with (1 - 2/n)[(1 - 2/n)^3 - 1/2] > 1/4, exact.
std::int64_t threshold_N0();
/// (1 - 2/n)[(1 - 2/n)^3 - 1/2], exact.
Rational exceedance_lower_bound(std::int64_t n);

enum class NontightMode { level, full, focus };

NontightMode parse_nontight_mode(std::string_view text);
std::string_view to_string(NontightMode mode);

struct NontightRequest {
  std::size_t k = 1;
  NontightMode mode = NontightMode::level;
  /// Exceedance level as a fraction of n_k.
  Rational threshold{1};
  std::uint64_t trials = 1000;
  std::uint64_t salt = 0;
  /// Window [lo, hi]; defaults to [2 n_k, n_k^2].
  std::optional<std::int64_t> lo;
  std::optional<std::int64_t> hi;
  /// Largest expected event count per trial in full mode.
  double event_budget = 5e6;
};

struct NontightReport {
  std::size_t k = 0;
  std::int64_t n_k = 0;
  NontightMode mode = NontightMode::level;
  Rational threshold;
  std::int64_t lo = 0;
  std::int64_t hi = 0;
  std::size_t truncation = 0;
  /// P(max_{lo<=N<=hi} |S_N| >= threshold * n_k).
  EstimateWithCI window;
  /// P(|S_hi| >= threshold * n_k), same trials (level and full modes).
  std::optional<EstimateWithCI> single_point;
  /// Fraction of trials where a level above k had an event in its window.
  std::optional<EstimateWithCI> intrusion;
  /// sum_{k<j<=K} 2 n_k / n_j.
  double intrusion_bound = 0.0;
  /// Focus mode: level-k threshold after adding the lower-level envelope.
  std::int64_t focus_threshold = 0;
  /// The analytic bound the estimate is tested against (1/4 or 1/8).
  double analytic_bound = 0.0;

  bool passes(double sigmas = 3.0) const { return window.lower(sigmas) > analytic_bound; }
  nlohmann::json to_json() const;
};

/// Monte Carlo estimate of the window-max exceedance. level: only level k.
/// full: every configured level, exact. focus: level k exactly plus an
/// intrusion check above it; a trial counts when the level-k maximum clears
/// threshold * n_k + 2 sum_{j<k} n_j^2 and no higher level intrudes, which
/// bounds the full-process probability from below.
NontightReport nontight_prob(const ProcessConfig& config, const NontightRequest& request,
                             Exec exec = Exec::serial);

// ----------------------------------------------------------------- moments

/// Bell number B_p by the binomial recursion.
BigInt bell(unsigned p);
/// Fixed-width B_p; CapacityError past B_25.
std::uint64_t bell_u64(unsigned p);

struct MomentRow {
  Rational p;
  bool exact = false;
  std::optional<double> h_moment;  // E|h_k|^p
  std::optional<double> g_moment;  // E|g_k|^p
  std::optional<Rational> h_moment_exact;  // integer p only
  std::optional<Rational> g_moment_exact;
  /// 2 B_p / n for integer p >= 1.
  std::optional<double> h_bound;
  /// 3 n^{p-1} for 0 < p < 1.
  std::optional<double> g_bound;

  bool within_bounds() const;
};

struct MomentReport {
  std::int64_t n = 0;
  std::uint64_t configurations_h = 0;
  std::uint64_t configurations_g = 0;
  bool enumerated = false;
  std::vector<MomentRow> rows;

  bool within_bounds() const;
  nlohmann::json to_json() const;
};

/// Exact E|h_k|^p and E|g_k|^p by enumerating the ternary coordinates
/// (2n for h, 2n - 1 for g) when 3^(2n) <= budget; bounds only otherwise.
MomentReport moment_suite(std::int64_t n, std::span<const Rational> ps, Exec exec = Exec::serial,
                          std::uint64_t budget = 1000000);

// -------------------------------------------------------------- divergence

struct DivergenceRow {
  std::size_t k = 0;
  std::string n_k;
  std::optional<Rational> term_exact;
  double term = 0.0;
  double partial_sum = 0.0;
};

struct DivergenceReport {
  std::size_t truncation = 0;
  bool exact = false;
  std::vector<DivergenceRow> rows;

  bool all_positive() const;
  /// term_k >= factor * term_{k+1} for every k < K.
  bool non_decaying(double factor = 0.9) const;
  nlohmann::json to_json() const;
  void write_csv(std::ostream& out) const;
};

/// Per-level lower bounds sum_{j<=n_k} j mu(E_j) with the all-zero-window
/// probability n_k^-2 (1-n_k^-2)^(2n_k-2) prod_{l!=k} (1-n_l^-2)^(2n_l-1).
/// Exact rationals while the product stays below `exact_bits`; a log1p
/// evaluation otherwise.
DivergenceReport transfer_divergence(const LevelSequence& seq, std::size_t K,
                                     std::uint64_t exact_bits = std::uint64_t{1} << 22);

}  // namespace bmix
