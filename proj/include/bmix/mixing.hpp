#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "bmix/exec.hpp"
#include "bmix/sequence.hpp"

namespace bmix {

/// Law of one ternary coordinate, P(-1), P(0), P(+1).
using TernaryLaw = std::array<Rational, 3>;

/// The law of e_k at one site: (1/(2n^2), 1 - 1/n^2, 1/(2n^2)).
TernaryLaw level_site_law(std::int64_t n);

/// A finite partition given by its atom probabilities.
struct FinitePartition {
  std::vector<Rational> atoms;
  std::vector<std::string> labels;

  /// Throws RangeError unless every atom is positive and they sum to 1.
  void validate() const;
  /// The partition generated by independent coordinates; atoms of
  /// probability zero are dropped.
  static FinitePartition product(std::span<const TernaryLaw> coords);
};

/// Joint probabilities mu(A_i ∩ B_j), row-major.
class JointLaw {
 public:
  JointLaw(std::size_t rows, std::size_t cols, std::vector<Rational> cells);
  /// mu(A_i ∩ B_j) = mu(A_i) mu(B_j).
  static JointLaw independent(const FinitePartition& a, const FinitePartition& b);
  /// mu(A_i ∩ A_j) = mu(A_i) [i == j].
  static JointLaw diagonal(const FinitePartition& a);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  const Rational& at(std::size_t i, std::size_t j) const { return cells_[i * cols_ + j]; }
  std::vector<Rational> row_marginals() const;
  std::vector<Rational> col_marginals() const;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<Rational> cells_;
};

struct MixingCoefficients {
  Rational beta;
  std::optional<Rational> alpha;
  std::optional<Rational> phi;

  bool complete() const { return alpha && phi; }
  /// 2 alpha <= beta <= phi, when alpha and phi are available.
  bool ordered() const;
  nlohmann::json to_json() const;
};

/// beta from the double sum; alpha and phi by enumerating unions of row
/// atoms, skipped when the smaller side has more than `atom_guard` atoms
/// (alpha) or there are more than `atom_guard` rows (phi).
MixingCoefficients partition_coefficients(const JointLaw& joint, std::size_t atom_guard = 20);

/// 1 - prod_coords sum_v p_v^2, the self-beta of a product partition.
Rational self_beta_product(std::span<const TernaryLaw> coords);
Rational self_beta_product(const TernaryLaw& law, std::size_t m);

/// 2 (1 - largest atom).
Rational atom_beta_bound(const FinitePartition& partition);
/// Same for a product partition without listing its atoms.
Rational atom_beta_bound(const TernaryLaw& law, std::size_t m);

struct WindowBetaResult {
  std::int64_t n = 0;
  std::int64_t N = 0;
  std::int64_t L = 0;
  unsigned coordinates = 0;
  std::uint64_t configurations = 0;
  Rational beta;
  nlohmann::json to_json() const;
};

/// Exact beta between (h_k(i))_{-L<=i<=0} and (h_k(i))_{N<=i<=N+L} by
/// enumerating every configuration of the e_k coordinates they read.
/// BudgetError when 3^M exceeds `budget`.
WindowBetaResult finite_window_beta_exact(std::int64_t n, std::int64_t N, std::int64_t L,
                                          Exec exec = Exec::serial,
                                          std::uint64_t budget = 1000000);

struct RateCheck {
  std::string delta;
  double exponent = 0.0;  // 1/(2+delta)
  std::int64_t lo = 0;
  std::int64_t hi = 0;
  /// sup over the coarse and refined grids of B(2N) N^exponent.
  double sup_coarse = 0.0;
  double sup_refined = 0.0;
  /// sup over every integer N in [lo, hi], from the breakpoints of B.
  double sup_exact = 0.0;
  bool stable() const;
};

struct BudgetRow {
  std::size_t k = 0;
  Rational bound;   // B(2 n_k)
  Rational eight_over_next;  // 8 / n_{k+1}, absent at the last level
  Rational budget;  // c_{2 n_k}
  bool holds() const { return bound <= budget; }
};

struct MixingBoundProfile {
  std::vector<std::string> levels;
  std::vector<std::int64_t> grid;
  /// beta_j(N) per grid point and level.
  std::vector<std::vector<Rational>> per_level;
  /// B(N) for each grid point.
  std::vector<Rational> aggregate;
  bool nonincreasing = false;
  std::optional<RateCheck> rate;
  /// B(2N) N^{1/(2+delta)} per grid point, when delta is given.
  std::vector<double> rate_products;
  std::vector<BudgetRow> budget_rows;

  bool budget_holds() const;
  nlohmann::json to_json() const;
  /// N, beta_1(N) .. beta_K(N), B(N)[, rate product].
  void write_csv(std::ostream& out) const;
};

/// beta_j(N) = 4/n_j if N < 2 n_j, else 0.
Rational level_beta_bound(const BigInt& n_j, std::int64_t N);
/// B(N) = sum over levels with 2 n_j > N of 4/n_j.
Rational aggregate_beta_bound(const LevelSequence& seq, const BigInt& N);

/// Bound profile on a grid. With `delta`, also the rate product
/// B(2N) N^{1/(2+delta)} over [rate_lo, rate_hi]. With `budget`, the check
/// B(2 n_k) <= c_{2 n_k} for every level.
MixingBoundProfile beta_bound_profile(const LevelSequence& seq, std::span<const std::int64_t> grid,
                                      std::optional<Rational> delta = std::nullopt,
                                      const RateBudget* budget = nullptr,
                                      std::int64_t rate_lo = 0, std::int64_t rate_hi = 1000000);

}  // namespace bmix
