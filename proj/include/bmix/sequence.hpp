#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "bmix/numeric.hpp"

namespace bmix {

enum class SequenceOrigin { explicit_levels, delta_rule, adaptive };

std::string_view to_string(SequenceOrigin o);

/// The lacunary integers n_1 < n_2 < ... < n_K driving the construction.
///
/// Construction rejects empty, non-positive or non-increasing input. The
/// growth conditions are not enforced here; they are measured by
/// validate_lacunary() and the resulting index K0 is stored in
/// `validated_from` (1-based). It is never assumed to be 1.
class LevelSequence {
 public:
  LevelSequence() = default;

  static LevelSequence from_levels(std::vector<BigInt> levels,
                                   SequenceOrigin origin = SequenceOrigin::explicit_levels,
                                   std::optional<std::string> delta = std::nullopt,
                                   std::optional<std::string> budget = std::nullopt);
  static LevelSequence from_levels(const std::vector<std::uint64_t>& levels);
  static LevelSequence from_levels(std::initializer_list<std::uint64_t> levels) {
    return from_levels(std::vector<std::uint64_t>(levels));
  }

  std::size_t size() const { return levels_.size(); }
  bool empty() const { return levels_.empty(); }
  const std::vector<BigInt>& levels() const { return levels_; }

  /// n_k, 1-based.
  const BigInt& n(std::size_t k) const;
  /// n_k as a signed 64-bit count; throws CapacityError if it does not fit,
  /// or if n_k^2 would overflow (the simulation works with n_k^2 sites).
  std::int64_t n64(std::size_t k) const;

  SequenceOrigin origin() const { return origin_; }
  /// Decimal text of delta for delta-rule sequences.
  const std::optional<std::string>& delta() const { return delta_; }
  /// Name of the rate budget for adaptive sequences.
  const std::optional<std::string>& budget_name() const { return budget_; }
  std::size_t validated_from() const { return validated_from_; }

  /// First `count` levels, keeping origin metadata and revalidating K0.
  LevelSequence truncated(std::size_t count) const;

  nlohmann::json to_json() const;
  static LevelSequence from_json(const nlohmann::json& j);

 private:
  std::vector<BigInt> levels_;
  SequenceOrigin origin_ = SequenceOrigin::explicit_levels;
  std::optional<std::string> delta_;
  std::optional<std::string> budget_;
  std::size_t validated_from_ = 0;
};

/// Per-index outcome of the growth conditions. The conditions at index k
/// relate n_k to n_{k+1}, so they exist for k = 1..K-1.
struct LacunaryRow {
  std::size_t k = 0;
  bool doubling = false;     // n_{k+1} >= 2 n_k
  bool square_sum = false;   // 16 * sum_{j<=k} n_j^2 <= n_{k+1}
  bool polynomial = false;   // n_{k+1} >= (k+1)^2 n_k
};

struct ValidationReport {
  bool first_at_least_two = false;
  std::vector<LacunaryRow> rows;
  /// Smallest k such that square_sum and polynomial hold for every index in
  /// [k, K-1]; equals K when the condition at K-1 already fails.
  std::size_t k0 = 1;
  std::size_t levels = 0;

  bool doubling_everywhere() const;
  /// n_1 >= 2, doubling everywhere, and the lacunarity conditions hold on a
  /// nonempty tail (or K == 1, where they are vacuous).
  bool passes() const;
  /// Human-readable reasons for failure, empty when passes().
  std::vector<std::string> failures() const;

  nlohmann::json to_json() const;
};

ValidationReport validate_lacunary(const LevelSequence& seq);

enum class IntegerWidth { u64, big };

/// n_k = floor(16^((2+delta)^k)) for k = 1..K, exact: the exponentiation is
/// bracketed with outward-rounded MPFR intervals until both ends floor to
/// the same integer. In u64 mode the first level above 2^64-1 raises a
/// CapacityError naming that k.
LevelSequence delta_sequence(const Rational& delta, std::size_t count, IntegerWidth width);
LevelSequence delta_sequence(std::string_view delta_decimal, std::size_t count,
                             IntegerWidth width);

/// A decreasing positive rate budget c_j, evaluated exactly. The rule returns
/// nullopt when it cannot be evaluated at j.
struct RateBudget {
  std::string name;
  std::function<std::optional<Rational>(const BigInt& j)> rule;

  /// c_j; throws BudgetError when not evaluable or not positive.
  Rational at(const BigInt& j) const;

  static RateBudget inverse_linear();   // c_j = 1/j
  static RateBudget inverse_square();   // c_j = 1/j^2
  static RateBudget constant(const Rational& c);
  /// "inv-linear", "inv-square" or "constant:<decimal>".
  static RateBudget parse(std::string_view text);
};

/// n_1 = 2 and n_{k+1} is the least integer with n_{k+1} >= 8/c_{2 n_k} and
/// n_{k+1} >= 2 n_k; with `enforce_lacunarity` also
/// n_{k+1} >= 16 sum_{j<=k} n_j^2 and n_{k+1} >= (k+1)^2 n_k.
LevelSequence adaptive_sequence(const RateBudget& budget, std::size_t count,
                                bool enforce_lacunarity);

/// The unique k with n_k <= N < n_{k+1} (the last level is unbounded above).
/// Throws RangeError when N < n_1.
std::size_t level_index(const LevelSequence& seq, const BigInt& N);
std::size_t level_index(const LevelSequence& seq, std::int64_t N);

/// Parses the CLI form "explicit:2,64,65600", "delta:0.1" or
/// "adaptive:inv-linear" (optionally suffixed ":nolac" to disable the
/// lacunarity constraints). `count` supplies K for the generated forms.
LevelSequence parse_sequence(std::string_view text, std::size_t count, IntegerWidth width);

}  // namespace bmix
