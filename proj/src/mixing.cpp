#include "bmix/mixing.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

#include "bmix/error.hpp"

namespace bmix {

namespace {

using u128 = unsigned __int128;

BigInt from_u128(u128 v) {
  BigInt z = from_u64(static_cast<std::uint64_t>(v >> 64));
  z <<= 64;
  z += from_u64(static_cast<std::uint64_t>(v));
  return z;
}

Rational canonical(Rational q) {
  q.canonicalize();
  return q;
}

}  // namespace

TernaryLaw level_site_law(std::int64_t n) {
  if (n < 1) throw RangeError("level_site_law needs n >= 1");
  const Rational side(1, 2 * n * n);
  return {side, canonical(Rational(1) - 2 * side), side};
}

void FinitePartition::validate() const {
  if (atoms.empty()) throw RangeError("partition has no atoms");
  Rational total;
  for (const auto& a : atoms) {
    if (a <= 0) throw RangeError("partition atom with non-positive probability");
    total += a;
  }
  if (total != 1) throw RangeError("partition atoms sum to " + to_string(total) + ", not 1");
}

FinitePartition FinitePartition::product(std::span<const TernaryLaw> coords) {
  if (coords.size() > 16) throw BudgetError("product partition over more than 16 coordinates");
  FinitePartition part{{Rational(1)}, {""}};
  for (const auto& law : coords) {
    FinitePartition next;
    for (std::size_t a = 0; a < part.atoms.size(); ++a) {
      for (int v = 0; v < 3; ++v) {
        if (law[v] == 0) continue;
        next.atoms.push_back(canonical(part.atoms[a] * law[v]));
        next.labels.push_back(part.labels[a] + "-0+"[v]);
      }
    }
    part = std::move(next);
  }
  return part;
}

JointLaw::JointLaw(std::size_t rows, std::size_t cols, std::vector<Rational> cells)
    : rows_(rows), cols_(cols), cells_(std::move(cells)) {
  if (rows_ == 0 || cols_ == 0 || cells_.size() != rows_ * cols_) {
    throw RangeError("joint law shape does not match its cells");
  }
  Rational total;
  for (const auto& c : cells_) {
    if (c < 0) throw RangeError("joint law has a negative cell");
    total += c;
  }
  if (total != 1) throw RangeError("joint law sums to " + to_string(total) + ", not 1");
}

JointLaw JointLaw::independent(const FinitePartition& a, const FinitePartition& b) {
  std::vector<Rational> cells;
  for (const auto& x : a.atoms)
    for (const auto& y : b.atoms) cells.push_back(canonical(x * y));
  return JointLaw(a.atoms.size(), b.atoms.size(), std::move(cells));
}

JointLaw JointLaw::diagonal(const FinitePartition& a) {
  const std::size_t n = a.atoms.size();
  std::vector<Rational> cells(n * n);
  for (std::size_t i = 0; i < n; ++i) cells[i * n + i] = a.atoms[i];
  return JointLaw(n, n, std::move(cells));
}

std::vector<Rational> JointLaw::row_marginals() const {
  std::vector<Rational> r(rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) r[i] += at(i, j);
  return r;
}

std::vector<Rational> JointLaw::col_marginals() const {
  std::vector<Rational> c(cols_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) c[j] += at(i, j);
  return c;
}

bool MixingCoefficients::ordered() const {
  if (!complete()) return true;
  return 2 * *alpha <= beta && beta <= *phi;
}

nlohmann::json MixingCoefficients::to_json() const {
  auto opt = [](const std::optional<Rational>& q) {
    return q ? nlohmann::json(to_string(*q)) : nlohmann::json(nullptr);
  };
  return {{"beta", to_string(beta)},
          {"beta_value", to_double(beta)},
          {"alpha", opt(alpha)},
          {"phi", opt(phi)},
          {"alpha_phi_available", complete()}};
}

MixingCoefficients partition_coefficients(const JointLaw& joint, std::size_t atom_guard) {
  const auto r = joint.row_marginals();
  const auto c = joint.col_marginals();
  MixingCoefficients out;
  for (std::size_t i = 0; i < joint.rows(); ++i)
    for (std::size_t j = 0; j < joint.cols(); ++j) out.beta += abs(joint.at(i, j) - r[i] * c[j]);
  out.beta = canonical(out.beta / 2);

  if (joint.rows() > atom_guard) return out;

  // Walk every union S of row atoms in Gray-code order. For fixed S the
  // best column union gives (1/2) sum_j |d_j|, because sum_j d_j = 0.
  const std::size_t rows = joint.rows();
  const std::size_t cols = joint.cols();
  std::vector<Rational> in_s(cols);
  Rational mass;
  Rational alpha, phi;
  const std::uint64_t subsets = std::uint64_t{1} << rows;
  std::uint64_t gray = 0;
  for (std::uint64_t step = 1; step < subsets; ++step) {
    const unsigned flip = static_cast<unsigned>(__builtin_ctzll(step));
    const bool adding = !((gray >> flip) & 1U);
    gray ^= std::uint64_t{1} << flip;
    for (std::size_t j = 0; j < cols; ++j) {
      if (adding) in_s[j] += joint.at(flip, j);
      else in_s[j] -= joint.at(flip, j);
    }
    if (adding) mass += r[flip];
    else mass -= r[flip];

    Rational a_sum, p_sum;
    for (std::size_t j = 0; j < cols; ++j) a_sum += abs(in_s[j] - mass * c[j]);
    if (a_sum > alpha) alpha = a_sum;
    if (mass > 0) {
      for (std::size_t j = 0; j < cols; ++j) p_sum += abs(in_s[j] / mass - c[j]);
      if (p_sum > phi) phi = p_sum;
    }
  }
  out.alpha = canonical(alpha / 2);
  out.phi = canonical(phi / 2);
  return out;
}

Rational self_beta_product(std::span<const TernaryLaw> coords) {
  Rational prod(1);
  for (const auto& law : coords) prod *= law[0] * law[0] + law[1] * law[1] + law[2] * law[2];
  return canonical(Rational(1) - prod);
}

Rational self_beta_product(const TernaryLaw& law, std::size_t m) {
  const Rational s = law[0] * law[0] + law[1] * law[1] + law[2] * law[2];
  return canonical(Rational(1) - pow(s, m));
}

Rational atom_beta_bound(const FinitePartition& partition) {
  if (partition.atoms.empty()) throw RangeError("partition has no atoms");
  const Rational top = *std::max_element(partition.atoms.begin(), partition.atoms.end());
  return canonical(2 * (Rational(1) - top));
}

Rational atom_beta_bound(const TernaryLaw& law, std::size_t m) {
  const Rational top = std::max({law[0], law[1], law[2]});
  return canonical(2 * (Rational(1) - pow(top, m)));
}

nlohmann::json WindowBetaResult::to_json() const {
  return {{"n", n},
          {"N", N},
          {"L", L},
          {"coordinates", coordinates},
          {"configurations", configurations},
          {"numerator", beta.get_num().get_str()},
          {"denominator", beta.get_den().get_str()},
          {"value", to_double(beta)}};
}

WindowBetaResult finite_window_beta_exact(std::int64_t n, std::int64_t N, std::int64_t L,
                                          Exec exec, std::uint64_t budget) {
  if (n < 1 || N < 0 || L < 0) throw RangeError("finite_window_beta_exact needs n >= 1, N, L >= 0");
  // Coordinates read by each block.
  const std::int64_t a_lo = -L - 2 * n + 1, a_hi = 0;
  const std::int64_t b_lo = N - 2 * n + 1, b_hi = N + L;
  std::vector<std::int64_t> coords;
  for (std::int64_t i = a_lo; i <= a_hi; ++i) coords.push_back(i);
  for (std::int64_t i = b_lo; i <= b_hi; ++i) coords.push_back(i);
  std::sort(coords.begin(), coords.end());
  coords.erase(std::unique(coords.begin(), coords.end()), coords.end());
  const auto M = static_cast<unsigned>(coords.size());

  std::uint64_t total = 1;
  for (unsigned i = 0; i < M; ++i) {
    if (total > budget / 3) {
      throw BudgetError("window beta needs M = " + std::to_string(M) +
                        " coordinates (3^" + std::to_string(M) + " configurations), above the " +
                        std::to_string(budget) + " budget");
    }
    total *= 3;
  }

  WindowBetaResult res;
  res.n = n;
  res.N = N;
  res.L = L;
  res.coordinates = M;
  res.configurations = total;

  const std::int64_t base = coords.front();
  const std::int64_t span = coords.back() - base + 1;
  const std::uint64_t radix = static_cast<std::uint64_t>(4 * n + 1);  // h in [-2n, 2n]
  const std::uint64_t w_zero = static_cast<std::uint64_t>(2 * n * n - 2);

  auto block_key = [&](const std::vector<int>& eps, std::int64_t from, std::int64_t to) {
    std::uint64_t key = 0;
    for (std::int64_t i = from; i <= to; ++i) {
      std::int64_t h = 0;
      for (std::int64_t j = 0; j < n; ++j) {
        h += eps[static_cast<std::size_t>(i - j - base)];
        h -= eps[static_cast<std::size_t>(i - n - j - base)];
      }
      key = key * radix + static_cast<std::uint64_t>(h + 2 * n);
    }
    return key;
  };

  using Table = std::map<std::pair<std::uint64_t, std::uint64_t>, u128>;
  const std::int64_t blocks = static_cast<std::int64_t>(std::min<std::uint64_t>(total, 64));
  std::vector<Table> partial(static_cast<std::size_t>(blocks));
  std::vector<u128> zero_pow(M + 1, 1);
  for (unsigned z = 1; z <= M; ++z) zero_pow[z] = zero_pow[z - 1] * w_zero;

  for_each_index(exec, blocks, [&](std::int64_t b) {
    Table local;
    std::vector<int> eps(static_cast<std::size_t>(span), 0);
    const std::uint64_t begin = total * static_cast<std::uint64_t>(b) / blocks;
    const std::uint64_t end = total * static_cast<std::uint64_t>(b + 1) / blocks;
    for (std::uint64_t c = begin; c < end; ++c) {
      std::uint64_t x = c;
      unsigned zeros = 0;
      for (unsigned i = 0; i < M; ++i, x /= 3) {
        const int v = static_cast<int>(x % 3) - 1;
        eps[static_cast<std::size_t>(coords[i] - base)] = v;
        zeros += v == 0;
      }
      // P(config) = (2n^2 - 2)^zeros / (2n^2)^M
      local[{block_key(eps, -L, 0), block_key(eps, N, N + L)}] += zero_pow[zeros];
    }
    partial[static_cast<std::size_t>(b)] = std::move(local);
  });

  Table joint;
  for (const auto& p : partial)
    for (const auto& [k, w] : p) joint[k] += w;
  std::map<std::uint64_t, BigInt> ma, mb;
  for (const auto& [k, w] : joint) {
    ma[k.first] += from_u128(w);
    mb[k.second] += from_u128(w);
  }
  const BigInt D = pow(BigInt(2 * n * n), M);
  // 2 beta D^2 = sum over all pairs |J D - ma mb|; pairs absent from J
  // contribute ma mb, and sum over all pairs of ma mb is D^2.
  BigInt acc = D * D;
  for (const auto& [k, w] : joint) {
    const BigInt prod = ma[k.first] * mb[k.second];
    acc += abs(from_u128(w) * D - prod) - prod;
  }
  res.beta = canonical(Rational(acc, 2 * D * D));
  return res;
}

Rational level_beta_bound(const BigInt& n_j, std::int64_t N) {
  return BigInt(2 * n_j) > N ? canonical(Rational(BigInt(4), n_j)) : Rational(0);
}

Rational aggregate_beta_bound(const LevelSequence& seq, const BigInt& N) {
  Rational total;
  for (const auto& n : seq.levels()) {
    if (BigInt(2 * n) > N) total += Rational(BigInt(4), n);
  }
  return canonical(total);
}

bool RateCheck::stable() const {
  return std::isfinite(sup_exact) && sup_exact > 0 && sup_coarse <= sup_refined &&
         sup_refined <= sup_exact * (1 + 1e-12) && sup_refined <= 2 * sup_coarse;
}

bool MixingBoundProfile::budget_holds() const {
  return std::all_of(budget_rows.begin(), budget_rows.end(),
                     [](const BudgetRow& r) { return r.holds(); });
}

nlohmann::json MixingBoundProfile::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t g = 0; g < grid.size(); ++g) {
    rows.push_back({{"N", grid[g]}, {"B", to_string(aggregate[g])}, {"B_value", to_double(aggregate[g])}});
  }
  nlohmann::json j{{"levels", levels}, {"nonincreasing", nonincreasing}, {"rows", rows}};
  if (rate) {
    j["rate"] = {{"delta", rate->delta},
                 {"exponent", rate->exponent},
                 {"range", {rate->lo, rate->hi}},
                 {"sup_coarse", rate->sup_coarse},
                 {"sup_refined", rate->sup_refined},
                 {"sup_exact", rate->sup_exact},
                 {"stable", rate->stable()}};
  }
  if (!budget_rows.empty()) {
    nlohmann::json b = nlohmann::json::array();
    for (const auto& r : budget_rows) {
      b.push_back({{"k", r.k},
                   {"B_2n_k", to_double(r.bound)},
                   {"eight_over_next", to_double(r.eight_over_next)},
                   {"c_2n_k", to_double(r.budget)},
                   {"holds", r.holds()}});
    }
    j["budget"] = b;
    j["budget_holds"] = budget_holds();
  }
  return j;
}

void MixingBoundProfile::write_csv(std::ostream& out) const {
  out << "N";
  for (std::size_t j = 1; j <= levels.size(); ++j) out << ",beta_" << j;
  out << ",B";
  if (rate) out << ",rate_product";
  out << '\n';
  for (std::size_t g = 0; g < grid.size(); ++g) {
    out << grid[g];
    for (const auto& b : per_level[g]) out << ',' << format_double(to_double(b));
    out << ',' << format_double(to_double(aggregate[g]));
    if (rate) out << ',' << format_double(rate_products[g]);
    out << '\n';
  }
}

namespace {

double rate_product(const LevelSequence& seq, std::int64_t N, double exponent) {
  return to_double(aggregate_beta_bound(seq, BigInt(2) * N)) *
         std::pow(static_cast<double>(N), exponent);
}

double sup_on_grid(const LevelSequence& seq, std::int64_t lo, std::int64_t hi, int points,
                   double exponent) {
  double best = 0.0;
  const double ratio = std::log(static_cast<double>(hi) / static_cast<double>(lo));
  for (int i = 0; i < points; ++i) {
    auto N = static_cast<std::int64_t>(
        std::llround(static_cast<double>(lo) * std::exp(ratio * i / (points - 1))));
    N = std::clamp(N, lo, hi);
    best = std::max(best, rate_product(seq, N, exponent));
  }
  return best;
}

}  // namespace

MixingBoundProfile beta_bound_profile(const LevelSequence& seq, std::span<const std::int64_t> grid,
                                      std::optional<Rational> delta, const RateBudget* budget,
                                      std::int64_t rate_lo, std::int64_t rate_hi) {
  MixingBoundProfile prof;
  for (const auto& n : seq.levels()) prof.levels.push_back(to_string(n));
  prof.grid.assign(grid.begin(), grid.end());
  prof.nonincreasing = true;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    std::vector<Rational> per;
    for (const auto& n : seq.levels()) per.push_back(level_beta_bound(n, grid[g]));
    prof.per_level.push_back(std::move(per));
    prof.aggregate.push_back(aggregate_beta_bound(seq, BigInt(grid[g])));
    if (g > 0 && grid[g] >= grid[g - 1] && prof.aggregate[g] > prof.aggregate[g - 1]) {
      prof.nonincreasing = false;
    }
  }

  if (delta) {
    if (*delta <= 0) throw RangeError("rate check needs delta > 0");
    RateCheck rc;
    rc.delta = to_string(*delta);
    rc.exponent = 1.0 / (2.0 + to_double(*delta));
    rc.lo = rate_lo > 0 ? rate_lo : *to_i64(seq.n(std::min<std::size_t>(2, seq.size())));
    rc.hi = rate_hi;
    if (rc.hi < rc.lo) throw RangeError("rate range is empty");
    rc.sup_coarse = sup_on_grid(seq, rc.lo, rc.hi, 64, rc.exponent);
    rc.sup_refined = std::max(rc.sup_coarse, sup_on_grid(seq, rc.lo, rc.hi, 4096, rc.exponent));
    // B(2N) drops only where N reaches some n_j, so the supremum sits at
    // N = n_j - 1 or at the right end.
    rc.sup_exact = rate_product(seq, rc.hi, rc.exponent);
    for (const auto& n : seq.levels()) {
      const BigInt last = n - 1;
      if (last >= rc.lo && last <= rc.hi) {
        rc.sup_exact = std::max(rc.sup_exact, rate_product(seq, *to_i64(last), rc.exponent));
      }
    }
    for (auto N : prof.grid) prof.rate_products.push_back(rate_product(seq, N, rc.exponent));
    prof.rate = rc;
  }

  if (budget) {
    for (std::size_t k = 1; k <= seq.size(); ++k) {
      BudgetRow row;
      row.k = k;
      const BigInt two_nk = BigInt(2 * seq.n(k));
      row.bound = aggregate_beta_bound(seq, two_nk);
      if (k < seq.size()) row.eight_over_next = canonical(Rational(BigInt(8), seq.n(k + 1)));
      row.budget = budget->at(two_nk);
      prof.budget_rows.push_back(std::move(row));
    }
  }
  return prof;
}

}  // namespace bmix
