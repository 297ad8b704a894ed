#include "bmix/sequence.hpp"

#include <mpfr.h>

#include <algorithm>
#include <limits>
#include <sstream>

#include "bmix/error.hpp"

namespace bmix {

std::string_view to_string(SequenceOrigin o) {
  switch (o) {
    case SequenceOrigin::explicit_levels: return "explicit";
    case SequenceOrigin::delta_rule: return "delta";
    case SequenceOrigin::adaptive: return "adaptive";
  }
  return "explicit";
}

LevelSequence LevelSequence::from_levels(std::vector<BigInt> levels, SequenceOrigin origin,
                                         std::optional<std::string> delta,
                                         std::optional<std::string> budget) {
  if (levels.empty()) throw InvalidSequenceError("level sequence is empty");
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (sgn(levels[i]) <= 0) {
      throw InvalidSequenceError("level n_" + std::to_string(i + 1) + " = " +
                                 levels[i].get_str() + " is not positive");
    }
    if (i > 0 && levels[i] <= levels[i - 1]) {
      throw InvalidSequenceError("level sequence is not strictly increasing at k = " +
                                 std::to_string(i + 1) + " (" + levels[i - 1].get_str() +
                                 " then " + levels[i].get_str() + ")");
    }
  }
  LevelSequence seq;
  seq.levels_ = std::move(levels);
  seq.origin_ = origin;
  seq.delta_ = std::move(delta);
  seq.budget_ = std::move(budget);
  seq.validated_from_ = validate_lacunary(seq).k0;
  return seq;
}

LevelSequence LevelSequence::from_levels(const std::vector<std::uint64_t>& levels) {
  std::vector<BigInt> big;
  big.reserve(levels.size());
  for (auto v : levels) big.push_back(from_u64(v));
  return from_levels(std::move(big));
}

const BigInt& LevelSequence::n(std::size_t k) const {
  if (k == 0 || k > levels_.size()) {
    throw RangeError("level index " + std::to_string(k) + " outside 1.." +
                     std::to_string(levels_.size()));
  }
  return levels_[k - 1];
}

std::int64_t LevelSequence::n64(std::size_t k) const {
  const BigInt& v = n(k);
  // n^2 must fit in int64 as well
  if (mpz_sizeinbase(v.get_mpz_t(), 2) > 31) {
    throw CapacityError("level n_" + std::to_string(k) + " = " + v.get_str() +
                        " is too large to simulate (n_k^2 must fit in 63 bits)");
  }
  return *to_i64(v);
}

LevelSequence LevelSequence::truncated(std::size_t count) const {
  if (count == 0 || count > levels_.size()) {
    throw RangeError("cannot truncate a " + std::to_string(levels_.size()) +
                     "-level sequence to " + std::to_string(count) + " levels");
  }
  std::vector<BigInt> head(levels_.begin(), levels_.begin() + static_cast<std::ptrdiff_t>(count));
  return from_levels(std::move(head), origin_, delta_, budget_);
}

nlohmann::json LevelSequence::to_json() const {
  nlohmann::json levels = nlohmann::json::array();
  for (const auto& v : levels_) {
    if (auto u = to_u64(v)) {
      levels.push_back(*u);
    } else {
      levels.push_back(v.get_str());
    }
  }
  nlohmann::json j;
  j["origin"] = std::string(to_string(origin_));
  j["delta"] = delta_ ? nlohmann::json(*delta_) : nlohmann::json(nullptr);
  j["budget"] = budget_ ? nlohmann::json(*budget_) : nlohmann::json(nullptr);
  j["K0"] = validated_from_;
  j["levels"] = std::move(levels);
  return j;
}

LevelSequence LevelSequence::from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("levels") || !j["levels"].is_array()) {
    throw ParseError("sequence JSON needs a 'levels' array");
  }
  std::vector<BigInt> levels;
  for (const auto& v : j["levels"]) {
    if (v.is_number_unsigned()) {
      levels.push_back(from_u64(v.get<std::uint64_t>()));
    } else if (v.is_string()) {
      levels.emplace_back(v.get<std::string>(), 10);
    } else {
      throw ParseError("sequence level must be an unsigned integer or decimal string");
    }
  }
  SequenceOrigin origin = SequenceOrigin::explicit_levels;
  const std::string o = j.value("origin", std::string("explicit"));
  if (o == "delta") {
    origin = SequenceOrigin::delta_rule;
  } else if (o == "adaptive") {
    origin = SequenceOrigin::adaptive;
  } else if (o != "explicit") {
    throw ParseError("unknown sequence origin '" + o + "'");
  }
  std::optional<std::string> delta, budget;
  if (j.contains("delta") && j["delta"].is_string()) delta = j["delta"].get<std::string>();
  if (j.contains("budget") && j["budget"].is_string()) budget = j["budget"].get<std::string>();
  return from_levels(std::move(levels), origin, delta, budget);
}

bool ValidationReport::doubling_everywhere() const {
  return std::all_of(rows.begin(), rows.end(), [](const LacunaryRow& r) { return r.doubling; });
}

bool ValidationReport::passes() const {
  return first_at_least_two && doubling_everywhere() && (levels <= 1 || k0 < levels);
}

std::vector<std::string> ValidationReport::failures() const {
  std::vector<std::string> out;
  if (!first_at_least_two) out.emplace_back("n_1 >= 2 fails");
  for (const auto& r : rows) {
    if (!r.doubling) {
      out.push_back("doubling n_{k+1} >= 2 n_k fails at k=" + std::to_string(r.k));
    }
  }
  for (const auto& r : rows) {
    if (r.k < k0) {
      if (!r.square_sum) {
        out.push_back("lacunarity 16 * sum_{j<=k} n_j^2 <= n_{k+1} fails at k=" +
                      std::to_string(r.k));
      }
      if (!r.polynomial) {
        out.push_back("lacunarity n_{k+1} >= (k+1)^2 n_k fails at k=" + std::to_string(r.k));
      }
    }
  }
  if (levels > 1 && k0 >= levels) {
    out.emplace_back("lacunarity conditions hold on no tail of the sequence (K0 = K)");
  }
  return out;
}

nlohmann::json ValidationReport::to_json() const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& r : rows) {
    rows_json.push_back({{"k", r.k},
                         {"doubling", r.doubling},
                         {"square_sum", r.square_sum},
                         {"polynomial", r.polynomial}});
  }
  return {{"levels", levels},
          {"first_at_least_two", first_at_least_two},
          {"rows", rows_json},
          {"K0", k0},
          {"passes", passes()},
          {"failures", failures()}};
}

ValidationReport validate_lacunary(const LevelSequence& seq) {
  const auto& n = seq.levels();
  if (n.empty()) throw InvalidSequenceError("level sequence is empty");
  for (std::size_t i = 1; i < n.size(); ++i) {
    if (n[i] <= n[i - 1]) throw InvalidSequenceError("level sequence is not strictly increasing");
  }

  ValidationReport report;
  report.levels = n.size();
  report.first_at_least_two = n[0] >= 2;

  BigInt square_sum = 0;
  for (std::size_t i = 0; i + 1 < n.size(); ++i) {
    const std::size_t k = i + 1;
    square_sum += n[i] * n[i];
    LacunaryRow row;
    row.k = k;
    row.doubling = n[i + 1] >= 2 * n[i];
    row.square_sum = 16 * square_sum <= n[i + 1];
    row.polynomial = n[i + 1] >= BigInt((k + 1) * (k + 1)) * n[i];
    report.rows.push_back(row);
  }

  report.k0 = n.size();
  for (std::size_t i = report.rows.size(); i-- > 0;) {
    if (report.rows[i].square_sum && report.rows[i].polynomial) {
      report.k0 = report.rows[i].k;
    } else {
      break;
    }
  }
  if (n.size() == 1) report.k0 = 1;
  return report;
}

namespace {

constexpr unsigned long kMaxLevelBits = 1UL << 20;

class MpfrValue {
 public:
  explicit MpfrValue(mpfr_prec_t prec) { mpfr_init2(v_, prec); }
  ~MpfrValue() { mpfr_clear(v_); }
  MpfrValue(const MpfrValue&) = delete;
  MpfrValue& operator=(const MpfrValue&) = delete;
  mpfr_ptr get() { return v_; }

 private:
  mpfr_t v_;
};

/// floor(2^x) for rational x >= 0, exact.
BigInt floor_exp2(const Rational& x) {
  const BigInt whole = floor(x);
  auto bits = to_u64(whole);
  if (!bits || *bits > kMaxLevelBits) {
    throw CapacityError("2^" + to_string(x) + " exceeds the big-integer level budget");
  }
  mpfr_prec_t prec = static_cast<mpfr_prec_t>(*bits + 96);
  for (int attempt = 0; attempt < 12; ++attempt, prec *= 2) {
    MpfrValue lo(prec), hi(prec);
    mpfr_set_q(lo.get(), x.get_mpq_t(), MPFR_RNDD);
    mpfr_set_q(hi.get(), x.get_mpq_t(), MPFR_RNDU);
    mpfr_exp2(lo.get(), lo.get(), MPFR_RNDD);
    mpfr_exp2(hi.get(), hi.get(), MPFR_RNDU);
    BigInt zlo, zhi;
    mpfr_get_z(zlo.get_mpz_t(), lo.get(), MPFR_RNDD);
    mpfr_get_z(zhi.get_mpz_t(), hi.get(), MPFR_RNDD);
    if (zlo == zhi) return zlo;
  }
  throw CapacityError("could not bracket floor(2^" + to_string(x) + ")");
}

}  // namespace

LevelSequence delta_sequence(const Rational& delta, std::size_t count, IntegerWidth width) {
  if (delta <= 0) throw RangeError("delta must be positive, got " + to_string(delta));
  if (count == 0) throw RangeError("delta_sequence needs at least one level");
  const Rational base = Rational(2) + delta;
  std::vector<BigInt> levels;
  Rational power = 1;
  for (std::size_t k = 1; k <= count; ++k) {
    power *= base;
    power.canonicalize();
    // 16^p = 2^(4p)
    const Rational exponent = Rational(4) * power;
    if (width == IntegerWidth::u64 && exponent >= 64) {
      throw CapacityError("delta sequence level n_" + std::to_string(k) +
                          " does not fit in 64 bits (16^" + to_string(power) +
                          "); use big-integer mode");
    }
    BigInt v = floor_exp2(exponent);
    if (width == IntegerWidth::u64 && !to_u64(v)) {
      throw CapacityError("delta sequence level n_" + std::to_string(k) +
                          " does not fit in 64 bits; use big-integer mode");
    }
    levels.push_back(std::move(v));
  }
  std::string text = to_string(delta);
  return LevelSequence::from_levels(std::move(levels), SequenceOrigin::delta_rule, text);
}

LevelSequence delta_sequence(std::string_view delta_decimal, std::size_t count,
                             IntegerWidth width) {
  LevelSequence seq = delta_sequence(parse_rational(delta_decimal), count, width);
  return LevelSequence::from_levels(seq.levels(), SequenceOrigin::delta_rule,
                                    std::string(delta_decimal));
}

Rational RateBudget::at(const BigInt& j) const {
  if (!rule) throw BudgetError("rate budget '" + name + "' has no rule");
  auto v = rule(j);
  if (!v) {
    throw BudgetError("rate budget '" + name + "' is not evaluable at j = " + j.get_str());
  }
  if (*v <= 0) {
    throw BudgetError("rate budget '" + name + "' is not positive at j = " + j.get_str());
  }
  return *v;
}

RateBudget RateBudget::inverse_linear() {
  return {"inv-linear", [](const BigInt& j) -> std::optional<Rational> {
            if (sgn(j) <= 0) return std::nullopt;
            return Rational(BigInt(1), j);
          }};
}

RateBudget RateBudget::inverse_square() {
  return {"inv-square", [](const BigInt& j) -> std::optional<Rational> {
            if (sgn(j) <= 0) return std::nullopt;
            return Rational(BigInt(1), BigInt(j * j));
          }};
}

RateBudget RateBudget::constant(const Rational& c) {
  return {"constant:" + to_string(c),
          [c](const BigInt&) -> std::optional<Rational> { return c; }};
}

RateBudget RateBudget::parse(std::string_view text) {
  if (text == "inv-linear") return inverse_linear();
  if (text == "inv-square") return inverse_square();
  if (text.rfind("constant:", 0) == 0) {
    RateBudget b = constant(parse_rational(text.substr(9)));
    b.name = std::string(text);
    return b;
  }
  throw ParseError("unknown rate budget '" + std::string(text) +
                   "' (expected inv-linear | inv-square | constant:<c>)");
}

LevelSequence adaptive_sequence(const RateBudget& budget, std::size_t count,
                                bool enforce_lacunarity) {
  if (count == 0) throw RangeError("adaptive_sequence needs at least one level");
  std::vector<BigInt> levels{BigInt(2)};
  BigInt square_sum = 4;
  for (std::size_t k = 1; k < count; ++k) {
    const BigInt& nk = levels.back();
    const BigInt j = 2 * nk;
    const Rational c = budget.at(j);
    const Rational c_next = budget.at(j + 1);
    if (c_next > c) {
      throw BudgetError("rate budget '" + budget.name + "' increases at j = " + j.get_str());
    }
    BigInt next = ceil(Rational(8) / c);
    next = std::max(next, BigInt(2 * nk));
    if (enforce_lacunarity) {
      next = std::max(next, BigInt(16 * square_sum));
      next = std::max(next, BigInt(BigInt((k + 1) * (k + 1)) * nk));
    }
    if (mpz_sizeinbase(next.get_mpz_t(), 2) > kMaxLevelBits) {
      throw CapacityError("adaptive level n_" + std::to_string(k + 1) +
                          " exceeds the big-integer level budget");
    }
    square_sum += next * next;
    levels.push_back(std::move(next));
  }
  std::string name = budget.name + (enforce_lacunarity ? "" : ":nolac");
  return LevelSequence::from_levels(std::move(levels), SequenceOrigin::adaptive, std::nullopt,
                                    name);
}

std::size_t level_index(const LevelSequence& seq, const BigInt& N) {
  const auto& n = seq.levels();
  if (n.empty() || N < n.front()) {
    throw RangeError("N = " + N.get_str() + " is below n_1" +
                     (n.empty() ? std::string() : " = " + n.front().get_str()));
  }
  auto it = std::upper_bound(n.begin(), n.end(), N);
  return static_cast<std::size_t>(it - n.begin());
}

std::size_t level_index(const LevelSequence& seq, std::int64_t N) {
  return level_index(seq, from_i64(N));
}

LevelSequence parse_sequence(std::string_view text, std::size_t count, IntegerWidth width) {
  auto colon = text.find(':');
  if (colon == std::string_view::npos) {
    throw ParseError("sequence '" + std::string(text) +
                     "' must look like explicit:<n1,n2,...> | delta:<d> | adaptive:<budget>");
  }
  const std::string_view kind = text.substr(0, colon);
  std::string_view rest = text.substr(colon + 1);
  if (kind == "explicit") {
    std::vector<BigInt> levels;
    std::string item;
    std::stringstream ss{std::string(rest)};
    while (std::getline(ss, item, ',')) {
      if (item.empty() || item.find_first_not_of("0123456789") != std::string::npos) {
        throw ParseError("explicit sequence entry '" + item + "' is not a positive integer");
      }
      levels.emplace_back(item, 10);
    }
    if (count > 0 && count < levels.size()) levels.resize(count);
    return LevelSequence::from_levels(std::move(levels));
  }
  if (count == 0) throw ParseError("sequence '" + std::string(text) + "' needs a level count");
  if (kind == "delta") return delta_sequence(rest, count, width);
  if (kind == "adaptive") {
    bool lacunarity = true;
    constexpr std::string_view suffix = ":nolac";
    if (rest.size() > suffix.size() && rest.substr(rest.size() - suffix.size()) == suffix) {
      lacunarity = false;
      rest.remove_suffix(suffix.size());
    }
    return adaptive_sequence(RateBudget::parse(rest), count, lacunarity);
  }
  throw ParseError("unknown sequence kind '" + std::string(kind) + "'");
}

}  // namespace bmix
