#include <doctest.h>

#include "bmix/error.hpp"
#include "bmix/sequence.hpp"

using namespace bmix;

namespace {
std::vector<std::string> as_strings(const LevelSequence& s) {
  std::vector<std::string> out;
  for (const auto& n : s.levels()) out.push_back(to_string(n));
  return out;
}
}  // namespace

TEST_CASE("validate_lacunary on the reference sequence") {
  const auto seq = LevelSequence::from_levels({2, 64, 65600});
  const auto r = validate_lacunary(seq);
  CHECK(r.passes());
  CHECK(r.k0 == 1);
  CHECK(seq.validated_from() == 1);
  REQUIRE(r.rows.size() == 2);
  for (const auto& row : r.rows) {
    CHECK(row.doubling);
    CHECK(row.square_sum);
    CHECK(row.polynomial);
  }
}

TEST_CASE("validate_lacunary rejects (2, 3) at k = 1") {
  const auto seq = LevelSequence::from_levels({2, 3});
  const auto r = validate_lacunary(seq);
  CHECK_FALSE(r.passes());
  CHECK_FALSE(r.rows[0].square_sum);
  CHECK_FALSE(r.rows[0].doubling);
  CHECK(r.k0 == 2);
  CHECK_FALSE(r.failures().empty());
}

TEST_CASE("construction rejects bad input") {
  CHECK_THROWS_AS(LevelSequence::from_levels(std::vector<std::uint64_t>{}), InvalidSequenceError);
  CHECK_THROWS_AS(LevelSequence::from_levels({4, 4}), InvalidSequenceError);
  CHECK_THROWS_AS(LevelSequence::from_levels({5, 3}), InvalidSequenceError);
  CHECK_THROWS_AS(LevelSequence::from_levels({0, 3}), InvalidSequenceError);
}

TEST_CASE("delta_sequence exact floors") {
  CHECK(as_strings(delta_sequence("0.1", 1, IntegerWidth::u64)) == std::vector<std::string>{"337"});
  CHECK(as_strings(delta_sequence("1", 2, IntegerWidth::u64)) ==
        std::vector<std::string>{"4096", "68719476736"});
  CHECK(as_strings(delta_sequence("0.5", 3, IntegerWidth::u64)) ==
        std::vector<std::string>{"1024", "33554432", "6521908912666391106"});
  CHECK(as_strings(delta_sequence("0.1", 5, IntegerWidth::big)) ==
        std::vector<std::string>{"337", "204253", "141695206797", "261725377384457729349767",
                                 "15047912348201488018106074015069675992676960119317"});
}

TEST_CASE("delta_sequence capacity guard") {
  CHECK_THROWS_AS(delta_sequence("0.1", 6, IntegerWidth::u64), CapacityError);
  try {
    delta_sequence("0.1", 6, IntegerWidth::u64);
  } catch (const CapacityError& e) {
    CHECK(std::string(e.what()).find("n_4") != std::string::npos);
  }
  CHECK(delta_sequence("0.1", 6, IntegerWidth::big).size() == 6);
}

TEST_CASE("delta sequences expose K0 instead of failing") {
  for (const char* d : {"0.1", "0.25", "0.5", "1"}) {
    CAPTURE(d);
    const auto seq = delta_sequence(d, 6, IntegerWidth::big);
    const auto r = validate_lacunary(seq);
    CHECK(r.doubling_everywhere());
    for (const auto& row : r.rows) {
      if (row.k >= 2) CHECK(row.polynomial);
    }
    CHECK(r.k0 < seq.size());
  }
  const auto r = validate_lacunary(delta_sequence("0.1", 6, IntegerWidth::big));
  CHECK(r.k0 >= 2);
  CHECK(r.passes());
}

TEST_CASE("adaptive_sequence examples") {
  const auto lin = RateBudget::inverse_linear();
  CHECK(as_strings(adaptive_sequence(lin, 2, true)) == std::vector<std::string>{"2", "64"});
  CHECK(as_strings(adaptive_sequence(lin, 2, false)) == std::vector<std::string>{"2", "32"});
  CHECK(as_strings(adaptive_sequence(RateBudget::constant(Rational(1)), 2, false)) ==
        std::vector<std::string>{"2", "8"});
}

TEST_CASE("adaptive sequences with lacunarity validate from K0 = 1") {
  for (const auto& budget : {RateBudget::inverse_linear(), RateBudget::inverse_square()}) {
    const auto seq = adaptive_sequence(budget, 5, true);
    const auto r = validate_lacunary(seq);
    CHECK(r.passes());
    CHECK(r.k0 == 1);
    for (std::size_t k = 1; k < seq.size(); ++k) {
      const Rational c = budget.at(BigInt(2 * seq.n(k)));
      CHECK(Rational(seq.n(k + 1)) * c >= 8);
    }
  }
}

TEST_CASE("budget errors") {
  RateBudget broken{"broken", [](const BigInt&) { return std::optional<Rational>{}; }};
  CHECK_THROWS_AS(adaptive_sequence(broken, 3, true), BudgetError);
  CHECK_THROWS_AS(RateBudget::parse("nonsense"), ParseError);
}

TEST_CASE("level_index") {
  const auto seq = LevelSequence::from_levels({2, 64, 65600});
  CHECK(level_index(seq, std::int64_t{100}) == 2);
  CHECK(level_index(seq, std::int64_t{2}) == 1);
  CHECK(level_index(seq, std::int64_t{63}) == 1);
  CHECK(level_index(seq, std::int64_t{1} << 40) == 3);
  CHECK_THROWS_AS(level_index(seq, std::int64_t{1}), RangeError);
  const auto big = delta_sequence("0.1", 5, IntegerWidth::big);
  for (std::size_t k = 1; k <= big.size(); ++k) CHECK(level_index(big, big.n(k)) == k);
}

TEST_CASE("json round trip keeps metadata") {
  const auto seq = delta_sequence("0.1", 5, IntegerWidth::big);
  const auto j = seq.to_json();
  CHECK(j.at("origin") == "delta");
  CHECK(j.at("K0") == seq.validated_from());
  const auto back = LevelSequence::from_json(j);
  CHECK(back.levels() == seq.levels());
  CHECK(back.delta() == seq.delta());
  CHECK(back.validated_from() == seq.validated_from());
}

TEST_CASE("parse_sequence forms") {
  CHECK(parse_sequence("explicit:2,64,65600", 0, IntegerWidth::u64).size() == 3);
  CHECK(parse_sequence("delta:0.1", 3, IntegerWidth::u64).n(1) == 337);
  CHECK(parse_sequence("adaptive:inv-linear", 2, IntegerWidth::big).n(2) == 64);
  CHECK(parse_sequence("adaptive:inv-linear:nolac", 2, IntegerWidth::big).n(2) == 32);
  CHECK_THROWS_AS(parse_sequence("bogus:1", 2, IntegerWidth::u64), ParseError);
  CHECK_THROWS_AS(parse_sequence("explicit:2,x", 2, IntegerWidth::u64), ParseError);
}
