#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "bmix/rng.hpp"
#include "bmix/sequence.hpp"

namespace bmix {

/// Closed integer index range [lo, hi].
struct Interval {
  std::int64_t lo = 0;
  std::int64_t hi = -1;

  bool empty() const { return hi < lo; }
  std::int64_t length() const { return empty() ? 0 : hi - lo + 1; }
  bool contains(std::int64_t i) const { return lo <= i && i <= hi; }
  bool covers(std::int64_t a, std::int64_t b) const { return a > b || (lo <= a && b <= hi); }
  friend bool operator==(const Interval&, const Interval&) = default;
};

struct FieldEvent {
  std::int64_t index = 0;
  std::int8_t value = 0;  // +1 or -1
  friend bool operator==(const FieldEvent&, const FieldEvent&) = default;
};

/// Nonzero sites of one level's i.i.d. field e_k over an index interval.
/// Absent sites are zero. Immutable after construction.
class SparseLevelField {
 public:
  SparseLevelField(std::size_t level, std::int64_t n, Interval interval,
                   std::vector<FieldEvent> events = {});

  std::size_t level() const { return level_; }
  std::int64_t n() const { return n_; }
  const Interval& interval() const { return interval_; }
  std::span<const FieldEvent> events() const { return events_; }

  /// Events with index in [a, b], in increasing index order.
  std::span<const FieldEvent> events_in(std::int64_t a, std::int64_t b) const;
  int value_at(std::int64_t i) const;

  friend bool operator==(const SparseLevelField&, const SparseLevelField&) = default;

 private:
  std::size_t level_;
  std::int64_t n_;
  Interval interval_;
  std::vector<FieldEvent> events_;
};

/// Each site of `interval` is independently +1 or -1 with probability
/// 1/(2 n^2) each. Sites are visited by geometric skipping, so the cost is
/// proportional to the number of events rather than the interval length.
SparseLevelField sample_level_field(std::size_t level, std::int64_t n, Interval interval,
                                    Stream& rng);

/// h_k(i) = sum_{j<n} e(i-j) - sum_{j<n} e(i-n-j). Needs [i-2n+1, i] covered.
std::int64_t eval_h_level(const SparseLevelField& field, std::int64_t i);

/// Transfer value t_k(i) = -U^{-1} v_k evaluated at i:
/// -( sum_{j=1}^{n} j e(i-j) + sum_{j=1}^{n-1} (n-j) e(i-n-j) ).
/// Satisfies h_k(i) = t_k(i) - t_k(i+1). Needs [i-2n+1, i-1] covered.
std::int64_t eval_transfer_level(const SparseLevelField& field, std::int64_t i);

enum class NoiseLaw { gaussian, rademacher };

NoiseLaw parse_noise_law(std::string_view text);
std::string_view to_string(NoiseLaw law);

/// The independent mean-zero unit-variance noise m.
struct NoiseSpec {
  NoiseLaw law = NoiseLaw::gaussian;
  std::uint64_t stream = 0;
};

/// i.i.d. draws of the noise law, one per index of `interval`.
std::vector<double> sample_noise(const NoiseSpec& spec, Interval interval, Stream& rng);

/// Everything needed to simulate the truncated process Y = sum_{k<=K} h_k + m.
struct ProcessConfig {
  LevelSequence seq;
  std::size_t truncation = 0;
  NoiseSpec noise;
  std::uint64_t seed = 0;

  /// Throws RangeError unless truncation <= seq.size().
  void validate() const;
};

/// Substream for level k in trial `trial` (salt distinguishes experiments).
Stream level_stream(const ProcessConfig& config, std::size_t level, std::uint64_t trial,
                    std::uint64_t salt = 0);
Stream noise_stream(const ProcessConfig& config, std::uint64_t trial, std::uint64_t salt = 0);

/// CSV rows "level,index,value" with a header.
void write_field_csv(std::ostream& out, std::span<const SparseLevelField> fields);

}  // namespace bmix
