#include "bmix/field.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include "bmix/error.hpp"

namespace bmix {

namespace {

// Expected-event budget for one sampled field.
constexpr double kMaxFieldEvents = 5.0e7;

void require_coverage(const SparseLevelField& f, std::int64_t a, std::int64_t b) {
  if (!f.interval().covers(a, b)) {
    throw CoverageError("level " + std::to_string(f.level()) + " field covers [" +
                        std::to_string(f.interval().lo) + ", " + std::to_string(f.interval().hi) +
                        "] but evaluation needs [" + std::to_string(a) + ", " +
                        std::to_string(b) + "]");
  }
}

}  // namespace

SparseLevelField::SparseLevelField(std::size_t level, std::int64_t n, Interval interval,
                                   std::vector<FieldEvent> events)
    : level_(level), n_(n), interval_(interval), events_(std::move(events)) {
  if (n_ < 1) throw RangeError("field level parameter n must be positive");
  std::sort(events_.begin(), events_.end(),
            [](const FieldEvent& a, const FieldEvent& b) { return a.index < b.index; });
  for (std::size_t i = 0; i < events_.size(); ++i) {
    const auto& e = events_[i];
    if (e.value != 1 && e.value != -1) {
      throw RangeError("field value at index " + std::to_string(e.index) + " is not +-1");
    }
    if (!interval_.contains(e.index)) {
      throw RangeError("field event at index " + std::to_string(e.index) +
                       " lies outside the field interval");
    }
    if (i > 0 && events_[i - 1].index == e.index) {
      throw RangeError("duplicate field event at index " + std::to_string(e.index));
    }
  }
}

std::span<const FieldEvent> SparseLevelField::events_in(std::int64_t a, std::int64_t b) const {
  if (a > b) return {};
  auto first = std::lower_bound(events_.begin(), events_.end(), a,
                                [](const FieldEvent& e, std::int64_t v) { return e.index < v; });
  auto last = std::upper_bound(first, events_.end(), b,
                               [](std::int64_t v, const FieldEvent& e) { return v < e.index; });
  return {first, last};
}

int SparseLevelField::value_at(std::int64_t i) const {
  auto ev = events_in(i, i);
  return ev.empty() ? 0 : ev.front().value;
}

SparseLevelField sample_level_field(std::size_t level, std::int64_t n, Interval interval,
                                    Stream& rng) {
  if (interval.empty()) throw RangeError("cannot sample a field over an empty interval");
  if (n < 2) throw RangeError("field level parameter n must be at least 2");
  if (interval.hi > 0 && interval.lo < 0 &&
      interval.hi > std::numeric_limits<std::int64_t>::max() + interval.lo) {
    throw CapacityError("field interval length overflows 64 bits");
  }
  const double p = 1.0 / (static_cast<double>(n) * static_cast<double>(n));
  const double expected = static_cast<double>(interval.length()) * p;
  if (expected > kMaxFieldEvents) {
    throw CapacityError("level " + std::to_string(level) + " field over " +
                        std::to_string(interval.length()) + " sites expects " +
                        std::to_string(expected) + " events, above the sampling budget");
  }

  // Geometric gaps: P(gap = g) = (1-p)^g p, i.e. independent Bernoulli(p) sites.
  const double log_q = std::log1p(-p);
  std::vector<FieldEvent> events;
  events.reserve(static_cast<std::size_t>(expected * 1.2) + 4);
  std::int64_t pos = interval.lo - 1;
  for (;;) {
    const double gap = std::floor(std::log(rng.uniform_pos()) / log_q);
    const double room = static_cast<double>(interval.hi - pos) - 1.0;
    if (gap > room) break;
    pos += static_cast<std::int64_t>(gap) + 1;
    if (pos > interval.hi) break;
    events.push_back({pos, static_cast<std::int8_t>(rng.sign())});
  }
  return SparseLevelField(level, n, interval, std::move(events));
}

std::int64_t eval_h_level(const SparseLevelField& field, std::int64_t i) {
  const std::int64_t n = field.n();
  require_coverage(field, i - 2 * n + 1, i);
  std::int64_t sum = 0;
  for (const auto& e : field.events_in(i - 2 * n + 1, i)) {
    sum += (i - e.index < n) ? e.value : -e.value;
  }
  return sum;
}

std::int64_t eval_transfer_level(const SparseLevelField& field, std::int64_t i) {
  const std::int64_t n = field.n();
  require_coverage(field, i - 2 * n + 1, i - 1);
  std::int64_t sum = 0;
  for (const auto& e : field.events_in(i - 2 * n + 1, i - 1)) {
    const std::int64_t lag = i - e.index;
    sum += (lag <= n ? lag : 2 * n - lag) * e.value;
  }
  return -sum;
}

NoiseLaw parse_noise_law(std::string_view text) {
  if (text == "gaussian") return NoiseLaw::gaussian;
  if (text == "rademacher") return NoiseLaw::rademacher;
  throw ParseError("unknown noise law '" + std::string(text) + "' (gaussian|rademacher)");
}

std::string_view to_string(NoiseLaw law) {
  return law == NoiseLaw::gaussian ? "gaussian" : "rademacher";
}

std::vector<double> sample_noise(const NoiseSpec& spec, Interval interval, Stream& rng) {
  std::vector<double> out(static_cast<std::size_t>(interval.length()));
  if (spec.law == NoiseLaw::gaussian) {
    for (auto& v : out) v = rng.normal();
  } else {
    for (auto& v : out) v = static_cast<double>(rng.sign());
  }
  return out;
}

void ProcessConfig::validate() const {
  if (truncation > seq.size()) {
    throw RangeError("truncation K = " + std::to_string(truncation) + " exceeds the " +
                     std::to_string(seq.size()) + " levels of the sequence");
  }
}

Stream level_stream(const ProcessConfig& config, std::size_t level, std::uint64_t trial,
                    std::uint64_t salt) {
  return Stream(config.seed, StreamId{StreamTag::level_field, level, trial, salt});
}

Stream noise_stream(const ProcessConfig& config, std::uint64_t trial, std::uint64_t salt) {
  return Stream(config.seed,
                StreamId{StreamTag::noise, config.noise.stream, trial, salt});
}

void write_field_csv(std::ostream& out, std::span<const SparseLevelField> fields) {
  out << "level,index,value\n";
  for (const auto& f : fields) {
    for (const auto& e : f.events()) {
      out << f.level() << ',' << e.index << ',' << static_cast<int>(e.value) << '\n';
    }
  }
}

}  // namespace bmix
