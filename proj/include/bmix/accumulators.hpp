#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

namespace bmix {

/// Welford running mean/variance with the Chan et al. pairwise merge.
/// Merging is associative up to rounding; callers that need bit-identical
/// results across thread counts merge in a fixed order.
class RunningStats {
 public:
  void push(double x) {
    ++n_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta * (x - mean_);
  }

  void merge(const RunningStats& other) {
    if (other.n_ == 0) return;
    if (n_ == 0) {
      *this = other;
      return;
    }
    const double na = static_cast<double>(n_);
    const double nb = static_cast<double>(other.n_);
    const double total = na + nb;
    const double delta = other.mean_ - mean_;
    mean_ += delta * (nb / total);
    m2_ += other.m2_ + delta * delta * (na * nb / total);
    n_ += other.n_;
  }

  std::uint64_t count() const { return n_; }
  double mean() const { return n_ ? mean_ : std::numeric_limits<double>::quiet_NaN(); }
  double variance_population() const {
    return n_ ? m2_ / static_cast<double>(n_) : std::numeric_limits<double>::quiet_NaN();
  }
  double variance_sample() const {
    return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : std::numeric_limits<double>::quiet_NaN();
  }

 private:
  std::uint64_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

/// Exact power sums of integer observations. Merge is plain addition, so
/// any grouping of the reduction gives identical results.
class IntegerMoments {
 public:
  void push(std::int64_t x) {
    const __int128 v = x;
    ++n_;
    s1_ += v;
    s2_ += v * v;
    s4_ += static_cast<long double>(v * v) * static_cast<long double>(v * v);
  }

  void merge(const IntegerMoments& other) {
    n_ += other.n_;
    s1_ += other.s1_;
    s2_ += other.s2_;
    s4_ += other.s4_;
  }

  std::uint64_t count() const { return n_; }
  double mean() const { return static_cast<double>(s1_) / static_cast<double>(n_); }
  /// E[X^2] estimate (the variance when the mean is known to be zero).
  double second_moment() const { return static_cast<double>(s2_) / static_cast<double>(n_); }
  double fourth_moment() const { return static_cast<double>(s4_ / static_cast<long double>(n_)); }
  /// Sample variance around the empirical mean.
  double variance_sample() const {
    const double n = static_cast<double>(n_);
    const double m = mean();
    return (static_cast<double>(s2_) - n * m * m) / (n - 1.0);
  }
  /// Standard error of second_moment(), from the empirical fourth moment.
  double second_moment_se() const {
    const double m2 = second_moment();
    return std::sqrt(std::max(0.0, fourth_moment() - m2 * m2) / static_cast<double>(n_));
  }

 private:
  std::uint64_t n_ = 0;
  __int128 s1_ = 0;
  __int128 s2_ = 0;
  long double s4_ = 0;
};

/// Success count out of a number of Bernoulli trials.
struct BinomialCount {
  std::uint64_t hits = 0;
  std::uint64_t trials = 0;

  void push(bool hit) {
    ++trials;
    hits += hit ? 1 : 0;
  }
  void merge(const BinomialCount& o) {
    hits += o.hits;
    trials += o.trials;
  }
  double estimate() const {
    return trials ? static_cast<double>(hits) / static_cast<double>(trials) : 0.0;
  }
  /// sqrt(p(1-p)/trials)
  double standard_error() const {
    if (!trials) return 0.0;
    const double p = estimate();
    return std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
  }
};

}  // namespace bmix
