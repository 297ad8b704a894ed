#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace bmix {

/// Philox4x32-10 block function (Salmon et al., counter-based). Pure: the
/// same (counter, key) always produces the same four words.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// SplitMix64 finalizer, used to hash seeds and stream coordinates.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Purpose tags keep substreams for different consumers disjoint.
enum class StreamTag : std::uint32_t {
  level_field = 1,
  noise = 2,
  intrusion = 3,
  generic = 4,
};

/// Coordinates of one substream below a master seed.
struct StreamId {
  StreamTag tag = StreamTag::generic;
  std::uint64_t a = 0;  // usually the level index
  std::uint64_t b = 0;  // usually the trial index
  std::uint64_t c = 0;  // free salt (scale, interval start, ...)

  std::uint64_t hash() const;
};

/// A counter-based random stream: key from the master seed, upper counter
/// words from the StreamId hash, lower words a block counter. Streams with
/// different ids are independent and can be created in any order on any
/// thread, which is what makes parallel and serial trial loops agree.
class Stream {
 public:
  using result_type = std::uint64_t;

  Stream(std::uint64_t master_seed, StreamId id);
  Stream(std::uint64_t master_seed, std::uint64_t raw_stream);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return next_u64(); }

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on (0, 1].
  double uniform_pos() { return 1.0 - uniform(); }
  /// Fair random sign, +1 or -1.
  int sign() { return (next_u32() & 1U) ? 1 : -1; }
  /// Standard normal (Box-Muller, pairs cached).
  double normal();

  /// Number of 128-bit blocks consumed so far.
  std::uint64_t blocks_used() const { return block_; }

 private:
  void refill();

  std::array<std::uint32_t, 2> key_{};
  std::uint64_t stream_ = 0;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  unsigned pos_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace bmix
