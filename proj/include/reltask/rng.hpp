#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace reltask {

// Counter-based generator: the state transition is pure 64-bit integer
// arithmetic, so a (seed, call sequence) pair replays identically everywhere.
// Child streams are derived by hashing the parent key with a label, which
// keeps parallel sweep cells reproducible no matter the execution order.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : key_(mix(seed ^ kKeyTag)), counter_(0) {}

  std::uint64_t next_u64() {
    counter_ += 0x9E3779B97F4A7C15ull;
    return mix(counter_ ^ key_);
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in (0, 1]; safe as a log() argument.
  double uniform_pos() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; the paired value is cached, so draws
  // come two at a time.
  double normal();

  // Uniform integer in [0, n). Rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t n);

  // Child stream for an independent purpose.
  Rng split(std::uint64_t label) const {
    Rng child(0);
    child.key_ = mix(key_ ^ mix(label + kSplitTag));
    child.counter_ = 0;
    child.has_cached_normal_ = false;
    return child;
  }
  Rng split(std::string_view label) const { return split(fnv1a(label)); }

  // k distinct values from [0, n), in draw order (uniform over ordered
  // k-subsets). Used for injective substitution maps.
  std::vector<std::uint64_t> sample_distinct(std::uint64_t n, std::size_t k);

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  static std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ull;
    }
    return h;
  }

 private:
  static constexpr std::uint64_t kKeyTag = 0x1b873593a5a5a5a5ull;
  static constexpr std::uint64_t kSplitTag = 0x2545f4914f6cdd1dull;

  std::uint64_t key_;
  std::uint64_t counter_;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

}  // namespace reltask
