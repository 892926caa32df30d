#pragma once

#include <cstdint>

namespace pmns::rng {

// Counter-based streams: every draw is a pure function of (key, counter), so a
// trial or a lattice index can be evaluated in any order on any thread.

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

/// SplitMix64 finalizer.
inline std::uint64_t mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derives an independent stream key from a parent key and a tag.
inline std::uint64_t derive(std::uint64_t parent, std::uint64_t tag) {
  return mix(parent ^ mix(tag + kGolden));
}

/// Raw 64 random bits for `counter` in the stream `key`.
inline std::uint64_t bits(std::uint64_t key, std::uint64_t counter) {
  return mix(key + (counter + 1) * kGolden);
}

/// Uniform double in [0, 1).
inline double unit(std::uint64_t key, std::uint64_t counter) {
  return static_cast<double>(bits(key, counter) >> 11) * 0x1.0p-53;
}

/// Fair +-1.
inline double sign(std::uint64_t key, std::uint64_t counter) {
  return (bits(key, counter) >> 63) ? 1.0 : -1.0;
}

/// Sequential generator over a keyed stream (for setup code, not hot loops).
class Stream {
 public:
  explicit Stream(std::uint64_t key) : key_(key) {}
  std::uint64_t next_bits() { return bits(key_, counter_++); }
  double uniform() { return static_cast<double>(next_bits() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::uint64_t below(std::uint64_t n) { return next_bits() % n; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Domain tags keep unrelated consumers of one master seed apart.
enum Domain : std::uint64_t {
  kSigns = 1,
  kPhases = 2,
  kTrials = 3,
  kProbes = 4,
  kKernel = 5,
  kSymbolCheck = 6,
};

}  // namespace pmns::rng
