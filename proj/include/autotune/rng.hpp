#pragma once

#include <cstdint>
#include <random>

namespace autotune {

// splitmix64; used to turn (seed, tag...) tuples into well-mixed stream seeds.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline uint64_t derive_seed(uint64_t base) { return splitmix64(base); }

template <class... Tags>
uint64_t derive_seed(uint64_t base, uint64_t tag, Tags... rest) {
  return derive_seed(splitmix64(base ^ splitmix64(tag)), rest...);
}

// Deterministic random source. The uniform mapping is done by hand so that
// sequences are identical across standard library implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(splitmix64(seed ^ 0x1234567855aa55aaull)) {}

  uint64_t next_u64() { return engine_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // [a, b); returns a when the interval has zero width.
  double uniform(double a, double b) {
    if (a == b) return a;
    return a + (b - a) * uniform();
  }

  // [0, n)
  int uniform_int(int n) { return static_cast<int>(uniform() * n); }

  bool coin() { return (next_u64() & 1ull) != 0; }

 private:
  std::mt19937_64 engine_;
};

// Fixed stream tags so phases draw from independent, order-insensitive streams.
namespace stream {
inline constexpr uint64_t kMisparam = 1;
inline constexpr uint64_t kModelInit = 2;
inline constexpr uint64_t kPretrainRollout = 3;
inline constexpr uint64_t kPretrainTrain = 4;
inline constexpr uint64_t kPolicyRollout = 5;
inline constexpr uint64_t kSpRollout = 6;
inline constexpr uint64_t kRealRollout = 7;
inline constexpr uint64_t kRoundTrain = 8;
inline constexpr uint64_t kEval = 9;
inline constexpr uint64_t kController = 10;
}  // namespace stream

}  // namespace autotune
