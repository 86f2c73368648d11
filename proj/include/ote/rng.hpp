#ifndef OTE_RNG_HPP
#define OTE_RNG_HPP

#include <cstdint>
#include <random>
#include <vector>

namespace ote {

// Deterministic random source. The raw engine is std::mt19937_64 but all
// distributions are derived here with explicit arithmetic, because the
// standard library's distribution objects are allowed to differ between
// implementations and the toolkit guarantees byte-identical outputs for a
// fixed seed.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  // Uniform integer in [0, n). n must be > 0.
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
  }

  // Independent stream derived from the original seed and a salt, e.g. one
  // per epoch or per cross-validation fold.
  Rng fork(std::uint64_t salt) const { return Rng(seed_mix(seed_, salt)); }

  static std::uint64_t seed_mix(std::uint64_t a, std::uint64_t b) {
    // splitmix64 finalizer over the combined words
    std::uint64_t x = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
  }

  // Fisher-Yates shuffle in fixed order.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = index(i);
      std::swap(items[i - 1], items[j]);
    }
  }

private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace ote

#endif  // OTE_RNG_HPP
