#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace capembed {

// splitmix64 finalizer; used to spread seeds and hash stream names.
std::uint64_t splitmix64(std::uint64_t x);

// Stable sub-seed for a named random stream ("init", "shuffle", ...).
// All randomness in the toolkit flows from one root seed through these.
std::uint64_t sub_seed(std::uint64_t root, std::string_view stream);

// Deterministic RNG. mt19937_64 is fully specified by the standard; the
// value transforms below are hand-rolled because std:: distributions are
// implementation-defined and would break bitwise reproducibility.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // [0, 1) with 53 bits of precision
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller, one spare cached
  double gaussian();

  // [0, n); n must be > 0
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(next_u64() % n); }

  // Fisher-Yates
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace capembed
