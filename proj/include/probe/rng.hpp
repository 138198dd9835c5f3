#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace probe {

// Stable 64-bit hash (FNV-1a followed by a splitmix finalizer). Used to derive
// independent random streams from string keys such as probe ids.
std::uint64_t stable_hash(std::string_view key, std::uint64_t salt = 0);

// Seeded random source with platform-independent bounded sampling. The
// standard distributions are implementation-defined, which would break
// byte-identical reruns across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed), seed_(seed) {}

  Rng derive(std::string_view key) const;

  std::uint64_t next() { return engine_(); }

  // Uniform integer in [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  std::size_t index(std::size_t size) {
    return static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(size) - 1));
  }

  // Uniform double in [0, 1).
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform01() < p; }

  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::swap(values[i - 1], values[index(i)]);
    }
  }

  std::uint64_t seed() const { return seed_; }

 private:
  std::mt19937_64 engine_;
  std::uint64_t seed_;
};

}  // namespace probe
