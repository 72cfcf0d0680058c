#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace paygo {

/// Seeded deterministic generator. Every source of randomness in the
/// library draws from one of these so runs replay from a seed.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Independent stream for (seed, stream) pairs, e.g. one per trial.
  static Rng derive(std::uint64_t seed, std::uint64_t stream);

  result_type operator()() { return engine_(); }
  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }

  void fill(std::span<std::uint8_t> out);
  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);
  double uniform01();

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace paygo
