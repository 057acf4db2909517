#ifndef MQSTAT_RNG_HPP
#define MQSTAT_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>

namespace mqstat {

/// SplitMix64 finalizer. Used to derive child seeds; bijective on 64 bits.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed of replication `index` under master seed `seed`. Independent of how
/// many replications are run or how they are scheduled.
constexpr std::uint64_t child_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  return mix64(mix64(seed) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

/// Random state passed explicitly to samplers. Wraps mt19937_64, whose output
/// sequence is fixed by the standard, and converts bits to doubles by hand so
/// streams are identical across standard libraries.
class Rng {
public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on the open interval (0,1): (k + 0.5) / 2^53.
  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard exponential by inversion.
  double exponential() { return -std::log(uniform()); }

  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

private:
  std::mt19937_64 engine_;
};

} // namespace mqstat

#endif // MQSTAT_RNG_HPP
