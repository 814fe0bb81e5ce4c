#pragma once

#include <cstdint>
#include <string_view>

namespace ptotr {

/// Counter-based SplitMix64 stream.
///
/// Output k of a stream is mix(key + k * golden) where key is derived from
/// (seed, stream). Streams are split by purpose tag and index through
/// derive(), so parallel work items draw from independent, reproducible
/// sequences regardless of scheduling.
class Rng {
 public:
  static constexpr std::string_view kAlgorithm = "splitmix64-counter";

  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on (lo, hi); never returns an endpoint.
  double uniform(double lo, double hi);
  /// Uniform integer on [0, n).
  std::uint64_t below(std::uint64_t n);

  Rng derive(std::string_view purpose, std::uint64_t index) const;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t splitmix64_mix(std::uint64_t z);

/// Poisson draw: sequential-search inversion below rate 30, Hormann's
/// transformed rejection (PTRS) above. rate must be >= 0.
std::uint64_t sample_poisson(double rate, Rng& rng);

}  // namespace ptotr
