#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace soaptail {

enum class StreamRole : std::uint32_t { Arrivals = 1, Sizes = 2, Test = 99 };

// Reproducible random stream keyed by (seed, replication, role). Two streams
// with the same key yield the same sequence on every platform: the engine is
// std::mt19937_64 (fully specified by the standard) and all transforms below
// are done by hand rather than through the implementation-defined std
// distributions.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t replication, StreamRole role) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(replication),
                      static_cast<std::uint32_t>(replication >> 32),
                      static_cast<std::uint32_t>(role)};
    engine_.seed(seq);
  }

  /// Uniform on the open interval (0, 1).
  double uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

  double exponential(double rate) { return -std::log(uniform()) / rate; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace soaptail
