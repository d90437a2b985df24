#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace quadrl {

// Deterministic random source. All sampling is implemented explicitly on top
// of the mt19937_64 bit stream so that a given seed reproduces the exact same
// values on every run and toolchain (std:: distributions are
// implementation-defined and would break the bit-reproducibility contract).
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t raw() { return gen_(); }

  // Uniform in [0, 1) with 53 bits of resolution.
  double uniform01() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform01();
  }

  // Standard normal via Box-Muller. Consumes two draws per sample; no spare
  // is cached so the stream position is a pure function of the call count.
  double normal(double mean = 0.0, double stddev = 1.0) {
    double u1 = uniform01();
    double u2 = uniform01();
    // Guard the log against u1 == 0.
    double r = std::sqrt(-2.0 * std::log1p(-u1));
    return mean + stddev * r * std::cos(2.0 * M_PI * u2);
  }

  // Uniform integer in [0, n), n > 0. Multiply-shift reduction; the modulo
  // bias is < n / 2^64 which is negligible for every use in this project.
  uint64_t integer(uint64_t n) {
    return static_cast<uint64_t>(
        (static_cast<__uint128_t>(gen_()) * n) >> 64);
  }

  // Derives an independent sub-stream seed (splitmix64 finalizer). Used to
  // give training, evaluation and network init their own streams.
  static uint64_t derive(uint64_t seed, uint64_t stream) {
    uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace quadrl
