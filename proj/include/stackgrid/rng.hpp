#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace stackgrid {

// Deterministic random source. All draws are derived from raw mt19937_64
// output with fixed arithmetic, so traces replay bit-for-bit across
// platforms and standard-library versions (std::*_distribution is
// implementation-defined and deliberately avoided).
class DetRng {
 public:
  explicit DetRng(std::uint64_t seed) : engine_(seed) {}

  // uniform in [0, 1) with 53 bits of precision
  double uniform01() { return static_cast<double>(engine_() >> 11) * kInv53; }

  double uniform(double lo, double hi) { return lo + uniform01() * (hi - lo); }

  bool bernoulli(double p) { return uniform01() < p; }

  // standard normal via Box-Muller (two uniforms per call, no caching,
  // so the draw count per event is fixed)
  double normal(double stddev) {
    double u1 = 1.0 - uniform01();  // (0, 1]
    double u2 = uniform01();
    return stddev * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

 private:
  static constexpr double kInv53 = 1.0 / 9007199254740992.0;  // 2^-53
  static constexpr double kPi = 3.14159265358979323846;
  std::mt19937_64 engine_;
};

}  // namespace stackgrid
