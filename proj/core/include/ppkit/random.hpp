#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>

namespace ppkit {

// Deterministic random source. mt19937_64 is algorithm-pinned by the standard;
// the uniform/normal transforms are done by hand because the std distributions
// are implementation-defined and would break cross-toolchain reproducibility.
class Rng {
public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t bits() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n); n > 0. Modulo bias is negligible for n << 2^64.
  std::uint64_t below(std::uint64_t n) { return engine_() % n; }

  // Standard normal via Box-Muller (one value per call; the pair's second
  // member is discarded to keep the consumption pattern position-independent).
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.141592653589793238462643 * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Engine state round-trips through text so checkpoints can resume bit-exactly.
  std::string save_state() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
  }
  void restore_state(const std::string& s) {
    std::istringstream is(s);
    is >> engine_;
  }

  std::mt19937_64& engine() { return engine_; }

private:
  std::mt19937_64 engine_;
};

}  // namespace ppkit
