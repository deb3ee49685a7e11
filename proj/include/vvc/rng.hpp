#pragma once

#include <cmath>
#include <cstdint>

namespace vvc {

// Deterministic random stream (xoshiro256++ seeded through splitmix64).
// The standard <random> distributions are implementation-defined, which
// breaks the bit-reproducibility contract of seeded experiments, so all
// variate mappings are written out here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& word : state_) word = splitmix64(x);
  }

  // Derives an independent sub-stream seed; `stream` tags the role
  // (agent sampling, batch sampling, init, ...).
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t x = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    return splitmix64(x);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform on [0, 1): 53 random mantissa bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi] inclusive, unbiased via rejection.
  int uniform_int(int lo, int hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t u;
    do {
      u = next_u64();
    } while (u >= limit);
    return lo + static_cast<int>(u % span);
  }

  // Standard normal via Box-Muller (pair cached).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Exponential with given scale (mean).
  double exponential(double scale) {
    double u = uniform();
    while (u <= 0.0) u = uniform();
    return -scale * std::log(u);
  }

  // Geometric on {1, 2, ...}: number of Bernoulli(p) trials to first success.
  long geometric(double p) {
    if (p >= 1.0) return 1;
    double u = uniform();
    while (u <= 0.0) u = uniform();
    return 1 + static_cast<long>(std::floor(std::log(u) / std::log1p(-p)));
  }

  double lognormal(double mu, double sigma) { return std::exp(normal(mu, sigma)); }

 private:
  static std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  static std::uint64_t rotl(std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

  std::uint64_t state_[4];
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Role tags for Rng::derive so independent components never share a stream.
namespace streams {
inline constexpr std::uint64_t kInit = 0;
inline constexpr std::uint64_t kAgentSelect = 1;
inline constexpr std::uint64_t kBatch = 2;
inline constexpr std::uint64_t kAction = 3;
inline constexpr std::uint64_t kProfile = 4;
inline constexpr std::uint64_t kHistory = 5;
inline constexpr std::uint64_t kAgentFailures = 6;
inline constexpr std::uint64_t kLinkFailures = 7;
}  // namespace streams

}  // namespace vvc
