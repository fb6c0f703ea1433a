#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>

namespace gpsmem {

// All randomness flows through explicitly passed Rng instances. Streams for
// independent pieces of work (per condition, per iteration, ...) are derived
// from the experiment seed with derive(), so runs are reproducible and
// resumable without serializing generator state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    // splitmix64 finalizer over the combined words
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  static Rng derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                    std::uint64_t c = 0) {
    return Rng(mix(mix(mix(seed, a), b), c));
  }

  // uniform in (0, 1]
  double uniform() {
    const std::uint64_t r = gen_();
    return (static_cast<double>(r >> 11) + 1.0) * 0x1.0p-53;
  }

  // Box-Muller, no caching: consumes two uniforms per draw
  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  Eigen::VectorXd normal_vector(int n) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v(i) = normal();
    return v;
  }

  std::uint64_t next() { return gen_(); }

  // uniform integer in [0, n)
  std::uint64_t index(std::uint64_t n) { return gen_() % n; }

 private:
  std::mt19937_64 gen_;
};

}  // namespace gpsmem
