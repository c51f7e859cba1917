#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace btf {

// Platform-stable random source: mt19937_64 is fully specified by the
// standard, and every distribution below is implemented here rather than
// taken from <random>, whose distributions are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  // Independent stream derived from (seed, stream) through splitmix64.
  static Rng derive(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n). n must be > 0.
  std::size_t below(std::size_t n);
  bool bernoulli(double p) { return uniform() < p; }
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  unsigned poisson(double lambda);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

  // Index drawn proportionally to non-negative weights (sum must be > 0).
  std::size_t weighted(std::span<const double> weights);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

}  // namespace btf
