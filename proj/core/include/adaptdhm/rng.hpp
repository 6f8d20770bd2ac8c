#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "adaptdhm/hash.hpp"

namespace adaptdhm {

// mt19937_64 with hand-rolled transforms. The std:: distributions are
// implementation-defined, so none of them appear anywhere in the project;
// this keeps every seeded run reproducible across standard libraries.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // uniform in [0, 1), 53-bit resolution
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [0, n); modulo bias is irrelevant at these ranges
  uint64_t below(uint64_t n) { return gen_() % n; }

  bool bernoulli(double p) { return uniform() < p; }

  // Marsaglia polar method, deterministic given the draw sequence.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = uniform(-1.0, 1.0);
      v = uniform(-1.0, 1.0);
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    have_spare_ = true;
    return u * f;
  }

  // Fisher-Yates; std::shuffle's draw pattern is unspecified, this one is not.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Named substreams: embeddings, MLP init, centers, shuffles etc. each draw
// from their own derived seed, so adding one consumer never shifts another.
inline uint64_t derive_seed(uint64_t base, std::string_view stream, uint64_t index = 0) {
  return splitmix64(base ^ fnv1a64(stream) ^ splitmix64(index * 0x9e3779b97f4a7c15ull + 1));
}

}  // namespace adaptdhm
