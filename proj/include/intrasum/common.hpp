#pragma once
// Shared utilities: deterministic RNG, seed derivation, content hashing.

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace intrasum {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// FNV-1a, used for config and vocab fingerprints in manifests and checkpoints.
inline uint64_t fnv1a64(const void* data, size_t len,
                        uint64_t h = 0xcbf29ce484222325ull) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline uint64_t fnv1a64(const std::string& s,
                        uint64_t h = 0xcbf29ce484222325ull) {
  return fnv1a64(s.data(), s.size(), h);
}

// mt19937_64 with explicit mappings. The standard distributions are
// implementation-defined, so every draw here is spelled out to keep runs
// reproducible across library versions.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t bits() { return eng_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform in [0, n), rejection-sampled to avoid modulo bias.
  uint64_t below(uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
      x = eng_();
    } while (x >= limit);
    return x % n;
  }

  // Inclusive bounds.
  int64_t uniform_int(int64_t lo, int64_t hi) {
    if (lo > hi) throw std::invalid_argument("Rng::uniform_int: lo > hi");
    return lo + static_cast<int64_t>(below(static_cast<uint64_t>(hi - lo) + 1));
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Index draw proportional to non-negative weights.
  size_t categorical(const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    if (!(total > 0.0))
      throw std::invalid_argument("Rng::categorical: total weight not positive");
    double u = uniform() * total;
    double acc = 0.0;
    for (size_t i = 0; i < weights.size(); ++i) {
      acc += weights[i];
      if (u < acc) return i;
    }
    return weights.size() - 1;
  }

  // Fisher-Yates; std::shuffle's draw sequence is implementation-defined.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i)
      std::swap(v[i - 1], v[below(i)]);
  }

  // Deterministic child stream; advances this stream by one draw.
  Rng fork(uint64_t tag) { return Rng(splitmix64(bits() ^ splitmix64(tag))); }

 private:
  std::mt19937_64 eng_;
};

}  // namespace intrasum
