// Deterministic xoshiro256++ generator seeded through splitmix64, with
// counter-derived child streams. Sampling helpers are implemented here rather
// than with <random> distributions so sequences are bitwise identical across
// platforms and standard libraries.
#pragma once

#include <array>
#include <cstdint>
#include <numeric>
#include <vector>

namespace paircon::core {

inline uint64_t splitmix64_next(uint64_t& state) {
  uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(uint64_t seed) : seed_(seed) {
    uint64_t sm = seed;
    for (auto& word : state_) word = splitmix64_next(sm);
  }

  uint64_t next() {
    const uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  // Unbiased integer in [0, n) via rejection; always consumes >= 1 draw.
  uint64_t below(uint64_t n) {
    const uint64_t threshold = (0 - n) % n;
    for (;;) {
      const uint64_t r = next();
      if (r >= threshold) return r % n;
    }
  }

  int64_t uniform_int(int64_t n) { return static_cast<int64_t>(below(static_cast<uint64_t>(n))); }

  // Fisher-Yates, descending index.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (int64_t i = static_cast<int64_t>(v.size()) - 1; i > 0; --i) {
      const int64_t j = uniform_int(i + 1);
      std::swap(v[static_cast<size_t>(i)], v[static_cast<size_t>(j)]);
    }
  }

  std::vector<int64_t> permutation(int64_t n) {
    std::vector<int64_t> idx(static_cast<size_t>(n));
    std::iota(idx.begin(), idx.end(), int64_t{0});
    shuffle(idx);
    return idx;
  }

  // k distinct indices from [0, n), in draw order (partial Fisher-Yates).
  std::vector<int64_t> sample_without_replacement(int64_t n, int64_t k) {
    std::vector<int64_t> idx(static_cast<size_t>(n));
    std::iota(idx.begin(), idx.end(), int64_t{0});
    for (int64_t i = 0; i < k; ++i) {
      const int64_t j = i + uniform_int(n - i);
      std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
    }
    idx.resize(static_cast<size_t>(k));
    return idx;
  }

  // Independent child stream; distinct streams give distinct seeds.
  Rng derive(uint64_t stream) const {
    uint64_t st = seed_ ^ (stream * 0x9E3779B97F4A7C15ull + 0xD1B54A32D192ED03ull);
    return Rng(splitmix64_next(st));
  }

  uint64_t seed() const { return seed_; }
  const std::array<uint64_t, 4>& state() const { return state_; }
  void set_state(const std::array<uint64_t, 4>& s) { state_ = s; }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  uint64_t seed_ = 0;
  std::array<uint64_t, 4> state_{};
};

}  // namespace paircon::core
