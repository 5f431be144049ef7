#pragma once

#include <cmath>
#include <cstdint>

namespace kg {

// splitmix64, used for seeding and stream splitting
inline uint64_t splitmix64(uint64_t& s) {
  uint64_t z = (s += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// xoshiro256++ with platform-independent uniform/normal draws, so ensembles
// are byte-reproducible regardless of standard library.
class Rng {
 public:
  explicit Rng(uint64_t seed) {
    uint64_t s = seed;
    for (auto& w : st_) w = splitmix64(s);
  }
  // independent per-sample stream: hash (seed, stream id) into a fresh state
  static Rng stream(uint64_t seed, uint64_t id) {
    uint64_t s = seed ^ (0x9e3779b97f4a7c15ULL * (id + 1));
    uint64_t mixed = splitmix64(s);
    return Rng(mixed ^ (id << 1));
  }

  uint64_t next() {
    auto rotl = [](uint64_t v, int k) { return (v << k) | (v >> (64 - k)); };
    uint64_t r = rotl(st_[0] + st_[3], 23) + st_[0];
    uint64_t t = st_[1] << 17;
    st_[2] ^= st_[0];
    st_[3] ^= st_[1];
    st_[1] ^= st_[2];
    st_[0] ^= st_[3];
    st_[2] ^= t;
    st_[3] = rotl(st_[3], 45);
    return r;
  }

  double uniform() {  // [0,1)
    return (double)(next() >> 11) * 0x1.0p-53;
  }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  int bit() { return (int)(next() >> 63); }

  double normal() {  // polar Marsaglia, deterministic draw order
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    have_spare_ = true;
    return u * m;
  }

 private:
  uint64_t st_[4];
  double spare_ = 0;
  bool have_spare_ = false;
};

}  // namespace kg
