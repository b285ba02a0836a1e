#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

namespace coalflow {

// 64-bit mixing step (splitmix64 finalizer). Used for stream-id derivation.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Counter-derived random stream: a xoshiro256++ generator whose state is
// expanded from a 64-bit stream id.  Replicas of a Monte Carlo experiment get
// ids derived from (master seed, experiment tag, replica index), so they can
// run in parallel without coordination and replay deterministically.
class RngStream {
 public:
  explicit RngStream(std::uint64_t stream_id) : id_(stream_id) {
    std::uint64_t z = stream_id;
    for (auto& w : s_) w = (z = mix64(z));
    for (int i = 0; i < 8; ++i) (void)u64();  // warm past low-entropy start
    have_spare_ = false;
  }

  std::uint64_t stream_id() const { return id_; }

  // Derives an independent child stream. Forking never disturbs this stream's
  // draw sequence.
  RngStream fork(std::string_view tag) const {
    return RngStream(mix64(id_ ^ fnv1a64(tag)));
  }
  RngStream fork(std::string_view tag, std::uint64_t index) const {
    return RngStream(mix64(mix64(id_ ^ fnv1a64(tag)) + index));
  }

  std::uint64_t u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(u64() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  bool bernoulli(double p) { return uniform01() < p; }

  // Index uniform on {0, ..., n-1} (n > 0); rejection keeps it unbiased.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = n * ((~0ULL) / n);
    std::uint64_t x;
    do { x = u64(); } while (x >= limit);
    return x % n;
  }

  // Standard normal via the Marsaglia polar method; second value cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, r;
    do {
      u = 2.0 * uniform01() - 1.0;
      v = 2.0 * uniform01() - 1.0;
      r = u * u + v * v;
    } while (r >= 1.0 || r == 0.0);
    const double c = std::sqrt(-2.0 * std::log(r) / r);
    spare_ = v * c;
    have_spare_ = true;
    return u * c;
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t s_[4];
  std::uint64_t id_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Stream derivation rule used by all experiments:
//   id = mix64(mix64(master ^ fnv1a64(tag)) + replica)
inline RngStream make_stream(std::uint64_t master_seed, std::string_view tag,
                             std::uint64_t replica = 0) {
  return RngStream(mix64(mix64(master_seed ^ fnv1a64(tag)) + replica));
}

template <typename T>
void shuffle(std::vector<T>& v, RngStream& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[rng.below(i)]);
  }
}

}  // namespace coalflow
