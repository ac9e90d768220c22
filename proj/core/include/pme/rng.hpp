#pragma once

#include <cmath>
#include <cstdint>

namespace pme {

/// Counter-based RNG (Philox 4x32-10). A draw is a pure function of
/// (seed, stream, counter), so independently seeded streams can be consumed
/// in parallel and still reproduce bitwise identical sequences.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : key0_(static_cast<std::uint32_t>(seed)),
        key1_(static_cast<std::uint32_t>(seed >> 32)),
        ctr2_(static_cast<std::uint32_t>(stream)),
        ctr3_(static_cast<std::uint32_t>(stream >> 32)) {}

  std::uint32_t next_u32() {
    if (have_ == 0) refill();
    return out_[--have_];
  }

  /// Uniform on the open interval (0,1); never returns an endpoint.
  double uniform() {
    const double scale = 1.0 / 4294967296.0;  // 2^-32
    return (static_cast<double>(next_u32()) + 0.5) * scale;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; pairs are cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  /// Uniform integer in [0, n). n must be positive.
  int below(int n) {
    // Rejection-free modulo bias is negligible for the small n used here,
    // but reject anyway to keep draws exact.
    std::uint32_t limit = 0xFFFFFFFFu - 0xFFFFFFFFu % static_cast<std::uint32_t>(n);
    std::uint32_t x;
    do {
      x = next_u32();
    } while (x >= limit);
    return static_cast<int>(x % static_cast<std::uint32_t>(n));
  }

 private:
  static void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi,
                      std::uint32_t& lo) {
    std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
  }

  void refill() {
    std::uint32_t c0 = static_cast<std::uint32_t>(block_);
    std::uint32_t c1 = static_cast<std::uint32_t>(block_ >> 32);
    std::uint32_t c2 = ctr2_, c3 = ctr3_;
    std::uint32_t k0 = key0_, k1 = key1_;
    for (int round = 0; round < 10; ++round) {
      std::uint32_t hi0, lo0, hi1, lo1;
      mulhilo(0xD2511F53u, c0, hi0, lo0);
      mulhilo(0xCD9E8D57u, c2, hi1, lo1);
      std::uint32_t n0 = hi1 ^ c1 ^ k0;
      std::uint32_t n1 = lo1;
      std::uint32_t n2 = hi0 ^ c3 ^ k1;
      std::uint32_t n3 = lo0;
      c0 = n0;
      c1 = n1;
      c2 = n2;
      c3 = n3;
      k0 += 0x9E3779B9u;
      k1 += 0xBB67AE85u;
    }
    out_[0] = c0;
    out_[1] = c1;
    out_[2] = c2;
    out_[3] = c3;
    have_ = 4;
    ++block_;
  }

  std::uint32_t key0_, key1_;
  std::uint32_t ctr2_, ctr3_;  // stream id occupies the high counter lanes
  std::uint64_t block_ = 0;
  std::uint32_t out_[4] = {0, 0, 0, 0};
  int have_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Stable 64-bit mix for deriving sub-stream ids (splitmix64 finalizer).
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace pme
