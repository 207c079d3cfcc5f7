#ifndef LSMBD_RNG_HPP
#define LSMBD_RNG_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "lsmbd/errors.hpp"

namespace lsmbd {

// Counter-based generator: Philox-4x32-10 (Salmon et al., Random123 family).
// A (seed, stream) pair keys the generator; the 128-bit block counter walks
// forward as values are drawn, so identical (seed, stream) always replays the
// identical sequence regardless of platform. This is the only randomness
// source in the library; checkpoints record the algorithm name "philox4x32-10"
// together with the seed.
class Philox {
 public:
  explicit Philox(std::uint64_t seed, std::uint64_t stream = 0)
      : key0_(static_cast<std::uint32_t>(seed)),
        key1_(static_cast<std::uint32_t>(seed >> 32)),
        ctr2_(static_cast<std::uint32_t>(stream)),
        ctr3_(static_cast<std::uint32_t>(stream >> 32)) {}

  std::uint32_t next_u32() {
    if (buf_pos_ == 4) {
      fill_block();
      buf_pos_ = 0;
    }
    return buf_[buf_pos_++];
  }

  std::uint64_t next_u64() {
    const std::uint64_t lo = next_u32();
    const std::uint64_t hi = next_u32();
    return (hi << 32) | lo;
  }

  // Uniform on [0, 1) with 53 random bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; consumes two uniforms per pair.
  double next_normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - next_double();  // (0, 1], keeps log() finite
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  // Uniform integer in [0, n) without modulo bias (rejection sampling).
  std::uint32_t next_below(std::uint32_t n) {
    if (n == 0) throw ParameterError("next_below: n must be positive");
    const std::uint32_t limit = UINT32_MAX - UINT32_MAX % n;
    std::uint32_t v;
    do {
      v = next_u32();
    } while (v >= limit);
    return v % n;
  }

  // k distinct indices from {0, ..., n-1}, partial Fisher-Yates, sorted output.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k) {
    if (k > n) throw ParameterError("sample_without_replacement: k > n");
    std::vector<std::uint32_t> pool(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = static_cast<std::uint32_t>(i);
    std::vector<std::size_t> out(k);
    for (std::size_t i = 0; i < k; ++i) {
      const std::uint32_t j =
          static_cast<std::uint32_t>(i) + next_below(static_cast<std::uint32_t>(n - i));
      std::swap(pool[i], pool[j]);
      out[i] = pool[i];
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  static constexpr const char* algorithm_name() { return "philox4x32-10"; }

 private:
  static void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
  }

  void fill_block() {
    constexpr std::uint32_t kMul0 = 0xD2511F53u;
    constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

    std::uint32_t c0 = ctr0_, c1 = ctr1_, c2 = ctr2_, c3 = ctr3_;
    std::uint32_t k0 = key0_, k1 = key1_;
    for (int round = 0; round < 10; ++round) {
      std::uint32_t hi0, lo0, hi1, lo1;
      mulhilo(kMul0, c0, hi0, lo0);
      mulhilo(kMul1, c2, hi1, lo1);
      const std::uint32_t n0 = hi1 ^ c1 ^ k0;
      const std::uint32_t n1 = lo1;
      const std::uint32_t n2 = hi0 ^ c3 ^ k1;
      const std::uint32_t n3 = lo0;
      c0 = n0; c1 = n1; c2 = n2; c3 = n3;
      k0 += kWeyl0;
      k1 += kWeyl1;
    }
    buf_[0] = c0; buf_[1] = c1; buf_[2] = c2; buf_[3] = c3;
    if (++ctr0_ == 0) ++ctr1_;  // 64-bit block counter in (ctr0, ctr1)
  }

  std::uint32_t key0_, key1_;
  std::uint32_t ctr0_ = 0, ctr1_ = 0;
  std::uint32_t ctr2_, ctr3_;  // stream id
  std::uint32_t buf_[4] = {0, 0, 0, 0};
  int buf_pos_ = 4;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace lsmbd

#endif  // LSMBD_RNG_HPP
