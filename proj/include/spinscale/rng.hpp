#pragma once

#include <array>
#include <cstdint>
#include <cmath>

namespace spinscale {

// Counter-based pseudo-random generator (Philox 4x32, 10 rounds).
//
// Every draw is a pure function of (key, counter), so independent streams are
// cheap: a stream is (seed, stream_id), the per-draw index occupies counter
// words 0..1 and the stream id words 2..3.  Draws are reproducible across
// platforms and independent of scheduling order, which is what makes
// worker-pool results deterministic for any worker count.
struct Philox4x32 {
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static Block encrypt(Block ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = std::uint64_t(kMul0) * ctr[0];
      const std::uint64_t p1 = std::uint64_t(kMul1) * ctr[2];
      const std::uint32_t hi0 = std::uint32_t(p0 >> 32);
      const std::uint32_t lo0 = std::uint32_t(p0);
      const std::uint32_t hi1 = std::uint32_t(p1 >> 32);
      const std::uint32_t lo1 = std::uint32_t(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    return ctr;
  }
};

// One logical stream of variates.  Streams with distinct (seed, stream_id)
// pairs are statistically independent; the same pair replays the same
// sequence regardless of how many other streams exist.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0)
      : key_{std::uint32_t(seed), std::uint32_t(seed >> 32)},
        stream_id_(stream_id) {}

  std::uint32_t next_u32() {
    if (pos_ == 4) refill();
    return block_[pos_++];
  }

  std::uint64_t next_u64() {
    const std::uint64_t lo = next_u32();
    const std::uint64_t hi = next_u32();
    return lo | (hi << 32);
  }

  // Uniform on the open interval (0, 1).
  double uniform() {
    return (double(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; pairs are cached.
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(t);
    have_spare_ = true;
    return r * std::cos(t);
  }

  std::uint64_t seed() const {
    return std::uint64_t(key_[0]) | (std::uint64_t(key_[1]) << 32);
  }
  std::uint64_t stream_id() const { return stream_id_; }

 private:
  void refill() {
    const Philox4x32::Block ctr = {
        std::uint32_t(draw_), std::uint32_t(draw_ >> 32),
        std::uint32_t(stream_id_), std::uint32_t(stream_id_ >> 32)};
    block_ = Philox4x32::encrypt(ctr, key_);
    ++draw_;
    pos_ = 0;
  }

  Philox4x32::Key key_;
  std::uint64_t stream_id_;
  std::uint64_t draw_ = 0;
  Philox4x32::Block block_{};
  int pos_ = 4;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace spinscale
