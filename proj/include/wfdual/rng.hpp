// Counter-based splittable random streams (Philox4x32-10).
//
// A stream is keyed by (seed, stream id); draws inside a stream walk a
// 64-bit block counter. Replicate r of a simulation always uses stream r,
// so replicate-level parallelism cannot change any result.
#pragma once

#include <array>
#include <cstdint>

namespace wfdual::mc {

class PhiloxRng {
 public:
  PhiloxRng(uint64_t seed, uint64_t stream)
      : key_{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32)},
        stream_{static_cast<uint32_t>(stream), static_cast<uint32_t>(stream >> 32)} {}

  uint32_t next_u32() {
    if (index_ == 4) generate_block();
    return block_[index_++];
  }

  uint64_t next_u64() {
    const uint64_t lo = next_u32();
    const uint64_t hi = next_u32();
    return (hi << 32) | lo;
  }

  /// Uniform in [0,1) with 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, bound); bound >= 1.
  uint64_t next_below(uint64_t bound) {
    return static_cast<uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * bound) >> 64);
  }

  /// One raw 10-round block for a fully specified counter/key; the
  /// known-answer tests pin the implementation with this.
  static std::array<uint32_t, 4> block(std::array<uint32_t, 4> counter,
                                       std::array<uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
      counter = single_round(counter, key);
      key[0] += 0x9E3779B9u;
      key[1] += 0xBB67AE85u;
    }
    return counter;
  }

 private:
  static std::array<uint32_t, 4> single_round(const std::array<uint32_t, 4>& c,
                                              const std::array<uint32_t, 2>& k) {
    const uint64_t p0 = 0xD2511F53ull * c[0];
    const uint64_t p1 = 0xCD9E8D57ull * c[2];
    const uint32_t hi0 = static_cast<uint32_t>(p0 >> 32), lo0 = static_cast<uint32_t>(p0);
    const uint32_t hi1 = static_cast<uint32_t>(p1 >> 32), lo1 = static_cast<uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }

  void generate_block() {
    block_ = block({counter_lo_, counter_hi_, stream_[0], stream_[1]}, key_);
    index_ = 0;
    if (++counter_lo_ == 0) ++counter_hi_;
  }

  std::array<uint32_t, 2> key_;
  std::array<uint32_t, 2> stream_;
  uint32_t counter_lo_ = 0, counter_hi_ = 0;
  std::array<uint32_t, 4> block_{};
  int index_ = 4;
};

}  // namespace wfdual::mc
