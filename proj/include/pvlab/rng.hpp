#pragma once

#include <array>
#include <cstdint>

namespace pvlab {

// Identifies one reproducible random stream. Equal (seed, stream_id) pairs
// give bit-identical draws on every run regardless of how work is scheduled;
// distinct stream_ids give statistically independent streams.
struct RngSpec {
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;

  RngSpec with_stream(std::uint64_t id) const { return RngSpec{seed, id}; }
  bool operator==(const RngSpec&) const = default;
};

// Counter-based stream built on Philox4x32-10 (Salmon et al., Random123).
// The seed forms the key, the stream id the high half of the 128-bit
// counter, so streams never overlap and draws are a pure function of
// (seed, stream_id, position).
class PhiloxStream {
 public:
  explicit PhiloxStream(RngSpec spec) : spec_(spec) {}

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  // Uniform on [0, 1) with 53 random bits.
  double next_double();

  // Standard normal via Box-Muller; one pair of uniforms per two draws.
  double next_normal();

  RngSpec spec() const { return spec_; }

  // One Philox block; exposed for known-answer tests.
  static std::array<std::uint32_t, 4> block(const std::array<std::uint32_t, 4>& counter,
                                            std::uint32_t key0, std::uint32_t key1);

 private:
  void refill();

  RngSpec spec_;
  std::uint64_t position_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int buffered_ = 0;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

}  // namespace pvlab
