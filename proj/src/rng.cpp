#include "pvlab/rng.hpp"

#include <cmath>
#include <numbers>

namespace pvlab {

namespace {
constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
}  // namespace

std::array<std::uint32_t, 4> PhiloxStream::block(const std::array<std::uint32_t, 4>& counter,
                                                 std::uint32_t key0, std::uint32_t key1) {
  std::array<std::uint32_t, 4> ctr = counter;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = std::uint64_t(kMul0) * ctr[0];
    const std::uint64_t p1 = std::uint64_t(kMul1) * ctr[2];
    const std::array<std::uint32_t, 4> next = {
        std::uint32_t(p1 >> 32) ^ ctr[1] ^ key0,
        std::uint32_t(p1),
        std::uint32_t(p0 >> 32) ^ ctr[3] ^ key1,
        std::uint32_t(p0),
    };
    ctr = next;
    key0 += kWeyl0;
    key1 += kWeyl1;
  }
  return ctr;
}

void PhiloxStream::refill() {
  const std::array<std::uint32_t, 4> counter = {
      std::uint32_t(position_),
      std::uint32_t(position_ >> 32),
      std::uint32_t(spec_.stream_id),
      std::uint32_t(spec_.stream_id >> 32),
  };
  buffer_ = block(counter, std::uint32_t(spec_.seed), std::uint32_t(spec_.seed >> 32));
  ++position_;
  buffered_ = 4;
}

std::uint32_t PhiloxStream::next_u32() {
  if (buffered_ == 0) refill();
  return buffer_[4 - buffered_--];
}

std::uint64_t PhiloxStream::next_u64() {
  const std::uint64_t lo = next_u32();
  const std::uint64_t hi = next_u32();
  return (hi << 32) | lo;
}

double PhiloxStream::next_double() {
  return double(next_u64() >> 11) * 0x1.0p-53;
}

double PhiloxStream::next_normal() {
  if (has_cached_normal_) {
    has_cached_normal_ = false;
    return cached_normal_;
  }
  // u1 in (0, 1] so the log is finite.
  const double u1 = double((next_u64() >> 11) + 1) * 0x1.0p-53;
  const double u2 = next_double();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  cached_normal_ = radius * std::sin(angle);
  has_cached_normal_ = true;
  return radius * std::cos(angle);
}

}  // namespace pvlab
