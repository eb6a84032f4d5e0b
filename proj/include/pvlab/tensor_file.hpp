#pragma once

#include <string>

#include "pvlab/frame.hpp"

namespace pvlab {

// Binary pseudo-video container (.pvid):
//   bytes 0..3   magic "PVID"
//   u32          version (currently 1)
//   u32 x 4      T, H, W, C
//   f32 x T*H*W*C  payload, frame-major then row-major, channel-interleaved
// All multi-byte values little-endian. Round trips are bit-exact.
inline constexpr std::uint32_t kTensorFileVersion = 1;

void write_video(const PseudoVideo& video, const std::string& path);
PseudoVideo read_video(const std::string& path);

}  // namespace pvlab
