#include "pvlab/tensor_file.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <vector>

#include "pvlab/errors.hpp"

namespace pvlab {

namespace {

constexpr char kMagic[4] = {'P', 'V', 'I', 'D'};
// Caps the payload at 2^32 floats so corrupt headers cannot trigger huge allocations.
constexpr std::uint64_t kMaxElements = std::uint64_t(1) << 32;

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  out.push_back((unsigned char)(v & 0xff));
  out.push_back((unsigned char)((v >> 8) & 0xff));
  out.push_back((unsigned char)((v >> 16) & 0xff));
  out.push_back((unsigned char)((v >> 24) & 0xff));
}

std::uint32_t get_u32(const std::vector<unsigned char>& in, std::size_t pos) {
  return std::uint32_t(in[pos]) | (std::uint32_t(in[pos + 1]) << 8) |
         (std::uint32_t(in[pos + 2]) << 16) | (std::uint32_t(in[pos + 3]) << 24);
}

}  // namespace

void write_video(const PseudoVideo& video, const std::string& path) {
  video.validate();
  const Frame& first = video.frames.front();

  std::vector<unsigned char> bytes;
  bytes.reserve(24 + video.frames.size() * first.size() * 4);
  bytes.insert(bytes.end(), kMagic, kMagic + 4);
  put_u32(bytes, kTensorFileVersion);
  put_u32(bytes, std::uint32_t(video.frames.size()));
  put_u32(bytes, std::uint32_t(first.height));
  put_u32(bytes, std::uint32_t(first.width));
  put_u32(bytes, std::uint32_t(first.channels));
  for (const Frame& f : video.frames)
    for (float v : f.data) put_u32(bytes, std::bit_cast<std::uint32_t>(v));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open video file for writing: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  if (!out) throw IoError("failed writing video file: " + path);
}

PseudoVideo read_video(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open video file: " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());

  if (bytes.size() < 24) throw FormatError("file too short for PVID header", (long long)bytes.size());
  for (int i = 0; i < 4; ++i)
    if (char(bytes[i]) != kMagic[i]) throw FormatError("magic mismatch: not a PVID file", i);

  const std::uint32_t version = get_u32(bytes, 4);
  if (version != kTensorFileVersion)
    throw FormatError("unsupported PVID version " + std::to_string(version), 4);

  const std::uint64_t t = get_u32(bytes, 8);
  const std::uint64_t h = get_u32(bytes, 12);
  const std::uint64_t w = get_u32(bytes, 16);
  const std::uint64_t c = get_u32(bytes, 20);
  if (t == 0 || h == 0 || w == 0 || c == 0)
    throw FormatError("PVID header has a zero dimension", 8);
  if (c != 1 && c != 3) throw FormatError("PVID channel count must be 1 or 3", 20);
  // Guarded product: every factor is < 2^32 and the accumulator is capped
  // before each multiply, so this cannot wrap.
  std::uint64_t elements = t;
  for (std::uint64_t factor : {h, w, c}) {
    if (elements > kMaxElements)
      throw FormatError("PVID dimensions overflow the element bound", 8);
    elements *= factor;
  }
  if (elements > kMaxElements)
    throw FormatError("PVID dimensions overflow the element bound", 8);
  const std::uint64_t expected_bytes = 24 + elements * 4;
  if (bytes.size() != expected_bytes)
    throw FormatError("payload size mismatch: expected " + std::to_string(expected_bytes) +
                          " bytes, file has " + std::to_string(bytes.size()),
                      (long long)bytes.size());

  PseudoVideo video;
  video.frames.reserve(t);
  std::size_t pos = 24;
  for (std::uint64_t ti = 0; ti < t; ++ti) {
    Frame frame{int(h), int(w), int(c)};
    for (std::size_t i = 0; i < frame.size(); ++i, pos += 4)
      frame.data[i] = std::bit_cast<float>(get_u32(bytes, pos));
    video.frames.push_back(std::move(frame));
  }
  return video;
}

}  // namespace pvlab
