#pragma once

#include <cstdint>
#include <vector>

namespace pvlab {

// One image-like state of a corruption chain. Pixel data is row-major and
// channel-interleaved, 32-bit floats. Images loaded from disk lie in [0, 1];
// corrupted frames may leave that range.
struct Frame {
  int height = 0;
  int width = 0;
  int channels = 1;  // 1 (grayscale) or 3 (RGB)
  std::vector<float> data;

  Frame() = default;
  Frame(int h, int w, int c, float fill = 0.0f)
      : height(h), width(w), channels(c),
        data(std::size_t(h) * std::size_t(w) * std::size_t(c), fill) {}

  std::size_t size() const { return data.size(); }
  float& at(int y, int x, int c) {
    return data[(std::size_t(y) * width + x) * channels + c];
  }
  float at(int y, int x, int c) const {
    return data[(std::size_t(y) * width + x) * channels + c];
  }
  bool same_shape(const Frame& other) const {
    return height == other.height && width == other.width && channels == other.channels;
  }

  // Per-channel mean in double precision.
  std::vector<double> channel_means() const;

  // Throws ArgumentError on shape/data-length mismatch or non-finite values.
  void validate() const;
};

// Ordered frame sequence of one corruption chain. frames[T-1] is the original
// target image, frames[0] the most corrupted; all frames share one shape.
struct PseudoVideo {
  std::vector<Frame> frames;

  int length() const { return int(frames.size()); }
  const Frame& original() const { return frames.back(); }

  void validate() const;
};

}  // namespace pvlab
