#include "pvlab/frame.hpp"

#include <cmath>

#include "pvlab/errors.hpp"

namespace pvlab {

std::vector<double> Frame::channel_means() const {
  std::vector<double> sums(channels, 0.0);
  const std::size_t pixels = std::size_t(height) * width;
  for (std::size_t p = 0; p < pixels; ++p)
    for (int c = 0; c < channels; ++c) sums[c] += data[p * channels + c];
  for (double& s : sums) s /= double(pixels);
  return sums;
}

void Frame::validate() const {
  if (height <= 0 || width <= 0) throw ArgumentError("frame has non-positive dimensions");
  if (channels != 1 && channels != 3) throw ArgumentError("frame channels must be 1 or 3");
  if (data.size() != std::size_t(height) * width * channels)
    throw ArgumentError("frame data length does not match height*width*channels");
  for (float v : data)
    if (!std::isfinite(v)) throw ArgumentError("frame contains non-finite values");
}

void PseudoVideo::validate() const {
  if (frames.empty()) throw ArgumentError("pseudo video must have at least one frame");
  frames.front().validate();
  for (std::size_t i = 1; i < frames.size(); ++i) {
    frames[i].validate();
    if (!frames[i].same_shape(frames.front()))
      throw ArgumentError("all frames of a pseudo video must share one shape");
  }
}

}  // namespace pvlab
