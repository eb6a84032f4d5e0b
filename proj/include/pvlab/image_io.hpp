#pragma once

#include <string>

#include "pvlab/frame.hpp"

namespace pvlab {

// Reads a binary PGM (P5) or PPM (P6) file with maxval 255. Pixel byte p
// maps to p/255. Throws FormatError with the failing byte offset on
// malformed input, IoError if the file cannot be opened.
Frame read_image(const std::string& path);

// Writes a frame as P5 (1 channel) or P6 (3 channels). Values are clamped
// to [0, 1] and quantized with round(v * 255).
void write_image(const Frame& frame, const std::string& path);

}  // namespace pvlab
