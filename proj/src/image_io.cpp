#include "pvlab/image_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <vector>

#include "pvlab/errors.hpp"

namespace pvlab {

namespace {

// Minimal cursor over the file bytes so every parse error can name its offset.
struct ByteCursor {
  const std::vector<unsigned char>& bytes;
  std::size_t pos = 0;

  bool eof() const { return pos >= bytes.size(); }
  int peek() const { return eof() ? -1 : bytes[pos]; }
  int get() { return eof() ? -1 : bytes[pos++]; }
};

bool is_pnm_space(int c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

// Skips whitespace and '#' comment lines between header tokens.
void skip_separators(ByteCursor& cur) {
  while (!cur.eof()) {
    if (is_pnm_space(cur.peek())) {
      cur.get();
    } else if (cur.peek() == '#') {
      while (!cur.eof() && cur.get() != '\n') {
      }
    } else {
      return;
    }
  }
}

int parse_int(ByteCursor& cur, const char* what) {
  skip_separators(cur);
  if (cur.eof()) throw FormatError(std::string("unexpected end of header before ") + what,
                                   (long long)cur.pos);
  if (cur.peek() < '0' || cur.peek() > '9')
    throw FormatError(std::string("expected digit for ") + what, (long long)cur.pos);
  long long value = 0;
  while (!cur.eof() && cur.peek() >= '0' && cur.peek() <= '9') {
    value = value * 10 + (cur.get() - '0');
    if (value > 1'000'000'000LL)
      throw FormatError(std::string("value for ") + what + " is out of range",
                        (long long)cur.pos);
  }
  return int(value);
}

}  // namespace

Frame read_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image file: " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  ByteCursor cur{bytes};

  if (bytes.size() < 2) throw FormatError("file too short for PNM magic", 0);
  const char m0 = char(cur.get());
  const char m1 = char(cur.get());
  int channels = 0;
  if (m0 == 'P' && m1 == '5') channels = 1;
  else if (m0 == 'P' && m1 == '6') channels = 3;
  else throw FormatError("not a binary PGM (P5) or PPM (P6) file", 0);

  const int width = parse_int(cur, "width");
  const int height = parse_int(cur, "height");
  const int maxval = parse_int(cur, "maxval");
  if (width <= 0 || height <= 0)
    throw FormatError("image dimensions must be positive", (long long)cur.pos);
  if (maxval != 255)
    throw FormatError("unsupported maxval " + std::to_string(maxval) + " (only 255)",
                      (long long)cur.pos);
  // Exactly one whitespace byte separates the header from the payload.
  if (cur.eof() || !is_pnm_space(cur.peek()))
    throw FormatError("missing whitespace after maxval", (long long)cur.pos);
  cur.get();

  const std::size_t expected = std::size_t(width) * height * channels;
  if (bytes.size() - cur.pos < expected)
    throw FormatError("truncated pixel payload: need " + std::to_string(expected) +
                          " bytes, have " + std::to_string(bytes.size() - cur.pos),
                      (long long)bytes.size());

  Frame frame(height, width, channels);
  for (std::size_t i = 0; i < expected; ++i)
    frame.data[i] = float(bytes[cur.pos + i]) / 255.0f;
  return frame;
}

void write_image(const Frame& frame, const std::string& path) {
  frame.validate();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open image file for writing: " + path);

  char header[64];
  std::snprintf(header, sizeof(header), "P%c\n%d %d\n255\n",
                frame.channels == 1 ? '5' : '6', frame.width, frame.height);
  out << header;

  std::vector<unsigned char> payload(frame.size());
  for (std::size_t i = 0; i < frame.size(); ++i) {
    float v = frame.data[i];
    v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
    payload[i] = (unsigned char)std::lround(v * 255.0f);
  }
  out.write(reinterpret_cast<const char*>(payload.data()), payload.size());
  if (!out) throw IoError("failed writing image payload: " + path);
}

}  // namespace pvlab
