// Image codecs: a self-contained PGM (P5/P2) reader/writer plus PNG/JPEG via
// the system codec library. All pixel values cross this boundary as floats
// in [0,1], HWC order.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace paircon::data {

struct DecodedImage {
  int height = 0;
  int width = 0;
  int channels = 0;            // 1 (gray) or 3 (RGB)
  std::vector<float> values;   // height * width * channels, in [0,1]
};

// Dispatches on extension: .pgm handled in-repo, .png/.jpg/.jpeg by the
// system codecs. Throws std::runtime_error naming the file on failure.
DecodedImage read_image(const std::string& path);

DecodedImage read_pgm(const std::string& path);

// 8-bit binary PGM; values are clamped to [0,1] and rounded to 255 levels.
void write_pgm(const std::string& path, const float* pixels, int height, int width);

// 8-bit RGB PNG (interleaved buffer of height * width * 3 bytes).
void write_png_rgb(const std::string& path, const uint8_t* rgb, int height, int width);

bool has_image_extension(const std::string& filename);

}  // namespace paircon::data
