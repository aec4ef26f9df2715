#include "paircon/dataset/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <opencv2/imgcodecs.hpp>

namespace paircon::data {
namespace {

std::string lower_ext(const std::string& filename) {
  const auto pos = filename.rfind('.');
  if (pos == std::string::npos) return "";
  std::string ext = filename.substr(pos + 1);
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw std::runtime_error("image '" + path + "': " + what);
}

// Reads one whitespace-delimited token, skipping '#' comment lines.
std::string pnm_token(std::istream& in) {
  std::string tok;
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (std::isspace(c)) {
      c = in.get();
    } else {
      break;
    }
  }
  while (c != EOF && !std::isspace(c)) {
    tok.push_back(static_cast<char>(c));
    c = in.get();
  }
  return tok;
}

long pnm_int(std::istream& in, const std::string& path, const char* field) {
  const std::string tok = pnm_token(in);
  try {
    size_t used = 0;
    const long v = std::stol(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    fail(path, std::string("bad ") + field + " in PGM header");
  }
}

}  // namespace

bool has_image_extension(const std::string& filename) {
  const std::string ext = lower_ext(filename);
  return ext == "png" || ext == "jpg" || ext == "jpeg" || ext == "pgm";
}

DecodedImage read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "cannot open");
  const std::string magic = pnm_token(in);
  if (magic != "P5" && magic != "P2") fail(path, "not a PGM (expected P5 or P2)");
  const long w = pnm_int(in, path, "width");
  const long h = pnm_int(in, path, "height");
  const long maxval = pnm_int(in, path, "maxval");
  if (w <= 0 || h <= 0) fail(path, "non-positive dimensions");
  if (maxval <= 0 || maxval > 65535) fail(path, "unsupported maxval");

  DecodedImage img;
  img.height = static_cast<int>(h);
  img.width = static_cast<int>(w);
  img.channels = 1;
  img.values.resize(static_cast<size_t>(w * h));
  const float inv = 1.0f / static_cast<float>(maxval);

  if (magic == "P2") {
    for (auto& v : img.values) v = static_cast<float>(pnm_int(in, path, "pixel")) * inv;
    return img;
  }
  // P5: header ends with exactly one whitespace byte, already consumed by
  // pnm_token's trailing read.
  if (maxval < 256) {
    std::vector<uint8_t> raw(static_cast<size_t>(w * h));
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size())) fail(path, "truncated pixel data");
    for (size_t i = 0; i < raw.size(); ++i) img.values[i] = static_cast<float>(raw[i]) * inv;
  } else {
    std::vector<uint8_t> raw(static_cast<size_t>(w * h) * 2);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size())) fail(path, "truncated pixel data");
    for (size_t i = 0; i < img.values.size(); ++i) {
      const unsigned v = (static_cast<unsigned>(raw[2 * i]) << 8) | raw[2 * i + 1];
      img.values[i] = static_cast<float>(v) * inv;
    }
  }
  return img;
}

DecodedImage read_image(const std::string& path) {
  const std::string ext = lower_ext(path);
  if (ext == "pgm") return read_pgm(path);
  if (ext != "png" && ext != "jpg" && ext != "jpeg") fail(path, "unsupported extension");

  cv::Mat mat = cv::imread(path, cv::IMREAD_UNCHANGED);
  if (mat.empty()) fail(path, "cannot decode");
  if (mat.depth() != CV_8U) {
    cv::Mat conv;
    const double scale = mat.depth() == CV_16U ? 255.0 / 65535.0 : 255.0;
    mat.convertTo(conv, CV_8U, scale);
    mat = conv;
  }
  const int in_ch = mat.channels();
  if (in_ch != 1 && in_ch != 3 && in_ch != 4) fail(path, "unsupported channel count");
  const int out_ch = in_ch == 1 ? 1 : 3;  // alpha is dropped

  DecodedImage img;
  img.height = mat.rows;
  img.width = mat.cols;
  img.channels = out_ch;
  img.values.resize(static_cast<size_t>(mat.rows) * mat.cols * out_ch);
  constexpr float kInv = 1.0f / 255.0f;
  for (int y = 0; y < mat.rows; ++y) {
    const uint8_t* row = mat.ptr<uint8_t>(y);
    for (int x = 0; x < mat.cols; ++x) {
      const size_t base = (static_cast<size_t>(y) * mat.cols + x) * out_ch;
      if (out_ch == 1) {
        img.values[base] = static_cast<float>(row[x]) * kInv;
      } else {
        // OpenCV decodes BGR(A); callers expect RGB.
        img.values[base + 0] = static_cast<float>(row[x * in_ch + 2]) * kInv;
        img.values[base + 1] = static_cast<float>(row[x * in_ch + 1]) * kInv;
        img.values[base + 2] = static_cast<float>(row[x * in_ch + 0]) * kInv;
      }
    }
  }
  return img;
}

void write_pgm(const std::string& path, const float* pixels, int height, int width) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(path, "cannot open for writing");
  out << "P5\n" << width << " " << height << "\n255\n";
  std::vector<uint8_t> raw(static_cast<size_t>(height) * width);
  for (size_t i = 0; i < raw.size(); ++i) {
    const float v = std::clamp(pixels[i], 0.0f, 1.0f);
    raw[i] = static_cast<uint8_t>(std::lround(v * 255.0f));
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) fail(path, "write failed");
}

void write_png_rgb(const std::string& path, const uint8_t* rgb, int height, int width) {
  cv::Mat mat(height, width, CV_8UC3);
  for (int y = 0; y < height; ++y) {
    uint8_t* row = mat.ptr<uint8_t>(y);
    for (int x = 0; x < width; ++x) {
      const size_t base = (static_cast<size_t>(y) * width + x) * 3;
      row[3 * x + 0] = rgb[base + 2];
      row[3 * x + 1] = rgb[base + 1];
      row[3 * x + 2] = rgb[base + 0];
    }
  }
  if (!cv::imwrite(path, mat)) fail(path, "PNG write failed");
}

}  // namespace paircon::data
