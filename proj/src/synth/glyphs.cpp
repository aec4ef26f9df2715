#include "paircon/synth/glyphs.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace paircon::synth {
namespace {

constexpr int kSide = data::kImageSide;

struct Brush {
  float fg = 1.0f;        // stroke intensity
  float bg = 0.0f;        // ground intensity
  float thickness = 2.0f; // stroke width in pixels
  float cx = 0.0f;        // glyph center
  float cy = 0.0f;
  float radius = 0.0f;    // glyph half-extent
};

float sq(float v) { return v * v; }

// Distance from (x, y) to the segment (x0, y0)-(x1, y1).
float segment_distance(float x, float y, float x0, float y0, float x1, float y1) {
  const float dx = x1 - x0, dy = y1 - y0;
  const float len2 = dx * dx + dy * dy;
  float t = len2 > 0.0f ? ((x - x0) * dx + (y - y0) * dy) / len2 : 0.0f;
  t = std::clamp(t, 0.0f, 1.0f);
  return std::sqrt(sq(x - (x0 + t * dx)) + sq(y - (y0 + t * dy)));
}

void stroke_segment(std::vector<float>& img, const Brush& b, float x0, float y0, float x1,
                    float y1) {
  const float half = 0.5f * b.thickness;
  for (int y = 0; y < kSide; ++y)
    for (int x = 0; x < kSide; ++x)
      if (segment_distance(static_cast<float>(x), static_cast<float>(y), x0, y0, x1, y1) <= half)
        img[static_cast<size_t>(y * kSide + x)] = b.fg;
}

// Three parallel bars across the glyph extent, horizontal or vertical.
void draw_bars(std::vector<float>& img, const Brush& b, bool horizontal) {
  for (int k = -1; k <= 1; ++k) {
    const float offset = static_cast<float>(k) * b.radius * 0.85f;
    if (horizontal)
      stroke_segment(img, b, b.cx - b.radius, b.cy + offset, b.cx + b.radius, b.cy + offset);
    else
      stroke_segment(img, b, b.cx + offset, b.cy - b.radius, b.cx + offset, b.cy + b.radius);
  }
}

void draw_cross(std::vector<float>& img, const Brush& b) {
  stroke_segment(img, b, b.cx - b.radius, b.cy - b.radius, b.cx + b.radius, b.cy + b.radius);
  stroke_segment(img, b, b.cx + b.radius, b.cy - b.radius, b.cx - b.radius, b.cy + b.radius);
}

void draw_ring(std::vector<float>& img, const Brush& b) {
  const float half = 0.5f * b.thickness;
  for (int y = 0; y < kSide; ++y)
    for (int x = 0; x < kSide; ++x) {
      const float d = std::sqrt(sq(static_cast<float>(x) - b.cx) + sq(static_cast<float>(y) - b.cy));
      if (std::fabs(d - b.radius) <= half) img[static_cast<size_t>(y * kSide + x)] = b.fg;
    }
}

void draw_disc(std::vector<float>& img, const Brush& b) {
  for (int y = 0; y < kSide; ++y)
    for (int x = 0; x < kSide; ++x) {
      const float d = std::sqrt(sq(static_cast<float>(x) - b.cx) + sq(static_cast<float>(y) - b.cy));
      if (d <= b.radius) img[static_cast<size_t>(y * kSide + x)] = b.fg;
    }
}

// Checkerboard restricted to the glyph's square extent; the texture (cell
// frequency, 50% duty) is the cue, so the flip-induced polarity swap of the
// cells does not change the class.
void draw_checker(std::vector<float>& img, const Brush& b) {
  const float cell = std::max(3.0f, b.radius / 2.5f);
  for (int y = 0; y < kSide; ++y)
    for (int x = 0; x < kSide; ++x) {
      const float ux = static_cast<float>(x) - b.cx, uy = static_cast<float>(y) - b.cy;
      if (std::fabs(ux) > b.radius || std::fabs(uy) > b.radius) continue;
      const int ix = static_cast<int>(std::floor((ux + b.radius) / cell));
      const int iy = static_cast<int>(std::floor((uy + b.radius) / cell));
      if ((ix + iy) % 2 == 0) img[static_cast<size_t>(y * kSide + x)] = b.fg;
    }
}

void draw_triangle(std::vector<float>& img, const Brush& b) {
  const float ax = b.cx, ay = b.cy - b.radius;                    // apex
  const float lx = b.cx - b.radius, ly = b.cy + b.radius * 0.8f;  // base corners
  const float rx = b.cx + b.radius, ry = b.cy + b.radius * 0.8f;
  stroke_segment(img, b, ax, ay, lx, ly);
  stroke_segment(img, b, ax, ay, rx, ry);
  stroke_segment(img, b, lx, ly, rx, ry);
}

}  // namespace

std::vector<float> render_glyph(GlyphStyle style, int class_index, core::Rng& rng) {
  if (class_index < 0 || class_index >= data::kNumClasses)
    throw std::invalid_argument("render_glyph: class index " + std::to_string(class_index) +
                                " outside 0-6");

  Brush b;
  const float mid = static_cast<float>(kSide - 1) / 2.0f;
  b.cx = mid + static_cast<float>(rng.uniform(-3.0, 3.0));
  b.cy = mid + static_cast<float>(rng.uniform(-3.0, 3.0));
  b.radius = static_cast<float>(rng.uniform(13.0, 17.0));
  if (style == GlyphStyle::A) {
    b.fg = static_cast<float>(rng.uniform(0.75, 0.95));
    b.bg = static_cast<float>(rng.uniform(0.08, 0.22));
    b.thickness = static_cast<float>(rng.uniform(2.0, 3.0));
  } else {
    b.fg = static_cast<float>(rng.uniform(0.05, 0.25));
    b.bg = static_cast<float>(rng.uniform(0.78, 0.92));
    b.thickness = static_cast<float>(rng.uniform(4.0, 5.5));
  }

  std::vector<float> img(static_cast<size_t>(data::kImagePixels), b.bg);
  switch (class_index) {
    case 0: draw_bars(img, b, /*horizontal=*/true); break;
    case 1: draw_bars(img, b, /*horizontal=*/false); break;
    case 2: draw_cross(img, b); break;
    case 3: draw_ring(img, b); break;
    case 4: draw_disc(img, b); break;
    case 5: draw_checker(img, b); break;
    case 6: draw_triangle(img, b); break;
    default: break;
  }

  const float noise = style == GlyphStyle::A ? 0.02f : 0.04f;
  for (auto& v : img) {
    v += static_cast<float>(rng.uniform(-noise, noise));
    v = std::clamp(v, 0.0f, 1.0f);
  }
  return img;
}

data::LabeledDataset make_glyph_dataset(GlyphStyle style, int per_class, uint64_t seed) {
  if (per_class <= 0) throw std::invalid_argument("make_glyph_dataset: per_class must be positive");

  data::LabeledDataset out;
  out.role = style == GlyphStyle::A ? data::DatasetRole::A : data::DatasetRole::B;
  out.name = style == GlyphStyle::A ? "glyphs_a" : "glyphs_b";
  const char* prefix = style == GlyphStyle::A ? "ga" : "gb";

  const core::Rng root(seed);
  for (int c = 0; c < data::kNumClasses; ++c) {
    for (int k = 0; k < per_class; ++k) {
      // One derived stream per image keyed by (class, index) so any image is
      // reproducible in isolation.
      core::Rng rng = root.derive(static_cast<uint64_t>(c) * 1000003u + static_cast<uint64_t>(k));
      data::LabeledImage img;
      img.label = static_cast<data::EmotionLabel>(c);
      img.pixels = render_glyph(style, c, rng);
      img.id = std::string(prefix) + "_" + data::label_name(img.label) + "_" + std::to_string(k);
      out.images.push_back(std::move(img));
    }
  }
  return out;
}

}  // namespace paircon::synth
