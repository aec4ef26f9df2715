// Bilinear resampling with half-pixel centers. Sampling a rectangle at its
// own size copies it exactly, which several callers rely on.
#pragma once

#include <algorithm>
#include <cmath>

namespace paircon::core {

// Resamples the rw x rh rectangle at (x0, y0) of an sh x sw single-channel
// image into a dh x dw destination. Source coordinates are clamped to the
// rectangle, so nothing outside it is read.
inline void resize_bilinear_rect(const float* src, int sh, int sw, int x0, int y0, int rw,
                                 int rh, float* dst, int dh, int dw) {
  (void)sh;
  const double sy = static_cast<double>(rh) / dh;
  const double sx = static_cast<double>(rw) / dw;
  for (int dy = 0; dy < dh; ++dy) {
    double fy = (dy + 0.5) * sy - 0.5;
    fy = std::clamp(fy, 0.0, static_cast<double>(rh - 1));
    const int iy = static_cast<int>(fy);
    const int iy1 = std::min(iy + 1, rh - 1);
    const double wy = fy - iy;
    for (int dx = 0; dx < dw; ++dx) {
      double fx = (dx + 0.5) * sx - 0.5;
      fx = std::clamp(fx, 0.0, static_cast<double>(rw - 1));
      const int ix = static_cast<int>(fx);
      const int ix1 = std::min(ix + 1, rw - 1);
      const double wx = fx - ix;
      const double v00 = src[(y0 + iy) * sw + (x0 + ix)];
      const double v01 = src[(y0 + iy) * sw + (x0 + ix1)];
      const double v10 = src[(y0 + iy1) * sw + (x0 + ix)];
      const double v11 = src[(y0 + iy1) * sw + (x0 + ix1)];
      const double top = v00 + (v01 - v00) * wx;
      const double bot = v10 + (v11 - v10) * wx;
      dst[dy * dw + dx] = static_cast<float>(top + (bot - top) * wy);
    }
  }
}

inline void resize_bilinear(const float* src, int sh, int sw, float* dst, int dh, int dw) {
  resize_bilinear_rect(src, sh, sw, 0, 0, sw, sh, dst, dh, dw);
}

}  // namespace paircon::core
