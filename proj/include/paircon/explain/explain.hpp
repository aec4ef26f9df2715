#pragma once

// Class activation maps over a trained encoder + linear classifier, plus
// red/blue overlay rendering with correctness-colored borders.
//
// The map for a target class is ReLU(sum_k alpha_k A_k), where A is the final
// convolutional feature map stack and alpha_k is the spatial mean of
// d logit_target / d A_k, bilinearly upsampled to the input resolution and
// max-normalized. With mean pooling feeding a linear head, that gradient is
// spatially uniform, so alpha_k equals the per-cell gradient itself; it is
// still computed through the classifier's backward pass so it tracks the
// real parameters.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "paircon/core/tensor.hpp"
#include "paircon/dataset/dataset.hpp"
#include "paircon/dataset/image_io.hpp"
#include "paircon/evalstats/evalstats.hpp"
#include "paircon/nn/encoder.hpp"

namespace paircon::explain {

struct ActivationMap {
  core::Tensor<float> values;  // [48, 48], in [0, 1], max = 1 unless all_zero
  data::EmotionLabel target_class = data::EmotionLabel::anger;
  data::EmotionLabel predicted_class = data::EmotionLabel::anger;
  bool correct = false;
  bool all_zero = false;  // the pre-normalization map was identically zero
};

// Bilinear resampling of a [h, w] map to [out_side, out_side] with half-pixel
// centers; resampling to the same size is the identity.
inline core::Tensor<float> bilinear_upsample(const core::Tensor<float>& map, int out_side) {
  if (map.ndim() != 2) throw std::invalid_argument("bilinear_upsample: expects a 2-D map");
  if (out_side <= 0) throw std::invalid_argument("bilinear_upsample: output side must be positive");
  const int64_t h = map.dim(0), w = map.dim(1);
  core::Tensor<float> out({out_side, out_side});
  for (int64_t oy = 0; oy < out_side; ++oy) {
    const double sy = (static_cast<double>(oy) + 0.5) * static_cast<double>(h) / out_side - 0.5;
    const double cy = std::clamp(sy, 0.0, static_cast<double>(h - 1));
    const int64_t y0 = static_cast<int64_t>(std::floor(cy));
    const int64_t y1 = std::min<int64_t>(y0 + 1, h - 1);
    const double fy = cy - static_cast<double>(y0);
    for (int64_t ox = 0; ox < out_side; ++ox) {
      const double sx = (static_cast<double>(ox) + 0.5) * static_cast<double>(w) / out_side - 0.5;
      const double cx = std::clamp(sx, 0.0, static_cast<double>(w - 1));
      const int64_t x0 = static_cast<int64_t>(std::floor(cx));
      const int64_t x1 = std::min<int64_t>(x0 + 1, w - 1);
      const double fx = cx - static_cast<double>(x0);
      const double top = (1.0 - fx) * map[y0 * w + x0] + fx * map[y0 * w + x1];
      const double bot = (1.0 - fx) * map[y1 * w + x0] + fx * map[y1 * w + x1];
      out[oy * out_side + ox] = static_cast<float>((1.0 - fy) * top + fy * bot);
    }
  }
  return out;
}

// ReLU(sum_k alpha_k A_k) upsampled to out_side and max-normalized. features
// is [C, h, w] or [1, C, h, w]; alpha has one weight per channel. If the
// rectified map is identically zero it is returned as-is and *all_zero set.
inline core::Tensor<float> cam_from_features(const core::Tensor<float>& features,
                                             const std::vector<float>& alpha, int out_side,
                                             bool* all_zero) {
  int64_t c = 0, h = 0, w = 0;
  if (features.ndim() == 3) {
    c = features.dim(0), h = features.dim(1), w = features.dim(2);
  } else if (features.ndim() == 4 && features.dim(0) == 1) {
    c = features.dim(1), h = features.dim(2), w = features.dim(3);
  } else {
    throw std::invalid_argument("cam_from_features: expects [C,h,w] or [1,C,h,w]");
  }
  if (static_cast<int64_t>(alpha.size()) != c)
    throw std::invalid_argument("cam_from_features: one weight per channel required");

  core::Tensor<float> raw({h, w});
  raw.fill(0.0f);
  for (int64_t k = 0; k < c; ++k) {
    const float* a = features.data() + k * h * w;
    for (int64_t j = 0; j < h * w; ++j) raw[j] += alpha[static_cast<size_t>(k)] * a[j];
  }
  for (int64_t j = 0; j < h * w; ++j) raw[j] = std::max(0.0f, raw[j]);

  auto up = bilinear_upsample(raw, out_side);
  float mx = 0.0f;
  for (int64_t j = 0; j < up.size(); ++j) mx = std::max(mx, up[j]);
  if (mx > 0.0f) {
    for (int64_t j = 0; j < up.size(); ++j) up[j] /= mx;
    if (all_zero != nullptr) *all_zero = false;
  } else {
    up.fill(0.0f);
    if (all_zero != nullptr) *all_zero = true;
  }
  return up;
}

// Activation map of `image` for `target` under the frozen model (eval mode).
inline ActivationMap grad_cam(nn::Encoder<float>& encoder,
                              nn::LinearClassifier<float>& classifier,
                              const data::LabeledImage& image, data::EmotionLabel target) {
  if (static_cast<int64_t>(image.pixels.size()) != data::kImagePixels)
    throw std::invalid_argument("grad_cam: image must be 48x48");
  core::Tensor<float> x({1, 1, data::kImageSide, data::kImageSide});
  std::copy(image.pixels.begin(), image.pixels.end(), x.data());

  const auto features = encoder.forward_features(x, /*train=*/false);
  const int64_t c = features.dim(1), hw = features.dim(2) * features.dim(3);

  // Pool exactly as the encoder does, then take logits and the gradient of
  // the target logit with respect to the pooled representation.
  core::Tensor<float> repr({1, c});
  for (int64_t k = 0; k < c; ++k) {
    double s = 0.0;
    const float* p = features.data() + k * hw;
    for (int64_t j = 0; j < hw; ++j) s += p[j];
    repr[k] = static_cast<float>(s / static_cast<double>(hw));
  }
  const auto logits = classifier.forward(repr);
  const int t = static_cast<int>(target);
  if (t < 0 || t >= static_cast<int>(logits.dim(1)))
    throw std::invalid_argument("grad_cam: target class out of range");

  core::Tensor<float> dlogits({1, logits.dim(1)});
  dlogits.fill(0.0f);
  dlogits[t] = 1.0f;
  const auto d_repr = classifier.backward(dlogits);  // [1, C] = d logit_t / d repr

  // Mean pooling spreads the gradient uniformly, so the spatial mean of
  // d logit / d A_k is d_repr[k] / (h*w).
  std::vector<float> alpha(static_cast<size_t>(c));
  for (int64_t k = 0; k < c; ++k)
    alpha[static_cast<size_t>(k)] =
        static_cast<float>(static_cast<double>(d_repr[k]) / static_cast<double>(hw));

  ActivationMap out;
  out.target_class = target;
  out.values = cam_from_features(features, alpha, data::kImageSide, &out.all_zero);
  std::vector<double> row(static_cast<size_t>(logits.dim(1)));
  for (int64_t j = 0; j < logits.dim(1); ++j) row[static_cast<size_t>(j)] = logits[j];
  out.predicted_class = static_cast<data::EmotionLabel>(evalstats::argmax_first(row));
  out.correct = out.predicted_class == out.target_class;
  return out;
}

// Grayscale image + activation map -> RGB bytes (row-major, 3 bytes/pixel) at
// 48*upscale per side: a blue(0)->red(1) colormap blended over the image at
// 50% opacity, framed by a border (thickness = upscale) that is green for a
// correct prediction and red otherwise.
inline std::vector<uint8_t> render_overlay(const std::vector<float>& gray,
                                           const ActivationMap& map, int upscale = 1) {
  if (static_cast<int64_t>(gray.size()) != data::kImagePixels)
    throw std::invalid_argument("render_overlay: image must be 48x48");
  if (map.values.ndim() != 2 || map.values.dim(0) != data::kImageSide ||
      map.values.dim(1) != data::kImageSide)
    throw std::invalid_argument("render_overlay: map must be 48x48");
  if (upscale < 1) throw std::invalid_argument("render_overlay: upscale must be >= 1");

  const int side = data::kImageSide * upscale;
  std::vector<uint8_t> rgb(static_cast<size_t>(side) * side * 3);
  const uint8_t border[3] = {static_cast<uint8_t>(map.correct ? 0 : 255),
                             static_cast<uint8_t>(map.correct ? 255 : 0), 0};
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x) {
      uint8_t* px = rgb.data() + (static_cast<size_t>(y) * side + x) * 3;
      if (y < upscale || x < upscale || y >= side - upscale || x >= side - upscale) {
        px[0] = border[0], px[1] = border[1], px[2] = border[2];
        continue;
      }
      const int sy = y / upscale, sx = x / upscale;
      const float v = std::clamp(map.values[sy * data::kImageSide + sx], 0.0f, 1.0f);
      const float g = std::clamp(gray[static_cast<size_t>(sy * data::kImageSide + sx)], 0.0f,
                                 1.0f) * 255.0f;
      px[0] = static_cast<uint8_t>(std::lround(0.5f * g + 0.5f * 255.0f * v));
      px[1] = static_cast<uint8_t>(std::lround(0.5f * g));
      px[2] = static_cast<uint8_t>(std::lround(0.5f * g + 0.5f * 255.0f * (1.0f - v)));
    }
  return rgb;
}

inline std::string overlay_filename(const std::string& image_id, data::EmotionLabel target,
                                    int repetition) {
  return image_id + "_" + data::label_name(target) + "_" + std::to_string(repetition) + ".png";
}

// Renders and writes <dir>/<image_id>_<target>_<rep>.png; returns the path.
inline std::string write_overlay(const std::string& dir, const data::LabeledImage& image,
                                 const ActivationMap& map, int repetition, int upscale = 4) {
  const std::string path = dir + "/" + overlay_filename(image.id, map.target_class, repetition);
  const auto rgb = render_overlay(image.pixels, map, upscale);
  const int side = data::kImageSide * upscale;
  data::write_png_rgb(path, rgb.data(), side, side);
  return path;
}

}  // namespace paircon::explain
