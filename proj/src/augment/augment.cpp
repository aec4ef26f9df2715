#include "paircon/augment/augment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "paircon/core/interp.hpp"

namespace paircon::augment {

AugmentationDraw identity_draw() { return AugmentationDraw{}; }

AugmentationDraw draw(const AugmentationPolicy& policy, core::Rng& rng) {
  if (!(policy.crop_min_area_fraction > 0.0 && policy.crop_min_area_fraction <= 1.0))
    throw std::invalid_argument("crop_min_area_fraction must be in (0,1]");

  AugmentationDraw d;
  d.area_fraction = rng.uniform(policy.crop_min_area_fraction, 1.0);
  // Clamp the aspect so both crop sides fit inside the image at the sampled
  // area; with area = 1 this forces aspect = 1 and the crop is an identity.
  const double aspect_raw = rng.uniform(3.0 / 4.0, 4.0 / 3.0);
  const double lo = std::max(3.0 / 4.0, d.area_fraction);
  const double hi = std::min(4.0 / 3.0, 1.0 / d.area_fraction);
  d.aspect = std::clamp(aspect_raw, lo, hi);

  const int side = data::kImageSide;
  d.crop_w = static_cast<int>(std::lround(side * std::sqrt(d.area_fraction * d.aspect)));
  d.crop_h = static_cast<int>(std::lround(side * std::sqrt(d.area_fraction / d.aspect)));
  d.crop_w = std::clamp(d.crop_w, 1, side);
  d.crop_h = std::clamp(d.crop_h, 1, side);
  d.crop_x = static_cast<int>(rng.uniform_int(side - d.crop_w + 1));
  d.crop_y = static_cast<int>(rng.uniform_int(side - d.crop_h + 1));

  d.flip = rng.bernoulli(policy.hflip_probability);
  d.jitter = rng.bernoulli(policy.jitter_probability);
  if (d.jitter) {
    d.brightness = rng.uniform(1.0 - policy.jitter_brightness, 1.0 + policy.jitter_brightness);
    d.contrast = rng.uniform(1.0 - policy.jitter_contrast, 1.0 + policy.jitter_contrast);
    d.saturation = rng.uniform(1.0 - policy.jitter_saturation, 1.0 + policy.jitter_saturation);
    d.hue = rng.uniform(-policy.jitter_hue, policy.jitter_hue);
  }
  return d;
}

data::LabeledImage apply(const data::LabeledImage& image, const AugmentationDraw& d) {
  if (image.pixels.size() != static_cast<size_t>(data::kImagePixels))
    throw std::invalid_argument("apply: image is not 48x48");

  const int side = data::kImageSide;
  data::LabeledImage out;
  out.label = image.label;
  out.id = image.id;
  out.pixels.resize(static_cast<size_t>(data::kImagePixels));

  const bool identity_crop = d.crop_w == side && d.crop_h == side;
  if (identity_crop) {
    std::copy(image.pixels.begin(), image.pixels.end(), out.pixels.begin());
  } else {
    core::resize_bilinear_rect(image.pixels.data(), side, side, d.crop_x, d.crop_y, d.crop_w,
                               d.crop_h, out.pixels.data(), side, side);
  }

  if (d.flip) {
    for (int y = 0; y < side; ++y) {
      float* row = out.pixels.data() + static_cast<size_t>(y) * side;
      std::reverse(row, row + side);
    }
  }

  // Saturation and hue are identities on single-channel data; only
  // brightness and contrast act.
  if (d.contrast != 1.0 || d.brightness != 1.0) {
    const float c = static_cast<float>(d.contrast);
    const float b = static_cast<float>(d.brightness);
    for (auto& v : out.pixels) v = std::clamp(((v - 0.5f) * c + 0.5f) * b, 0.0f, 1.0f);
  }
  return out;
}

AugmentedDataset materialize(const data::LabeledDataset& train, int ratio,
                             const AugmentationPolicy& policy, uint64_t seed) {
  if (ratio < 1) throw std::invalid_argument("augmentation ratio must be >= 1");

  const auto n = static_cast<int64_t>(train.images.size());
  AugmentedDataset out;
  out.images.role = train.role;
  out.images.name = train.name + "/x" + std::to_string(ratio);
  out.images.images.resize(static_cast<size_t>(n) * static_cast<size_t>(ratio));
  out.origin_ids.resize(out.images.images.size());

  const core::Rng base(seed);
  for (int64_t k = 0; k < ratio; ++k) {
    for (int64_t i = 0; i < n; ++i) {
      const int64_t slot = k * n + i;
      core::Rng stream = base.derive(static_cast<uint64_t>(slot));
      const AugmentationDraw d = draw(policy, stream);
      auto& img = out.images.images[static_cast<size_t>(slot)];
      img = apply(train.images[static_cast<size_t>(i)], d);
      img.id = train.images[static_cast<size_t>(i)].id + "#" + std::to_string(k);
      out.origin_ids[static_cast<size_t>(slot)] = train.images[static_cast<size_t>(i)].id;
    }
  }
  return out;
}

}  // namespace paircon::augment
