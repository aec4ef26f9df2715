// Label-preserving stochastic augmentations and up-front materialization of
// augmented training sets at an integer ratio.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "paircon/core/rng.hpp"
#include "paircon/dataset/dataset.hpp"

namespace paircon::augment {

struct AugmentationPolicy {
  double crop_min_area_fraction = 0.8;  // in (0,1]; 1 makes the crop an identity
  double hflip_probability = 0.5;
  double jitter_probability = 0.8;
  double jitter_brightness = 0.4;
  double jitter_contrast = 0.4;
  double jitter_saturation = 0.4;  // inert on grayscale, still sampled
  double jitter_hue = 0.1;         // inert on grayscale, still sampled
};

// The realized random variables of one augmentation. Applying the same draw
// to the same image twice yields identical output.
struct AugmentationDraw {
  double area_fraction = 1.0;
  double aspect = 1.0;
  int crop_x = 0;
  int crop_y = 0;
  int crop_w = data::kImageSide;
  int crop_h = data::kImageSide;
  bool flip = false;
  bool jitter = false;
  double brightness = 1.0;
  double contrast = 1.0;
  double saturation = 1.0;
  double hue = 0.0;
};

// An identity transformation (used by tests and as a neutral default).
AugmentationDraw identity_draw();

// Samples a draw: area ~ U[crop_min_area_fraction, 1]; aspect ~ U[3/4, 4/3]
// clamped so the crop fits; integer offsets uniform over valid positions;
// flip ~ Bernoulli(hflip_probability); jitter ~ Bernoulli(jitter_probability)
// gating brightness/contrast factors ~ U[1-j, 1+j].
AugmentationDraw draw(const AugmentationPolicy& policy, core::Rng& rng);

// Crop + bilinear resize back to 48x48, optional horizontal flip, then
// pixel <- clamp(((pixel - 0.5) * contrast + 0.5) * brightness, 0, 1).
// Label and id are preserved.
data::LabeledImage apply(const data::LabeledImage& image, const AugmentationDraw& d);

// ratio * |train| augmented images plus a parallel origin-id list. Output
// index k * |train| + i holds pass k of train image i; per-image draws come
// from counter-derived rng streams so the result is order-independent.
struct AugmentedDataset {
  data::LabeledDataset images;          // ids are "<origin>#<pass>"
  std::vector<std::string> origin_ids;  // parallel to images.images
};

AugmentedDataset materialize(const data::LabeledDataset& train, int ratio,
                             const AugmentationPolicy& policy, uint64_t seed);

}  // namespace paircon::augment
