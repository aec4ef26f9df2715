// Procedural 7-class glyph corpora: small synthetic datasets whose classes
// are separable by a convolutional encoder, used to validate the pipeline at
// desk scale without any external data.
//
// The seven classes differ in oriented-edge and texture statistics
// (horizontal / vertical bars, a diagonal cross, a ring, a filled disc, a
// checkerboard, an axis-aligned plus), so they stay distinguishable after
// global average pooling and survive cropping, flips, and photometric
// jitter. Every geometry is mirror-symmetric about the vertical image axis;
// translation variety comes from the crop augmentation, not the generator.
//
// Two styles share the class geometry but differ strongly in pixel space:
// style A draws bright thin strokes on a dark ground, style B dark thick
// strokes on a light ground. Same-class images from the same style are
// therefore much more similar (after mean-centering) than images across
// styles, while the class cue itself transfers across styles.
#pragma once

#include <cstdint>
#include <vector>

#include "paircon/core/rng.hpp"
#include "paircon/dataset/dataset.hpp"

namespace paircon::synth {

enum class GlyphStyle { A, B };

// One 48x48 glyph in [0,1] for class index 0..6. Consumes rng draws for the
// per-instance nuisance parameters (position, scale, stroke and ground
// levels, pixel noise).
std::vector<float> render_glyph(GlyphStyle style, int class_index, core::Rng& rng);

// per_class images of each of the 7 classes. Image k of class c is a pure
// function of (style, seed, c, k); ids are "<ga|gb>_<label-name>_<k>". The
// dataset role and name follow the style (A -> role A "glyphs_a",
// B -> role B "glyphs_b").
data::LabeledDataset make_glyph_dataset(GlyphStyle style, int per_class, uint64_t seed);

}  // namespace paircon::synth
