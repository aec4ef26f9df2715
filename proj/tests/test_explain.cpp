#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <vector>

#include "paircon/explain/explain.hpp"

using namespace paircon;
using core::Tensor;

namespace {

data::LabeledImage make_image(uint64_t seed) {
  core::Rng rng(seed);
  data::LabeledImage img;
  img.label = data::EmotionLabel::happiness;
  img.id = "img" + std::to_string(seed);
  img.pixels.resize(static_cast<size_t>(data::kImagePixels));
  for (auto& p : img.pixels) p = static_cast<float>(rng.uniform(0.0, 1.0));
  return img;
}

}  // namespace

TEST_CASE("bilinear upsampling is identity at equal size and exact on a hand case") {
  Tensor<float> map({2, 2});
  map[0] = 0.0f, map[1] = 1.0f, map[2] = 2.0f, map[3] = 3.0f;

  const auto same = explain::bilinear_upsample(map, 2);
  for (int64_t i = 0; i < 4; ++i) CHECK(same[i] == map[i]);

  // Half-pixel-center resampling of [[0,1],[2,3]] to 4x4: corners clamp to
  // the source corners, interior cells mix with weights 1/4 and 3/4.
  const auto up = explain::bilinear_upsample(map, 4);
  CHECK(up[0 * 4 + 0] == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(up[0 * 4 + 3] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(up[3 * 4 + 0] == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(up[3 * 4 + 3] == doctest::Approx(3.0).epsilon(1e-6));
  CHECK(up[1 * 4 + 1] == doctest::Approx(0.75).epsilon(1e-6));
  CHECK(up[2 * 4 + 2] == doctest::Approx(2.25).epsilon(1e-6));

  Tensor<float> flat({3, 5});
  flat.fill(0.42f);
  const auto big = explain::bilinear_upsample(flat, 48);
  for (int64_t i = 0; i < big.size(); ++i) CHECK(big[i] == doctest::Approx(0.42).epsilon(1e-6));
}

TEST_CASE("a single feature map with uniform positive weight gives its rectified shape") {
  // Two channels; only the first carries weight, the second must not leak in.
  Tensor<float> features({2, 4, 4});
  core::Rng rng(7);
  for (int64_t i = 0; i < features.size(); ++i)
    features[i] = static_cast<float>(rng.uniform(-1.0, 1.0));

  bool all_zero = true;
  const auto map = explain::cam_from_features(features, {0.3f, 0.0f}, 48, &all_zero);
  CHECK_FALSE(all_zero);

  // Oracle: rectify channel 0, upsample, divide by the max.
  Tensor<float> expect({4, 4});
  for (int64_t i = 0; i < 16; ++i) expect[i] = std::max(0.0f, 0.3f * features[i]);
  auto up = explain::bilinear_upsample(expect, 48);
  float mx = 0.0f;
  for (int64_t i = 0; i < up.size(); ++i) mx = std::max(mx, up[i]);
  REQUIRE(mx > 0.0f);
  for (int64_t i = 0; i < up.size(); ++i)
    CHECK(map[i] == doctest::Approx(up[i] / mx).epsilon(1e-5));

  // Negative contributions are exactly zero after rectification (same-size
  // resampling is the identity, so the zeros survive untouched).
  const auto neg = explain::cam_from_features(features, {-1.0f, 0.0f}, 4, &all_zero);
  for (int64_t i = 0; i < 16; ++i)
    if (features[i] > 0.0f) CHECK(neg[i] == 0.0f);
}

TEST_CASE("map values stay in [0,1] with max 1 and normalization is idempotent") {
  Tensor<float> features({3, 6, 6});
  core::Rng rng(11);
  for (int64_t i = 0; i < features.size(); ++i)
    features[i] = static_cast<float>(rng.uniform(-2.0, 2.0));
  bool all_zero = true;
  const auto map = explain::cam_from_features(features, {0.5f, -0.2f, 0.9f}, 48, &all_zero);
  REQUIRE_FALSE(all_zero);
  float mx = 0.0f;
  for (int64_t i = 0; i < map.size(); ++i) {
    CHECK(map[i] >= 0.0f);
    CHECK(map[i] <= 1.0f);
    mx = std::max(mx, map[i]);
  }
  CHECK(mx == 1.0f);

  // Re-normalizing an already normalized map changes nothing: rectification
  // is a no-op on non-negative values, same-size resampling is the identity,
  // and the max is already 1.
  bool flag = true;
  Tensor<float> one_channel = map;
  one_channel.reshape({1, 48, 48});
  const auto again = explain::cam_from_features(one_channel, {1.0f}, 48, &flag);
  CHECK_FALSE(flag);
  for (int64_t i = 0; i < map.size(); ++i) CHECK(again[i] == map[i]);
}

TEST_CASE("a target logit independent of the input yields a flagged all-zero map") {
  nn::Encoder<float> enc(nn::tiny_cnn_config(50));
  core::Rng rng(51);
  nn::LinearClassifier<float> clf(64, 7, rng);
  // Zero the weight row of the target class: its logit is then a constant
  // (bias only), so every feature-map gradient vanishes.
  const int target = 2;
  auto& w = clf.weight();
  for (int64_t k = 0; k < w.dim(1); ++k) w[target * w.dim(1) + k] = 0.0f;

  const auto img = make_image(1);
  const auto map = explain::grad_cam(enc, clf, img, static_cast<data::EmotionLabel>(target));
  CHECK(map.all_zero);
  for (int64_t i = 0; i < map.values.size(); ++i) CHECK(map.values[i] == 0.0f);
  CHECK(map.target_class == data::EmotionLabel::fear);
}

TEST_CASE("feature-map gradients match central finite differences on tiny_cnn") {
  nn::Encoder<float> enc(nn::tiny_cnn_config(60));
  core::Rng rng(61);
  nn::LinearClassifier<float> clf(64, 7, rng);
  const auto img = make_image(2);
  const int target = 4;

  Tensor<float> x({1, 1, data::kImageSide, data::kImageSide});
  std::copy(img.pixels.begin(), img.pixels.end(), x.data());
  auto features = enc.forward_features(x, false);
  const int64_t c = features.dim(1), h = features.dim(2), w = features.dim(3);
  const double hw = static_cast<double>(h * w);

  // The tail from the feature maps to a logit is linear (mean pooling plus
  // the linear classifier), so central differences computed in double are
  // exact; evaluating the tail in float would drown the tiny per-cell logit
  // change (~1e-6) in rounding noise.
  const auto& wt = clf.weight();
  auto logit_at = [&](const Tensor<float>& f) {
    double out = static_cast<double>(clf.bias()[target]);
    for (int64_t k = 0; k < c; ++k) {
      double s = 0.0;
      const float* p = f.data() + k * h * w;
      for (int64_t j = 0; j < h * w; ++j) s += static_cast<double>(p[j]);
      out += static_cast<double>(wt[target * c + k]) * (s / hw);
    }
    return out;
  };

  // Prime the classifier cache so backward has a forward to differentiate.
  Tensor<float> repr0({1, c});
  for (int64_t k = 0; k < c; ++k) {
    double s = 0.0;
    const float* p = features.data() + k * h * w;
    for (int64_t j = 0; j < h * w; ++j) s += static_cast<double>(p[j]);
    repr0[k] = static_cast<float>(s / hw);
  }
  (void)clf.forward(repr0);
  Tensor<float> onehot({1, 7});
  onehot.fill(0.0f);
  onehot[target] = 1.0f;
  const auto d_repr = clf.backward(onehot);

  // Sample feature cells across all channels; the tail is linear in the
  // features, so central differences are exact up to float rounding.
  core::Rng pick(62);
  const double step = 1e-3;
  for (int s = 0; s < 60; ++s) {
    const int64_t k = pick.uniform_int(c);
    const int64_t j = pick.uniform_int(h * w);
    const double analytic = static_cast<double>(d_repr[k]) / hw;
    Tensor<float> fp = features, fm = features;
    fp[k * h * w + j] += static_cast<float>(step);
    fm[k * h * w + j] -= static_cast<float>(step);
    const double numeric = (logit_at(fp) - logit_at(fm)) / (2.0 * step);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    CHECK(std::abs(analytic - numeric) / denom < 1e-3);
  }
}

TEST_CASE("grad_cam is deterministic and reports the predicted class") {
  nn::Encoder<float> enc(nn::tiny_cnn_config(70));
  core::Rng rng(71);
  nn::LinearClassifier<float> clf(64, 7, rng);
  const auto img = make_image(3);

  const auto a = explain::grad_cam(enc, clf, img, data::EmotionLabel::anger);
  const auto b = explain::grad_cam(enc, clf, img, data::EmotionLabel::anger);
  REQUIRE(a.values.size() == b.values.size());
  for (int64_t i = 0; i < a.values.size(); ++i) CHECK(a.values[i] == b.values[i]);

  // Predicted class equals the argmax of independently recomputed logits.
  Tensor<float> x({1, 1, data::kImageSide, data::kImageSide});
  std::copy(img.pixels.begin(), img.pixels.end(), x.data());
  const auto logits = clf.forward(enc.forward(x, false));
  std::vector<double> row(7);
  for (int64_t j = 0; j < 7; ++j) row[static_cast<size_t>(j)] = logits[j];
  CHECK(static_cast<int>(a.predicted_class) == evalstats::argmax_first(row));
  CHECK(a.correct == (a.predicted_class == a.target_class));

  // Forcing the prediction by a large bias makes target==predicted correct.
  clf.bias().fill(0.0f);
  clf.bias()[3] = 100.0f;
  const auto forced = explain::grad_cam(enc, clf, img, data::EmotionLabel::happiness);
  CHECK(forced.predicted_class == data::EmotionLabel::happiness);
  CHECK(forced.correct);
}

TEST_CASE("overlay colors blend blue to red and the border encodes correctness") {
  explain::ActivationMap map;
  map.values = Tensor<float>({48, 48});
  map.values.fill(0.0f);
  map.correct = true;
  std::vector<float> gray(static_cast<size_t>(data::kImagePixels), 0.5f);

  // All-zero map: every interior pixel is blue-tinted.
  auto rgb = explain::render_overlay(gray, map, 1);
  REQUIRE(rgb.size() == 48u * 48u * 3u);
  for (int y = 1; y < 47; ++y)
    for (int x = 1; x < 47; ++x) {
      const uint8_t* px = rgb.data() + (y * 48 + x) * 3;
      CHECK(static_cast<int>(px[2]) - static_cast<int>(px[0]) >= 127);  // B >> R
    }
  // Correct prediction: 1-pixel green border at upscale 1.
  for (int i = 0; i < 48; ++i) {
    for (const int idx : {i, 47 * 48 + i, i * 48, i * 48 + 47}) {
      CHECK(rgb[static_cast<size_t>(idx) * 3 + 0] == 0);
      CHECK(rgb[static_cast<size_t>(idx) * 3 + 1] == 255);
      CHECK(rgb[static_cast<size_t>(idx) * 3 + 2] == 0);
    }
  }

  // A single hot pixel is red-tinted; everything else stays blue-tinted.
  map.values[5 * 48 + 7] = 1.0f;
  map.correct = false;
  rgb = explain::render_overlay(gray, map, 1);
  const uint8_t* hot = rgb.data() + (5 * 48 + 7) * 3;
  CHECK(static_cast<int>(hot[0]) - static_cast<int>(hot[2]) >= 127);  // R >> B
  const uint8_t* cold = rgb.data() + (20 * 48 + 20) * 3;
  CHECK(static_cast<int>(cold[2]) > static_cast<int>(cold[0]));
  // Incorrect prediction: red border.
  CHECK(rgb[0] == 255);
  CHECK(rgb[1] == 0);

  // Upscaling replicates pixels and thickens the border to match.
  const auto big = explain::render_overlay(gray, map, 3);
  REQUIRE(big.size() == 144u * 144u * 3u);
  for (int dy = 0; dy < 3; ++dy)
    for (int dx = 0; dx < 3; ++dx) {
      const uint8_t* px = big.data() + ((15 + dy) * 144 + (21 + dx)) * 3;  // source (5,7)
      CHECK(static_cast<int>(px[0]) - static_cast<int>(px[2]) >= 127);
    }
  const uint8_t* ring = big.data() + (2 * 144 + 70) * 3;  // row 2 is still border
  CHECK(ring[0] == 255);
}

TEST_CASE("overlays are written as PNG files with the documented name") {
  CHECK(explain::overlay_filename("img7", data::EmotionLabel::happiness, 3) ==
        "img7_happiness_3.png");

  nn::Encoder<float> enc(nn::tiny_cnn_config(80));
  core::Rng rng(81);
  nn::LinearClassifier<float> clf(64, 7, rng);
  const auto img = make_image(4);
  const auto map = explain::grad_cam(enc, clf, img, data::EmotionLabel::sadness);

  char dir[] = "/tmp/explainXXXXXX";
  REQUIRE(mkdtemp(dir) != nullptr);
  const auto path = explain::write_overlay(dir, img, map, 0, 2);
  CHECK(path == std::string(dir) + "/img4_sadness_0.png");

  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  unsigned char magic[8] = {};
  in.read(reinterpret_cast<char*>(magic), 8);
  CHECK(magic[0] == 0x89);
  CHECK(magic[1] == 'P');
  CHECK(magic[2] == 'N');
  CHECK(magic[3] == 'G');
  std::remove(path.c_str());
  rmdir(dir);
}
