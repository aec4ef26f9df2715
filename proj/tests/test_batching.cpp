#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "paircon/batching/batching.hpp"
#include "paircon/core/rng.hpp"

using namespace paircon;

namespace {

data::LabeledImage make_image(uint64_t seed, data::EmotionLabel label, const std::string& id) {
  core::Rng rng(seed);
  data::LabeledImage img;
  img.pixels.resize(data::kImagePixels);
  for (auto& v : img.pixels) v = static_cast<float>(rng.uniform());
  img.label = label;
  img.id = id;
  return img;
}

data::LabeledDataset make_dataset(int per_class, uint64_t seed, data::DatasetRole role,
                                  const std::string& prefix) {
  data::LabeledDataset out;
  out.role = role;
  uint64_t s = seed;
  for (int c = 0; c < data::kNumClasses; ++c)
    for (int i = 0; i < per_class; ++i)
      out.images.push_back(make_image(s++, static_cast<data::EmotionLabel>(c),
                                      prefix + std::to_string(c) + "_" + std::to_string(i)));
  return out;
}

const augment::AugmentationPolicy kIdentityPolicy = {1.0, 0.0, 0.0, 0.4, 0.4, 0.4, 0.1};

}  // namespace

TEST_CASE("two_view structure") {
  const auto a = make_dataset(3, 1, data::DatasetRole::A, "a");
  core::Rng rng(10);
  const auto batch = batching::compose_two_view(a, 4, {}, rng);
  CHECK(batch.size() == 4);
  CHECK(batch.strategy == batching::Strategy::two_view);
  batching::validate(batch);

  std::set<std::string> origins;
  for (const auto& e : batch.entries) origins.insert(e.origin_id);
  CHECK(origins.size() == 2);  // two distinct origin images
  CHECK(batch.pairing == std::vector<int>{1, 0, 3, 2});
}

TEST_CASE("two_view degenerate b=2 uses one origin twice") {
  const auto a = make_dataset(1, 2, data::DatasetRole::A, "a");
  core::Rng rng(11);
  const auto batch = batching::compose_two_view(a, 2, {}, rng);
  CHECK(batch.size() == 2);
  CHECK(batch.entries[0].origin_id == batch.entries[1].origin_id);
  batching::validate(batch);
}

TEST_CASE("two_view with identity policy gives pixel-identical views") {
  const auto a = make_dataset(2, 3, data::DatasetRole::A, "a");
  core::Rng rng(12);
  const auto batch = batching::compose_two_view(a, 4, kIdentityPolicy, rng);
  CHECK(batch.entries[0].image == batch.entries[1].image);
  CHECK(batch.entries[2].image == batch.entries[3].image);
}

TEST_CASE("two_view rejects odd or oversized batches") {
  const auto a = make_dataset(1, 4, data::DatasetRole::A, "a");
  core::Rng rng(13);
  CHECK_THROWS_AS(batching::compose_two_view(a, 3, {}, rng), std::invalid_argument);
  CHECK_THROWS_AS(batching::compose_two_view(a, 32, {}, rng), std::invalid_argument);
}

TEST_CASE("union keeps exact 50/50 source counts across 100 batches") {
  const auto a = make_dataset(4, 5, data::DatasetRole::A, "a");
  const auto b = make_dataset(4, 6, data::DatasetRole::B, "b");
  core::Rng rng(14);
  for (int i = 0; i < 100; ++i) {
    const auto batch = batching::compose_union(a, b, 8, {}, rng);
    batching::validate(batch);
    int count_a = 0, count_b = 0;
    for (const auto& e : batch.entries) {
      count_a += (e.source == batching::Source::A);
      count_b += (e.source == batching::Source::B);
    }
    CHECK(count_a == 4);
    CHECK(count_b == 4);
  }
}

TEST_CASE("union b=4 takes one origin from each side") {
  const auto a = make_dataset(1, 7, data::DatasetRole::A, "a");
  const auto b = make_dataset(1, 8, data::DatasetRole::B, "b");
  core::Rng rng(15);
  const auto batch = batching::compose_union(a, b, 4, {}, rng);
  CHECK(batch.size() == 4);
  std::set<std::string> origins;
  for (const auto& e : batch.entries) origins.insert(e.origin_id);
  CHECK(origins.size() == 2);
  batching::validate(batch);
  CHECK_THROWS_AS(batching::compose_union(a, b, 6, {}, rng), std::invalid_argument);
}

TEST_CASE("cross pairs adjacent same-label entries with sources (A, B)") {
  const auto a = make_dataset(2, 9, data::DatasetRole::A, "a");
  const auto b = make_dataset(3, 10, data::DatasetRole::B, "b");
  core::Rng rng(16);
  for (int i = 0; i < 50; ++i) {
    const auto batch = batching::compose_cross(a, b, 8, {}, rng);
    batching::validate(batch);
    for (int k = 0; k < batch.size(); k += 2) {
      CHECK(batch.entries[k].source == batching::Source::A);
      CHECK(batch.entries[k + 1].source == batching::Source::B);
      CHECK(batch.entries[k].label == batch.entries[k + 1].label);
      CHECK(batch.pairing[k] == k + 1);
      CHECK(batch.pairing[k + 1] == k);
    }
  }
}

TEST_CASE("cross with a label missing from B names the label") {
  data::LabeledDataset a;
  a.images.push_back(make_image(1, data::EmotionLabel::disgust, "a0"));
  data::LabeledDataset b;
  b.role = data::DatasetRole::B;
  b.images.push_back(make_image(2, data::EmotionLabel::anger, "b0"));
  core::Rng rng(17);
  CHECK_THROWS_WITH_AS(batching::compose_cross(a, b, 2, {}, rng),
                       doctest::Contains("disgust"), std::runtime_error);
}

TEST_CASE("cross batches rarely repeat an origin when B is large") {
  const auto a = make_dataset(8, 18, data::DatasetRole::A, "a");
  const auto b = make_dataset(64, 19, data::DatasetRole::B, "b");
  core::Rng rng(20);
  int batches_with_repeat = 0;
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    const auto batch = batching::compose_cross(a, b, 8, {}, rng);
    std::set<std::string> origins;
    bool repeat = false;
    for (const auto& e : batch.entries) repeat |= !origins.insert(e.origin_id).second;
    batches_with_repeat += repeat;
  }
  // A-origins are distinct by construction; a B collision needs two of the
  // four pairs to share a label AND the same pick out of 64. With 7 classes
  // and 4 draws the collision rate is well under 2%.
  CHECK(batches_with_repeat < n / 50);
}

TEST_CASE("positive sets") {
  batching::Batch batch;
  auto add = [&](data::EmotionLabel l) {
    batching::BatchEntry e;
    e.image.assign(data::kImagePixels, 0.5f);
    e.label = l;
    batch.entries.push_back(std::move(e));
  };

  add(data::EmotionLabel::anger);
  add(data::EmotionLabel::anger);
  add(data::EmotionLabel::fear);
  add(data::EmotionLabel::fear);
  auto ps = batching::positive_sets(batch);
  CHECK(ps.p[0] == std::vector<int>{1});
  CHECK(ps.p[1] == std::vector<int>{0});
  CHECK(ps.p[2] == std::vector<int>{3});
  CHECK(ps.p[3] == std::vector<int>{2});

  batch.entries.clear();
  for (int i = 0; i < 4; ++i) add(data::EmotionLabel::anger);
  ps = batching::positive_sets(batch);
  for (int i = 0; i < 4; ++i) CHECK(ps.p[i].size() == 3);

  batch.entries.clear();
  for (int i = 0; i < 4; ++i) add(static_cast<data::EmotionLabel>(i));
  ps = batching::positive_sets(batch);
  for (int i = 0; i < 4; ++i) CHECK(ps.p[i].empty());
}

TEST_CASE("validate rejects corrupted batches") {
  const auto a = make_dataset(2, 21, data::DatasetRole::A, "a");
  core::Rng rng(22);
  auto batch = batching::compose_two_view(a, 4, {}, rng);

  auto broken = batch;
  broken.pairing[0] = 0;  // fixed point
  CHECK_THROWS_AS(batching::validate(broken), std::runtime_error);

  broken = batch;
  broken.pairing = {1, 0, 3, 1};  // not an involution
  CHECK_THROWS_AS(batching::validate(broken), std::runtime_error);

  broken = batch;
  broken.entries[1].label = data::EmotionLabel::surprise;
  CHECK_THROWS_AS(batching::validate(broken), std::runtime_error);

  broken = batch;
  broken.entries[0].image[0] = 1.5f;
  CHECK_THROWS_AS(batching::validate(broken), std::runtime_error);

  broken = batch;
  broken.entries[2].source = batching::Source::B;
  CHECK_THROWS_AS(batching::validate(broken), std::runtime_error);
}

TEST_CASE("batch_similarity: identical images give 1, mirrored images give -1") {
  batching::Batch batch;
  batching::BatchEntry e;
  e.image.resize(data::kImagePixels);
  core::Rng rng(23);
  for (auto& v : e.image) v = static_cast<float>(rng.uniform(0.2, 0.8));
  batch.entries.push_back(e);
  batch.entries.push_back(e);
  CHECK(batching::batch_similarity(batch) == doctest::Approx(1.0).epsilon(1e-9));

  // Negate the second entry around its mean: cosine of centered vectors -1.
  double mean = 0.0;
  for (float v : e.image) mean += v;
  mean /= data::kImagePixels;
  auto& mirrored = batch.entries[1].image;
  for (auto& v : mirrored) v = static_cast<float>(2.0 * mean - v);
  CHECK(batching::batch_similarity(batch) == doctest::Approx(-1.0).epsilon(1e-5));
}

TEST_CASE("batch_similarity: zero-variance entries contribute zero") {
  batching::Batch batch;
  batching::BatchEntry flat;
  flat.image.assign(data::kImagePixels, 0.7f);
  batching::BatchEntry varied;
  varied.image.resize(data::kImagePixels);
  core::Rng rng(24);
  for (auto& v : varied.image) v = static_cast<float>(rng.uniform());
  batch.entries = {flat, varied};
  CHECK(batching::batch_similarity(batch) == 0.0);
}

TEST_CASE("batch_similarity matches a brute-force oracle") {
  const auto a = make_dataset(2, 25, data::DatasetRole::A, "a");
  core::Rng rng(26);
  const auto batch = batching::compose_two_view(a, 4, {}, rng);

  // Direct recomputation, no shared code.
  const int b = batch.size();
  double want = 0.0;
  int pairs = 0;
  for (int i = 0; i < b; ++i)
    for (int j = i + 1; j < b; ++j) {
      double mi = 0.0, mj = 0.0;
      for (int p = 0; p < data::kImagePixels; ++p) {
        mi += batch.entries[i].image[p];
        mj += batch.entries[j].image[p];
      }
      mi /= data::kImagePixels;
      mj /= data::kImagePixels;
      double dot = 0.0, ni = 0.0, nj = 0.0;
      for (int p = 0; p < data::kImagePixels; ++p) {
        const double x = batch.entries[i].image[p] - mi;
        const double y = batch.entries[j].image[p] - mj;
        dot += x * y;
        ni += x * x;
        nj += y * y;
      }
      want += dot / std::sqrt(ni * nj);
      ++pairs;
    }
  want /= pairs;
  CHECK(batching::batch_similarity(batch) == doctest::Approx(want).epsilon(1e-9));
}

TEST_CASE("stream consumes each origin once per epoch and is deterministic") {
  const auto a = make_dataset(4, 27, data::DatasetRole::A, "a");  // 28 images
  batching::TrainingBatchStream s1(a, nullptr, batching::Strategy::two_view, 8, {},
                                   core::Rng(99));
  CHECK(s1.batches_per_epoch() == 7);  // 28 origins / 4 per batch

  std::set<std::string> seen;
  std::vector<std::string> order1;
  for (int i = 0; i < 7; ++i) {
    const auto batch = s1.next();
    batching::validate(batch);
    for (const auto& e : batch.entries) {
      seen.insert(e.origin_id);
      order1.push_back(e.origin_id);
    }
  }
  CHECK(seen.size() == 28);  // full pass, no repeats

  batching::TrainingBatchStream s2(a, nullptr, batching::Strategy::two_view, 8, {},
                                   core::Rng(99));
  std::vector<std::string> order2;
  for (int i = 0; i < 7; ++i)
    for (const auto& e : s2.next().entries) order2.push_back(e.origin_id);
  CHECK(order1 == order2);

  // A second epoch reshuffles rather than repeating the first order.
  std::vector<std::string> order_epoch2;
  for (int i = 0; i < 7; ++i)
    for (const auto& e : s1.next().entries) order_epoch2.push_back(e.origin_id);
  CHECK(order_epoch2 != order1);
}

TEST_CASE("diversity: two_view batches are more self-similar than cross batches") {
  // Style A: bright blob on dark ground. Style B: dim blob on mid ground with
  // inverted contrast. Within-class within-style images are near-identical;
  // cross-style images differ strongly.
  auto blob_image = [](int cls, float bg, float fg, uint64_t seed) {
    core::Rng rng(seed);
    data::LabeledImage img;
    img.pixels.assign(data::kImagePixels, bg);
    const int cx = 8 + 4 * cls;
    for (int y = cx - 3; y <= cx + 3; ++y)
      for (int x = cx - 3; x <= cx + 3; ++x) img.pixels[y * 48 + x] = fg;
    for (auto& v : img.pixels)
      v = std::clamp(v + static_cast<float>(rng.uniform(-0.02, 0.02)), 0.0f, 1.0f);
    img.label = static_cast<data::EmotionLabel>(cls);
    return img;
  };

  data::LabeledDataset a, b;
  b.role = data::DatasetRole::B;
  uint64_t s = 0;
  for (int cls = 0; cls < 7; ++cls)
    for (int i = 0; i < 6; ++i) {
      auto ia = blob_image(cls, 0.1f, 0.95f, s++);
      ia.id = "a" + std::to_string(s);
      a.images.push_back(std::move(ia));
      auto ib = blob_image(cls, 0.6f, 0.25f, s++);
      ib.id = "b" + std::to_string(s);
      b.images.push_back(std::move(ib));
    }

  core::Rng rng(31);
  double mean_two_view = 0.0, mean_cross = 0.0;
  const int n = 50;
  for (int i = 0; i < n; ++i)
    mean_two_view += batching::batch_similarity(batching::compose_two_view(a, 8, {}, rng));
  for (int i = 0; i < n; ++i)
    mean_cross += batching::batch_similarity(batching::compose_cross(a, b, 8, {}, rng));
  CHECK(mean_two_view / n > mean_cross / n);
}
