#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "paircon/core/rng.hpp"
#include "paircon/losses/losses.hpp"

using namespace paircon;
using core::Tensor;

namespace {

Tensor<double> random_projections(int64_t b, int64_t k, uint64_t seed) {
  core::Rng rng(seed);
  Tensor<double> z({b, k});
  for (int64_t i = 0; i < z.size(); ++i) z[i] = rng.uniform(-2.0, 2.0);
  return z;
}

double cosine(const Tensor<double>& z, int64_t i, int64_t j) {
  const int64_t k = z.dim(1);
  double d = 0, ni = 0, nj = 0;
  for (int64_t c = 0; c < k; ++c) {
    d += z[i * k + c] * z[j * k + c];
    ni += z[i * k + c] * z[i * k + c];
    nj += z[j * k + c] * z[j * k + c];
  }
  return d / std::sqrt(ni * nj);
}

// Straight transcription of the loss definitions: no stabilization, no shared
// code with the implementation.
double naive_simclr(const Tensor<double>& z, const std::vector<int>& pairing, double tau) {
  const int64_t b = z.dim(0);
  double loss = 0;
  for (int64_t i = 0; i < b; ++i) {
    double denom = 0;
    for (int64_t q = 0; q < b; ++q)
      if (q != i) denom += std::exp(cosine(z, i, q) / tau);
    loss += -std::log(std::exp(cosine(z, i, pairing[i]) / tau) / denom);
  }
  return loss;
}

double naive_supcon(const Tensor<double>& z, const std::vector<int>& labels, double tau) {
  const int64_t b = z.dim(0);
  double loss = 0;
  for (int64_t i = 0; i < b; ++i) {
    std::vector<int64_t> pos;
    for (int64_t q = 0; q < b; ++q)
      if (q != i && labels[q] == labels[i]) pos.push_back(q);
    if (pos.empty()) continue;
    double denom = 0;
    for (int64_t q = 0; q < b; ++q)
      if (q != i) denom += std::exp(cosine(z, i, q) / tau);
    double inner = 0;
    for (int64_t p : pos) inner += std::log(std::exp(cosine(z, i, p) / tau) / denom);
    loss += -inner / static_cast<double>(pos.size());
  }
  return loss;
}

// Unit vectors at angles 0, 0, 90, 90 degrees.
Tensor<double> right_angle_batch() {
  return Tensor<double>({4, 2}, {1, 0, 1, 0, 0, 1, 0, 1});
}

const std::vector<int> kAdjacent4 = {1, 0, 3, 2};

std::vector<int> random_pairing(int64_t b, core::Rng& rng) {
  auto perm = rng.permutation(static_cast<uint64_t>(b));
  std::vector<int> pairing(b);
  for (int64_t i = 0; i < b; i += 2) {
    pairing[perm[i]] = static_cast<int>(perm[i + 1]);
    pairing[perm[i + 1]] = static_cast<int>(perm[i]);
  }
  return pairing;
}

}  // namespace

TEST_CASE("simclr: b=2 is exactly zero") {
  const auto z = random_projections(2, 5, 1);
  CHECK(losses::simclr_loss(z, {1, 0}, 0.3) == 0.0);
}

TEST_CASE("simclr: identical projections, b=4, tau=1 -> 4 ln 3") {
  Tensor<double> z({4, 3});
  for (int64_t i = 0; i < 4; ++i) {
    z[i * 3 + 0] = 0.2;
    z[i * 3 + 1] = -0.4;
    z[i * 3 + 2] = 0.9;
  }
  CHECK(losses::simclr_loss(z, kAdjacent4, 1.0) ==
        doctest::Approx(4.0 * std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("simclr: right-angle batch -> 4 ln(1 + 2/e)") {
  const auto z = right_angle_batch();
  const double want = 4.0 * std::log(1.0 + 2.0 / std::exp(1.0));
  const double got = losses::simclr_loss(z, kAdjacent4, 1.0);
  CHECK(got == doctest::Approx(want).epsilon(1e-12));
  CHECK(got == doctest::Approx(naive_simclr(z, kAdjacent4, 1.0)).epsilon(1e-12));
}

TEST_CASE("simclr matches the naive transcription on random batches") {
  core::Rng seeds(2);
  for (int64_t b : {2, 4, 6, 8})
    for (double tau : {1.0, 0.5, 0.1}) {
      const auto z = random_projections(b, 5, seeds.next());
      core::Rng rng(seeds.next());
      const auto pairing = random_pairing(b, rng);
      CHECK(losses::simclr_loss(z, pairing, tau) ==
            doctest::Approx(naive_simclr(z, pairing, tau)).epsilon(1e-9));
    }
}

TEST_CASE("simclr input validation") {
  const auto z = random_projections(4, 3, 3);
  CHECK_THROWS_AS(losses::simclr_loss(z, kAdjacent4, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(losses::simclr_loss(z, kAdjacent4, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(losses::simclr_loss(z, {0, 1, 3, 2}, 1.0), std::invalid_argument);  // fixed points
  CHECK_THROWS_AS(losses::simclr_loss(z, {1, 0, 3}, 1.0), std::invalid_argument);     // short
  CHECK_THROWS_AS(losses::simclr_loss(z, {1, 0, 3, 1}, 1.0), std::invalid_argument);  // not involution
  Tensor<double> with_zero_row = z;
  for (int64_t c = 0; c < 3; ++c) with_zero_row[2 * 3 + c] = 0.0;
  CHECK_THROWS_AS(losses::simclr_loss(with_zero_row, kAdjacent4, 1.0), std::invalid_argument);
}

TEST_CASE("supcon: identical projections, all labels equal -> 4 ln 3") {
  Tensor<double> z({4, 3});
  for (int64_t i = 0; i < 4; ++i) z[i * 3 + 1] = -1.3;
  CHECK(losses::supcon_loss(z, {5, 5, 5, 5}, 1.0) ==
        doctest::Approx(4.0 * std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("supcon reduces to simclr when labels single out the paired view") {
  const auto z = right_angle_batch();
  CHECK(losses::supcon_loss(z, {0, 0, 1, 1}, 1.0) ==
        doctest::Approx(losses::simclr_loss(z, kAdjacent4, 1.0)).epsilon(1e-12));

  // Same reduction on random batches with unique per-pair labels.
  core::Rng seeds(4);
  for (int rep = 0; rep < 5; ++rep) {
    const auto zr = random_projections(8, 4, seeds.next());
    std::vector<int> labels = {0, 0, 1, 1, 2, 2, 3, 3};
    std::vector<int> pairing = {1, 0, 3, 2, 5, 4, 7, 6};
    CHECK(losses::supcon_loss(zr, labels, 0.4) ==
          doctest::Approx(losses::simclr_loss(zr, pairing, 0.4)).epsilon(1e-9));
  }
}

TEST_CASE("supcon: right-angle batch, one label -> (4/3)(ln(1+2/e) + 2 ln(e+2))") {
  const auto z = right_angle_batch();
  const double e = std::exp(1.0);
  const double want = 4.0 / 3.0 * (std::log(1.0 + 2.0 / e) + 2.0 * std::log(e + 2.0));
  const double got = losses::supcon_loss(z, {0, 0, 0, 0}, 1.0);
  CHECK(got == doctest::Approx(want).epsilon(1e-12));
  CHECK(got == doctest::Approx(naive_supcon(z, {0, 0, 0, 0}, 1.0)).epsilon(1e-12));
}

TEST_CASE("supcon matches the naive transcription on random batches") {
  core::Rng seeds(5);
  for (int64_t b : {3, 4, 7, 8})
    for (double tau : {1.0, 0.5, 0.1}) {
      const auto z = random_projections(b, 5, seeds.next());
      core::Rng rng(seeds.next());
      std::vector<int> labels(b);
      for (auto& l : labels) l = static_cast<int>(rng.uniform_int(3));
      // Guarantee at least one positive pair.
      labels[0] = labels[1] = 9;
      CHECK(losses::supcon_loss(z, labels, tau) ==
            doctest::Approx(naive_supcon(z, labels, tau)).epsilon(1e-9));
    }
}

TEST_CASE("supcon: anchors without positives contribute zero") {
  const auto z = random_projections(3, 4, 6);
  // P(2) empty; anchors 0 and 1 form the only positive pair.
  const double got = losses::supcon_loss(z, {1, 1, 2}, 0.7);
  CHECK(got == doctest::Approx(naive_supcon(z, {1, 1, 2}, 0.7)).epsilon(1e-12));

  // Restricting to the contributing anchors reproduces the value directly.
  double want = 0;
  for (int64_t i : {0, 1}) {
    double denom = 0;
    for (int64_t q = 0; q < 3; ++q)
      if (q != i) denom += std::exp(cosine(z, i, q) / 0.7);
    want += -std::log(std::exp(cosine(z, i, 1 - i) / 0.7) / denom);
  }
  CHECK(got == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("supcon: all anchors empty is an error") {
  const auto z = random_projections(4, 3, 7);
  CHECK_THROWS_WITH_AS(losses::supcon_loss(z, {0, 1, 2, 3}, 1.0),
                       doctest::Contains("no positives"), std::runtime_error);
}

TEST_CASE("contrastive losses are permutation invariant") {
  core::Rng rng(8);
  const int64_t b = 8, k = 5;
  const auto z = random_projections(b, k, 9);
  std::vector<int> labels = {0, 0, 1, 1, 2, 2, 0, 1};
  std::vector<int> pairing = {1, 0, 3, 2, 5, 4, 7, 6};

  const auto perm = rng.permutation(b);
  std::vector<int64_t> inv(b);
  for (int64_t i = 0; i < b; ++i) inv[perm[i]] = i;

  Tensor<double> zp({b, k});
  std::vector<int> labels_p(b), pairing_p(b);
  for (int64_t i = 0; i < b; ++i) {
    for (int64_t c = 0; c < k; ++c) zp[inv[i] * k + c] = z[i * k + c];
    labels_p[inv[i]] = labels[i];
    pairing_p[inv[i]] = static_cast<int>(inv[pairing[i]]);
  }

  CHECK(losses::simclr_loss(zp, pairing_p, 0.25) ==
        doctest::Approx(losses::simclr_loss(z, pairing, 0.25)).epsilon(1e-9));
  CHECK(losses::supcon_loss(zp, labels_p, 0.25) ==
        doctest::Approx(losses::supcon_loss(z, labels, 0.25)).epsilon(1e-9));
}

TEST_CASE("losses see z only through cosine similarity") {
  auto z = random_projections(6, 4, 10);
  std::vector<int> labels = {0, 0, 1, 1, 2, 2};
  std::vector<int> pairing = {1, 0, 3, 2, 5, 4};
  const double s0 = losses::simclr_loss(z, pairing, 0.5);
  const double c0 = losses::supcon_loss(z, labels, 0.5);
  for (int64_t c = 0; c < 4; ++c) z[2 * 4 + c] *= 3.7;  // rescale one row
  CHECK(losses::simclr_loss(z, pairing, 0.5) == doctest::Approx(s0).epsilon(1e-9));
  CHECK(losses::supcon_loss(z, labels, 0.5) == doctest::Approx(c0).epsilon(1e-9));
}

TEST_CASE("loss decreases with temperature when the batch is at the optimum") {
  // Positive pairs identical, every cross pair antipodal.
  Tensor<double> z({4, 2}, {1, 0, 1, 0, -1, 0, -1, 0});
  const std::vector<int> labels = {0, 0, 1, 1};
  double prev_simclr = std::numeric_limits<double>::infinity();
  double prev_supcon = std::numeric_limits<double>::infinity();
  for (double tau : {1.0, 0.5, 0.1}) {
    const double s = losses::simclr_loss(z, kAdjacent4, tau);
    const double c = losses::supcon_loss(z, labels, tau);
    CHECK(s < prev_simclr);
    CHECK(c < prev_supcon);
    prev_simclr = s;
    prev_supcon = c;
  }
}

TEST_CASE("cross entropy closed forms") {
  Tensor<double> uniform({7});
  uniform.fill(0.42);
  CHECK(losses::cross_entropy(uniform, 3) == doctest::Approx(std::log(7.0)).epsilon(1e-12));

  Tensor<double> confident({7});
  confident[0] = 100.0;
  CHECK(losses::cross_entropy(confident, 0) < 1e-6);

  CHECK_THROWS_AS(losses::cross_entropy(uniform, 7), std::invalid_argument);
  CHECK_THROWS_AS(losses::cross_entropy(uniform, -1), std::invalid_argument);
  Tensor<double> bad({7});
  bad[2] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(losses::cross_entropy(bad, 0), std::invalid_argument);
}

TEST_CASE("cross entropy matches direct summation on random logits") {
  core::Rng rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    Tensor<double> logits({7});
    for (int64_t j = 0; j < 7; ++j) logits[j] = rng.uniform(-5.0, 5.0);
    const int label = static_cast<int>(rng.uniform_int(7));
    double denom = 0;
    for (int64_t j = 0; j < 7; ++j) denom += std::exp(logits[j]);
    const double want = -std::log(std::exp(logits[label]) / denom);
    CHECK(losses::cross_entropy(logits, label) == doctest::Approx(want).epsilon(1e-9));
  }
}

TEST_CASE("batched cross entropy sums rows and exposes softmax-minus-onehot") {
  core::Rng rng(12);
  const int64_t n = 5, c = 7;
  Tensor<double> logits({n, c});
  for (int64_t i = 0; i < logits.size(); ++i) logits[i] = rng.uniform(-3.0, 3.0);
  std::vector<int> labels(n);
  for (auto& l : labels) l = static_cast<int>(rng.uniform_int(c));

  Tensor<double> dlogits;
  const double got = losses::cross_entropy_grad(logits, labels, &dlogits);

  double want = 0;
  for (int64_t i = 0; i < n; ++i) {
    Tensor<double> row({c});
    for (int64_t j = 0; j < c; ++j) row[j] = logits[i * c + j];
    want += losses::cross_entropy(row, labels[i]);
  }
  CHECK(got == doctest::Approx(want).epsilon(1e-12));

  // Each gradient row sums to zero and matches central differences.
  for (int64_t i = 0; i < n; ++i) {
    double row_sum = 0;
    for (int64_t j = 0; j < c; ++j) row_sum += dlogits[i * c + j];
    CHECK(row_sum == doctest::Approx(0.0).epsilon(1e-12));
  }
  const double h = 1e-6;
  for (int64_t i = 0; i < logits.size(); ++i) {
    Tensor<double> lp = logits, lm = logits;
    lp[i] += h;
    lm[i] -= h;
    const double numeric = (losses::cross_entropy_grad(lp, labels, nullptr) -
                            losses::cross_entropy_grad(lm, labels, nullptr)) /
                           (2 * h);
    CHECK(dlogits[i] == doctest::Approx(numeric).epsilon(1e-5));
  }
}

TEST_CASE("contrastive gradients match central differences") {
  const int64_t b = 6, k = 4;
  auto z = random_projections(b, k, 13);
  const std::vector<int> pairing = {1, 0, 3, 2, 5, 4};
  const std::vector<int> labels = {0, 0, 1, 1, 0, 2};
  const double tau = 0.3, h = 1e-5;

  Tensor<double> dz_simclr, dz_supcon;
  losses::simclr_loss_grad(z, pairing, tau, &dz_simclr);
  losses::supcon_loss_grad(z, labels, tau, &dz_supcon);

  for (int64_t i = 0; i < z.size(); ++i) {
    auto zp = z, zm = z;
    zp[i] += h;
    zm[i] -= h;
    const double num_simclr =
        (losses::simclr_loss(zp, pairing, tau) - losses::simclr_loss(zm, pairing, tau)) / (2 * h);
    const double num_supcon =
        (losses::supcon_loss(zp, labels, tau) - losses::supcon_loss(zm, labels, tau)) / (2 * h);
    CHECK(dz_simclr[i] == doctest::Approx(num_simclr).epsilon(1e-6));
    CHECK(dz_supcon[i] == doctest::Approx(num_supcon).epsilon(1e-6));
  }
}

TEST_CASE("mean per anchor divides the batch sum") {
  CHECK(losses::mean_per_anchor(6.0, 4) == doctest::Approx(1.5));
}
