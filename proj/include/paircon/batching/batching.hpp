// Mini-batch composition. Three strategies:
//   two_view: b/2 origins from the primary set, two augmentations each;
//   union:    b/4 origins from each of the primary and auxiliary sets,
//             two augmentations each, exact 50/50 source count per batch;
//   cross:    b/2 origins from the primary set, each paired with one
//             augmentation of a uniformly chosen same-label auxiliary image
//             (positions 2k/2k+1 hold the primary/auxiliary member).
// Paired entries are adjacent and the pairing map is an involution without
// fixed points.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "paircon/augment/augment.hpp"
#include "paircon/core/rng.hpp"
#include "paircon/dataset/dataset.hpp"

namespace paircon::batching {

enum class Source { A, B };
enum class Strategy { two_view, union_ab, cross };

const char* strategy_name(Strategy s);

struct BatchEntry {
  std::vector<float> image;  // 48x48 in [0,1]
  data::EmotionLabel label = data::EmotionLabel::anger;
  std::string origin_id;
  Source source = Source::A;
};

struct Batch {
  std::vector<BatchEntry> entries;
  std::vector<int> pairing;  // pairing[i] = o(i)
  Strategy strategy = Strategy::two_view;

  int size() const { return static_cast<int>(entries.size()); }
};

// P(i) = { j != i : label(j) = label(i) }.
struct PositiveSets {
  std::vector<std::vector<int>> p;
};

Batch compose_two_view(const data::LabeledDataset& dataset_a, int batch_size,
                       const augment::AugmentationPolicy& policy, core::Rng& rng);

Batch compose_union(const data::LabeledDataset& dataset_a, const data::LabeledDataset& dataset_b,
                    int batch_size, const augment::AugmentationPolicy& policy, core::Rng& rng);

Batch compose_cross(const data::LabeledDataset& dataset_a, const data::LabeledDataset& dataset_b,
                    int batch_size, const augment::AugmentationPolicy& policy, core::Rng& rng);

PositiveSets positive_sets(const Batch& batch);

// Structural invariants of the Batch type; throws std::runtime_error naming
// the first violation.
void validate(const Batch& batch);

// Mean over unordered entry pairs of the cosine similarity between
// mean-centered pixel vectors. A zero-variance entry contributes 0 to every
// pair it appears in. Range [-1, 1].
double batch_similarity(const Batch& batch);

// Epoch-wise batch source for training: primary-set origins are consumed in
// shuffled order, one full pass per epoch (remainder beyond the last full
// batch is dropped and the permutation is reshuffled); auxiliary origins are
// sampled with replacement across batches. The batch sequence is a pure
// function of the constructor arguments.
class TrainingBatchStream {
 public:
  TrainingBatchStream(const data::LabeledDataset& dataset_a, const data::LabeledDataset* dataset_b,
                      Strategy strategy, int batch_size, augment::AugmentationPolicy policy,
                      core::Rng rng);

  int64_t batches_per_epoch() const { return batches_per_epoch_; }
  int origins_per_batch() const { return origins_per_batch_; }
  Batch next();

 private:
  const data::LabeledDataset& a_;
  const data::LabeledDataset* b_;
  Strategy strategy_;
  int batch_size_;
  int origins_per_batch_;
  int64_t batches_per_epoch_;
  augment::AugmentationPolicy policy_;
  core::Rng rng_;
  std::vector<int64_t> perm_;
  int64_t cursor_ = 0;
  std::unordered_map<int, std::vector<int64_t>> b_by_label_;
};

}  // namespace paircon::batching
