// Optimization loops: contrastive pre-training, frozen-encoder linear probe
// with best-validation tracking, the supervised baseline, the three-drop
// learning-rate schedule, and training checkpoints.
#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "paircon/augment/augment.hpp"
#include "paircon/batching/batching.hpp"
#include "paircon/core/rng.hpp"
#include "paircon/core/tensor.hpp"
#include "paircon/dataset/dataset.hpp"
#include "paircon/kernels/kernels.hpp"
#include "paircon/nn/checkpoint.hpp"
#include "paircon/nn/encoder.hpp"

namespace paircon::training {

// Batch-composition strategies: three contrastive (two-view on the primary
// set, union of both sets, cross-dataset pairing) and two supervised
// baselines (primary only, or an exact 50/50 per-batch mix of both sets).
enum class Strategy { two_view_c, union_ca, cross_ca, supervised_c, supervised_ca };

const char* strategy_name(Strategy s);
std::optional<Strategy> strategy_from_name(std::string_view name);
bool is_contrastive(Strategy s);
bool uses_dataset_b(Strategy s);

enum class ContrastiveLoss { supcon, simclr };
const char* contrastive_loss_name(ContrastiveLoss loss);

struct TrainConfig {
  int n_epochs = 250;
  int batch_size = 32;
  double initial_lr = 0.05;
  double momentum = 0.9;
  double decay_factor = 0.1;
  int probe_epochs = 50;
  double probe_lr = 1e-4;
  int augmentation_ratio = 1;
  Strategy strategy = Strategy::two_view_c;
  uint64_t seed = 0;
};

// Field invariants: positive rates, n_epochs >= 1, even batch size
// (divisible by 4 for the union strategy). Throws std::invalid_argument.
void validate(const TrainConfig& config);

// The three learning-rate drop epochs: round(n - 0.1 * n * k) for k = 3,2,1.
// 250 epochs -> {175, 200, 225}; 50 -> {35, 40, 45}.
std::array<int, 3> decay_epochs(int n_epochs);

// initial_lr * decay_factor^(number of decay epochs <= epoch).
double lr_schedule(double initial_lr, double decay_factor, int n_epochs, int epoch);

// Schedule of the main (contrastive / supervised) stage.
double lr_at(const TrainConfig& config, int epoch);

// v <- momentum * v + g; p <- p - lr * v. Velocity buffers are created on the
// first step and keyed by parameter name for checkpointing.
template <typename T>
class SgdMomentum {
 public:
  explicit SgdMomentum(double momentum) : momentum_(momentum) {}

  void step(const std::vector<nn::ParamRef<T>>& params, double lr) {
    bind(params);
    for (size_t i = 0; i < params.size(); ++i)
      kernels::sgd_momentum(velocity_[i].data(), params[i].value->data(), params[i].grad->data(),
                            static_cast<T>(momentum_), static_cast<T>(lr),
                            params[i].value->size());
  }

  double momentum() const { return momentum_; }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<core::Tensor<T>>& velocities() const { return velocity_; }

  // Creates (zeroed) velocity buffers for the given parameters if none exist.
  void bind(const std::vector<nn::ParamRef<T>>& params) {
    if (!velocity_.empty()) {
      if (velocity_.size() != params.size())
        throw std::invalid_argument("optimizer: parameter count changed between steps");
      return;
    }
    for (const auto& p : params) {
      velocity_.emplace_back(p.value->shape());
      velocity_.back().fill(T(0));
      names_.push_back(p.name);
    }
  }

  core::Tensor<T>& velocity(size_t i) { return velocity_[i]; }

 private:
  double momentum_;
  std::vector<std::string> names_;
  std::vector<core::Tensor<T>> velocity_;
};

// One line of the per-run metrics log.
struct MetricsRow {
  int epoch = 0;
  std::string stage;  // "contrastive", "probe", or "supervised"
  double loss = 0.0;
  std::optional<double> val_accuracy;
  double lr = 0.0;
};

// "epoch=<e> stage=<s> loss=<f> val_acc=<f or -> lr=<g>"
std::string format_metrics_row(const MetricsRow& row);

struct ContrastiveResult {
  std::vector<double> epoch_loss;  // mean per-anchor loss, one entry per epoch
  std::vector<MetricsRow> metrics;
  // Origin ids of every consumed batch entry, flattened in consumption order
  // (n_epochs * batches_per_epoch * batch_size entries). Lets callers verify
  // that two runs drew identical batch sequences.
  std::vector<std::string> batch_origin_ids;
};

// SGD with momentum over batches drawn from the materialized augmented set
// (one shuffled pass per epoch). Trains encoder and projector in place for
// the full n_epochs (no early stopping); the caller discards the projector
// when probe training begins. dataset_b is required by the union and cross
// strategies; the cross strategy pairs by label and therefore cannot be used
// with the pair-based (simclr) loss.
ContrastiveResult train_contrastive(nn::Encoder<float>& encoder, nn::ProjectionHead<float>& head,
                                    const data::LabeledDataset& train_a,
                                    const data::LabeledDataset* dataset_b,
                                    const augment::AugmentationPolicy& policy,
                                    const TrainConfig& config, ContrastiveLoss loss,
                                    double temperature);

struct ProbeResult {
  std::vector<double> epoch_loss;    // mean per-example cross entropy
  std::vector<double> val_accuracy;  // after each epoch
  double best_val_accuracy = 0.0;
  int best_epoch = -1;  // first epoch attaining the best accuracy
  std::vector<MetricsRow> metrics;
};

// Core of the linear probe: trains the classifier on fixed representation
// vectors ([N, D] with one label per row) for probe_epochs at probe_lr, and
// returns (in the classifier) the parameters of the best validation epoch.
ProbeResult probe_on_representations(nn::LinearClassifier<float>& classifier,
                                     const core::Tensor<float>& train_reps,
                                     const std::vector<int>& train_labels,
                                     const core::Tensor<float>& val_reps,
                                     const std::vector<int>& val_labels,
                                     const TrainConfig& config);

// Frozen-encoder linear probe: caches representations of split.train and
// split.validation once (eval mode; the encoder is never modified), then
// trains the classifier on them. Raw images are used — the probe sees no
// augmentation.
ProbeResult train_probe(nn::Encoder<float>& encoder, nn::LinearClassifier<float>& classifier,
                        const data::DatasetSplit& split, const TrainConfig& config);

struct SupervisedResult {
  std::vector<double> epoch_loss;    // mean per-example cross entropy
  std::vector<double> val_accuracy;  // after each epoch
  double best_val_accuracy = 0.0;
  int best_epoch = -1;
  std::vector<MetricsRow> metrics;
  // Origin ids of every consumed training example, flattened in consumption
  // order (auxiliary images included for the 50/50 mixed strategy).
  std::vector<std::string> batch_origin_ids;
};

// End-to-end cross-entropy training on the materialized augmented set.
// supervised_ca mixes primary and auxiliary images 50/50 per batch (labels
// from each source, auxiliary images augmented on the fly) and requires
// dataset_b. Encoder and classifier are left holding the parameters of the
// best validation epoch.
SupervisedResult train_supervised(nn::Encoder<float>& encoder,
                                  nn::LinearClassifier<float>& classifier,
                                  const data::DatasetSplit& split,
                                  const data::LabeledDataset* dataset_b,
                                  const augment::AugmentationPolicy& policy,
                                  const TrainConfig& config);

// Stacks the batch entries into an [N, 1, 48, 48] tensor.
core::Tensor<float> batch_to_tensor(const batching::Batch& batch);

// Integer labels of the batch entries, in entry order.
std::vector<int> batch_labels(const batching::Batch& batch);

// Eval-mode representations of every image, computed in chunks.
core::Tensor<float> encode_all(nn::Encoder<float>& encoder, const data::LabeledDataset& dataset,
                               int chunk_size);

std::vector<int> dataset_labels(const data::LabeledDataset& dataset);

// Model parameters, optimizer velocities, epoch counter, best validation
// accuracy, and RNG state, round-tripping bit-exactly through the tensor
// store container.
void save_training_checkpoint(const std::string& path,
                              const std::vector<nn::ParamRef<float>>& params,
                              const std::vector<nn::BufferRef<float>>& buffers,
                              const SgdMomentum<float>& optimizer, int64_t epoch,
                              double best_validation_accuracy, const core::Rng& rng);

struct LoadedCheckpoint {
  int64_t epoch = 0;
  double best_validation_accuracy = 0.0;
  core::Rng rng{0};
};

// Restores parameters, buffers, and optimizer velocities in place and returns
// the scalar state. The optimizer must be bound to the same parameter list.
LoadedCheckpoint load_training_checkpoint(const std::string& path,
                                          const std::vector<nn::ParamRef<float>>& params,
                                          const std::vector<nn::BufferRef<float>>& buffers,
                                          SgdMomentum<float>& optimizer);

}  // namespace paircon::training
