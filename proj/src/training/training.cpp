#include "paircon/training/training.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "paircon/evalstats/evalstats.hpp"
#include "paircon/losses/losses.hpp"

namespace paircon::training {

namespace {

std::vector<core::Tensor<float>> snapshot(const std::vector<nn::ParamRef<float>>& params) {
  std::vector<core::Tensor<float>> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(*p.value);
  return out;
}

void restore(const std::vector<nn::ParamRef<float>>& params,
             const std::vector<core::Tensor<float>>& saved) {
  for (size_t i = 0; i < params.size(); ++i) *params[i].value = saved[i];
}

batching::Strategy batching_strategy(Strategy s) {
  switch (s) {
    case Strategy::two_view_c:
      return batching::Strategy::two_view;
    case Strategy::union_ca:
      return batching::Strategy::union_ab;
    case Strategy::cross_ca:
      return batching::Strategy::cross;
    default:
      throw std::invalid_argument("strategy has no batch composition");
  }
}

[[noreturn]] void abort_non_finite(const char* where, int epoch, int64_t batch,
                                   const char* cause = nullptr) {
  char msg[256];
  if (cause != nullptr)
    std::snprintf(msg, sizeof(msg), "%s: non-finite loss at epoch %d, batch %lld (%s)", where,
                  epoch, static_cast<long long>(batch), cause);
  else
    std::snprintf(msg, sizeof(msg), "%s: non-finite loss at epoch %d, batch %lld", where, epoch,
                  static_cast<long long>(batch));
  throw std::runtime_error(msg);
}

// Runs one forward+loss evaluation. Once training is underway the only way the
// loss call can throw is a non-finite activation tripping the loss input
// guards, so any exception here is converted into the epoch/batch diagnostic
// (with the original message preserved as the cause).
template <typename F>
double guarded_loss(const char* where, int epoch, int64_t batch, F&& eval) {
  double value = 0.0;
  try {
    value = eval();
  } catch (const std::exception& e) {
    abort_non_finite(where, epoch, batch, e.what());
  }
  if (!std::isfinite(value)) abort_non_finite(where, epoch, batch);
  return value;
}

}  // namespace

const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::two_view_c:
      return "two_view_c";
    case Strategy::union_ca:
      return "union_ca";
    case Strategy::cross_ca:
      return "cross_ca";
    case Strategy::supervised_c:
      return "supervised_c";
    case Strategy::supervised_ca:
      return "supervised_ca";
  }
  return "unknown";
}

std::optional<Strategy> strategy_from_name(std::string_view name) {
  for (Strategy s : {Strategy::two_view_c, Strategy::union_ca, Strategy::cross_ca,
                     Strategy::supervised_c, Strategy::supervised_ca})
    if (name == strategy_name(s)) return s;
  return std::nullopt;
}

bool is_contrastive(Strategy s) {
  return s == Strategy::two_view_c || s == Strategy::union_ca || s == Strategy::cross_ca;
}

bool uses_dataset_b(Strategy s) {
  return s == Strategy::union_ca || s == Strategy::cross_ca || s == Strategy::supervised_ca;
}

const char* contrastive_loss_name(ContrastiveLoss loss) {
  return loss == ContrastiveLoss::supcon ? "supcon" : "simclr";
}

void validate(const TrainConfig& config) {
  if (config.n_epochs < 1) throw std::invalid_argument("config: n_epochs must be >= 1");
  if (config.probe_epochs < 1) throw std::invalid_argument("config: probe_epochs must be >= 1");
  if (config.batch_size < 2 || config.batch_size % 2 != 0)
    throw std::invalid_argument("config: batch size must be even and >= 2");
  if (config.strategy == Strategy::union_ca && config.batch_size % 4 != 0)
    throw std::invalid_argument("config: the union strategy needs a batch size divisible by 4");
  if (!(config.initial_lr > 0)) throw std::invalid_argument("config: initial_lr must be positive");
  if (!(config.probe_lr > 0)) throw std::invalid_argument("config: probe_lr must be positive");
  if (!(config.decay_factor > 0))
    throw std::invalid_argument("config: decay_factor must be positive");
  if (!(config.momentum >= 0 && config.momentum < 1))
    throw std::invalid_argument("config: momentum must lie in [0, 1)");
  if (config.augmentation_ratio < 1)
    throw std::invalid_argument("config: augmentation_ratio must be >= 1");
}

std::array<int, 3> decay_epochs(int n_epochs) {
  std::array<int, 3> out{};
  for (int k = 3; k >= 1; --k)
    out[static_cast<size_t>(3 - k)] =
        static_cast<int>(std::lround(n_epochs - 0.1 * n_epochs * k));
  return out;
}

double lr_schedule(double initial_lr, double decay_factor, int n_epochs, int epoch) {
  if (epoch < 0 || epoch >= n_epochs)
    throw std::invalid_argument("lr_schedule: epoch out of range");
  const auto drops = decay_epochs(n_epochs);
  int count = 0;
  for (int d : drops) count += d <= epoch;
  return initial_lr * std::pow(decay_factor, count);
}

double lr_at(const TrainConfig& config, int epoch) {
  return lr_schedule(config.initial_lr, config.decay_factor, config.n_epochs, epoch);
}

std::string format_metrics_row(const MetricsRow& row) {
  char buf[160];
  if (row.val_accuracy)
    std::snprintf(buf, sizeof(buf), "epoch=%d stage=%s loss=%.6f val_acc=%.6f lr=%g", row.epoch,
                  row.stage.c_str(), row.loss, *row.val_accuracy, row.lr);
  else
    std::snprintf(buf, sizeof(buf), "epoch=%d stage=%s loss=%.6f val_acc=- lr=%g", row.epoch,
                  row.stage.c_str(), row.loss, row.lr);
  return buf;
}

core::Tensor<float> batch_to_tensor(const batching::Batch& batch) {
  const int64_t n = batch.size();
  core::Tensor<float> x({n, 1, data::kImageSide, data::kImageSide});
  for (int64_t i = 0; i < n; ++i) {
    const auto& img = batch.entries[static_cast<size_t>(i)].image;
    std::copy(img.begin(), img.end(), x.data() + i * data::kImagePixels);
  }
  return x;
}

std::vector<int> batch_labels(const batching::Batch& batch) {
  std::vector<int> labels;
  labels.reserve(batch.entries.size());
  for (const auto& e : batch.entries) labels.push_back(static_cast<int>(e.label));
  return labels;
}

core::Tensor<float> encode_all(nn::Encoder<float>& encoder, const data::LabeledDataset& dataset,
                               int chunk_size) {
  const int64_t n = static_cast<int64_t>(dataset.images.size());
  if (n == 0) throw std::invalid_argument("encode_all: empty dataset");
  if (chunk_size < 1) throw std::invalid_argument("encode_all: chunk size must be >= 1");
  core::Tensor<float> reps({n, encoder.repr_dim()});
  for (int64_t start = 0; start < n; start += chunk_size) {
    const int64_t count = std::min<int64_t>(chunk_size, n - start);
    core::Tensor<float> x({count, 1, data::kImageSide, data::kImageSide});
    for (int64_t i = 0; i < count; ++i) {
      const auto& img = dataset.images[static_cast<size_t>(start + i)].pixels;
      std::copy(img.begin(), img.end(), x.data() + i * data::kImagePixels);
    }
    const auto r = encoder.forward(x, false);
    std::copy(r.data(), r.data() + r.size(), reps.data() + start * encoder.repr_dim());
  }
  return reps;
}

std::vector<int> dataset_labels(const data::LabeledDataset& dataset) {
  std::vector<int> labels;
  labels.reserve(dataset.images.size());
  for (const auto& img : dataset.images) labels.push_back(static_cast<int>(img.label));
  return labels;
}

ContrastiveResult train_contrastive(nn::Encoder<float>& encoder, nn::ProjectionHead<float>& head,
                                    const data::LabeledDataset& train_a,
                                    const data::LabeledDataset* dataset_b,
                                    const augment::AugmentationPolicy& policy,
                                    const TrainConfig& config, ContrastiveLoss loss,
                                    double temperature) {
  validate(config);
  if (!is_contrastive(config.strategy))
    throw std::invalid_argument("train_contrastive: strategy has no contrastive composition");
  if (uses_dataset_b(config.strategy) && (dataset_b == nullptr || dataset_b->images.empty()))
    throw std::invalid_argument(std::string("train_contrastive: strategy ") +
                                strategy_name(config.strategy) + " requires dataset B");
  if (config.strategy == Strategy::cross_ca && loss == ContrastiveLoss::simclr)
    throw std::invalid_argument(
        "train_contrastive: the cross strategy pairs by label and cannot be used with the "
        "pair-based (simclr) loss");
  if (train_a.images.empty())
    throw std::invalid_argument("train_contrastive: empty training set");

  core::Rng root(config.seed);
  const auto materialized =
      augment::materialize(train_a, config.augmentation_ratio, policy, root.derive(1).seed());
  batching::TrainingBatchStream stream(materialized.images, dataset_b,
                                       batching_strategy(config.strategy), config.batch_size,
                                       policy, root.derive(2));
  if (stream.batches_per_epoch() == 0)
    throw std::invalid_argument("train_contrastive: training set smaller than one batch");

  std::vector<nn::ParamRef<float>> params;
  encoder.collect_params(params);
  head.collect_params(params);
  SgdMomentum<float> optimizer(config.momentum);

  ContrastiveResult result;
  for (int epoch = 0; epoch < config.n_epochs; ++epoch) {
    const double lr = lr_at(config, epoch);
    double epoch_sum = 0.0;
    for (int64_t bi = 0; bi < stream.batches_per_epoch(); ++bi) {
      const auto batch = stream.next();
      for (const auto& entry : batch.entries) result.batch_origin_ids.push_back(entry.origin_id);
      const auto x = batch_to_tensor(batch);
      const auto z = head.forward(encoder.forward(x, true));
      core::Tensor<float> dz;
      const double batch_loss = guarded_loss("train_contrastive", epoch, bi, [&] {
        if (loss == ContrastiveLoss::supcon)
          return losses::supcon_loss_grad(z, batch_labels(batch), temperature, &dz);
        return losses::simclr_loss_grad(z, batch.pairing, temperature, &dz);
      });
      // The loss value is the batch sum; optimize its per-anchor mean so the
      // step size is independent of the batch size.
      kernels::scale(1.0f / static_cast<float>(batch.size()), dz.data(), dz.size());
      encoder.backward(head.backward(dz));
      optimizer.step(params, lr);
      epoch_sum += losses::mean_per_anchor(batch_loss, batch.size());
    }
    result.epoch_loss.push_back(epoch_sum / static_cast<double>(stream.batches_per_epoch()));
    result.metrics.push_back({epoch, "contrastive", result.epoch_loss.back(), std::nullopt, lr});
  }
  return result;
}

ProbeResult probe_on_representations(nn::LinearClassifier<float>& classifier,
                                     const core::Tensor<float>& train_reps,
                                     const std::vector<int>& train_labels,
                                     const core::Tensor<float>& val_reps,
                                     const std::vector<int>& val_labels,
                                     const TrainConfig& config) {
  validate(config);
  if (train_reps.ndim() != 2 || val_reps.ndim() != 2)
    throw std::invalid_argument("probe: representations must be [N, D]");
  const int64_t n = train_reps.dim(0), d = train_reps.dim(1);
  if (n == 0) throw std::invalid_argument("probe: empty training set");
  if (val_reps.dim(0) == 0) throw std::invalid_argument("probe: empty validation set");
  if (static_cast<int64_t>(train_labels.size()) != n ||
      static_cast<int64_t>(val_labels.size()) != val_reps.dim(0) || val_reps.dim(1) != d)
    throw std::invalid_argument("probe: representation/label size mismatch");

  core::Rng rng = core::Rng(config.seed).derive(3);
  std::vector<nn::ParamRef<float>> params;
  classifier.collect_params(params);
  SgdMomentum<float> optimizer(config.momentum);

  ProbeResult result;
  double best = -1.0;
  std::vector<core::Tensor<float>> best_params;
  for (int epoch = 0; epoch < config.probe_epochs; ++epoch) {
    const double lr =
        lr_schedule(config.probe_lr, config.decay_factor, config.probe_epochs, epoch);
    const auto perm = rng.permutation(n);
    double loss_sum = 0.0;
    int64_t seen = 0;
    for (int64_t start = 0, batch_index = 0; start < n;
         start += config.batch_size, ++batch_index) {
      const int64_t count = std::min<int64_t>(config.batch_size, n - start);
      core::Tensor<float> xb({count, d});
      std::vector<int> yb(static_cast<size_t>(count));
      for (int64_t i = 0; i < count; ++i) {
        const int64_t src = perm[static_cast<size_t>(start + i)];
        std::copy(train_reps.data() + src * d, train_reps.data() + (src + 1) * d,
                  xb.data() + i * d);
        yb[static_cast<size_t>(i)] = train_labels[static_cast<size_t>(src)];
      }
      core::Tensor<float> dlogits;
      const double batch_loss = guarded_loss("train_probe", epoch, batch_index, [&] {
        return losses::cross_entropy_grad(classifier.forward(xb), yb, &dlogits);
      });
      // Optimize the per-example mean so the step size is batch-size invariant.
      kernels::scale(1.0f / static_cast<float>(count), dlogits.data(), dlogits.size());
      classifier.backward(dlogits);
      optimizer.step(params, lr);
      loss_sum += batch_loss;
      seen += count;
    }
    const double acc = evalstats::top1_accuracy(classifier.forward(val_reps), val_labels);
    result.val_accuracy.push_back(acc);
    result.epoch_loss.push_back(loss_sum / static_cast<double>(seen));
    if (acc > best) {
      best = acc;
      result.best_epoch = epoch;
      best_params = snapshot(params);
    }
    result.metrics.push_back({epoch, "probe", result.epoch_loss.back(), acc, lr});
  }
  result.best_val_accuracy = best;
  restore(params, best_params);
  return result;
}

ProbeResult train_probe(nn::Encoder<float>& encoder, nn::LinearClassifier<float>& classifier,
                        const data::DatasetSplit& split, const TrainConfig& config) {
  validate(config);
  if (split.train.images.empty()) throw std::invalid_argument("train_probe: empty training set");
  if (split.validation.images.empty())
    throw std::invalid_argument("train_probe: empty validation set");
  const auto train_reps = encode_all(encoder, split.train, config.batch_size);
  const auto val_reps = encode_all(encoder, split.validation, config.batch_size);
  return probe_on_representations(classifier, train_reps, dataset_labels(split.train), val_reps,
                                  dataset_labels(split.validation), config);
}

SupervisedResult train_supervised(nn::Encoder<float>& encoder,
                                  nn::LinearClassifier<float>& classifier,
                                  const data::DatasetSplit& split,
                                  const data::LabeledDataset* dataset_b,
                                  const augment::AugmentationPolicy& policy,
                                  const TrainConfig& config) {
  validate(config);
  if (config.strategy != Strategy::supervised_c && config.strategy != Strategy::supervised_ca)
    throw std::invalid_argument("train_supervised: strategy is not supervised");
  const bool mix = config.strategy == Strategy::supervised_ca;
  if (mix && (dataset_b == nullptr || dataset_b->images.empty()))
    throw std::invalid_argument("train_supervised: supervised_ca requires dataset B");
  if (split.train.images.empty())
    throw std::invalid_argument("train_supervised: empty training set");
  if (split.validation.images.empty())
    throw std::invalid_argument("train_supervised: empty validation set");

  core::Rng root(config.seed);
  const auto materialized =
      augment::materialize(split.train, config.augmentation_ratio, policy, root.derive(1).seed());
  core::Rng shuffle_rng = root.derive(4);
  core::Rng aux_rng = root.derive(5);

  std::vector<nn::ParamRef<float>> params;
  encoder.collect_params(params);
  classifier.collect_params(params);
  SgdMomentum<float> optimizer(config.momentum);

  const int64_t n = static_cast<int64_t>(materialized.images.images.size());
  const int64_t a_per_batch = mix ? config.batch_size / 2 : config.batch_size;
  const std::vector<int> val_labels = dataset_labels(split.validation);

  SupervisedResult result;
  double best = -1.0;
  std::vector<core::Tensor<float>> best_params;
  for (int epoch = 0; epoch < config.n_epochs; ++epoch) {
    const double lr = lr_at(config, epoch);
    const auto perm = shuffle_rng.permutation(n);
    double loss_sum = 0.0;
    int64_t seen = 0;
    for (int64_t start = 0, batch_index = 0; start < n; start += a_per_batch, ++batch_index) {
      const int64_t a_count = std::min<int64_t>(a_per_batch, n - start);
      const int64_t total = mix ? 2 * a_count : a_count;
      core::Tensor<float> x({total, 1, data::kImageSide, data::kImageSide});
      std::vector<int> labels(static_cast<size_t>(total));
      for (int64_t i = 0; i < a_count; ++i) {
        const auto& img =
            materialized.images.images[static_cast<size_t>(perm[static_cast<size_t>(start + i)])];
        std::copy(img.pixels.begin(), img.pixels.end(), x.data() + i * data::kImagePixels);
        labels[static_cast<size_t>(i)] = static_cast<int>(img.label);
        result.batch_origin_ids.push_back(img.id);
      }
      if (mix) {
        // Exact 50/50 per-batch mix: one fresh-augmented auxiliary image per
        // primary image, labels taken from the auxiliary source.
        for (int64_t i = 0; i < a_count; ++i) {
          const auto& origin = dataset_b->images[static_cast<size_t>(
              aux_rng.uniform_int(static_cast<int64_t>(dataset_b->images.size())))];
          const auto img = augment::apply(origin, augment::draw(policy, aux_rng));
          std::copy(img.pixels.begin(), img.pixels.end(),
                    x.data() + (a_count + i) * data::kImagePixels);
          labels[static_cast<size_t>(a_count + i)] = static_cast<int>(img.label);
          result.batch_origin_ids.push_back(origin.id);
        }
      }
      core::Tensor<float> dlogits;
      const double batch_loss = guarded_loss("train_supervised", epoch, batch_index, [&] {
        return losses::cross_entropy_grad(classifier.forward(encoder.forward(x, true)), labels,
                                          &dlogits);
      });
      // Optimize the per-example mean so the step size is batch-size invariant.
      kernels::scale(1.0f / static_cast<float>(total), dlogits.data(), dlogits.size());
      encoder.backward(classifier.backward(dlogits));
      optimizer.step(params, lr);
      loss_sum += batch_loss;
      seen += total;
    }
    const auto val_reps = encode_all(encoder, split.validation, config.batch_size);
    const double acc = evalstats::top1_accuracy(classifier.forward(val_reps), val_labels);
    result.val_accuracy.push_back(acc);
    result.epoch_loss.push_back(loss_sum / static_cast<double>(seen));
    if (acc > best) {
      best = acc;
      result.best_epoch = epoch;
      best_params = snapshot(params);
    }
    result.metrics.push_back({epoch, "supervised", result.epoch_loss.back(), acc, lr});
  }
  result.best_val_accuracy = best;
  restore(params, best_params);
  return result;
}

void save_training_checkpoint(const std::string& path,
                              const std::vector<nn::ParamRef<float>>& params,
                              const std::vector<nn::BufferRef<float>>& buffers,
                              const SgdMomentum<float>& optimizer, int64_t epoch,
                              double best_validation_accuracy, const core::Rng& rng) {
  nn::TensorStore store;
  nn::store_params(store, params, buffers);
  for (size_t i = 0; i < optimizer.velocities().size(); ++i)
    store.put_f32("optimizer." + optimizer.names()[i], optimizer.velocities()[i]);
  store.put_u64("trainer.epoch", {static_cast<uint64_t>(epoch)});
  core::Tensor<double> best({1});
  best[0] = best_validation_accuracy;
  store.put_f64("trainer.best_validation_accuracy", std::move(best));
  const auto& s = rng.state();
  store.put_u64("trainer.rng", {rng.seed(), s[0], s[1], s[2], s[3]});
  store.save(path);
}

LoadedCheckpoint load_training_checkpoint(const std::string& path,
                                          const std::vector<nn::ParamRef<float>>& params,
                                          const std::vector<nn::BufferRef<float>>& buffers,
                                          SgdMomentum<float>& optimizer) {
  const auto store = nn::TensorStore::load(path);
  nn::load_params(store, params, buffers);
  optimizer.bind(params);
  for (size_t i = 0; i < params.size(); ++i) {
    const std::string name = "optimizer." + params[i].name;
    if (!store.contains(name)) continue;  // checkpoint taken before any step
    const auto& v = store.f32(name);
    if (!v.same_shape(optimizer.velocity(i)))
      throw std::runtime_error("checkpoint shape mismatch for " + name);
    optimizer.velocity(i) = v;
  }
  LoadedCheckpoint out;
  out.epoch = static_cast<int64_t>(store.u64("trainer.epoch").at(0));
  out.best_validation_accuracy = store.f64("trainer.best_validation_accuracy")[0];
  const auto& r = store.u64("trainer.rng");
  if (r.size() != 5) throw std::runtime_error("checkpoint rng state has the wrong size");
  out.rng = core::Rng(r[0]);
  out.rng.set_state({r[1], r[2], r[3], r[4]});
  return out;
}

}  // namespace paircon::training
