#include "paircon/batching/batching.hpp"

#include <cmath>
#include <stdexcept>

namespace paircon::batching {
namespace {

void check_even(int batch_size) {
  if (batch_size < 2 || batch_size % 2 != 0)
    throw std::invalid_argument("batch size must be even and >= 2");
}

BatchEntry make_view(const data::LabeledImage& origin, const augment::AugmentationPolicy& policy,
                     core::Rng& rng, Source source) {
  const auto d = augment::draw(policy, rng);
  data::LabeledImage aug = augment::apply(origin, d);
  BatchEntry entry;
  entry.image = std::move(aug.pixels);
  entry.label = origin.label;
  entry.origin_id = origin.id;
  entry.source = source;
  return entry;
}

// Two augmentations per origin, adjacent, pairing o(2k) = 2k+1.
void emit_view_pair(Batch& batch, const data::LabeledImage& origin,
                    const augment::AugmentationPolicy& policy, core::Rng& rng, Source source) {
  const int base = batch.size();
  batch.entries.push_back(make_view(origin, policy, rng, source));
  batch.entries.push_back(make_view(origin, policy, rng, source));
  batch.pairing.push_back(base + 1);
  batch.pairing.push_back(base);
}

std::unordered_map<int, std::vector<int64_t>> index_by_label(const data::LabeledDataset& set) {
  std::unordered_map<int, std::vector<int64_t>> by_label;
  for (int64_t i = 0; i < static_cast<int64_t>(set.images.size()); ++i)
    by_label[static_cast<int>(set.images[static_cast<size_t>(i)].label)].push_back(i);
  return by_label;
}

Batch compose_two_view_from(const data::LabeledDataset& a, const std::vector<int64_t>& origins,
                            const augment::AugmentationPolicy& policy, core::Rng& rng) {
  Batch batch;
  batch.strategy = Strategy::two_view;
  for (int64_t idx : origins)
    emit_view_pair(batch, a.images[static_cast<size_t>(idx)], policy, rng, Source::A);
  return batch;
}

Batch compose_union_from(const data::LabeledDataset& a, const std::vector<int64_t>& a_origins,
                         const data::LabeledDataset& b, const std::vector<int64_t>& b_origins,
                         const augment::AugmentationPolicy& policy, core::Rng& rng) {
  Batch batch;
  batch.strategy = Strategy::union_ab;
  for (int64_t idx : a_origins)
    emit_view_pair(batch, a.images[static_cast<size_t>(idx)], policy, rng, Source::A);
  for (int64_t idx : b_origins)
    emit_view_pair(batch, b.images[static_cast<size_t>(idx)], policy, rng, Source::B);
  return batch;
}

Batch compose_cross_from(const data::LabeledDataset& a, const std::vector<int64_t>& a_origins,
                         const data::LabeledDataset& b,
                         const std::unordered_map<int, std::vector<int64_t>>& b_by_label,
                         const augment::AugmentationPolicy& policy, core::Rng& rng) {
  Batch batch;
  batch.strategy = Strategy::cross;
  for (int64_t idx : a_origins) {
    const auto& origin = a.images[static_cast<size_t>(idx)];
    const auto it = b_by_label.find(static_cast<int>(origin.label));
    if (it == b_by_label.end() || it->second.empty())
      throw std::runtime_error(std::string("label '") + data::label_name(origin.label) +
                               "' absent from auxiliary dataset");
    const int base = batch.size();
    batch.entries.push_back(make_view(origin, policy, rng, Source::A));
    const auto& pool = it->second;
    const int64_t pick = pool[static_cast<size_t>(rng.uniform_int(
        static_cast<int64_t>(pool.size())))];
    batch.entries.push_back(make_view(b.images[static_cast<size_t>(pick)], policy, rng, Source::B));
    batch.pairing.push_back(base + 1);
    batch.pairing.push_back(base);
  }
  return batch;
}

}  // namespace

const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::two_view: return "two_view";
    case Strategy::union_ab: return "union";
    case Strategy::cross: return "cross";
  }
  return "?";
}

Batch compose_two_view(const data::LabeledDataset& dataset_a, int batch_size,
                       const augment::AugmentationPolicy& policy, core::Rng& rng) {
  check_even(batch_size);
  const int64_t need = batch_size / 2;
  const auto n = static_cast<int64_t>(dataset_a.images.size());
  if (n < need) throw std::invalid_argument("dataset smaller than batch_size/2");
  const auto origins = rng.sample_without_replacement(n, need);
  return compose_two_view_from(dataset_a, origins, policy, rng);
}

Batch compose_union(const data::LabeledDataset& dataset_a, const data::LabeledDataset& dataset_b,
                    int batch_size, const augment::AugmentationPolicy& policy, core::Rng& rng) {
  if (batch_size < 4 || batch_size % 4 != 0)
    throw std::invalid_argument("union strategy needs batch size divisible by 4");
  const int64_t need = batch_size / 4;
  const auto na = static_cast<int64_t>(dataset_a.images.size());
  const auto nb = static_cast<int64_t>(dataset_b.images.size());
  if (na < need || nb < need)
    throw std::invalid_argument("datasets smaller than batch_size/4");
  const auto a_origins = rng.sample_without_replacement(na, need);
  const auto b_origins = rng.sample_without_replacement(nb, need);
  return compose_union_from(dataset_a, a_origins, dataset_b, b_origins, policy, rng);
}

Batch compose_cross(const data::LabeledDataset& dataset_a, const data::LabeledDataset& dataset_b,
                    int batch_size, const augment::AugmentationPolicy& policy, core::Rng& rng) {
  check_even(batch_size);
  const int64_t need = batch_size / 2;
  const auto n = static_cast<int64_t>(dataset_a.images.size());
  if (n < need) throw std::invalid_argument("dataset smaller than batch_size/2");
  const auto origins = rng.sample_without_replacement(n, need);
  const auto by_label = index_by_label(dataset_b);
  return compose_cross_from(dataset_a, origins, dataset_b, by_label, policy, rng);
}

PositiveSets positive_sets(const Batch& batch) {
  const int b = batch.size();
  PositiveSets ps;
  ps.p.resize(static_cast<size_t>(b));
  for (int i = 0; i < b; ++i)
    for (int j = 0; j < b; ++j)
      if (j != i && batch.entries[static_cast<size_t>(j)].label ==
                        batch.entries[static_cast<size_t>(i)].label)
        ps.p[static_cast<size_t>(i)].push_back(j);
  return ps;
}

void validate(const Batch& batch) {
  const int b = batch.size();
  auto bail = [](const std::string& what) { throw std::runtime_error("invalid batch: " + what); };

  if (b < 2 || b % 2 != 0) bail("size must be even and >= 2");
  if (batch.pairing.size() != static_cast<size_t>(b)) bail("pairing size mismatch");

  for (int i = 0; i < b; ++i) {
    const auto& e = batch.entries[static_cast<size_t>(i)];
    if (e.image.size() != static_cast<size_t>(data::kImagePixels)) bail("entry image not 48x48");
    for (float v : e.image)
      if (!(v >= 0.0f && v <= 1.0f)) bail("pixel outside [0,1]");

    const int o = batch.pairing[static_cast<size_t>(i)];
    if (o < 0 || o >= b) bail("pairing index out of range");
    if (o == i) bail("pairing has a fixed point");
    if (batch.pairing[static_cast<size_t>(o)] != i) bail("pairing is not an involution");
    if (batch.entries[static_cast<size_t>(o)].label != e.label)
      bail("paired entries with different labels");
  }

  int count_a = 0;
  for (const auto& e : batch.entries) count_a += (e.source == Source::A);

  switch (batch.strategy) {
    case Strategy::two_view:
      if (count_a != b) bail("two_view batch with non-primary entries");
      for (int i = 0; i < b; ++i)
        if (batch.entries[static_cast<size_t>(i)].origin_id !=
            batch.entries[static_cast<size_t>(batch.pairing[static_cast<size_t>(i)])].origin_id)
          bail("paired views with different origins");
      break;
    case Strategy::union_ab:
      if (count_a != b / 2) bail("union batch source counts are not 50/50");
      for (int i = 0; i < b; ++i) {
        const int o = batch.pairing[static_cast<size_t>(i)];
        if (batch.entries[static_cast<size_t>(i)].origin_id !=
            batch.entries[static_cast<size_t>(o)].origin_id)
          bail("paired views with different origins");
        if (batch.entries[static_cast<size_t>(i)].source !=
            batch.entries[static_cast<size_t>(o)].source)
          bail("paired views with different sources");
      }
      break;
    case Strategy::cross:
      for (int i = 0; i + 1 < b; i += 2) {
        if (batch.pairing[static_cast<size_t>(i)] != i + 1 ||
            batch.pairing[static_cast<size_t>(i + 1)] != i)
          bail("cross pairs must be adjacent");
        if (batch.entries[static_cast<size_t>(i)].source != Source::A ||
            batch.entries[static_cast<size_t>(i + 1)].source != Source::B)
          bail("cross pair sources must be (A, B)");
      }
      break;
  }
}

double batch_similarity(const Batch& batch) {
  const int b = batch.size();
  if (b < 2) throw std::invalid_argument("batch_similarity needs >= 2 entries");
  const int n = data::kImagePixels;

  // Center each entry and precompute norms in double.
  std::vector<std::vector<double>> centered(static_cast<size_t>(b));
  std::vector<double> norms(static_cast<size_t>(b));
  for (int i = 0; i < b; ++i) {
    const auto& px = batch.entries[static_cast<size_t>(i)].image;
    double mean = 0.0;
    for (float v : px) mean += v;
    mean /= n;
    auto& c = centered[static_cast<size_t>(i)];
    c.resize(static_cast<size_t>(n));
    double sq = 0.0;
    for (int p = 0; p < n; ++p) {
      c[static_cast<size_t>(p)] = static_cast<double>(px[static_cast<size_t>(p)]) - mean;
      sq += c[static_cast<size_t>(p)] * c[static_cast<size_t>(p)];
    }
    norms[static_cast<size_t>(i)] = std::sqrt(sq);
  }

  constexpr double kZeroNorm = 1e-12;
  double total = 0.0;
  int64_t pairs = 0;
  for (int i = 0; i < b; ++i)
    for (int j = i + 1; j < b; ++j) {
      ++pairs;
      if (norms[static_cast<size_t>(i)] < kZeroNorm || norms[static_cast<size_t>(j)] < kZeroNorm)
        continue;  // zero-variance entry contributes 0
      double dot = 0.0;
      const auto& ci = centered[static_cast<size_t>(i)];
      const auto& cj = centered[static_cast<size_t>(j)];
      for (int p = 0; p < n; ++p) dot += ci[static_cast<size_t>(p)] * cj[static_cast<size_t>(p)];
      total += dot / (norms[static_cast<size_t>(i)] * norms[static_cast<size_t>(j)]);
    }
  return total / static_cast<double>(pairs);
}

TrainingBatchStream::TrainingBatchStream(const data::LabeledDataset& dataset_a,
                                         const data::LabeledDataset* dataset_b, Strategy strategy,
                                         int batch_size, augment::AugmentationPolicy policy,
                                         core::Rng rng)
    : a_(dataset_a),
      b_(dataset_b),
      strategy_(strategy),
      batch_size_(batch_size),
      origins_per_batch_(0),
      batches_per_epoch_(0),
      policy_(policy),
      rng_(rng) {
  check_even(batch_size);
  if (strategy == Strategy::union_ab && batch_size % 4 != 0)
    throw std::invalid_argument("union strategy needs batch size divisible by 4");
  if ((strategy == Strategy::union_ab || strategy == Strategy::cross) && b_ == nullptr)
    throw std::invalid_argument("strategy requires an auxiliary dataset");

  origins_per_batch_ = strategy == Strategy::union_ab ? batch_size / 4 : batch_size / 2;
  const auto n = static_cast<int64_t>(a_.images.size());
  batches_per_epoch_ = n / origins_per_batch_;
  if (batches_per_epoch_ == 0)
    throw std::invalid_argument("dataset smaller than one batch of origins");

  if (strategy == Strategy::union_ab &&
      static_cast<int64_t>(b_->images.size()) < batch_size / 4)
    throw std::invalid_argument("auxiliary dataset smaller than batch_size/4");
  if (strategy == Strategy::cross) b_by_label_ = index_by_label(*b_);

  perm_ = rng_.permutation(n);
}

Batch TrainingBatchStream::next() {
  const auto n = static_cast<int64_t>(perm_.size());
  if (cursor_ + origins_per_batch_ > n) {
    perm_ = rng_.permutation(n);
    cursor_ = 0;
  }
  std::vector<int64_t> origins(perm_.begin() + cursor_,
                               perm_.begin() + cursor_ + origins_per_batch_);
  cursor_ += origins_per_batch_;

  switch (strategy_) {
    case Strategy::two_view:
      return compose_two_view_from(a_, origins, policy_, rng_);
    case Strategy::union_ab: {
      const auto nb = static_cast<int64_t>(b_->images.size());
      const auto b_origins = rng_.sample_without_replacement(nb, batch_size_ / 4);
      return compose_union_from(a_, origins, *b_, b_origins, policy_, rng_);
    }
    case Strategy::cross:
      return compose_cross_from(a_, origins, *b_, b_by_label_, policy_, rng_);
  }
  throw std::logic_error("unreachable");
}

}  // namespace paircon::batching
