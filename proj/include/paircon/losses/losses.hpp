// Contrastive and supervised losses. All reductions over the batch are SUMS
// (mean_per_anchor is provided for logging). Internally every loss works on
// cosine similarities of row-normalized copies, so inputs need not be unit
// vectors, and all arithmetic runs in double regardless of T.
//
// Gradient entry points return the loss and write dL/dZ for the raw
// (pre-normalization) rows, including the chain through normalization.
#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "paircon/core/tensor.hpp"

namespace paircon::losses {

namespace detail {

// Unit rows in double; a zero row is an error (projections are unit length).
template <typename T>
inline void normalized_rows(const core::Tensor<T>& z, std::vector<double>& zhat,
                            std::vector<double>& norms) {
  const int64_t b = z.dim(0), k = z.dim(1);
  zhat.resize(static_cast<size_t>(b * k));
  norms.resize(static_cast<size_t>(b));
  for (int64_t i = 0; i < b; ++i) {
    double sq = 0.0;
    for (int64_t j = 0; j < k; ++j) {
      const double v = static_cast<double>(z[i * k + j]);
      zhat[static_cast<size_t>(i * k + j)] = v;
      sq += v * v;
    }
    const double n = std::sqrt(sq);
    if (!(n > 0.0) || !std::isfinite(n))
      throw std::invalid_argument("loss: projection row " + std::to_string(i) +
                                  " has zero or non-finite norm");
    norms[static_cast<size_t>(i)] = n;
    for (int64_t j = 0; j < k; ++j) zhat[static_cast<size_t>(i * k + j)] /= n;
  }
}

// S[i*b+q] = zhat_i . zhat_q
inline std::vector<double> similarity_matrix(const std::vector<double>& zhat, int64_t b,
                                             int64_t k) {
  std::vector<double> s(static_cast<size_t>(b * b));
  for (int64_t i = 0; i < b; ++i)
    for (int64_t q = 0; q < b; ++q) {
      double d = 0.0;
      for (int64_t j = 0; j < k; ++j)
        d += zhat[static_cast<size_t>(i * k + j)] * zhat[static_cast<size_t>(q * k + j)];
      s[static_cast<size_t>(i * b + q)] = d;
    }
  return s;
}

// log sum_{q != i} exp(s_iq / tau), max-subtracted.
inline double row_lse(const std::vector<double>& s, int64_t b, int64_t i, double tau) {
  double mx = -std::numeric_limits<double>::infinity();
  for (int64_t q = 0; q < b; ++q)
    if (q != i) mx = std::max(mx, s[static_cast<size_t>(i * b + q)] / tau);
  double acc = 0.0;
  for (int64_t q = 0; q < b; ++q)
    if (q != i) acc += std::exp(s[static_cast<size_t>(i * b + q)] / tau - mx);
  return mx + std::log(acc);
}

inline void check_pairing(const std::vector<int>& pairing, int64_t b) {
  if (static_cast<int64_t>(pairing.size()) != b)
    throw std::invalid_argument("loss: pairing must cover every index");
  for (int64_t i = 0; i < b; ++i) {
    const int o = pairing[static_cast<size_t>(i)];
    if (o < 0 || o >= b || o == i || pairing[static_cast<size_t>(o)] != i)
      throw std::invalid_argument("loss: pairing is not a fixed-point-free involution");
  }
}

// dL/dzhat_i = sum_q (G_iq + G_qi) zhat_q, then through normalization:
// dL/dz_i = (dL/dzhat_i - zhat_i (zhat_i . dL/dzhat_i)) / ||z_i||.
template <typename T>
inline void grad_from_pair_matrix(const std::vector<double>& g, const std::vector<double>& zhat,
                                  const std::vector<double>& norms, int64_t b, int64_t k,
                                  core::Tensor<T>* dz) {
  *dz = core::Tensor<T>({b, k});
  std::vector<double> dzhat(static_cast<size_t>(k));
  for (int64_t i = 0; i < b; ++i) {
    std::fill(dzhat.begin(), dzhat.end(), 0.0);
    for (int64_t q = 0; q < b; ++q) {
      const double w =
          g[static_cast<size_t>(i * b + q)] + g[static_cast<size_t>(q * b + i)];
      if (w == 0.0) continue;
      for (int64_t j = 0; j < k; ++j) dzhat[static_cast<size_t>(j)] += w * zhat[static_cast<size_t>(q * k + j)];
    }
    double proj = 0.0;
    for (int64_t j = 0; j < k; ++j)
      proj += zhat[static_cast<size_t>(i * k + j)] * dzhat[static_cast<size_t>(j)];
    for (int64_t j = 0; j < k; ++j) {
      const double v = (dzhat[static_cast<size_t>(j)] - zhat[static_cast<size_t>(i * k + j)] * proj) /
                       norms[static_cast<size_t>(i)];
      (*dz)[i * k + j] = static_cast<T>(v);
    }
  }
}

template <typename T>
inline void check_batch_inputs(const core::Tensor<T>& z, double tau) {
  if (z.ndim() != 2 || z.dim(0) < 2) throw std::invalid_argument("loss: need at least 2 projections");
  if (!(tau > 0.0)) throw std::invalid_argument("loss: temperature must be positive");
}

}  // namespace detail

// L = -sum_i log( exp(s(z_i, z_{o(i)})/tau) / sum_{q != i} exp(s(z_i, z_q)/tau) ).
// The b=2 batch is exactly 0: the denominator holds only the positive.
template <typename T>
T simclr_loss_grad(const core::Tensor<T>& z, const std::vector<int>& pairing, double tau,
                   std::type_identity_t<core::Tensor<T>>* dz) {
  detail::check_batch_inputs(z, tau);
  const int64_t b = z.dim(0), k = z.dim(1);
  detail::check_pairing(pairing, b);

  std::vector<double> zhat, norms;
  detail::normalized_rows(z, zhat, norms);
  const auto s = detail::similarity_matrix(zhat, b, k);

  double loss = 0.0;
  std::vector<double> g;
  if (dz) g.assign(static_cast<size_t>(b * b), 0.0);
  for (int64_t i = 0; i < b; ++i) {
    const int o = pairing[static_cast<size_t>(i)];
    const double lse = detail::row_lse(s, b, i, tau);
    loss += -s[static_cast<size_t>(i * b + o)] / tau + lse;
    if (dz)
      for (int64_t q = 0; q < b; ++q) {
        if (q == i) continue;
        const double softmax = std::exp(s[static_cast<size_t>(i * b + q)] / tau - lse);
        g[static_cast<size_t>(i * b + q)] = (softmax - (q == o ? 1.0 : 0.0)) / tau;
      }
  }
  if (dz) detail::grad_from_pair_matrix(g, zhat, norms, b, k, dz);
  return static_cast<T>(loss);
}

template <typename T>
T simclr_loss(const core::Tensor<T>& z, const std::vector<int>& pairing, double tau) {
  return simclr_loss_grad<T>(z, pairing, tau, nullptr);
}

// L = sum_i (-1/|P(i)|) sum_{p in P(i)} log( exp(s(z_i,z_p)/tau) / sum_{q != i} ... ).
// Anchors with empty P(i) contribute 0; every P(i) empty is an error.
template <typename T>
T supcon_loss_grad(const core::Tensor<T>& z, const std::vector<int>& labels, double tau,
                   std::type_identity_t<core::Tensor<T>>* dz) {
  detail::check_batch_inputs(z, tau);
  const int64_t b = z.dim(0), k = z.dim(1);
  if (static_cast<int64_t>(labels.size()) != b)
    throw std::invalid_argument("loss: one label per projection required");

  std::vector<std::vector<int64_t>> positives(static_cast<size_t>(b));
  bool any = false;
  for (int64_t i = 0; i < b; ++i) {
    for (int64_t q = 0; q < b; ++q)
      if (q != i && labels[static_cast<size_t>(q)] == labels[static_cast<size_t>(i)])
        positives[static_cast<size_t>(i)].push_back(q);
    any |= !positives[static_cast<size_t>(i)].empty();
  }
  if (!any) throw std::runtime_error("no positives in batch");

  std::vector<double> zhat, norms;
  detail::normalized_rows(z, zhat, norms);
  const auto s = detail::similarity_matrix(zhat, b, k);

  double loss = 0.0;
  std::vector<double> g;
  if (dz) g.assign(static_cast<size_t>(b * b), 0.0);
  for (int64_t i = 0; i < b; ++i) {
    const auto& p = positives[static_cast<size_t>(i)];
    if (p.empty()) continue;
    const double lse = detail::row_lse(s, b, i, tau);
    const double inv_p = 1.0 / static_cast<double>(p.size());
    for (int64_t q : p) loss += inv_p * (-s[static_cast<size_t>(i * b + q)] / tau + lse);
    if (dz) {
      for (int64_t q = 0; q < b; ++q) {
        if (q == i) continue;
        const double softmax = std::exp(s[static_cast<size_t>(i * b + q)] / tau - lse);
        g[static_cast<size_t>(i * b + q)] = softmax / tau;
      }
      for (int64_t q : p) g[static_cast<size_t>(i * b + q)] -= inv_p / tau;
    }
  }
  if (dz) detail::grad_from_pair_matrix(g, zhat, norms, b, k, dz);
  return static_cast<T>(loss);
}

template <typename T>
T supcon_loss(const core::Tensor<T>& z, const std::vector<int>& labels, double tau) {
  return supcon_loss_grad<T>(z, labels, tau, nullptr);
}

// -log softmax(logits)[label] for one sample, max-subtracted.
template <typename T>
T cross_entropy(const core::Tensor<T>& logits, int label) {
  if (logits.ndim() != 1) throw std::invalid_argument("cross_entropy: expects a logit vector");
  const int64_t n = logits.dim(0);
  if (label < 0 || label >= n) throw std::invalid_argument("cross_entropy: label out of range");
  double mx = -std::numeric_limits<double>::infinity();
  for (int64_t j = 0; j < n; ++j) {
    if (!std::isfinite(static_cast<double>(logits[j])))
      throw std::invalid_argument("cross_entropy: non-finite logit");
    mx = std::max(mx, static_cast<double>(logits[j]));
  }
  double acc = 0.0;
  for (int64_t j = 0; j < n; ++j) acc += std::exp(static_cast<double>(logits[j]) - mx);
  return static_cast<T>(mx + std::log(acc) - static_cast<double>(logits[label]));
}

// Batch SUM of per-sample cross-entropies; dlogits (optional) gets
// softmax - onehot per row.
template <typename T>
T cross_entropy_grad(const core::Tensor<T>& logits, const std::vector<int>& labels,
                     std::type_identity_t<core::Tensor<T>>* dlogits) {
  if (logits.ndim() != 2) throw std::invalid_argument("cross_entropy: expects [N, classes] logits");
  const int64_t n = logits.dim(0), c = logits.dim(1);
  if (static_cast<int64_t>(labels.size()) != n)
    throw std::invalid_argument("cross_entropy: one label per row required");
  if (dlogits) *dlogits = core::Tensor<T>({n, c});

  double loss = 0.0;
  std::vector<double> prob(static_cast<size_t>(c));
  for (int64_t i = 0; i < n; ++i) {
    const int label = labels[static_cast<size_t>(i)];
    if (label < 0 || label >= c) throw std::invalid_argument("cross_entropy: label out of range");
    double mx = -std::numeric_limits<double>::infinity();
    for (int64_t j = 0; j < c; ++j) {
      const double v = static_cast<double>(logits[i * c + j]);
      if (!std::isfinite(v)) throw std::invalid_argument("cross_entropy: non-finite logit");
      mx = std::max(mx, v);
    }
    double acc = 0.0;
    for (int64_t j = 0; j < c; ++j) {
      prob[static_cast<size_t>(j)] = std::exp(static_cast<double>(logits[i * c + j]) - mx);
      acc += prob[static_cast<size_t>(j)];
    }
    loss += mx + std::log(acc) - static_cast<double>(logits[i * c + label]);
    if (dlogits)
      for (int64_t j = 0; j < c; ++j)
        (*dlogits)[i * c + j] =
            static_cast<T>(prob[static_cast<size_t>(j)] / acc - (j == label ? 1.0 : 0.0));
  }
  return static_cast<T>(loss);
}

// Logging convenience: the batch-sum loss divided by the number of anchors.
inline double mean_per_anchor(double batch_sum, int64_t b) {
  return batch_sum / static_cast<double>(b);
}

}  // namespace paircon::losses
