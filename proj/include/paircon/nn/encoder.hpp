// Model components: the two encoder configurations, the projection head, and
// the linear classifier. Parameter initialization is a pure function of
// ModelConfig::parameter_seed.
#pragma once

#include <cstdio>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "paircon/nn/layers.hpp"

namespace paircon::nn {

enum class EncoderKind { tiny_cnn, resnet18_gray };

struct ModelConfig {
  EncoderKind encoder_kind = EncoderKind::tiny_cnn;
  int64_t k_prime = 64;   // representation dimension
  int64_t k = 32;         // projection dimension, must be < k_prime
  int num_classes = 7;
  uint64_t parameter_seed = 0;
};

inline ModelConfig tiny_cnn_config(uint64_t parameter_seed) {
  return {EncoderKind::tiny_cnn, 64, 32, 7, parameter_seed};
}
inline ModelConfig resnet18_gray_config(uint64_t parameter_seed) {
  return {EncoderKind::resnet18_gray, 512, 128, 7, parameter_seed};
}

inline const char* encoder_kind_name(EncoderKind k) {
  return k == EncoderKind::tiny_cnn ? "tiny_cnn" : "resnet18_gray";
}

inline EncoderKind encoder_kind_from_name(const std::string& s) {
  if (s == "tiny_cnn") return EncoderKind::tiny_cnn;
  if (s == "resnet18_gray") return EncoderKind::resnet18_gray;
  throw std::invalid_argument("unknown encoder kind: " + s);
}

inline void validate(const ModelConfig& cfg) {
  if (cfg.k_prime <= 0 || cfg.k <= 0) throw std::invalid_argument("model: dimensions must be positive");
  if (cfg.k >= cfg.k_prime) throw std::invalid_argument("model: projection dim must be below representation dim");
  if (cfg.num_classes != 7) throw std::invalid_argument("model: expects 7 classes");
}

// conv-bn-relu-conv-bn plus identity or 1x1-conv-bn shortcut, relu after the
// residual add.
template <typename T>
class BasicBlock final : public Layer<T> {
 public:
  BasicBlock(int64_t in_c, int64_t out_c, int64_t stride, core::Rng& rng)
      : conv1_(in_c, out_c, 3, stride, 1, false, rng),
        bn1_(out_c),
        conv2_(out_c, out_c, 3, 1, 1, false, rng),
        bn2_(out_c) {
    if (stride != 1 || in_c != out_c) {
      proj_conv_ = std::make_unique<Conv2d<T>>(in_c, out_c, 1, stride, 0, false, rng);
      proj_bn_ = std::make_unique<BatchNorm2d<T>>(out_c);
    }
  }

  core::Tensor<T> forward(const core::Tensor<T>& x, bool train) override {
    auto h = relu1_.forward(bn1_.forward(conv1_.forward(x, train), train), train);
    auto main = bn2_.forward(conv2_.forward(h, train), train);
    core::Tensor<T> shortcut =
        proj_conv_ ? proj_bn_->forward(proj_conv_->forward(x, train), train) : x;
    pre_act_ = core::Tensor<T>(main.shape());
    for (int64_t i = 0; i < main.size(); ++i) pre_act_[i] = main[i] + shortcut[i];
    core::Tensor<T> y(pre_act_.shape());
    kernels::relu_forward(pre_act_.data(), y.data(), y.size());
    return y;
  }

  core::Tensor<T> backward(const core::Tensor<T>& dy) override {
    core::Tensor<T> dpre(pre_act_.shape());
    kernels::relu_backward(pre_act_.data(), dy.data(), dpre.data(), dy.size());
    auto dx_main = conv1_.backward(bn1_.backward(relu1_.backward(conv2_.backward(bn2_.backward(dpre)))));
    core::Tensor<T> dx_short =
        proj_conv_ ? proj_conv_->backward(proj_bn_->backward(dpre)) : dpre;
    for (int64_t i = 0; i < dx_main.size(); ++i) dx_main[i] += dx_short[i];
    return dx_main;
  }

  void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
    conv1_.collect_params(prefix + ".conv1", out);
    bn1_.collect_params(prefix + ".bn1", out);
    conv2_.collect_params(prefix + ".conv2", out);
    bn2_.collect_params(prefix + ".bn2", out);
    if (proj_conv_) {
      proj_conv_->collect_params(prefix + ".proj_conv", out);
      proj_bn_->collect_params(prefix + ".proj_bn", out);
    }
  }
  void collect_buffers(const std::string& prefix, std::vector<BufferRef<T>>& out) override {
    bn1_.collect_buffers(prefix + ".bn1", out);
    bn2_.collect_buffers(prefix + ".bn2", out);
    if (proj_bn_) proj_bn_->collect_buffers(prefix + ".proj_bn", out);
  }

 private:
  Conv2d<T> conv1_;
  BatchNorm2d<T> bn1_;
  ReLU<T> relu1_;
  Conv2d<T> conv2_;
  BatchNorm2d<T> bn2_;
  std::unique_ptr<Conv2d<T>> proj_conv_;
  std::unique_ptr<BatchNorm2d<T>> proj_bn_;
  core::Tensor<T> pre_act_;
};

// Feature extractor plus global average pooling. forward_features exposes the
// final convolutional feature maps (the class-activation-map target).
template <typename T>
class Encoder {
 public:
  explicit Encoder(const ModelConfig& cfg) : cfg_(cfg) {
    validate(cfg);
    core::Rng rng(cfg.parameter_seed);
    if (cfg.encoder_kind == EncoderKind::tiny_cnn) {
      if (cfg.k_prime != 64) throw std::invalid_argument("tiny_cnn: representation dim is 64");
      int64_t in_c = 1;
      const int64_t channels[3] = {16, 32, 64};
      for (int i = 0; i < 3; ++i) {
        const std::string n = std::to_string(i + 1);
        features_.add("conv" + n, std::make_unique<Conv2d<T>>(in_c, channels[i], 3, 1, 1, true, rng));
        features_.add("relu" + n, std::make_unique<ReLU<T>>());
        features_.add("pool" + n, std::make_unique<MaxPool2<T>>());
        in_c = channels[i];
      }
    } else {
      if (cfg.k_prime != 512) throw std::invalid_argument("resnet18_gray: representation dim is 512");
      // 3x3 stem fit to 48x48 inputs, then the standard 2-2-2-2 basic-block
      // stack at widths 64/128/256/512.
      features_.add("stem_conv", std::make_unique<Conv2d<T>>(1, 64, 3, 1, 1, false, rng));
      features_.add("stem_bn", std::make_unique<BatchNorm2d<T>>(64));
      features_.add("stem_relu", std::make_unique<ReLU<T>>());
      int64_t in_c = 64;
      const int64_t widths[4] = {64, 128, 256, 512};
      for (int stage = 0; stage < 4; ++stage) {
        const int64_t stride = stage == 0 ? 1 : 2;
        const std::string n = std::to_string(stage + 1);
        features_.add("stage" + n + "a",
                      std::make_unique<BasicBlock<T>>(in_c, widths[stage], stride, rng));
        features_.add("stage" + n + "b",
                      std::make_unique<BasicBlock<T>>(widths[stage], widths[stage], 1, rng));
        in_c = widths[stage];
      }
    }
  }

  // x: [N, 1, 48, 48] in [0,1]; returns [N, K'].
  core::Tensor<T> forward(const core::Tensor<T>& x, bool train) {
    return gap_.forward(forward_features(x, train), train);
  }

  // Returns the final feature maps [N, C, h, w] before pooling.
  core::Tensor<T> forward_features(const core::Tensor<T>& x, bool train) {
    check_input(x);
    return features_.forward(x, train);
  }

  // d_repr: [N, K'] -> gradient w.r.t. the input image batch.
  core::Tensor<T> backward(const core::Tensor<T>& d_repr) {
    return features_.backward(gap_.backward(d_repr));
  }

  void collect_params(std::vector<ParamRef<T>>& out) { features_.collect_params("encoder", out); }
  void collect_buffers(std::vector<BufferRef<T>>& out) { features_.collect_buffers("encoder", out); }

  int64_t repr_dim() const { return cfg_.k_prime; }
  const ModelConfig& config() const { return cfg_; }

 private:
  void check_input(const core::Tensor<T>& x) const {
    if (x.ndim() != 4 || x.dim(1) != 1 || x.dim(2) != 48 || x.dim(3) != 48)
      throw std::invalid_argument("encoder: expected input of shape [N, 1, 48, 48]");
  }

  ModelConfig cfg_;
  Sequential<T> features_;
  GlobalAvgPool<T> gap_;
};

// One hidden layer of width K' with ReLU, linear map to K, then row-wise L2
// normalization. A pre-normalization zero row is replaced by the first unit
// basis vector and counted as a numerical warning.
template <typename T>
class ProjectionHead {
 public:
  ProjectionHead(int64_t k_prime, int64_t k, core::Rng& rng)
      : k_prime_(k_prime),
        k_(k),
        hidden_(k_prime, k_prime, true, rng),
        out_(k_prime, k, true, rng) {}

  // r: [N, K'] -> z: [N, K] with unit rows.
  core::Tensor<T> forward(const core::Tensor<T>& r) {
    if (r.ndim() != 2 || r.dim(1) != k_prime_)
      throw std::invalid_argument("projection: input dimension mismatch");
    pre_ = out_.forward(relu_.forward(hidden_.forward(r, true), true), true);
    const int64_t n = pre_.dim(0);
    core::Tensor<T> z({n, k_});
    norms_.assign(static_cast<size_t>(n), 0.0);
    zero_rows_ = 0;
    for (int64_t i = 0; i < n; ++i) {
      double sq = 0.0;
      for (int64_t j = 0; j < k_; ++j) {
        const double v = static_cast<double>(pre_[i * k_ + j]);
        sq += v * v;
      }
      const double norm = std::sqrt(sq);
      norms_[static_cast<size_t>(i)] = norm;
      if (norm < kZeroNorm) {
        z[i * k_] = T(1);
        ++zero_rows_;
      } else {
        for (int64_t j = 0; j < k_; ++j)
          z[i * k_ + j] = static_cast<T>(static_cast<double>(pre_[i * k_ + j]) / norm);
      }
    }
    if (zero_rows_ > 0)
      std::fprintf(stderr,
                   "warning: projection produced %d zero vector(s); substituted a unit basis "
                   "vector\n",
                   zero_rows_);
    z_ = z;
    return z;
  }

  // dz: [N, K] -> gradient w.r.t. r. Zero-replaced rows are constants, so
  // they pass no gradient.
  core::Tensor<T> backward(const core::Tensor<T>& dz) {
    const int64_t n = pre_.dim(0);
    if (dz.ndim() != 2 || dz.dim(0) != n || dz.dim(1) != k_)
      throw std::invalid_argument("projection: gradient shape mismatch");
    core::Tensor<T> dpre({n, k_});
    for (int64_t i = 0; i < n; ++i) {
      const double norm = norms_[static_cast<size_t>(i)];
      if (norm < kZeroNorm) continue;
      double zdot = 0.0;
      for (int64_t j = 0; j < k_; ++j)
        zdot += static_cast<double>(z_[i * k_ + j]) * static_cast<double>(dz[i * k_ + j]);
      for (int64_t j = 0; j < k_; ++j) {
        const double g =
            (static_cast<double>(dz[i * k_ + j]) - static_cast<double>(z_[i * k_ + j]) * zdot) /
            norm;
        dpre[i * k_ + j] = static_cast<T>(g);
      }
    }
    return hidden_.backward(relu_.backward(out_.backward(dpre)));
  }

  void collect_params(std::vector<ParamRef<T>>& out) {
    hidden_.collect_params("projector.hidden", out);
    out_.collect_params("projector.out", out);
  }

  int zero_replacements() const { return zero_rows_; }
  int64_t out_dim() const { return k_; }

 private:
  static constexpr double kZeroNorm = 1e-12;
  int64_t k_prime_, k_;
  Linear<T> hidden_;
  ReLU<T> relu_;
  Linear<T> out_;
  core::Tensor<T> pre_, z_;
  std::vector<double> norms_;
  int zero_rows_ = 0;
};

// Single affine map from representations to the 7 class logits.
template <typename T>
class LinearClassifier {
 public:
  LinearClassifier(int64_t in_dim, int num_classes, core::Rng& rng)
      : in_dim_(in_dim), linear_(in_dim, num_classes, true, rng) {}

  core::Tensor<T> forward(const core::Tensor<T>& r) {
    if (r.ndim() != 2 || r.dim(1) != in_dim_)
      throw std::invalid_argument("classifier: input dimension mismatch");
    return linear_.forward(r, true);
  }
  core::Tensor<T> backward(const core::Tensor<T>& dlogits) { return linear_.backward(dlogits); }
  void collect_params(std::vector<ParamRef<T>>& out) { linear_.collect_params("classifier", out); }

  core::Tensor<T>& weight() { return linear_.weight(); }
  core::Tensor<T>& bias() { return linear_.bias(); }

 private:
  int64_t in_dim_;
  Linear<T> linear_;
};

}  // namespace paircon::nn
