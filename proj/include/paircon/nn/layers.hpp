// Reverse-mode differentiable layers over row-major NCHW tensors.
//
// Conventions shared by every layer:
//   - forward(x, train) stores whatever backward needs; backward(dy) must be
//     called at most once per forward and OVERWRITES parameter gradients.
//   - collect_params exposes trainable tensors, collect_buffers exposes
//     non-trainable state (batch-norm running statistics).
// Templated on the element type so the same graph runs in float for training
// and in double for finite-difference gradient checks.
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "paircon/core/rng.hpp"
#include "paircon/core/tensor.hpp"
#include "paircon/kernels/kernels.hpp"

namespace paircon::nn {

template <typename T>
struct ParamRef {
  std::string name;
  core::Tensor<T>* value;
  core::Tensor<T>* grad;
};

template <typename T>
struct BufferRef {
  std::string name;
  core::Tensor<T>* value;
};

template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual core::Tensor<T> forward(const core::Tensor<T>& x, bool train) = 0;
  virtual core::Tensor<T> backward(const core::Tensor<T>& dy) = 0;
  virtual void collect_params(const std::string& /*prefix*/, std::vector<ParamRef<T>>& /*out*/) {}
  virtual void collect_buffers(const std::string& /*prefix*/, std::vector<BufferRef<T>>& /*out*/) {}
};

// Weights ~ U[-1/sqrt(fan_in), 1/sqrt(fan_in)], drawn in row-major order so
// the same seed yields the same parameters for float and double graphs.
template <typename T>
void fan_in_uniform(core::Tensor<T>& w, int64_t fan_in, core::Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (int64_t i = 0; i < w.size(); ++i) w[i] = static_cast<T>(rng.uniform(-bound, bound));
}

// cols is [c*kh*kw, oh*ow]; out-of-image taps read as zero.
template <typename T>
void im2col(const T* x, int64_t c, int64_t h, int64_t w, int64_t kh, int64_t kw, int64_t stride,
            int64_t pad, int64_t oh, int64_t ow, T* cols) {
  int64_t row = 0;
  for (int64_t ci = 0; ci < c; ++ci) {
    const T* plane = x + ci * h * w;
    for (int64_t ki = 0; ki < kh; ++ki)
      for (int64_t kj = 0; kj < kw; ++kj, ++row) {
        T* dst = cols + row * oh * ow;
        for (int64_t oy = 0; oy < oh; ++oy) {
          const int64_t iy = oy * stride - pad + ki;
          if (iy < 0 || iy >= h) {
            for (int64_t ox = 0; ox < ow; ++ox) dst[oy * ow + ox] = T{};
            continue;
          }
          for (int64_t ox = 0; ox < ow; ++ox) {
            const int64_t ix = ox * stride - pad + kj;
            dst[oy * ow + ox] = (ix >= 0 && ix < w) ? plane[iy * w + ix] : T{};
          }
        }
      }
  }
}

// Scatter-add transpose of im2col; dx must be pre-zeroed.
template <typename T>
void col2im(const T* cols, int64_t c, int64_t h, int64_t w, int64_t kh, int64_t kw, int64_t stride,
            int64_t pad, int64_t oh, int64_t ow, T* dx) {
  int64_t row = 0;
  for (int64_t ci = 0; ci < c; ++ci) {
    T* plane = dx + ci * h * w;
    for (int64_t ki = 0; ki < kh; ++ki)
      for (int64_t kj = 0; kj < kw; ++kj, ++row) {
        const T* src = cols + row * oh * ow;
        for (int64_t oy = 0; oy < oh; ++oy) {
          const int64_t iy = oy * stride - pad + ki;
          if (iy < 0 || iy >= h) continue;
          for (int64_t ox = 0; ox < ow; ++ox) {
            const int64_t ix = ox * stride - pad + kj;
            if (ix >= 0 && ix < w) plane[iy * w + ix] += src[oy * ow + ox];
          }
        }
      }
  }
}

template <typename T>
class Conv2d final : public Layer<T> {
 public:
  Conv2d(int64_t in_c, int64_t out_c, int64_t kernel, int64_t stride, int64_t pad, bool bias,
         core::Rng& rng)
      : in_c_(in_c),
        out_c_(out_c),
        kernel_(kernel),
        stride_(stride),
        pad_(pad),
        has_bias_(bias),
        weight_({out_c, in_c, kernel, kernel}),
        dweight_({out_c, in_c, kernel, kernel}) {
    fan_in_uniform(weight_, in_c * kernel * kernel, rng);
    if (has_bias_) {
      bias_ = core::Tensor<T>({out_c});
      dbias_ = core::Tensor<T>({out_c});
    }
  }

  core::Tensor<T> forward(const core::Tensor<T>& x, bool /*train*/) override {
    if (x.ndim() != 4 || x.dim(1) != in_c_)
      throw std::invalid_argument("conv: input shape mismatch");
    x_ = x;
    const int64_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
    oh_ = (h + 2 * pad_ - kernel_) / stride_ + 1;
    ow_ = (w + 2 * pad_ - kernel_) / stride_ + 1;
    if (oh_ <= 0 || ow_ <= 0) throw std::invalid_argument("conv: input smaller than kernel");
    const int64_t ckk = in_c_ * kernel_ * kernel_, len = oh_ * ow_;

    core::Tensor<T> y({n, out_c_, oh_, ow_});
    cols_.assign(static_cast<size_t>(ckk * len), T{});
    for (int64_t i = 0; i < n; ++i) {
      im2col(x.data() + i * in_c_ * h * w, in_c_, h, w, kernel_, kernel_, stride_, pad_, oh_, ow_,
             cols_.data());
      T* yi = y.data() + i * out_c_ * len;
      kernels::gemm_nn(out_c_, len, ckk, weight_.data(), cols_.data(), yi, false);
      if (has_bias_)
        for (int64_t oc = 0; oc < out_c_; ++oc)
          for (int64_t l = 0; l < len; ++l) yi[oc * len + l] += bias_[oc];
    }
    return y;
  }

  core::Tensor<T> backward(const core::Tensor<T>& dy) override {
    const int64_t n = x_.dim(0), h = x_.dim(2), w = x_.dim(3);
    const int64_t ckk = in_c_ * kernel_ * kernel_, len = oh_ * ow_;
    if (dy.ndim() != 4 || dy.dim(1) != out_c_ || dy.dim(2) != oh_ || dy.dim(3) != ow_)
      throw std::invalid_argument("conv: gradient shape mismatch");

    dweight_.fill(T{});
    if (has_bias_) dbias_.fill(T{});
    core::Tensor<T> dx({n, in_c_, h, w});

    // W^T once, reused across the batch.
    std::vector<T> wt(static_cast<size_t>(ckk * out_c_));
    for (int64_t oc = 0; oc < out_c_; ++oc)
      for (int64_t r = 0; r < ckk; ++r) wt[r * out_c_ + oc] = weight_[oc * ckk + r];

    std::vector<T> dcols(static_cast<size_t>(ckk * len));
    for (int64_t i = 0; i < n; ++i) {
      const T* dyi = dy.data() + i * out_c_ * len;
      im2col(x_.data() + i * in_c_ * h * w, in_c_, h, w, kernel_, kernel_, stride_, pad_, oh_, ow_,
             cols_.data());
      kernels::gemm_nt(out_c_, ckk, len, dyi, cols_.data(), dweight_.data(), true);
      kernels::gemm_nn(ckk, len, out_c_, wt.data(), dyi, dcols.data(), false);
      col2im(dcols.data(), in_c_, h, w, kernel_, kernel_, stride_, pad_, oh_, ow_,
             dx.data() + i * in_c_ * h * w);
      if (has_bias_)
        for (int64_t oc = 0; oc < out_c_; ++oc) {
          T s{};
          for (int64_t l = 0; l < len; ++l) s += dyi[oc * len + l];
          dbias_[oc] += s;
        }
    }
    return dx;
  }

  void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
    out.push_back({prefix + ".weight", &weight_, &dweight_});
    if (has_bias_) out.push_back({prefix + ".bias", &bias_, &dbias_});
  }

  core::Tensor<T>& weight() { return weight_; }
  core::Tensor<T>& bias() { return bias_; }

 private:
  int64_t in_c_, out_c_, kernel_, stride_, pad_;
  bool has_bias_;
  core::Tensor<T> weight_, dweight_, bias_, dbias_;
  core::Tensor<T> x_;
  std::vector<T> cols_;
  int64_t oh_ = 0, ow_ = 0;
};

template <typename T>
class ReLU final : public Layer<T> {
 public:
  core::Tensor<T> forward(const core::Tensor<T>& x, bool /*train*/) override {
    x_ = x;
    core::Tensor<T> y(x.shape());
    kernels::relu_forward(x.data(), y.data(), x.size());
    return y;
  }
  core::Tensor<T> backward(const core::Tensor<T>& dy) override {
    if (!dy.same_shape(x_)) throw std::invalid_argument("relu: gradient shape mismatch");
    core::Tensor<T> dx(x_.shape());
    kernels::relu_backward(x_.data(), dy.data(), dx.data(), dy.size());
    return dx;
  }

 private:
  core::Tensor<T> x_;
};

template <typename T>
class MaxPool2 final : public Layer<T> {
 public:
  core::Tensor<T> forward(const core::Tensor<T>& x, bool /*train*/) override {
    if (x.ndim() != 4 || x.dim(2) % 2 != 0 || x.dim(3) % 2 != 0)
      throw std::invalid_argument("maxpool: expects even spatial dimensions");
    in_shape_ = x.shape();
    const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    core::Tensor<T> y({n, c, h / 2, w / 2});
    argmax_.assign(static_cast<size_t>(y.size()), 0);
    int64_t o = 0;
    for (int64_t nc = 0; nc < n * c; ++nc) {
      const T* plane = x.data() + nc * h * w;
      for (int64_t oy = 0; oy < h / 2; ++oy)
        for (int64_t ox = 0; ox < w / 2; ++ox, ++o) {
          int64_t best = (2 * oy) * w + 2 * ox;
          T bv = plane[best];
          const int64_t cand[3] = {best + 1, best + w, best + w + 1};
          for (int64_t idx : cand)
            if (plane[idx] > bv) {
              bv = plane[idx];
              best = idx;
            }
          y[o] = bv;
          argmax_[static_cast<size_t>(o)] = nc * h * w + best;
        }
    }
    return y;
  }

  core::Tensor<T> backward(const core::Tensor<T>& dy) override {
    if (static_cast<size_t>(dy.size()) != argmax_.size())
      throw std::invalid_argument("maxpool: gradient shape mismatch");
    core::Tensor<T> dx(in_shape_);
    for (int64_t o = 0; o < dy.size(); ++o) dx[argmax_[static_cast<size_t>(o)]] += dy[o];
    return dx;
  }

 private:
  std::vector<int64_t> in_shape_;
  std::vector<int64_t> argmax_;
};

// Batch statistics in training mode; exponential running averages (factor 0.9
// on the old value) in evaluation mode. Variance is the biased estimator.
template <typename T>
class BatchNorm2d final : public Layer<T> {
 public:
  explicit BatchNorm2d(int64_t channels, double momentum = 0.9, double eps = 1e-5)
      : c_(channels),
        momentum_(momentum),
        eps_(eps),
        gamma_({channels}),
        beta_({channels}),
        dgamma_({channels}),
        dbeta_({channels}),
        running_mean_({channels}),
        running_var_({channels}) {
    gamma_.fill(T(1));
    running_var_.fill(T(1));
  }

  core::Tensor<T> forward(const core::Tensor<T>& x, bool train) override {
    if (x.ndim() != 4 || x.dim(1) != c_)
      throw std::invalid_argument("batchnorm: input shape mismatch");
    const int64_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const int64_t per_c = n * h * w;
    train_mode_ = train;
    xhat_ = core::Tensor<T>(x.shape());
    invstd_.assign(static_cast<size_t>(c_), T{});

    core::Tensor<T> y(x.shape());
    for (int64_t ch = 0; ch < c_; ++ch) {
      double mean, var;
      if (train) {
        double s = 0.0;
        for (int64_t i = 0; i < n; ++i) {
          const T* p = x.data() + (i * c_ + ch) * h * w;
          for (int64_t j = 0; j < h * w; ++j) s += static_cast<double>(p[j]);
        }
        mean = s / static_cast<double>(per_c);
        double sq = 0.0;
        for (int64_t i = 0; i < n; ++i) {
          const T* p = x.data() + (i * c_ + ch) * h * w;
          for (int64_t j = 0; j < h * w; ++j) {
            const double d = static_cast<double>(p[j]) - mean;
            sq += d * d;
          }
        }
        var = sq / static_cast<double>(per_c);
        running_mean_[ch] =
            static_cast<T>(momentum_ * static_cast<double>(running_mean_[ch]) + (1 - momentum_) * mean);
        running_var_[ch] =
            static_cast<T>(momentum_ * static_cast<double>(running_var_[ch]) + (1 - momentum_) * var);
      } else {
        mean = static_cast<double>(running_mean_[ch]);
        var = static_cast<double>(running_var_[ch]);
      }
      const double inv = 1.0 / std::sqrt(var + eps_);
      invstd_[static_cast<size_t>(ch)] = static_cast<T>(inv);
      for (int64_t i = 0; i < n; ++i) {
        const T* p = x.data() + (i * c_ + ch) * h * w;
        T* xh = xhat_.data() + (i * c_ + ch) * h * w;
        T* yo = y.data() + (i * c_ + ch) * h * w;
        for (int64_t j = 0; j < h * w; ++j) {
          xh[j] = static_cast<T>((static_cast<double>(p[j]) - mean) * inv);
          yo[j] = gamma_[ch] * xh[j] + beta_[ch];
        }
      }
    }
    return y;
  }

  core::Tensor<T> backward(const core::Tensor<T>& dy) override {
    if (!dy.same_shape(xhat_)) throw std::invalid_argument("batchnorm: gradient shape mismatch");
    const int64_t n = dy.dim(0), h = dy.dim(2), w = dy.dim(3);
    const int64_t per_c = n * h * w;
    core::Tensor<T> dx(dy.shape());
    for (int64_t ch = 0; ch < c_; ++ch) {
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (int64_t i = 0; i < n; ++i) {
        const T* d = dy.data() + (i * c_ + ch) * h * w;
        const T* xh = xhat_.data() + (i * c_ + ch) * h * w;
        for (int64_t j = 0; j < h * w; ++j) {
          sum_dy += static_cast<double>(d[j]);
          sum_dy_xhat += static_cast<double>(d[j]) * static_cast<double>(xh[j]);
        }
      }
      dgamma_[ch] = static_cast<T>(sum_dy_xhat);
      dbeta_[ch] = static_cast<T>(sum_dy);
      const double g = static_cast<double>(gamma_[ch]);
      const double inv = static_cast<double>(invstd_[static_cast<size_t>(ch)]);
      for (int64_t i = 0; i < n; ++i) {
        const T* d = dy.data() + (i * c_ + ch) * h * w;
        const T* xh = xhat_.data() + (i * c_ + ch) * h * w;
        T* o = dx.data() + (i * c_ + ch) * h * w;
        for (int64_t j = 0; j < h * w; ++j) {
          if (train_mode_) {
            // Batch statistics depend on x, so their gradients feed back in.
            o[j] = static_cast<T>(
                g * inv / static_cast<double>(per_c) *
                (static_cast<double>(per_c) * static_cast<double>(d[j]) - sum_dy -
                 static_cast<double>(xh[j]) * sum_dy_xhat));
          } else {
            o[j] = static_cast<T>(g * inv * static_cast<double>(d[j]));
          }
        }
      }
    }
    return dx;
  }

  void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
    out.push_back({prefix + ".gamma", &gamma_, &dgamma_});
    out.push_back({prefix + ".beta", &beta_, &dbeta_});
  }
  void collect_buffers(const std::string& prefix, std::vector<BufferRef<T>>& out) override {
    out.push_back({prefix + ".running_mean", &running_mean_});
    out.push_back({prefix + ".running_var", &running_var_});
  }

 private:
  int64_t c_;
  double momentum_, eps_;
  core::Tensor<T> gamma_, beta_, dgamma_, dbeta_, running_mean_, running_var_;
  core::Tensor<T> xhat_;
  std::vector<T> invstd_;
  bool train_mode_ = true;
};

template <typename T>
class Linear final : public Layer<T> {
 public:
  Linear(int64_t in, int64_t out, bool bias, core::Rng& rng)
      : in_(in), out_(out), has_bias_(bias), weight_({out, in}), dweight_({out, in}) {
    fan_in_uniform(weight_, in, rng);
    if (has_bias_) {
      bias_ = core::Tensor<T>({out});
      dbias_ = core::Tensor<T>({out});
    }
  }

  core::Tensor<T> forward(const core::Tensor<T>& x, bool /*train*/) override {
    if (x.ndim() != 2 || x.dim(1) != in_) throw std::invalid_argument("linear: input shape mismatch");
    x_ = x;
    const int64_t n = x.dim(0);
    core::Tensor<T> y({n, out_});
    kernels::gemm_nt(n, out_, in_, x.data(), weight_.data(), y.data(), false);
    if (has_bias_)
      for (int64_t i = 0; i < n; ++i)
        for (int64_t o = 0; o < out_; ++o) y[i * out_ + o] += bias_[o];
    return y;
  }

  core::Tensor<T> backward(const core::Tensor<T>& dy) override {
    const int64_t n = x_.dim(0);
    if (dy.ndim() != 2 || dy.dim(0) != n || dy.dim(1) != out_)
      throw std::invalid_argument("linear: gradient shape mismatch");
    std::vector<T> dyt(static_cast<size_t>(out_ * n));
    for (int64_t i = 0; i < n; ++i)
      for (int64_t o = 0; o < out_; ++o) dyt[o * n + i] = dy[i * out_ + o];
    kernels::gemm_nn(out_, in_, n, dyt.data(), x_.data(), dweight_.data(), false);
    if (has_bias_) {
      dbias_.fill(T{});
      for (int64_t i = 0; i < n; ++i)
        for (int64_t o = 0; o < out_; ++o) dbias_[o] += dy[i * out_ + o];
    }
    core::Tensor<T> dx({n, in_});
    kernels::gemm_nn(n, in_, out_, dy.data(), weight_.data(), dx.data(), false);
    return dx;
  }

  void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
    out.push_back({prefix + ".weight", &weight_, &dweight_});
    if (has_bias_) out.push_back({prefix + ".bias", &bias_, &dbias_});
  }

  core::Tensor<T>& weight() { return weight_; }
  core::Tensor<T>& bias() { return bias_; }

 private:
  int64_t in_, out_;
  bool has_bias_;
  core::Tensor<T> weight_, dweight_, bias_, dbias_;
  core::Tensor<T> x_;
};

template <typename T>
class GlobalAvgPool final : public Layer<T> {
 public:
  core::Tensor<T> forward(const core::Tensor<T>& x, bool /*train*/) override {
    if (x.ndim() != 4) throw std::invalid_argument("gap: expects NCHW input");
    in_shape_ = x.shape();
    const int64_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
    core::Tensor<T> y({n, c});
    for (int64_t nc = 0; nc < n * c; ++nc) {
      double s = 0.0;
      const T* p = x.data() + nc * hw;
      for (int64_t j = 0; j < hw; ++j) s += static_cast<double>(p[j]);
      y[nc] = static_cast<T>(s / static_cast<double>(hw));
    }
    return y;
  }

  core::Tensor<T> backward(const core::Tensor<T>& dy) override {
    const int64_t n = in_shape_[0], c = in_shape_[1], hw = in_shape_[2] * in_shape_[3];
    if (dy.ndim() != 2 || dy.dim(0) != n || dy.dim(1) != c)
      throw std::invalid_argument("gap: gradient shape mismatch");
    core::Tensor<T> dx(in_shape_);
    for (int64_t nc = 0; nc < n * c; ++nc) {
      const T g = static_cast<T>(static_cast<double>(dy[nc]) / static_cast<double>(hw));
      T* p = dx.data() + nc * hw;
      for (int64_t j = 0; j < hw; ++j) p[j] = g;
    }
    return dx;
  }

 private:
  std::vector<int64_t> in_shape_;
};

template <typename T>
class Sequential final : public Layer<T> {
 public:
  void add(std::string name, std::unique_ptr<Layer<T>> layer) {
    names_.push_back(std::move(name));
    layers_.push_back(std::move(layer));
  }

  core::Tensor<T> forward(const core::Tensor<T>& x, bool train) override {
    core::Tensor<T> h = x;
    for (auto& l : layers_) h = l->forward(h, train);
    return h;
  }

  core::Tensor<T> backward(const core::Tensor<T>& dy) override {
    core::Tensor<T> d = dy;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) d = (*it)->backward(d);
    return d;
  }

  void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
    for (size_t i = 0; i < layers_.size(); ++i)
      layers_[i]->collect_params(prefix + "." + names_[i], out);
  }
  void collect_buffers(const std::string& prefix, std::vector<BufferRef<T>>& out) override {
    for (size_t i = 0; i < layers_.size(); ++i)
      layers_[i]->collect_buffers(prefix + "." + names_[i], out);
  }

  size_t size() const { return layers_.size(); }

 private:
  std::vector<std::string> names_;
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

}  // namespace paircon::nn
