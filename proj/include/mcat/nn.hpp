// Residual convolution network with explicit forward/backward passes.
//
// Layout is NCHW throughout. Convolutions run as im2col + GEMM (Eigen).
// The architecture follows a 34-layer-style residual stack where
// downsampling between stages is a 3x3 stride-2 max pool and shortcuts are
// identity with zero channel padding; both choices have config switches to
// the more common strided-conv / projection variants.
#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "mcat/rng.hpp"
#include "mcat/tensor.hpp"

namespace mcat {

struct StageSpec {
  int blocks = 1;
  int channels = 64;
};

enum class DownsampleMode { MaxPool, StridedConv };
enum class ShortcutMode { ZeroPad, Projection };

struct ArchitectureSpec {
  int input_size = 224;
  int input_channels = 3;
  int stem_channels = 64;  // 0 disables the stem entirely
  int stem_kernel = 7;
  int stem_stride = 2;
  bool stem_pool = true;  // 3x3 stride-2 max pool after the stem
  std::vector<StageSpec> stages = {{3, 64}, {4, 128}, {6, 256}, {3, 512}};
  DownsampleMode downsample = DownsampleMode::MaxPool;
  ShortcutMode shortcut = ShortcutMode::ZeroPad;
  bool batch_norm = true;
  int output_width = 10;  // 0 disables the classifier head

  // 34-layer stack for 224x224 inputs; spatial sizes 112/56/28/14/7.
  static ArchitectureSpec paper(int output_width) {
    ArchitectureSpec s;
    s.output_width = output_width;
    return s;
  }

  // Same stage pattern scaled to 32x32 inputs.
  static ArchitectureSpec desk32(int output_width) {
    ArchitectureSpec s;
    s.input_size = 32;
    s.stem_kernel = 3;
    s.stem_stride = 1;
    s.stem_pool = false;
    s.output_width = output_width;
    return s;
  }

  // Small stack for tests and toy-scale experiments.
  static ArchitectureSpec tiny(int output_width, int input_size = 16) {
    ArchitectureSpec s;
    s.input_size = input_size;
    s.stem_channels = 8;
    s.stem_kernel = 3;
    s.stem_stride = 1;
    s.stem_pool = false;
    s.stages = {{1, 8}, {1, 16}, {2, 32}};
    s.output_width = output_width;
    return s;
  }
};

template <typename S>
struct ParamRef {
  std::string name;
  Tensor<S>* value = nullptr;
  Tensor<S>* grad = nullptr;   // null for non-trainable buffers
  bool trainable = true;
  bool weight_decay = false;   // conv/fc weights only
  std::int64_t fan_in = 0;     // >0 selects He initialization
};

template <typename S>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor<S> forward(const Tensor<S>& x, bool train) = 0;
  virtual Tensor<S> backward(const Tensor<S>& dy) = 0;
  virtual void collect(const std::string& prefix, std::vector<ParamRef<S>>& out) {}
};

namespace detail {

template <typename S>
void im2col(const S* x, int channels, int height, int width, int kernel, int stride, int pad,
            S* cols) {
  const int out_h = (height + 2 * pad - kernel) / stride + 1;
  const int out_w = (width + 2 * pad - kernel) / stride + 1;
  const int ohw = out_h * out_w;
  S* dst = cols;
  for (int c = 0; c < channels; ++c)
    for (int ky = 0; ky < kernel; ++ky)
      for (int kx = 0; kx < kernel; ++kx) {
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= height) {
            for (int ox = 0; ox < out_w; ++ox) *dst++ = S(0);
            continue;
          }
          const S* row = x + (std::size_t(c) * height + iy) * width;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride - pad + kx;
            *dst++ = (ix < 0 || ix >= width) ? S(0) : row[ix];
          }
        }
      }
  (void)ohw;
}

template <typename S>
void col2im(const S* cols, int channels, int height, int width, int kernel, int stride, int pad,
            S* x) {
  const int out_h = (height + 2 * pad - kernel) / stride + 1;
  const int out_w = (width + 2 * pad - kernel) / stride + 1;
  const S* src = cols;
  for (int c = 0; c < channels; ++c)
    for (int ky = 0; ky < kernel; ++ky)
      for (int kx = 0; kx < kernel; ++kx)
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= height) {
            src += out_w;
            continue;
          }
          S* row = x + (std::size_t(c) * height + iy) * width;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < width) row[ix] += *src;
            ++src;
          }
        }
}

}  // namespace detail

template <typename S>
class Conv2d : public Layer<S> {
 public:
  Conv2d(int in_channels, int out_channels, int kernel, int stride, int pad, bool bias)
      : in_(in_channels), out_(out_channels), k_(kernel), stride_(stride), pad_(pad),
        has_bias_(bias),
        weight_({out_channels, in_channels * kernel * kernel}),
        weight_grad_({out_channels, in_channels * kernel * kernel}) {
    if (has_bias_) {
      bias_ = Tensor<S>({out_channels});
      bias_grad_ = Tensor<S>({out_channels});
    }
  }

  Tensor<S> forward(const Tensor<S>& x, bool) override {
    const auto n = x.dim(0);
    in_h_ = int(x.dim(2));
    in_w_ = int(x.dim(3));
    if (x.dim(1) != in_) throw std::runtime_error("Conv2d: channel mismatch");
    out_h_ = (in_h_ + 2 * pad_ - k_) / stride_ + 1;
    out_w_ = (in_w_ + 2 * pad_ - k_) / stride_ + 1;
    if (out_h_ < 1 || out_w_ < 1) throw std::runtime_error("Conv2d: input too small");

    const std::int64_t kdim = std::int64_t(in_) * k_ * k_;
    const std::int64_t ohw = std::int64_t(out_h_) * out_w_;
    cols_ = Tensor<S>({n, kdim, ohw});
    Tensor<S> y({n, out_, out_h_, out_w_});

    auto w = weight_.mat(out_, kdim);
    for (std::int64_t i = 0; i < n; ++i) {
      S* cols = cols_.data() + i * kdim * ohw;
      detail::im2col(x.data() + i * std::int64_t(in_) * in_h_ * in_w_, in_, in_h_, in_w_, k_,
                     stride_, pad_, cols);
      typename Tensor<S>::Map ymap(y.data() + i * std::int64_t(out_) * ohw, out_, ohw);
      typename Tensor<S>::ConstMap cmap(cols, kdim, ohw);
      ymap.noalias() = w * cmap;
      if (has_bias_)
        for (int oc = 0; oc < out_; ++oc)
          ymap.row(oc).array() += bias_[oc];
    }
    return y;
  }

  Tensor<S> backward(const Tensor<S>& dy) override {
    const auto n = dy.dim(0);
    const std::int64_t kdim = std::int64_t(in_) * k_ * k_;
    const std::int64_t ohw = std::int64_t(out_h_) * out_w_;
    Tensor<S> dx({n, in_, in_h_, in_w_});
    Tensor<S> dcols({kdim, ohw});

    auto w = weight_.mat(out_, kdim);
    auto dw = weight_grad_.mat(out_, kdim);
    for (std::int64_t i = 0; i < n; ++i) {
      typename Tensor<S>::ConstMap dymap(dy.data() + i * std::int64_t(out_) * ohw, out_, ohw);
      typename Tensor<S>::ConstMap cmap(cols_.data() + i * kdim * ohw, kdim, ohw);
      dw.noalias() += dymap * cmap.transpose();
      if (has_bias_)
        for (int oc = 0; oc < out_; ++oc) bias_grad_[oc] += dymap.row(oc).sum();
      typename Tensor<S>::Map dcmap(dcols.data(), kdim, ohw);
      dcmap.noalias() = w.transpose() * dymap;
      detail::col2im(dcols.data(), in_, in_h_, in_w_, k_, stride_, pad_,
                     dx.data() + i * std::int64_t(in_) * in_h_ * in_w_);
    }
    return dx;
  }

  void collect(const std::string& prefix, std::vector<ParamRef<S>>& out) override {
    out.push_back({prefix + ".weight", &weight_, &weight_grad_, true, true,
                   std::int64_t(in_) * k_ * k_});
    if (has_bias_) out.push_back({prefix + ".bias", &bias_, &bias_grad_, true, false, 0});
  }

 private:
  int in_, out_, k_, stride_, pad_;
  bool has_bias_;
  int in_h_ = 0, in_w_ = 0, out_h_ = 0, out_w_ = 0;
  Tensor<S> weight_, weight_grad_, bias_, bias_grad_;
  Tensor<S> cols_;
};

template <typename S>
class BatchNorm2d : public Layer<S> {
 public:
  explicit BatchNorm2d(int channels, double momentum = 0.1, double eps = 1e-5)
      : c_(channels), momentum_(S(momentum)), eps_(S(eps)),
        gamma_({channels}), beta_({channels}), gamma_grad_({channels}), beta_grad_({channels}),
        running_mean_({channels}), running_var_({channels}), invstd_({channels}),
        mean_({channels}) {
    gamma_.fill(S(1));
    running_var_.fill(S(1));
  }

  Tensor<S> forward(const Tensor<S>& x, bool train) override {
    if (x.dim(1) != c_) throw std::runtime_error("BatchNorm2d: channel mismatch");
    const auto n = x.dim(0);
    const auto h = x.dim(2), w = x.dim(3);
    const std::int64_t m = n * h * w;
    train_ = train;

    Tensor<S> y(x.shape());
    if (train) {
      for (int c = 0; c < c_; ++c) {
        S mu = S(0);
        for (std::int64_t i = 0; i < n; ++i) {
          const S* p = &x.at(i, c, 0, 0);
          for (std::int64_t j = 0; j < h * w; ++j) mu += p[j];
        }
        mu /= S(m);
        S var = S(0);
        for (std::int64_t i = 0; i < n; ++i) {
          const S* p = &x.at(i, c, 0, 0);
          for (std::int64_t j = 0; j < h * w; ++j) var += (p[j] - mu) * (p[j] - mu);
        }
        var /= S(m);
        mean_[c] = mu;
        invstd_[c] = S(1) / std::sqrt(var + eps_);
        running_mean_[c] = (S(1) - momentum_) * running_mean_[c] + momentum_ * mu;
        running_var_[c] = (S(1) - momentum_) * running_var_[c] + momentum_ * var;
      }
      xhat_ = Tensor<S>(x.shape());
      for (std::int64_t i = 0; i < n; ++i)
        for (int c = 0; c < c_; ++c) {
          const S* p = &x.at(i, c, 0, 0);
          S* xh = &xhat_.at(i, c, 0, 0);
          S* yp = &y.at(i, c, 0, 0);
          for (std::int64_t j = 0; j < h * w; ++j) {
            xh[j] = (p[j] - mean_[c]) * invstd_[c];
            yp[j] = gamma_[c] * xh[j] + beta_[c];
          }
        }
    } else {
      for (std::int64_t i = 0; i < n; ++i)
        for (int c = 0; c < c_; ++c) {
          const S inv = S(1) / std::sqrt(running_var_[c] + eps_);
          const S* p = &x.at(i, c, 0, 0);
          S* yp = &y.at(i, c, 0, 0);
          for (std::int64_t j = 0; j < h * w; ++j)
            yp[j] = gamma_[c] * (p[j] - running_mean_[c]) * inv + beta_[c];
        }
    }
    return y;
  }

  Tensor<S> backward(const Tensor<S>& dy) override {
    if (!train_) throw std::runtime_error("BatchNorm2d: backward called in eval mode");
    const auto n = dy.dim(0);
    const auto h = dy.dim(2), w = dy.dim(3);
    const std::int64_t m = n * h * w;
    Tensor<S> dx(dy.shape());
    for (int c = 0; c < c_; ++c) {
      S sum_dy = S(0), sum_dy_xhat = S(0);
      for (std::int64_t i = 0; i < n; ++i) {
        const S* dp = &dy.at(i, c, 0, 0);
        const S* xh = &xhat_.at(i, c, 0, 0);
        for (std::int64_t j = 0; j < h * w; ++j) {
          sum_dy += dp[j];
          sum_dy_xhat += dp[j] * xh[j];
        }
      }
      gamma_grad_[c] += sum_dy_xhat;
      beta_grad_[c] += sum_dy;
      const S scale = gamma_[c] * invstd_[c] / S(m);
      for (std::int64_t i = 0; i < n; ++i) {
        const S* dp = &dy.at(i, c, 0, 0);
        const S* xh = &xhat_.at(i, c, 0, 0);
        S* dxp = &dx.at(i, c, 0, 0);
        for (std::int64_t j = 0; j < h * w; ++j)
          dxp[j] = scale * (S(m) * dp[j] - sum_dy - xh[j] * sum_dy_xhat);
      }
    }
    return dx;
  }

  void collect(const std::string& prefix, std::vector<ParamRef<S>>& out) override {
    out.push_back({prefix + ".gamma", &gamma_, &gamma_grad_, true, false, 0});
    out.push_back({prefix + ".beta", &beta_, &beta_grad_, true, false, 0});
    out.push_back({prefix + ".running_mean", &running_mean_, nullptr, false, false, 0});
    out.push_back({prefix + ".running_var", &running_var_, nullptr, false, false, 0});
  }

 private:
  int c_;
  S momentum_, eps_;
  bool train_ = true;
  Tensor<S> gamma_, beta_, gamma_grad_, beta_grad_;
  Tensor<S> running_mean_, running_var_;
  Tensor<S> invstd_, mean_, xhat_;
};

template <typename S>
class ReLU : public Layer<S> {
 public:
  Tensor<S> forward(const Tensor<S>& x, bool) override {
    Tensor<S> y(x.shape());
    mask_ = Tensor<S>(x.shape());
    for (std::int64_t i = 0; i < x.size(); ++i) {
      const bool on = x[i] > S(0);
      mask_[i] = on ? S(1) : S(0);
      y[i] = on ? x[i] : S(0);
    }
    return y;
  }
  Tensor<S> backward(const Tensor<S>& dy) override {
    Tensor<S> dx(dy.shape());
    for (std::int64_t i = 0; i < dy.size(); ++i) dx[i] = dy[i] * mask_[i];
    return dx;
  }

 private:
  Tensor<S> mask_;
};

template <typename S>
class MaxPool2d : public Layer<S> {
 public:
  MaxPool2d(int kernel = 3, int stride = 2, int pad = 1)
      : k_(kernel), stride_(stride), pad_(pad) {}

  Tensor<S> forward(const Tensor<S>& x, bool) override {
    const auto n = x.dim(0), c = x.dim(1);
    in_h_ = int(x.dim(2));
    in_w_ = int(x.dim(3));
    const int out_h = (in_h_ + 2 * pad_ - k_) / stride_ + 1;
    const int out_w = (in_w_ + 2 * pad_ - k_) / stride_ + 1;
    Tensor<S> y({n, c, out_h, out_w});
    argmax_.assign(std::size_t(y.size()), 0);
    std::int64_t o = 0;
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t ch = 0; ch < c; ++ch) {
        const S* plane = &x.at(i, ch, 0, 0);
        const std::int64_t base = (i * c + ch) * in_h_ * in_w_;
        for (int oy = 0; oy < out_h; ++oy)
          for (int ox = 0; ox < out_w; ++ox, ++o) {
            S best = std::numeric_limits<S>::lowest();
            std::int64_t best_idx = -1;
            for (int ky = 0; ky < k_; ++ky) {
              const int iy = oy * stride_ - pad_ + ky;
              if (iy < 0 || iy >= in_h_) continue;
              for (int kx = 0; kx < k_; ++kx) {
                const int ix = ox * stride_ - pad_ + kx;
                if (ix < 0 || ix >= in_w_) continue;
                const S v = plane[iy * in_w_ + ix];
                if (v > best) {  // first max wins on ties
                  best = v;
                  best_idx = base + iy * in_w_ + ix;
                }
              }
            }
            y[o] = best;
            argmax_[std::size_t(o)] = best_idx;
          }
      }
    return y;
  }

  Tensor<S> backward(const Tensor<S>& dy) override {
    Tensor<S> dx({dy.dim(0), dy.dim(1), in_h_, in_w_});
    for (std::int64_t o = 0; o < dy.size(); ++o) dx[argmax_[std::size_t(o)]] += dy[o];
    return dx;
  }

 private:
  int k_, stride_, pad_;
  int in_h_ = 0, in_w_ = 0;
  std::vector<std::int64_t> argmax_;
};

template <typename S>
class GlobalAvgPool : public Layer<S> {
 public:
  Tensor<S> forward(const Tensor<S>& x, bool) override {
    const auto n = x.dim(0), c = x.dim(1);
    h_ = int(x.dim(2));
    w_ = int(x.dim(3));
    Tensor<S> y({n, c});
    const S inv = S(1) / S(h_ * w_);
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t ch = 0; ch < c; ++ch) {
        const S* p = &x.at(i, ch, 0, 0);
        S sum = S(0);
        for (int j = 0; j < h_ * w_; ++j) sum += p[j];
        y[i * c + ch] = sum * inv;
      }
    return y;
  }
  Tensor<S> backward(const Tensor<S>& dy) override {
    const auto n = dy.dim(0), c = dy.dim(1);
    Tensor<S> dx({n, c, h_, w_});
    const S inv = S(1) / S(h_ * w_);
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t ch = 0; ch < c; ++ch) {
        const S g = dy[i * c + ch] * inv;
        S* p = &dx.at(i, ch, 0, 0);
        for (int j = 0; j < h_ * w_; ++j) p[j] = g;
      }
    return dx;
  }

 private:
  int h_ = 1, w_ = 1;
};

template <typename S>
class Linear : public Layer<S> {
 public:
  Linear(int in_features, int out_features)
      : in_(in_features), out_(out_features),
        weight_({out_features, in_features}), weight_grad_({out_features, in_features}),
        bias_({out_features}), bias_grad_({out_features}) {}

  Tensor<S> forward(const Tensor<S>& x, bool) override {
    if (x.dim(1) != in_) throw std::runtime_error("Linear: feature mismatch");
    x_ = x;
    const auto n = x.dim(0);
    Tensor<S> y({n, out_});
    y.mat(n, out_).noalias() = x.mat(n, in_) * weight_.mat(out_, in_).transpose();
    for (std::int64_t i = 0; i < n; ++i)
      for (int o = 0; o < out_; ++o) y[i * out_ + o] += bias_[o];
    return y;
  }

  Tensor<S> backward(const Tensor<S>& dy) override {
    const auto n = dy.dim(0);
    weight_grad_.mat(out_, in_).noalias() += dy.mat(n, out_).transpose() * x_.mat(n, in_);
    for (std::int64_t i = 0; i < n; ++i)
      for (int o = 0; o < out_; ++o) bias_grad_[o] += dy[i * out_ + o];
    Tensor<S> dx({n, in_});
    dx.mat(n, in_).noalias() = dy.mat(n, out_) * weight_.mat(out_, in_);
    return dx;
  }

  void collect(const std::string& prefix, std::vector<ParamRef<S>>& out) override {
    out.push_back({prefix + ".weight", &weight_, &weight_grad_, true, true, in_});
    out.push_back({prefix + ".bias", &bias_, &bias_grad_, true, false, 0});
  }

 private:
  std::int64_t in_;
  int out_;
  Tensor<S> weight_, weight_grad_, bias_, bias_grad_;
  Tensor<S> x_;
};

// Two 3x3 convs with an identity-style shortcut. Channel increase is handled
// by zero padding (default) or a 1x1 projection; spatial downsampling inside
// a block only occurs in StridedConv mode.
template <typename S>
class ResidualBlock : public Layer<S> {
 public:
  ResidualBlock(int in_channels, int out_channels, int stride, ShortcutMode shortcut,
                bool batch_norm)
      : in_(in_channels), out_(out_channels), stride_(stride), mode_(shortcut), bn_(batch_norm),
        conv1_(in_channels, out_channels, 3, stride, 1, !batch_norm),
        conv2_(out_channels, out_channels, 3, 1, 1, !batch_norm) {
    if (batch_norm) {
      bn1_ = std::make_unique<BatchNorm2d<S>>(out_channels);
      bn2_ = std::make_unique<BatchNorm2d<S>>(out_channels);
    }
    needs_adapter_ = (in_ != out_) || (stride_ != 1);
    if (needs_adapter_ && mode_ == ShortcutMode::Projection) {
      proj_ = std::make_unique<Conv2d<S>>(in_channels, out_channels, 1, stride, 0, !batch_norm);
      if (batch_norm) proj_bn_ = std::make_unique<BatchNorm2d<S>>(out_channels);
    }
  }

  Tensor<S> forward(const Tensor<S>& x, bool train) override {
    Tensor<S> a = conv1_.forward(x, train);
    if (bn1_) a = bn1_->forward(a, train);
    a = relu1_.forward(a, train);
    Tensor<S> b = conv2_.forward(a, train);
    if (bn2_) b = bn2_->forward(b, train);

    Tensor<S> s;
    if (!needs_adapter_) {
      s = x;
    } else if (mode_ == ShortcutMode::Projection) {
      s = proj_->forward(x, train);
      if (proj_bn_) s = proj_bn_->forward(s, train);
    } else {
      s = pad_shortcut(x, int(b.dim(2)), int(b.dim(3)));
    }
    if (!same_shape(b, s)) throw std::runtime_error("ResidualBlock: branch shape mismatch");
    for (std::int64_t i = 0; i < b.size(); ++i) b[i] += s[i];
    return relu2_.forward(b, train);
  }

  Tensor<S> backward(const Tensor<S>& dy) override {
    Tensor<S> dz = relu2_.backward(dy);
    // main branch
    Tensor<S> d = bn2_ ? bn2_->backward(dz) : dz;
    d = conv2_.backward(d);
    d = relu1_.backward(d);
    if (bn1_) d = bn1_->backward(d);
    Tensor<S> dx = conv1_.backward(d);
    // shortcut branch
    if (!needs_adapter_) {
      for (std::int64_t i = 0; i < dx.size(); ++i) dx[i] += dz[i];
    } else if (mode_ == ShortcutMode::Projection) {
      Tensor<S> ds = proj_bn_ ? proj_bn_->backward(dz) : dz;
      ds = proj_->backward(ds);
      for (std::int64_t i = 0; i < dx.size(); ++i) dx[i] += ds[i];
    } else {
      const auto n = dz.dim(0);
      for (std::int64_t i = 0; i < n; ++i)
        for (int c = 0; c < in_; ++c)
          for (std::int64_t y = 0; y < dz.dim(2); ++y)
            for (std::int64_t w = 0; w < dz.dim(3); ++w)
              dx.at(i, c, y * stride_, w * stride_) += dz.at(i, c, y, w);
    }
    return dx;
  }

  void collect(const std::string& prefix, std::vector<ParamRef<S>>& out) override {
    conv1_.collect(prefix + ".conv1", out);
    if (bn1_) bn1_->collect(prefix + ".bn1", out);
    conv2_.collect(prefix + ".conv2", out);
    if (bn2_) bn2_->collect(prefix + ".bn2", out);
    if (proj_) proj_->collect(prefix + ".proj", out);
    if (proj_bn_) proj_bn_->collect(prefix + ".proj_bn", out);
  }

 private:
  Tensor<S> pad_shortcut(const Tensor<S>& x, int out_h, int out_w) const {
    Tensor<S> s({x.dim(0), out_, out_h, out_w});
    for (std::int64_t i = 0; i < x.dim(0); ++i)
      for (int c = 0; c < in_; ++c)
        for (int y = 0; y < out_h; ++y)
          for (int w = 0; w < out_w; ++w)
            s.at(i, c, y, w) = x.at(i, c, std::int64_t(y) * stride_, std::int64_t(w) * stride_);
    return s;
  }

  int in_, out_, stride_;
  ShortcutMode mode_;
  bool bn_;
  bool needs_adapter_ = false;
  Conv2d<S> conv1_, conv2_;
  std::unique_ptr<BatchNorm2d<S>> bn1_, bn2_;
  std::unique_ptr<Conv2d<S>> proj_;
  std::unique_ptr<BatchNorm2d<S>> proj_bn_;
  ReLU<S> relu1_, relu2_;
};

template <typename S>
class Network {
 public:
  explicit Network(const ArchitectureSpec& spec) : spec_(spec) { build(); }

  const ArchitectureSpec& spec() const { return spec_; }

  // N x C x H x W batch in, N x output_width logits out.
  Tensor<S> forward(const Tensor<S>& x, bool train) {
    if (x.shape().size() != 4 || x.dim(1) != spec_.input_channels ||
        x.dim(2) != spec_.input_size || x.dim(3) != spec_.input_size)
      throw std::runtime_error("Network: input shape mismatch");
    Tensor<S> h = x;
    for (auto& [name, layer] : layers_) h = layer->forward(h, train);
    return h;
  }

  // Propagates d loss / d logits; gradients accumulate into the registry.
  void backward(const Tensor<S>& dlogits) {
    Tensor<S> d = dlogits;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) d = it->second->backward(d);
  }

  std::vector<ParamRef<S>> params() {
    std::vector<ParamRef<S>> out;
    for (auto& [name, layer] : layers_) layer->collect(name, out);
    return out;
  }

  void zero_grad() {
    for (auto& p : params())
      if (p.grad) p.grad->fill(S(0));
  }

  // He initialization for conv/fc weights, zeros for biases/shifts,
  // ones for BN scales; deterministic in construction order.
  void init(std::uint64_t seed) {
    Rng rng(seed);
    for (auto& p : params()) {
      if (p.fan_in > 0) {
        const double stddev = std::sqrt(2.0 / double(p.fan_in));
        for (std::int64_t i = 0; i < p.value->size(); ++i)
          (*p.value)[i] = S(rng.normal(0.0, stddev));
      }
    }
  }

  std::int64_t count_params() {
    std::int64_t n = 0;
    for (auto& p : params())
      if (p.trainable) n += p.value->size();
    return n;
  }

 private:
  void add(std::string name, std::unique_ptr<Layer<S>> layer) {
    layers_.emplace_back(std::move(name), std::move(layer));
  }

  void build() {
    int channels = spec_.input_channels;
    if (spec_.stem_channels > 0) {
      add("stem.conv", std::make_unique<Conv2d<S>>(channels, spec_.stem_channels,
                                                   spec_.stem_kernel, spec_.stem_stride,
                                                   spec_.stem_kernel / 2, !spec_.batch_norm));
      if (spec_.batch_norm)
        add("stem.bn", std::make_unique<BatchNorm2d<S>>(spec_.stem_channels));
      add("stem.relu", std::make_unique<ReLU<S>>());
      if (spec_.stem_pool) add("stem.pool", std::make_unique<MaxPool2d<S>>());
      channels = spec_.stem_channels;
    }
    for (std::size_t s = 0; s < spec_.stages.size(); ++s) {
      const auto& stage = spec_.stages[s];
      // the stem pool (when present) already downsamples ahead of stage 1
      const bool downsample_here = s > 0;
      const std::string sname = "stage" + std::to_string(s + 1);
      if (spec_.downsample == DownsampleMode::MaxPool && downsample_here)
        add(sname + ".pool", std::make_unique<MaxPool2d<S>>());
      for (int b = 0; b < stage.blocks; ++b) {
        const bool strided = spec_.downsample == DownsampleMode::StridedConv && b == 0 &&
                             downsample_here;
        add(sname + ".block" + std::to_string(b),
            std::make_unique<ResidualBlock<S>>(channels, stage.channels, strided ? 2 : 1,
                                               spec_.shortcut, spec_.batch_norm));
        channels = stage.channels;
      }
    }
    if (spec_.output_width > 0) {
      add("head.pool", std::make_unique<GlobalAvgPool<S>>());
      add("head.fc", std::make_unique<Linear<S>>(channels, spec_.output_width));
    }
  }

  ArchitectureSpec spec_;
  std::vector<std::pair<std::string, std::unique_ptr<Layer<S>>>> layers_;
};

}  // namespace mcat
