#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "cxr/errors.hpp"
#include "cxr/modelspec.hpp"
#include "cxr/rng.hpp"

namespace cxr {

template <typename Real>
using MatX = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Real>
using VecX = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

namespace nn {

/// Activations travel as (features x batch) matrices; spatial tensors are
/// flattened channel-major: index = (c*H + y)*W + x.
template <typename Real>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual MatX<Real> forward(const MatX<Real>& x, bool train) = 0;
  virtual MatX<Real> backward(const MatX<Real>& dy) = 0;
  virtual void sgd_step(Real lr) {}
  virtual void append_params(std::vector<Real>& out) const {}
  virtual void append_grads(std::vector<Real>& out) const {}
  virtual const Real* load_params(const Real* p) { return p; }
  virtual std::int64_t param_count() const { return 0; }
  virtual void init(Rng& rng) {}

  bool trainable = true;
};

namespace detail {

template <typename Real>
void fill_uniform(Rng& rng, Real* data, std::int64_t n, double scale) {
  for (std::int64_t i = 0; i < n; ++i)
    data[i] = static_cast<Real>((rng.next_unit() * 2.0 - 1.0) * scale);
}

}  // namespace detail

template <typename Real>
class DenseLayer final : public Layer<Real> {
 public:
  DenseLayer(int in, int out) : w_(out, in), b_(out), dw_(out, in), db_(out) {
    w_.setZero();
    b_.setZero();
  }

  void init(Rng& rng) override {
    const double scale = 1.0 / std::sqrt(static_cast<double>(w_.cols()));
    detail::fill_uniform(rng, w_.data(), w_.size(), scale);
    detail::fill_uniform(rng, b_.data(), b_.size(), scale);
  }

  MatX<Real> forward(const MatX<Real>& x, bool train) override {
    if (train) x_ = x;
    MatX<Real> y = (w_ * x).colwise() + b_;
    return y;
  }

  MatX<Real> backward(const MatX<Real>& dy) override {
    dw_.noalias() = dy * x_.transpose();
    db_ = dy.rowwise().sum();
    MatX<Real> dx = w_.transpose() * dy;
    return dx;
  }

  void sgd_step(Real lr) override {
    w_.noalias() -= lr * dw_;
    b_.noalias() -= lr * db_;
  }

  std::int64_t param_count() const override { return w_.size() + b_.size(); }
  void append_params(std::vector<Real>& out) const override {
    out.insert(out.end(), w_.data(), w_.data() + w_.size());
    out.insert(out.end(), b_.data(), b_.data() + b_.size());
  }
  void append_grads(std::vector<Real>& out) const override {
    out.insert(out.end(), dw_.data(), dw_.data() + dw_.size());
    out.insert(out.end(), db_.data(), db_.data() + db_.size());
  }
  const Real* load_params(const Real* p) override {
    std::copy(p, p + w_.size(), w_.data());
    p += w_.size();
    std::copy(p, p + b_.size(), b_.data());
    return p + b_.size();
  }

 private:
  MatX<Real> w_, dw_;
  VecX<Real> b_, db_;
  MatX<Real> x_;
};

template <typename Real>
class ConvLayer final : public Layer<Real> {
 public:
  ConvLayer(Shape3 in, int filters, int kh, int kw)
      : in_(in), kh_(kh), kw_(kw), oh_(in.h - kh + 1), ow_(in.w - kw + 1),
        k_(in.c * kh * kw), w_(filters, in.c * kh * kw), b_(filters),
        dw_(filters, in.c * kh * kw), db_(filters) {
    w_.setZero();
    b_.setZero();
  }

  void init(Rng& rng) override {
    const double scale = 1.0 / std::sqrt(static_cast<double>(k_));
    detail::fill_uniform(rng, w_.data(), w_.size(), scale);
    detail::fill_uniform(rng, b_.data(), b_.size(), scale);
  }

  MatX<Real> forward(const MatX<Real>& x, bool train) override {
    const Eigen::Index batch = x.cols();
    const int p = oh_ * ow_;
    const int filters = static_cast<int>(w_.rows());
    MatX<Real> y(static_cast<Eigen::Index>(filters) * p, batch);
    if (train) {
      x_ = x;
      cols_.assign(static_cast<std::size_t>(batch), MatX<Real>());
    }
    MatX<Real> cols(k_, p);
    for (Eigen::Index s = 0; s < batch; ++s) {
      im2col(x.col(s).data(), cols);
      MatX<Real> ys(filters, p);
      ys.noalias() = w_ * cols;
      ys.colwise() += b_;
      for (int f = 0; f < filters; ++f)
        y.col(s).segment(static_cast<Eigen::Index>(f) * p, p) = ys.row(f).transpose();
      if (train) cols_[static_cast<std::size_t>(s)] = cols;
    }
    return y;
  }

  MatX<Real> backward(const MatX<Real>& dy) override {
    const Eigen::Index batch = dy.cols();
    const int p = oh_ * ow_;
    const int filters = static_cast<int>(w_.rows());
    dw_.setZero();
    db_.setZero();
    MatX<Real> dx(x_.rows(), batch);
    dx.setZero();
    MatX<Real> dys(filters, p);
    for (Eigen::Index s = 0; s < batch; ++s) {
      for (int f = 0; f < filters; ++f)
        dys.row(f) = dy.col(s).segment(static_cast<Eigen::Index>(f) * p, p).transpose();
      dw_.noalias() += dys * cols_[static_cast<std::size_t>(s)].transpose();
      db_ += dys.rowwise().sum();
      MatX<Real> dcols(k_, p);
      dcols.noalias() = w_.transpose() * dys;
      col2im(dcols, dx.col(s).data());
    }
    cols_.clear();
    return dx;
  }

  void sgd_step(Real lr) override {
    w_.noalias() -= lr * dw_;
    b_.noalias() -= lr * db_;
  }

  std::int64_t param_count() const override { return w_.size() + b_.size(); }
  void append_params(std::vector<Real>& out) const override {
    out.insert(out.end(), w_.data(), w_.data() + w_.size());
    out.insert(out.end(), b_.data(), b_.data() + b_.size());
  }
  void append_grads(std::vector<Real>& out) const override {
    out.insert(out.end(), dw_.data(), dw_.data() + dw_.size());
    out.insert(out.end(), db_.data(), db_.data() + db_.size());
  }
  const Real* load_params(const Real* p) override {
    std::copy(p, p + w_.size(), w_.data());
    p += w_.size();
    std::copy(p, p + b_.size(), b_.data());
    return p + b_.size();
  }

 private:
  void im2col(const Real* x, MatX<Real>& cols) const {
    for (int c = 0; c < in_.c; ++c) {
      const Real* plane = x + static_cast<std::ptrdiff_t>(c) * in_.h * in_.w;
      for (int ky = 0; ky < kh_; ++ky)
        for (int kx = 0; kx < kw_; ++kx) {
          const int r = (c * kh_ + ky) * kw_ + kx;
          for (int oy = 0; oy < oh_; ++oy) {
            const Real* src = plane + (oy + ky) * in_.w + kx;
            Real* dst = cols.data() + static_cast<std::ptrdiff_t>(oy) * ow_ * cols.rows() + r;
            for (int ox = 0; ox < ow_; ++ox) dst[static_cast<std::ptrdiff_t>(ox) * cols.rows()] = src[ox];
          }
        }
    }
  }

  void col2im(const MatX<Real>& dcols, Real* dx) const {
    for (int c = 0; c < in_.c; ++c) {
      Real* plane = dx + static_cast<std::ptrdiff_t>(c) * in_.h * in_.w;
      for (int ky = 0; ky < kh_; ++ky)
        for (int kx = 0; kx < kw_; ++kx) {
          const int r = (c * kh_ + ky) * kw_ + kx;
          for (int oy = 0; oy < oh_; ++oy) {
            Real* dst = plane + (oy + ky) * in_.w + kx;
            const Real* src = dcols.data() + static_cast<std::ptrdiff_t>(oy) * ow_ * dcols.rows() + r;
            for (int ox = 0; ox < ow_; ++ox) dst[ox] += src[static_cast<std::ptrdiff_t>(ox) * dcols.rows()];
          }
        }
    }
  }

  Shape3 in_;
  int kh_, kw_, oh_, ow_, k_;
  MatX<Real> w_, dw_;
  VecX<Real> b_, db_;
  MatX<Real> x_;
  std::vector<MatX<Real>> cols_;
};

template <typename Real>
class MaxPoolLayer final : public Layer<Real> {
 public:
  MaxPoolLayer(Shape3 in, int ph, int pw)
      : in_(in), ph_(ph), pw_(pw), oh_(in.h / ph), ow_(in.w / pw) {}

  MatX<Real> forward(const MatX<Real>& x, bool train) override {
    const Eigen::Index batch = x.cols();
    const Eigen::Index out_rows = static_cast<Eigen::Index>(in_.c) * oh_ * ow_;
    MatX<Real> y(out_rows, batch);
    if (train) {
      argmax_.resize(out_rows, batch);
      in_rows_ = x.rows();
    }
    for (Eigen::Index s = 0; s < batch; ++s) {
      const Real* xs = x.col(s).data();
      for (int c = 0; c < in_.c; ++c)
        for (int oy = 0; oy < oh_; ++oy)
          for (int ox = 0; ox < ow_; ++ox) {
            int best = (c * in_.h + oy * ph_) * in_.w + ox * pw_;
            Real best_v = xs[best];
            for (int dy = 0; dy < ph_; ++dy)
              for (int dx = 0; dx < pw_; ++dx) {
                const int idx = (c * in_.h + oy * ph_ + dy) * in_.w + ox * pw_ + dx;
                if (xs[idx] > best_v) {
                  best_v = xs[idx];
                  best = idx;
                }
              }
            const Eigen::Index o = (static_cast<Eigen::Index>(c) * oh_ + oy) * ow_ + ox;
            y(o, s) = best_v;
            if (train) argmax_(o, s) = best;
          }
    }
    return y;
  }

  MatX<Real> backward(const MatX<Real>& dy) override {
    MatX<Real> dx(in_rows_, dy.cols());
    dx.setZero();
    for (Eigen::Index s = 0; s < dy.cols(); ++s)
      for (Eigen::Index o = 0; o < dy.rows(); ++o) dx(argmax_(o, s), s) += dy(o, s);
    return dx;
  }

 private:
  Shape3 in_;
  int ph_, pw_, oh_, ow_;
  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic> argmax_;
  Eigen::Index in_rows_ = 0;
};

/// Flatten is a pure reshape: the matrix layout is already flat.
template <typename Real>
class FlattenLayer final : public Layer<Real> {
 public:
  MatX<Real> forward(const MatX<Real>& x, bool) override { return x; }
  MatX<Real> backward(const MatX<Real>& dy) override { return dy; }
};

template <typename Real>
class GlobalPoolLayer final : public Layer<Real> {
 public:
  explicit GlobalPoolLayer(Shape3 in) : in_(in) {}

  MatX<Real> forward(const MatX<Real>& x, bool) override {
    const int p = in_.h * in_.w;
    MatX<Real> y(in_.c, x.cols());
    for (Eigen::Index s = 0; s < x.cols(); ++s)
      for (int c = 0; c < in_.c; ++c)
        y(c, s) = x.col(s).segment(static_cast<Eigen::Index>(c) * p, p).mean();
    return y;
  }

  MatX<Real> backward(const MatX<Real>& dy) override {
    const int p = in_.h * in_.w;
    MatX<Real> dx(static_cast<Eigen::Index>(in_.c) * p, dy.cols());
    for (Eigen::Index s = 0; s < dy.cols(); ++s)
      for (int c = 0; c < in_.c; ++c)
        dx.col(s).segment(static_cast<Eigen::Index>(c) * p, p)
            .setConstant(dy(c, s) / static_cast<Real>(p));
    return dx;
  }

 private:
  Shape3 in_;
};

template <typename Real>
class ActivationLayer final : public Layer<Real> {
 public:
  explicit ActivationLayer(ActivationKind kind) : kind_(kind) {}

  MatX<Real> forward(const MatX<Real>& x, bool train) override {
    MatX<Real> y = apply(kind_, x);
    if (train) y_ = y;
    return y;
  }

  MatX<Real> backward(const MatX<Real>& dy) override {
    switch (kind_) {
      case ActivationKind::relu:
        return ((y_.array() > Real(0)).template cast<Real>() * dy.array()).matrix();
      case ActivationKind::sigmoid:
        return (y_.array() * (Real(1) - y_.array()) * dy.array()).matrix();
      case ActivationKind::softmax: {
        MatX<Real> dx = dy;
        for (Eigen::Index s = 0; s < dy.cols(); ++s) {
          const Real dot = y_.col(s).dot(dy.col(s));
          dx.col(s) = y_.col(s).array() * (dy.col(s).array() - dot);
        }
        return dx;
      }
    }
    return dy;
  }

  static MatX<Real> apply(ActivationKind kind, const MatX<Real>& x) {
    switch (kind) {
      case ActivationKind::relu:
        return x.array().max(Real(0));
      case ActivationKind::sigmoid:
        return (Real(1) / (Real(1) + (-x.array()).exp())).matrix();
      case ActivationKind::softmax: {
        MatX<Real> y(x.rows(), x.cols());
        for (Eigen::Index s = 0; s < x.cols(); ++s) {
          const Real m = x.col(s).maxCoeff();
          VecX<Real> e = (x.col(s).array() - m).exp();
          y.col(s) = e / e.sum();
        }
        return y;
      }
    }
    return x;
  }

  ActivationKind kind() const { return kind_; }

 private:
  ActivationKind kind_;
  MatX<Real> y_;
};

}  // namespace nn

/// Executable network compiled from a ModelSpec. Weight initialization is
/// seeded uniform scaled by 1/sqrt(fan_in); all arithmetic is sequential, so
/// results are bit-deterministic for a fixed seed.
template <typename Real>
class Network {
 public:
  explicit Network(const ModelSpec& spec) : spec_(spec) {
    const auto shapes = infer_shapes(spec);
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
      const LayerSpec& l = spec.layers[i];
      std::unique_ptr<nn::Layer<Real>> layer;
      switch (l.kind) {
        case LayerKind::conv2d:
          layer = std::make_unique<nn::ConvLayer<Real>>(shapes[i], l.filters, l.kernel_h, l.kernel_w);
          break;
        case LayerKind::maxpool:
          layer = std::make_unique<nn::MaxPoolLayer<Real>>(shapes[i], l.pool_h, l.pool_w);
          break;
        case LayerKind::flatten:
          layer = std::make_unique<nn::FlattenLayer<Real>>();
          break;
        case LayerKind::global_pool:
          layer = std::make_unique<nn::GlobalPoolLayer<Real>>(shapes[i]);
          break;
        case LayerKind::dense:
          layer = std::make_unique<nn::DenseLayer<Real>>(shapes[i].c, l.units);
          break;
        case LayerKind::activation:
          layer = std::make_unique<nn::ActivationLayer<Real>>(l.activation);
          break;
      }
      layer->trainable = static_cast<int>(i) >= spec.frozen_prefix;
      layers_.push_back(std::move(layer));
    }
    input_dim_ = spec.input_shape.volume();
    output_dim_ = shapes.back().volume();
    // A trailing softmax/sigmoid is applied at predict time; training works on
    // logits with the fused cross-entropy gradient.
    if (!spec.layers.empty() && spec.layers.back().kind == LayerKind::activation &&
        spec.layers.back().activation != ActivationKind::relu) {
      final_activation_ = spec.layers.back().activation;
      logit_layers_ = layers_.size() - 1;
    } else {
      logit_layers_ = layers_.size();
    }
  }

  void init_weights(std::uint64_t seed) {
    Rng rng(seed);
    for (auto& layer : layers_) layer->init(rng);
  }

  /// Pre-head-activation outputs, (output_dim x batch).
  MatX<Real> forward_logits(const MatX<Real>& x, bool train) {
    if (x.rows() != input_dim_)
      throw ShapeMismatch("network expects input dim " + std::to_string(input_dim_) + ", got " +
                          std::to_string(x.rows()));
    MatX<Real> cur = x;
    for (std::size_t i = 0; i < logit_layers_; ++i) cur = layers_[i]->forward(cur, train);
    return cur;
  }

  /// Probabilities (softmax rows / sigmoid scalar); falls back to raw logits
  /// when the spec has no trailing probability activation.
  MatX<Real> predict(const MatX<Real>& x) {
    MatX<Real> logits = forward_logits(x, false);
    if (!final_activation_) return logits;
    return nn::ActivationLayer<Real>::apply(*final_activation_, logits);
  }

  void backward(const MatX<Real>& dlogits) {
    MatX<Real> cur = dlogits;
    for (std::size_t i = logit_layers_; i-- > 0;) cur = layers_[i]->backward(cur);
  }

  void sgd_step(Real lr) {
    for (auto& layer : layers_)
      if (layer->trainable) layer->sgd_step(lr);
  }

  std::int64_t parameter_count() const {
    std::int64_t n = 0;
    for (const auto& layer : layers_) n += layer->param_count();
    return n;
  }

  std::vector<Real> parameters() const {
    std::vector<Real> out;
    out.reserve(static_cast<std::size_t>(parameter_count()));
    for (const auto& layer : layers_) layer->append_params(out);
    return out;
  }

  std::vector<Real> gradients() const {
    std::vector<Real> out;
    out.reserve(static_cast<std::size_t>(parameter_count()));
    for (const auto& layer : layers_) layer->append_grads(out);
    return out;
  }

  void set_parameters(std::span<const Real> params) {
    if (static_cast<std::int64_t>(params.size()) != parameter_count())
      throw ShapeMismatch("parameter vector size mismatch");
    const Real* p = params.data();
    for (auto& layer : layers_) p = layer->load_params(p);
  }

  const ModelSpec& spec() const { return spec_; }
  std::int64_t input_dim() const { return input_dim_; }
  std::int64_t output_dim() const { return output_dim_; }

 private:
  ModelSpec spec_;
  std::vector<std::unique_ptr<nn::Layer<Real>>> layers_;
  std::size_t logit_layers_ = 0;
  std::int64_t input_dim_ = 0;
  std::int64_t output_dim_ = 0;
  std::optional<ActivationKind> final_activation_;
};

namespace nn {

template <typename Real>
struct BatchLoss {
  double loss_sum = 0.0;    // summed over the batch
  double correct = 0.0;     // correctly classified count
  MatX<Real> dlogits;       // gradient of the mean loss
};

/// Categorical cross-entropy on logits (softmax fused into the gradient).
template <typename Real>
BatchLoss<Real> softmax_cross_entropy(const MatX<Real>& logits, const std::vector<int>& targets) {
  if (static_cast<std::size_t>(logits.cols()) != targets.size())
    throw LengthMismatch("logit batch does not match target count");
  BatchLoss<Real> out;
  out.dlogits.resize(logits.rows(), logits.cols());
  const Real inv_b = Real(1) / static_cast<Real>(logits.cols());
  for (Eigen::Index s = 0; s < logits.cols(); ++s) {
    const int t = targets[static_cast<std::size_t>(s)];
    const Real m = logits.col(s).maxCoeff();
    const Real lse = m + std::log((logits.col(s).array() - m).exp().sum());
    out.loss_sum += static_cast<double>(lse - logits(t, s));
    VecX<Real> p = (logits.col(s).array() - lse).exp();
    Eigen::Index argmax = 0;
    logits.col(s).maxCoeff(&argmax);
    if (static_cast<int>(argmax) == t) out.correct += 1.0;
    p(t) -= Real(1);
    out.dlogits.col(s) = p * inv_b;
  }
  return out;
}

/// Binary cross-entropy on a single logit row (sigmoid fused); target 1 is
/// the positive ("disease") class.
template <typename Real>
BatchLoss<Real> sigmoid_cross_entropy(const MatX<Real>& logits, const std::vector<Real>& targets) {
  if (logits.rows() != 1) throw ShapeMismatch("binary loss expects a single output row");
  if (static_cast<std::size_t>(logits.cols()) != targets.size())
    throw LengthMismatch("logit batch does not match target count");
  BatchLoss<Real> out;
  out.dlogits.resize(1, logits.cols());
  const Real inv_b = Real(1) / static_cast<Real>(logits.cols());
  for (Eigen::Index s = 0; s < logits.cols(); ++s) {
    const Real z = logits(0, s);
    const Real y = targets[static_cast<std::size_t>(s)];
    const Real softplus = std::max(z, Real(0)) + std::log1p(std::exp(-std::abs(z)));
    out.loss_sum += static_cast<double>(softplus - y * z);
    const Real sigma = Real(1) / (Real(1) + std::exp(-z));
    out.dlogits(0, s) = (sigma - y) * inv_b;
    if ((z > Real(0)) == (y > Real(0.5))) out.correct += 1.0;
  }
  return out;
}

}  // namespace nn
}  // namespace cxr
