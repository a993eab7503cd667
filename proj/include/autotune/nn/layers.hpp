#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "autotune/nn/kernels.hpp"
#include "autotune/nn/tensor.hpp"
#include "autotune/rng.hpp"

namespace autotune::nn {

template <class T>
class LayerT {
 public:
  virtual ~LayerT() = default;
  virtual void forward(const TensorT<T>& in, TensorT<T>& out) = 0;
  // `in` is the same tensor the preceding forward received. When need_din is
  // false the layer may skip the input-gradient computation (used for the
  // first layer of a stack, whose input gradient has no consumer).
  virtual void backward(const TensorT<T>& in, const TensorT<T>& dout, TensorT<T>& din,
                        bool need_din = true) = 0;
  virtual std::vector<int> out_shape(const std::vector<int>& in_shape) const = 0;
  virtual std::vector<TensorT<T>*> params() { return {}; }
  virtual std::vector<TensorT<T>*> grads() { return {}; }
  virtual std::string name() const = 0;
  virtual void init_he_uniform(Rng&) {}
};

template <class T>
class DenseT final : public LayerT<T> {
 public:
  DenseT(int in_dim, int out_dim)
      : in_dim_(in_dim), out_dim_(out_dim), w_({out_dim, in_dim}), b_({out_dim}),
        dw_({out_dim, in_dim}), db_({out_dim}) {}

  void forward(const TensorT<T>& in, TensorT<T>& out) override {
    check_in(in);
    const int B = in.dim(0);
    out = TensorT<T>({B, out_dim_});
    kernels::dense_forward(in.data(), w_.data(), b_.data(), out.data(), B, in_dim_, out_dim_);
  }

  void backward(const TensorT<T>& in, const TensorT<T>& dout, TensorT<T>& din,
                bool need_din) override {
    check_in(in);
    const int B = in.dim(0);
    if (dout.shape != std::vector<int>{B, out_dim_})
      throw std::invalid_argument("DenseT: dout shape " + dout.shape_str());
    if (need_din) {
      din = TensorT<T>({B, in_dim_});
      kernels::dense_backward_input(dout.data(), w_.data(), din.data(), B, in_dim_, out_dim_);
    }
    kernels::dense_backward_params(dout.data(), in.data(), dw_.data(), db_.data(), B, in_dim_,
                                   out_dim_);
  }

  std::vector<int> out_shape(const std::vector<int>& s) const override {
    return {s.at(0), out_dim_};
  }
  std::vector<TensorT<T>*> params() override { return {&w_, &b_}; }
  std::vector<TensorT<T>*> grads() override { return {&dw_, &db_}; }
  std::string name() const override { return "dense"; }

  void init_he_uniform(Rng& rng) override {
    const double limit = std::sqrt(6.0 / in_dim_);
    for (auto& x : w_.v) x = static_cast<T>(rng.uniform(-limit, limit));
    b_.fill(T(0));
  }

  void zero_init() {
    w_.fill(T(0));
    b_.fill(T(0));
  }

  TensorT<T>& weight() { return w_; }
  TensorT<T>& bias() { return b_; }

 private:
  void check_in(const TensorT<T>& in) const {
    if (in.shape.size() != 2 || in.dim(1) != in_dim_)
      throw std::invalid_argument("DenseT: input shape " + in.shape_str() + ", expected [B," +
                                  std::to_string(in_dim_) + "]");
  }

  int in_dim_, out_dim_;
  TensorT<T> w_, b_, dw_, db_;
};

template <class T>
class Conv2dT final : public LayerT<T> {
 public:
  Conv2dT(int cin, int cout, int k, int stride, int pad)
      : cin_(cin), cout_(cout), k_(k), stride_(stride), pad_(pad), w_({cout, cin, k, k}),
        b_({cout}), dw_({cout, cin, k, k}), db_({cout}) {}

  void forward(const TensorT<T>& in, TensorT<T>& out) override {
    ConvDims d = dims(in);
    out = TensorT<T>({d.batch, cout_, d.hout(), d.wout()});
    kernels::conv2d_forward(in.data(), w_.data(), b_.data(), out.data(), d);
  }

  void backward(const TensorT<T>& in, const TensorT<T>& dout, TensorT<T>& din,
                bool need_din) override {
    ConvDims d = dims(in);
    if (dout.shape != std::vector<int>{d.batch, cout_, d.hout(), d.wout()})
      throw std::invalid_argument("Conv2dT: dout shape " + dout.shape_str());
    if (need_din) {
      din = TensorT<T>(in.shape);
      kernels::conv2d_backward_input(dout.data(), w_.data(), din.data(), d);
    }
    kernels::conv2d_backward_params(dout.data(), in.data(), dw_.data(), db_.data(), d);
  }

  std::vector<int> out_shape(const std::vector<int>& s) const override {
    ConvDims d;
    d.batch = s.at(0);
    d.cin = s.at(1);
    d.h = s.at(2);
    d.w = s.at(3);
    d.cout = cout_;
    d.k = k_;
    d.stride = stride_;
    d.pad = pad_;
    return {d.batch, cout_, d.hout(), d.wout()};
  }
  std::vector<TensorT<T>*> params() override { return {&w_, &b_}; }
  std::vector<TensorT<T>*> grads() override { return {&dw_, &db_}; }
  std::string name() const override { return "conv2d"; }

  void init_he_uniform(Rng& rng) override {
    const double limit = std::sqrt(6.0 / (cin_ * k_ * k_));
    for (auto& x : w_.v) x = static_cast<T>(rng.uniform(-limit, limit));
    b_.fill(T(0));
  }

 private:
  ConvDims dims(const TensorT<T>& in) const {
    if (in.shape.size() != 4 || in.dim(1) != cin_)
      throw std::invalid_argument("Conv2dT: input shape " + in.shape_str() + ", expected [B," +
                                  std::to_string(cin_) + ",H,W]");
    ConvDims d;
    d.batch = in.dim(0);
    d.cin = cin_;
    d.h = in.dim(2);
    d.w = in.dim(3);
    d.cout = cout_;
    d.k = k_;
    d.stride = stride_;
    d.pad = pad_;
    if (d.hout() <= 0 || d.wout() <= 0)
      throw std::invalid_argument("Conv2dT: input too small for kernel");
    return d;
  }

  int cin_, cout_, k_, stride_, pad_;
  TensorT<T> w_, b_, dw_, db_;
};

template <class T>
class ReluT final : public LayerT<T> {
 public:
  void forward(const TensorT<T>& in, TensorT<T>& out) override {
    out = TensorT<T>(in.shape);
    kernels::relu_forward(in.data(), out.data(), in.numel());
  }
  void backward(const TensorT<T>& in, const TensorT<T>& dout, TensorT<T>& din,
                bool need_din) override {
    if (!dout.same_shape(in)) throw std::invalid_argument("ReluT: dout shape mismatch");
    if (!need_din) return;
    din = TensorT<T>(in.shape);
    kernels::relu_backward(dout.data(), in.data(), din.data(), in.numel());
  }
  std::vector<int> out_shape(const std::vector<int>& s) const override { return s; }
  std::string name() const override { return "relu"; }
};

template <class T>
class FlattenT final : public LayerT<T> {
 public:
  void forward(const TensorT<T>& in, TensorT<T>& out) override {
    out = in;
    out.shape = out_shape(in.shape);
  }
  void backward(const TensorT<T>& in, const TensorT<T>& dout, TensorT<T>& din,
                bool need_din) override {
    if (dout.numel() != in.numel()) throw std::invalid_argument("FlattenT: dout size mismatch");
    if (!need_din) return;
    din = dout;
    din.shape = in.shape;
  }
  std::vector<int> out_shape(const std::vector<int>& s) const override {
    int rest = 1;
    for (size_t i = 1; i < s.size(); ++i) rest *= s[i];
    return {s.at(0), rest};
  }
  std::string name() const override { return "flatten"; }
};

// Sequential stack. Owns the activation chain so backward can replay it;
// backward without a preceding forward is a logic error.
template <class T>
class LayerStackT {
 public:
  LayerStackT() = default;
  LayerStackT(LayerStackT&&) noexcept = default;
  LayerStackT& operator=(LayerStackT&&) noexcept = default;

  template <class L, class... Args>
  L& add(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *layer;
    layers_.push_back(std::move(layer));
    return ref;
  }

  const TensorT<T>& forward(TensorT<T> in) {
    acts_.clear();
    acts_.reserve(layers_.size() + 1);
    acts_.push_back(std::move(in));
    for (auto& layer : layers_) {
      TensorT<T> out;
      layer->forward(acts_.back(), out);
      acts_.push_back(std::move(out));
    }
    has_forward_ = true;
    return acts_.back();
  }

  // Returns d(loss)/d(input); accumulates parameter gradients. Pass
  // need_input_grad = false when the stack input gradient is unused.
  TensorT<T> backward(const TensorT<T>& dloss_dout, bool need_input_grad = true) {
    if (!has_forward_) throw std::logic_error("LayerStackT: backward called without forward");
    TensorT<T> d = dloss_dout;
    for (size_t i = layers_.size(); i-- > 0;) {
      TensorT<T> din;
      layers_[i]->backward(acts_[i], d, din, i > 0 || need_input_grad);
      d = std::move(din);
    }
    has_forward_ = false;
    return d;
  }

  const TensorT<T>& output() const { return acts_.back(); }

  std::vector<TensorT<T>*> params() {
    std::vector<TensorT<T>*> out;
    for (auto& l : layers_)
      for (auto* p : l->params()) out.push_back(p);
    return out;
  }
  std::vector<TensorT<T>*> grads() {
    std::vector<TensorT<T>*> out;
    for (auto& l : layers_)
      for (auto* g : l->grads()) out.push_back(g);
    return out;
  }

  void zero_grads() {
    for (auto* g : grads()) g->fill(T(0));
  }

  size_t param_count() {
    size_t n = 0;
    for (auto* p : params()) n += p->numel();
    return n;
  }

  void init_he_uniform(Rng& rng) {
    for (auto& l : layers_) l->init_he_uniform(rng);
  }

  std::vector<int> out_shape(std::vector<int> s) const {
    for (const auto& l : layers_) s = l->out_shape(s);
    return s;
  }

  size_t layer_count() const { return layers_.size(); }
  LayerT<T>& layer(size_t i) { return *layers_[i]; }

 private:
  std::vector<std::unique_ptr<LayerT<T>>> layers_;
  std::vector<TensorT<T>> acts_;
  bool has_forward_ = false;
};

using LayerStack = LayerStackT<float>;

}  // namespace autotune::nn
