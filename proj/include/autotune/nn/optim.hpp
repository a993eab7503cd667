#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "autotune/nn/kernels.hpp"
#include "autotune/nn/tensor.hpp"

namespace autotune::nn {

// Adam with bias correction. beta1 = 0.9 per the training setup; beta2/eps
// conventional.
template <class T>
class AdamT {
 public:
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void init(const std::vector<TensorT<T>*>& params) {
    m_.clear();
    v_.clear();
    for (auto* p : params) {
      m_.emplace_back(p->shape);
      v_.emplace_back(p->shape);
    }
    step_count_ = 0;
  }

  void step(const std::vector<TensorT<T>*>& params, const std::vector<TensorT<T>*>& grads) {
    if (params.size() != m_.size() || grads.size() != m_.size())
      throw std::invalid_argument("AdamT: parameter list does not match init");
    ++step_count_;
    for (size_t i = 0; i < params.size(); ++i) {
      if (!params[i]->same_shape(m_[i]) || !grads[i]->same_shape(m_[i]))
        throw std::invalid_argument("AdamT: tensor shape does not match moments");
      kernels::adam_update(params[i]->data(), grads[i]->data(), m_[i].data(), v_[i].data(),
                           params[i]->numel(), lr, beta1, beta2, eps, step_count_);
    }
  }

  long step_count() const { return step_count_; }
  void set_step_count(long t) { step_count_ = t; }
  std::vector<TensorT<T>>& moments1() { return m_; }
  std::vector<TensorT<T>>& moments2() { return v_; }

 private:
  std::vector<TensorT<T>> m_, v_;
  long step_count_ = 0;
};

using Adam = AdamT<float>;

// Mean binary cross-entropy with logits over mask==1 entries; masked entries
// contribute zero loss and zero gradient. Throws when everything is masked.
template <class T>
double logistic_loss(const TensorT<T>& logits, const TensorT<T>& labels, const TensorT<T>& mask,
                     TensorT<T>& dlogits) {
  if (!logits.same_shape(labels) || !logits.same_shape(mask))
    throw std::invalid_argument("logistic_loss: shape mismatch");
  size_t count = 0;
  for (const T& m : mask.v)
    if (m != T(0)) ++count;
  if (count == 0) throw std::invalid_argument("logistic_loss: all entries masked");

  dlogits = TensorT<T>(logits.shape);
  double loss = 0.0;
  const double inv = 1.0 / static_cast<double>(count);
  for (size_t i = 0; i < logits.numel(); ++i) {
    if (mask.v[i] == T(0)) continue;
    const double z = static_cast<double>(logits.v[i]);
    const double y = static_cast<double>(labels.v[i]);
    loss += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
    const double sig = 1.0 / (1.0 + std::exp(-z));
    dlogits.v[i] = static_cast<T>((sig - y) * inv);
  }
  return loss * inv;
}

// Mean squared error over all entries.
template <class T>
double mse_loss(const TensorT<T>& pred, const TensorT<T>& target, TensorT<T>& dpred) {
  if (!pred.same_shape(target)) throw std::invalid_argument("mse_loss: shape mismatch");
  dpred = TensorT<T>(pred.shape);
  double loss = 0.0;
  const double inv = 1.0 / static_cast<double>(pred.numel());
  for (size_t i = 0; i < pred.numel(); ++i) {
    const double e = static_cast<double>(pred.v[i]) - static_cast<double>(target.v[i]);
    loss += e * e;
    dpred.v[i] = static_cast<T>(2.0 * e * inv);
  }
  return loss * inv;
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace autotune::nn
