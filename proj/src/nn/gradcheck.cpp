#include "autotune/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace autotune::nn {

namespace {

double projected_loss(LayerT<double>& layer, const TensorT<double>& in,
                      const TensorT<double>& proj) {
  TensorT<double> out;
  layer.forward(in, out);
  double loss = 0.0;
  for (size_t i = 0; i < out.numel(); ++i) loss += out.v[i] * proj.v[i];
  return loss;
}

double rel_err(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-4});
  return std::abs(analytic - numeric) / scale;
}

}  // namespace

GradCheckResult gradcheck_layer(LayerT<double>& layer, const std::vector<int>& in_shape,
                                int probes, double h, uint64_t seed) {
  Rng rng(seed);
  TensorT<double> in(in_shape);
  // keep inputs away from the relu kink so the finite difference is valid
  for (auto& x : in.v) {
    x = rng.uniform(-1.0, 1.0);
    if (std::abs(x) < 0.05) x = x < 0.0 ? x - 0.05 : x + 0.05;
  }
  layer.init_he_uniform(rng);

  TensorT<double> out;
  layer.forward(in, out);
  TensorT<double> proj(out.shape);
  for (auto& x : proj.v) x = rng.uniform(-1.0, 1.0);

  for (auto* g : layer.grads()) g->fill(0.0);
  TensorT<double> din;
  layer.backward(in, proj, din);

  // probe targets: all parameter tensors plus the input
  std::vector<TensorT<double>*> targets = layer.params();
  std::vector<TensorT<double>*> target_grads = layer.grads();
  targets.push_back(&in);
  target_grads.push_back(&din);

  GradCheckResult result{layer.name(), 0.0, 0};
  for (int p = 0; p < probes; ++p) {
    const size_t ti = static_cast<size_t>(rng.uniform_int(static_cast<int>(targets.size())));
    TensorT<double>& t = *targets[ti];
    const size_t j = static_cast<size_t>(rng.uniform_int(static_cast<int>(t.numel())));
    const double saved = t.v[j];
    t.v[j] = saved + h;
    const double lp = projected_loss(layer, in, proj);
    t.v[j] = saved - h;
    const double lm = projected_loss(layer, in, proj);
    t.v[j] = saved;
    const double numeric = (lp - lm) / (2.0 * h);
    const double analytic = target_grads[ti]->v[j];
    result.max_rel_err = std::max(result.max_rel_err, rel_err(analytic, numeric));
    ++result.probes;
  }
  return result;
}

std::vector<GradCheckResult> gradcheck_all(int probes_per_layer, double h, uint64_t seed) {
  std::vector<GradCheckResult> results;
  {
    DenseT<double> dense(23, 17);
    results.push_back(gradcheck_layer(dense, {6, 23}, probes_per_layer, h, seed));
  }
  {
    Conv2dT<double> conv(5, 7, 3, 2, 1);
    results.push_back(gradcheck_layer(conv, {3, 5, 12, 12}, probes_per_layer, h, seed + 1));
  }
  {
    ReluT<double> relu;
    results.push_back(gradcheck_layer(relu, {4, 5, 9, 9}, probes_per_layer, h, seed + 2));
  }
  {
    FlattenT<double> flatten;
    results.push_back(gradcheck_layer(flatten, {4, 3, 6, 6}, probes_per_layer, h, seed + 3));
  }
  return results;
}

}  // namespace autotune::nn
