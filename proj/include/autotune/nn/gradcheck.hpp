#pragma once

#include <string>
#include <vector>

#include "autotune/nn/layers.hpp"

namespace autotune::nn {

struct GradCheckResult {
  std::string layer;
  double max_rel_err = 0.0;
  int probes = 0;
};

// Central finite differences against the analytic backward pass, in double
// precision: loss(x) = sum(forward(x) * R) for a fixed random projection R.
// Probes cover both parameters and inputs.
GradCheckResult gradcheck_layer(LayerT<double>& layer, const std::vector<int>& in_shape,
                                int probes, double h, uint64_t seed);

// Runs the standard battery (dense, conv2d, relu, flatten) and returns the
// per-layer results.
std::vector<GradCheckResult> gradcheck_all(int probes_per_layer, double h, uint64_t seed);

}  // namespace autotune::nn
