#pragma once

#include <map>
#include <string>

#include "meshpose/tensor.hpp"

namespace meshpose {

// RMSprop with running mean of squared gradients:
//   s <- rho*s + (1-rho)*g^2;  p <- p - lr * g / (sqrt(s) + eps)
struct RmsPropState {
  double rho = 0.9;
  double eps = 1e-8;
  std::map<std::string, Tensor> accum;  // per-parameter s, created on first use
};

// In-place update of one parameter. The caller is responsible for the
// all-or-nothing policy across a parameter set (check gradients first).
void rmsprop_apply(RmsPropState& state, const std::string& name, Tensor& param,
                   const Tensor& grad, double lr);

// Full-set step: verifies every gradient is finite before mutating anything;
// returns false (nothing touched) when a non-finite gradient appears.
bool rmsprop_step(RmsPropState& state, std::map<std::string, Tensor*>& params,
                  const std::map<std::string, Tensor>& grads, double lr);

}  // namespace meshpose
