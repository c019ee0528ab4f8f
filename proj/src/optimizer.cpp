#include "meshpose/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace meshpose {

void rmsprop_apply(RmsPropState& state, const std::string& name, Tensor& param,
                   const Tensor& grad, double lr) {
  if (!param.same_shape(grad))
    throw std::invalid_argument("rmsprop: gradient shape " + shape_str(grad.shape()) +
                                " does not match parameter " + shape_str(param.shape()));
  Tensor& s = state.accum[name];
  if (!s.defined()) s = Tensor(param.shape());
  double* sd = s.mut();
  double* pd = param.mut();
  const double* gd = grad.data();
  const double rho = state.rho, one_m = 1.0 - state.rho, eps = state.eps;
  for (int64_t i = 0; i < param.numel(); ++i) {
    sd[i] = rho * sd[i] + one_m * gd[i] * gd[i];
    pd[i] = pd[i] - lr * gd[i] / (std::sqrt(sd[i]) + eps);
  }
}

bool rmsprop_step(RmsPropState& state, std::map<std::string, Tensor*>& params,
                  const std::map<std::string, Tensor>& grads, double lr) {
  for (const auto& [name, g] : grads) {
    if (!g.all_finite()) return false;
  }
  for (auto& [name, p] : params) {
    auto it = grads.find(name);
    if (it == grads.end()) continue;
    rmsprop_apply(state, name, *p, it->second, lr);
  }
  return true;
}

}  // namespace meshpose
