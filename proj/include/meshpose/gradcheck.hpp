#pragma once

#include <functional>
#include <string>
#include <vector>

#include "meshpose/tape.hpp"

namespace meshpose {

struct GradCheckParam {
  std::string name;
  double max_rel_err = 0.0;
  bool ok = true;
};

struct GradCheckReport {
  std::vector<GradCheckParam> params;
  double worst = 0.0;
  bool ok = true;
};

// Scalar-valued function of the parameters, expressed as tape construction.
using TapeFn = std::function<Value(Tape&, const std::vector<Value>&)>;

// Central finite differences against the tape's analytic gradients. Relative
// error uses max(|analytic|, |numeric|, 1e-8) as denominator. Non-finite
// forward values are rejected.
GradCheckReport gradcheck(const TapeFn& fn, const std::vector<Tensor>& point, double h, double tol,
                          const std::vector<std::string>& names = {});

}  // namespace meshpose
