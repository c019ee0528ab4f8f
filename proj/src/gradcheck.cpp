#include "meshpose/gradcheck.hpp"

#include <cmath>
#include <stdexcept>

namespace meshpose {

namespace {

double forward_at(const TapeFn& fn, const std::vector<Tensor>& point) {
  Tape tape;
  std::vector<Value> vs;
  vs.reserve(point.size());
  for (const Tensor& t : point) vs.push_back(tape.parameter(t));
  Value out = fn(tape, vs);
  const Tensor& o = tape.val(out);
  if (o.numel() != 1) throw std::invalid_argument("gradcheck: function output must be scalar-shaped");
  double v = o.item();
  if (!std::isfinite(v)) throw std::runtime_error("gradcheck: non-finite forward value");
  return v;
}

}  // namespace

GradCheckReport gradcheck(const TapeFn& fn, const std::vector<Tensor>& point, double h, double tol,
                          const std::vector<std::string>& names) {
  if (h <= 0.0) throw std::invalid_argument("gradcheck: h must be positive");

  Tape tape;
  std::vector<Value> vs;
  vs.reserve(point.size());
  for (const Tensor& t : point) vs.push_back(tape.parameter(t));
  Value out = fn(tape, vs);
  if (tape.val(out).numel() != 1)
    throw std::invalid_argument("gradcheck: function output must be scalar-shaped");
  if (!std::isfinite(tape.val(out).item()))
    throw std::runtime_error("gradcheck: non-finite forward value");
  Gradients grads = tape.backward(out);

  GradCheckReport report;
  for (size_t p = 0; p < point.size(); ++p) {
    GradCheckParam pr;
    pr.name = p < names.size() ? names[p] : "p" + std::to_string(p);
    const Tensor& analytic = grads.at(vs[p]);
    for (int64_t i = 0; i < point[p].numel(); ++i) {
      std::vector<Tensor> work = point;
      double orig = work[p].data()[i];
      work[p].mut()[i] = orig + h;
      double fp = forward_at(fn, work);
      work[p].mut()[i] = orig - h;
      double fm = forward_at(fn, work);
      double numeric = (fp - fm) / (2.0 * h);
      double an = analytic.data()[i];
      double denom = std::max(std::max(std::fabs(an), std::fabs(numeric)), 1e-8);
      double rel = std::fabs(an - numeric) / denom;
      if (rel > pr.max_rel_err) pr.max_rel_err = rel;
    }
    pr.ok = pr.max_rel_err <= tol;
    report.worst = std::max(report.worst, pr.max_rel_err);
    report.ok = report.ok && pr.ok;
    report.params.push_back(std::move(pr));
  }
  return report;
}

}  // namespace meshpose
