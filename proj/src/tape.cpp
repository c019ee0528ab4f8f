#include "meshpose/tape.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

#include "meshpose/kernels.hpp"
#include "meshpose/render.hpp"

namespace meshpose {

const char* op_name(Op op) {
  switch (op) {
    case Op::Leaf: return "leaf";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Scale: return "scale";
    case Op::Square: return "square";
    case Op::Sqrt: return "sqrt";
    case Op::Relu: return "relu";
    case Op::MatMul: return "matmul";
    case Op::ReduceSum: return "reduce_sum";
    case Op::Gather: return "gather";
    case Op::ScatterAdd: return "scatter_add";
    case Op::SmoothL1: return "smooth_l1";
    case Op::SparseApply: return "sparse_apply";
    case Op::Reshape: return "reshape";
    case Op::RenderDepth: return "render_depth";
  }
  return "?";
}

namespace {

[[noreturn]] void shape_error(Op op, const std::string& detail) {
  throw std::invalid_argument(std::string(op_name(op)) + ": " + detail);
}

void require_same_shape(Op op, const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b))
    shape_error(op, "operand shapes differ: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

}  // namespace

std::shared_ptr<const IndexPlan> IndexPlan::rows(const Shape& in, const std::vector<int64_t>& row_ids) {
  if (in.size() != 2) throw std::invalid_argument("IndexPlan::rows expects a 2D input, got " + shape_str(in));
  auto p = std::make_shared<IndexPlan>();
  p->in_shape = in;
  p->out_shape = {int64_t(row_ids.size()), in[1]};
  p->idx.reserve(row_ids.size() * size_t(in[1]));
  for (int64_t r : row_ids) {
    if (r < 0 || r >= in[0]) throw std::invalid_argument("row index out of range");
    for (int64_t c = 0; c < in[1]; ++c) p->idx.push_back(r * in[1] + c);
  }
  return p;
}

std::shared_ptr<const IndexPlan> IndexPlan::column(const Shape& in, int64_t col) {
  if (in.size() != 2) throw std::invalid_argument("IndexPlan::column expects a 2D input, got " + shape_str(in));
  if (col < 0 || col >= in[1]) throw std::invalid_argument("column index out of range");
  auto p = std::make_shared<IndexPlan>();
  p->in_shape = in;
  p->out_shape = {in[0], 1};
  p->idx.reserve(size_t(in[0]));
  for (int64_t r = 0; r < in[0]; ++r) p->idx.push_back(r * in[1] + col);
  return p;
}

std::shared_ptr<const IndexPlan> IndexPlan::into_column(const Shape& out, int64_t col) {
  if (out.size() != 2) throw std::invalid_argument("IndexPlan::into_column expects a 2D output");
  if (col < 0 || col >= out[1]) throw std::invalid_argument("column index out of range");
  auto p = std::make_shared<IndexPlan>();
  p->in_shape = {out[0], 1};
  p->out_shape = out;
  p->idx.reserve(size_t(out[0]));
  for (int64_t r = 0; r < out[0]; ++r) p->idx.push_back(r * out[1] + col);
  return p;
}

Value Tape::push(Node n) {
  if (!n.out.defined()) throw std::logic_error("node without output tensor");
  nodes_.push_back(std::move(n));
  return Value{int32_t(nodes_.size() - 1)};
}

const Tape::Node& Tape::node(Value v) const {
  if (!v.valid() || size_t(v.id) >= nodes_.size()) throw std::out_of_range("invalid tape value");
  return nodes_[size_t(v.id)];
}

Tensor Tape::val(Value v) const { return node(v).out; }
Op Tape::op_of(Value v) const { return node(v).op; }

const RenderSave* Tape::render_save(Value v) const { return node(v).rsave.get(); }

Value Tape::parameter(Tensor t) {
  Node n;
  n.op = Op::Leaf;
  n.is_param = true;
  n.out = std::move(t);
  Value v = push(std::move(n));
  params_.push_back(v);
  return v;
}

Value Tape::constant(Tensor t) {
  Node n;
  n.op = Op::Leaf;
  n.out = std::move(t);
  return push(std::move(n));
}

// Forward evaluation shared by record-time execution and replay.
Tensor Tape::eval(const Node& n, const Tensor* A, const Tensor* B,
                  std::shared_ptr<const RenderSave>* save_out) {
  const auto& k = kernels::active();
  switch (n.op) {
    case Op::Leaf:
      return n.out;
    case Op::Add: {
      Tensor out(A->shape());
      k.add(A->data(), B->data(), out.mut(), size_t(A->numel()));
      return out;
    }
    case Op::Sub: {
      Tensor out(A->shape());
      k.sub(A->data(), B->data(), out.mut(), size_t(A->numel()));
      return out;
    }
    case Op::Mul: {
      Tensor out(A->shape());
      k.mul(A->data(), B->data(), out.mut(), size_t(A->numel()));
      return out;
    }
    case Op::Scale: {
      Tensor out(A->shape());
      k.scale(A->data(), n.alpha, out.mut(), size_t(A->numel()));
      return out;
    }
    case Op::Square: {
      Tensor out(A->shape());
      k.square(A->data(), out.mut(), size_t(A->numel()));
      return out;
    }
    case Op::Sqrt: {
      Tensor out(A->shape());
      k.vsqrt(A->data(), out.mut(), size_t(A->numel()));
      return out;
    }
    case Op::Relu: {
      Tensor out(A->shape());
      k.relu(A->data(), out.mut(), size_t(A->numel()));
      return out;
    }
    case Op::MatMul: {
      Tensor out({A->shape()[0], B->shape()[1]});
      k.matmul(A->data(), B->data(), out.mut(), size_t(A->shape()[0]), size_t(A->shape()[1]),
               size_t(B->shape()[1]));
      return out;
    }
    case Op::ReduceSum:
      return Tensor::scalar(kernels::reduce_sum(A->data(), size_t(A->numel())));
    case Op::Gather: {
      Tensor out(n.plan->out_shape);
      double* o = out.mut();
      const double* in = A->data();
      for (size_t i = 0; i < n.plan->idx.size(); ++i) o[i] = in[n.plan->idx[i]];
      return out;
    }
    case Op::ScatterAdd: {
      Tensor out(n.plan->out_shape);
      double* o = out.mut();
      const double* in = A->data();
      for (size_t i = 0; i < n.plan->idx.size(); ++i) o[n.plan->idx[i]] += in[i];
      return out;
    }
    case Op::SmoothL1: {
      Tensor out(A->shape());
      k.smooth_l1(A->data(), out.mut(), size_t(A->numel()));
      return out;
    }
    case Op::SparseApply: {
      Tensor out({n.sparse->rows(), A->shape()[1]});
      n.sparse->apply(A->data(), out.mut(), A->shape()[1]);
      return out;
    }
    case Op::Reshape:
      // handled by the callers, which know the target shape
      throw std::logic_error("reshape is not evaluated through eval()");
    case Op::RenderDepth: {
      RenderResult r = ::meshpose::render_depth(*A, *n.rctx);
      if (save_out) *save_out = r.save;
      Tensor out({int64_t(n.rctx->res_h), int64_t(n.rctx->res_w)},
                 std::move(r.map.values));
      return out;
    }
  }
  throw std::logic_error("unhandled op");
}

Value Tape::add(Value a, Value b) {
  require_same_shape(Op::Add, stored(a), stored(b));
  Node n;
  n.op = Op::Add;
  n.a = a.id;
  n.b = b.id;
  n.out = eval(n, &stored(a), &stored(b), nullptr);
  return push(std::move(n));
}

Value Tape::sub(Value a, Value b) {
  require_same_shape(Op::Sub, stored(a), stored(b));
  Node n;
  n.op = Op::Sub;
  n.a = a.id;
  n.b = b.id;
  n.out = eval(n, &stored(a), &stored(b), nullptr);
  return push(std::move(n));
}

Value Tape::mul(Value a, Value b) {
  require_same_shape(Op::Mul, stored(a), stored(b));
  Node n;
  n.op = Op::Mul;
  n.a = a.id;
  n.b = b.id;
  n.out = eval(n, &stored(a), &stored(b), nullptr);
  return push(std::move(n));
}

Value Tape::scale(Value a, double alpha) {
  Node n;
  n.op = Op::Scale;
  n.a = a.id;
  n.alpha = alpha;
  n.out = eval(n, &stored(a), nullptr, nullptr);
  return push(std::move(n));
}

Value Tape::square(Value a) {
  Node n;
  n.op = Op::Square;
  n.a = a.id;
  n.out = eval(n, &stored(a), nullptr, nullptr);
  return push(std::move(n));
}

Value Tape::sqrt(Value a) {
  const Tensor& x = stored(a);
  const double* d = x.data();
  for (int64_t i = 0; i < x.numel(); ++i) {
    if (d[i] < 0.0) shape_error(Op::Sqrt, "negative input at flat index " + std::to_string(i));
  }
  Node n;
  n.op = Op::Sqrt;
  n.a = a.id;
  n.out = eval(n, &x, nullptr, nullptr);
  return push(std::move(n));
}

Value Tape::relu(Value a) {
  Node n;
  n.op = Op::Relu;
  n.a = a.id;
  n.out = eval(n, &stored(a), nullptr, nullptr);
  return push(std::move(n));
}

Value Tape::matmul(Value a, Value b) {
  const Tensor& A = stored(a);
  const Tensor& B = stored(b);
  if (A.shape().size() != 2 || B.shape().size() != 2)
    shape_error(Op::MatMul, "expects 2D operands, got " + shape_str(A.shape()) + " and " + shape_str(B.shape()));
  if (A.shape()[1] != B.shape()[0])
    shape_error(Op::MatMul, "inner dimensions differ: " + shape_str(A.shape()) + " * " + shape_str(B.shape()));
  Node n;
  n.op = Op::MatMul;
  n.a = a.id;
  n.b = b.id;
  n.out = eval(n, &A, &B, nullptr);
  return push(std::move(n));
}

Value Tape::reduce_sum(Value a) {
  Node n;
  n.op = Op::ReduceSum;
  n.a = a.id;
  n.out = eval(n, &stored(a), nullptr, nullptr);
  return push(std::move(n));
}

Value Tape::gather(Value a, IndexPlanPtr plan) {
  const Tensor& A = stored(a);
  if (plan->in_shape != A.shape())
    shape_error(Op::Gather, "plan input shape " + shape_str(plan->in_shape) + " vs operand " + shape_str(A.shape()));
  if (int64_t(plan->idx.size()) != shape_numel(plan->out_shape))
    shape_error(Op::Gather, "plan index count does not match output shape " + shape_str(plan->out_shape));
  for (int64_t i : plan->idx) {
    if (i < 0 || i >= A.numel()) shape_error(Op::Gather, "index out of range");
  }
  Node n;
  n.op = Op::Gather;
  n.a = a.id;
  n.plan = std::move(plan);
  n.out = eval(n, &A, nullptr, nullptr);
  return push(std::move(n));
}

Value Tape::scatter_add(Value a, IndexPlanPtr plan) {
  const Tensor& A = stored(a);
  if (plan->in_shape != A.shape())
    shape_error(Op::ScatterAdd, "plan input shape " + shape_str(plan->in_shape) + " vs operand " + shape_str(A.shape()));
  if (int64_t(plan->idx.size()) != A.numel())
    shape_error(Op::ScatterAdd, "plan index count does not match operand " + shape_str(A.shape()));
  int64_t out_n = shape_numel(plan->out_shape);
  for (int64_t i : plan->idx) {
    if (i < 0 || i >= out_n) shape_error(Op::ScatterAdd, "index out of range");
  }
  Node n;
  n.op = Op::ScatterAdd;
  n.a = a.id;
  n.plan = std::move(plan);
  n.out = eval(n, &A, nullptr, nullptr);
  return push(std::move(n));
}

Value Tape::smooth_l1(Value a) {
  Node n;
  n.op = Op::SmoothL1;
  n.a = a.id;
  n.out = eval(n, &stored(a), nullptr, nullptr);
  return push(std::move(n));
}

Value Tape::sparse_apply(SparsePtr s, Value f) {
  const Tensor& F = stored(f);
  if (F.shape().size() != 2) shape_error(Op::SparseApply, "signal must be 2D, got " + shape_str(F.shape()));
  if (F.shape()[0] != s->cols())
    shape_error(Op::SparseApply, "matrix has " + std::to_string(s->cols()) + " columns but signal is " +
                                     shape_str(F.shape()));
  Node n;
  n.op = Op::SparseApply;
  n.a = f.id;
  n.sparse = std::move(s);
  n.out = eval(n, &F, nullptr, nullptr);
  return push(std::move(n));
}

Value Tape::reshape(Value a, Shape out_shape) {
  const Tensor& A = stored(a);
  if (shape_numel(out_shape) != A.numel())
    shape_error(Op::Reshape, "cannot reshape " + shape_str(A.shape()) + " to " + shape_str(out_shape));
  Node n;
  n.op = Op::Reshape;
  n.a = a.id;
  n.out = Tensor(out_shape, std::vector<double>(A.data(), A.data() + A.numel()));
  return push(std::move(n));
}

Value Tape::render_depth(Value xyz, std::shared_ptr<const RenderContext> ctx) {
  const Tensor& X = stored(xyz);
  if (X.shape().size() != 2 || X.shape()[1] != 3)
    shape_error(Op::RenderDepth, "vertices must be Nx3, got " + shape_str(X.shape()));
  ctx->validate(X.shape()[0]);
  Node n;
  n.op = Op::RenderDepth;
  n.a = xyz.id;
  n.rctx = std::move(ctx);
  std::shared_ptr<const RenderSave> save;
  n.out = eval(n, &X, nullptr, &save);
  n.rsave = std::move(save);
  return push(std::move(n));
}

Value Tape::record(Op op, std::span<const Value> operands) {
  auto unary = [&](Value (Tape::*f)(Value)) {
    if (operands.size() != 1)
      shape_error(op, "expects 1 operand, got " + std::to_string(operands.size()));
    return (this->*f)(operands[0]);
  };
  auto binary = [&](Value (Tape::*f)(Value, Value)) {
    if (operands.size() != 2)
      shape_error(op, "expects 2 operands, got " + std::to_string(operands.size()));
    return (this->*f)(operands[0], operands[1]);
  };
  switch (op) {
    case Op::Add: return binary(&Tape::add);
    case Op::Sub: return binary(&Tape::sub);
    case Op::Mul: return binary(&Tape::mul);
    case Op::Square: return unary(&Tape::square);
    case Op::Sqrt: return unary(&Tape::sqrt);
    case Op::Relu: return unary(&Tape::relu);
    case Op::MatMul: return binary(&Tape::matmul);
    case Op::ReduceSum: return unary(&Tape::reduce_sum);
    case Op::SmoothL1: return unary(&Tape::smooth_l1);
    default:
      throw std::invalid_argument(std::string(op_name(op)) + " requires its dedicated entry point");
  }
}

const Tensor& Gradients::at(Value v) const {
  if (!v.valid() || size_t(v.id) >= adj_.size()) throw std::out_of_range("gradient of invalid value");
  Tensor& t = adj_[size_t(v.id)];
  if (!t.defined()) t = Tensor(shapes_[size_t(v.id)]);
  return t;
}

bool Gradients::nonzero(Value v) const {
  if (!v.valid() || size_t(v.id) >= adj_.size()) return false;
  return adj_[size_t(v.id)].defined();
}

bool Gradients::all_finite() const {
  for (const Tensor& t : adj_) {
    if (t.defined() && !t.all_finite()) return false;
  }
  return true;
}

Gradients Tape::backward(Value output) const {
  const Node& out_node = node(output);
  if (out_node.out.numel() != 1)
    throw std::invalid_argument("backward: output must be scalar-shaped, got " +
                                shape_str(out_node.out.shape()));
  const auto& k = kernels::active();

  Gradients g;
  g.adj_.resize(nodes_.size());
  g.shapes_.reserve(nodes_.size());
  for (const Node& n : nodes_) g.shapes_.push_back(n.out.shape());

  auto adj_of = [&](int32_t id) -> Tensor& {
    Tensor& t = g.adj_[size_t(id)];
    if (!t.defined()) t = Tensor(nodes_[size_t(id)].out.shape());
    return t;
  };

  g.adj_[size_t(output.id)] = Tensor::scalar(1.0);

  for (int32_t i = output.id; i >= 0; --i) {
    const Node& n = nodes_[size_t(i)];
    const Tensor& gi = g.adj_[size_t(i)];
    if (!gi.defined() || n.op == Op::Leaf) continue;
    const size_t cnt = size_t(gi.numel());
    switch (n.op) {
      case Op::Add:
        k.axpy(1.0, gi.data(), adj_of(n.a).mut(), cnt);
        k.axpy(1.0, gi.data(), adj_of(n.b).mut(), cnt);
        break;
      case Op::Sub:
        k.axpy(1.0, gi.data(), adj_of(n.a).mut(), cnt);
        k.axpy(-1.0, gi.data(), adj_of(n.b).mut(), cnt);
        break;
      case Op::Mul:
        k.mul_acc(gi.data(), nodes_[size_t(n.b)].out.data(), adj_of(n.a).mut(), cnt);
        k.mul_acc(gi.data(), nodes_[size_t(n.a)].out.data(), adj_of(n.b).mut(), cnt);
        break;
      case Op::Scale:
        k.axpy(n.alpha, gi.data(), adj_of(n.a).mut(), cnt);
        break;
      case Op::Square:
        k.square_grad(nodes_[size_t(n.a)].out.data(), gi.data(), adj_of(n.a).mut(), cnt);
        break;
      case Op::Sqrt: {
        double* acc = adj_of(n.a).mut();
        const double* y = n.out.data();
        const double* gd = gi.data();
        for (size_t j = 0; j < cnt; ++j) acc[j] += gd[j] * 0.5 / y[j];
        break;
      }
      case Op::Relu:
        k.relu_grad(nodes_[size_t(n.a)].out.data(), gi.data(), adj_of(n.a).mut(), cnt);
        break;
      case Op::MatMul: {
        const Tensor& A = nodes_[size_t(n.a)].out;
        const Tensor& B = nodes_[size_t(n.b)].out;
        const size_t m = size_t(A.shape()[0]), kk = size_t(A.shape()[1]), nn = size_t(B.shape()[1]);
        Tensor da(A.shape());
        k.matmul_nt(gi.data(), B.data(), da.mut(), m, nn, kk);
        k.axpy(1.0, da.data(), adj_of(n.a).mut(), size_t(A.numel()));
        Tensor db(B.shape());
        k.matmul_tn(A.data(), gi.data(), db.mut(), m, kk, nn);
        k.axpy(1.0, db.data(), adj_of(n.b).mut(), size_t(B.numel()));
        break;
      }
      case Op::ReduceSum: {
        double g0 = gi.data()[0];
        Tensor& a = adj_of(n.a);
        double* acc = a.mut();
        for (int64_t j = 0; j < a.numel(); ++j) acc[j] += g0;
        break;
      }
      case Op::Gather: {
        double* acc = adj_of(n.a).mut();
        const double* gd = gi.data();
        for (size_t j = 0; j < n.plan->idx.size(); ++j) acc[n.plan->idx[j]] += gd[j];
        break;
      }
      case Op::ScatterAdd: {
        double* acc = adj_of(n.a).mut();
        const double* gd = gi.data();
        for (size_t j = 0; j < n.plan->idx.size(); ++j) acc[j] += gd[n.plan->idx[j]];
        break;
      }
      case Op::SmoothL1:
        k.smooth_l1_grad(nodes_[size_t(n.a)].out.data(), gi.data(), adj_of(n.a).mut(), cnt);
        break;
      case Op::SparseApply: {
        const Tensor& F = nodes_[size_t(n.a)].out;
        Tensor tmp(F.shape());
        n.sparse->apply_transpose(gi.data(), tmp.mut(), F.shape()[1]);
        k.axpy(1.0, tmp.data(), adj_of(n.a).mut(), size_t(F.numel()));
        break;
      }
      case Op::Reshape:
        k.axpy(1.0, gi.data(), adj_of(n.a).mut(), cnt);
        break;
      case Op::RenderDepth:
        render_depth_backward(nodes_[size_t(n.a)].out, *n.rctx, *n.rsave, gi.data(),
                              adj_of(n.a).mut());
        break;
      case Op::Leaf:
        break;
    }
  }
  return g;
}

std::vector<Tensor> Tape::replay_forward() const {
  std::vector<Tensor> vals;
  vals.reserve(nodes_.size());
  for (const Node& n : nodes_) {
    if (n.op == Op::Leaf) {
      vals.push_back(n.out);
      continue;
    }
    const Tensor* A = n.a >= 0 ? &vals[size_t(n.a)] : nullptr;
    const Tensor* B = n.b >= 0 ? &vals[size_t(n.b)] : nullptr;
    if (n.op == Op::Reshape) {
      vals.push_back(Tensor(n.out.shape(), std::vector<double>(A->data(), A->data() + A->numel())));
    } else {
      vals.push_back(eval(n, A, B, nullptr));
    }
  }
  return vals;
}

}  // namespace meshpose
