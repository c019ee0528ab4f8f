#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "meshpose/sparse.hpp"
#include "meshpose/tensor.hpp"

namespace meshpose {

struct RenderContext;
struct RenderSave;

// Constant index map for gather/scatter_add. For gather, idx has one entry
// per output element and addresses the flattened input; for scatter_add it
// has one entry per input element and addresses the flattened output.
struct IndexPlan {
  Shape in_shape;
  Shape out_shape;
  std::vector<int64_t> idx;

  // gather plan selecting whole rows of a 2D input
  static std::shared_ptr<const IndexPlan> rows(const Shape& in, const std::vector<int64_t>& row_ids);
  // gather plan selecting one column of a 2D input as an Nx1 tensor
  static std::shared_ptr<const IndexPlan> column(const Shape& in, int64_t col);
  // scatter plan writing an Nx1 input into one column of a 2D output
  static std::shared_ptr<const IndexPlan> into_column(const Shape& out, int64_t col);
};

using IndexPlanPtr = std::shared_ptr<const IndexPlan>;

enum class Op : uint8_t {
  Leaf,
  Add,
  Sub,
  Mul,
  Scale,
  Square,
  Sqrt,
  Relu,
  MatMul,
  ReduceSum,
  Gather,
  ScatterAdd,
  SmoothL1,
  SparseApply,
  Reshape,
  RenderDepth,
};

const char* op_name(Op op);

struct Value {
  int32_t id = -1;
  bool valid() const { return id >= 0; }
};

class Tape;

// Result of a backward pass: one adjoint tensor per tape node, materialized
// lazily as zeros for nodes the output does not depend on.
class Gradients {
 public:
  const Tensor& at(Value v) const;
  bool nonzero(Value v) const;
  bool all_finite() const;

 private:
  friend class Tape;
  mutable std::vector<Tensor> adj_;
  std::vector<Shape> shapes_;
};

// Reverse-mode tape over dense tensors. Nodes are recorded in topological
// order (operands always precede consumers) and forward values are computed
// eagerly; replay_forward() recomputes them from the leaves for the
// bit-exact replay check. A tape is single-writer; recorded tensors are
// immutable and may be read from any thread.
class Tape {
 public:
  Value parameter(Tensor t);
  Value constant(Tensor t);

  Value add(Value a, Value b);
  Value sub(Value a, Value b);
  Value mul(Value a, Value b);
  Value scale(Value a, double alpha);
  Value square(Value a);
  Value sqrt(Value a);
  Value relu(Value a);
  Value matmul(Value a, Value b);
  Value reduce_sum(Value a);
  Value gather(Value a, IndexPlanPtr plan);
  Value scatter_add(Value a, IndexPlanPtr plan);
  Value smooth_l1(Value a);
  Value sparse_apply(SparsePtr s, Value f);
  Value reshape(Value a, Shape out_shape);
  Value render_depth(Value xyz, std::shared_ptr<const RenderContext> ctx);

  // generic entry point for the attribute-free primitives
  Value record(Op op, std::span<const Value> operands);

  // by value: the buffer is shared, and the returned handle stays valid even
  // when later recordings reallocate the node storage
  Tensor val(Value v) const;
  Op op_of(Value v) const;
  size_t size() const { return nodes_.size(); }
  const std::vector<Value>& params() const { return params_; }

  // per-node render bookkeeping (culled-face tallies, winner map)
  const RenderSave* render_save(Value v) const;

  Gradients backward(Value output) const;

  // recompute every node's forward value from the stored leaves
  std::vector<Tensor> replay_forward() const;

 private:
  struct Node {
    Op op;
    int32_t a = -1, b = -1;
    double alpha = 0.0;
    bool is_param = false;
    Tensor out;
    IndexPlanPtr plan;
    SparsePtr sparse;
    std::shared_ptr<const RenderContext> rctx;
    std::shared_ptr<const RenderSave> rsave;
  };

  Value push(Node n);
  const Node& node(Value v) const;
  const Tensor& stored(Value v) const { return node(v).out; }
  static Tensor eval(const Node& n, const Tensor* A, const Tensor* B,
                     std::shared_ptr<const RenderSave>* save_out);

  std::vector<Node> nodes_;
  std::vector<Value> params_;
};

}  // namespace meshpose
