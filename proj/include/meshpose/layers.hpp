#pragma once

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "meshpose/coarsening.hpp"
#include "meshpose/tape.hpp"

namespace meshpose {

// Deterministic Glorot-uniform init: entries in +/- sqrt(6/(fan_in+fan_out)),
// drawn from a splitmix64 stream keyed by the master seed and the parameter
// name, so results do not depend on initialization order.
Tensor glorot_uniform(Shape shape, int64_t fan_in, int64_t fan_out, uint64_t master_seed,
                      const std::string& name);

using ParamVisitor = std::function<void(const std::string&, Tensor&)>;

// Places model tensors onto a tape, as trainable parameters or constants
// depending on the phase's selector, and remembers name -> Value so the
// training loop can route gradients back.
class Binder {
 public:
  explicit Binder(Tape& tape, std::function<bool(const std::string&)> trainable = {})
      : tape_(tape), trainable_(std::move(trainable)) {}

  Value bind(const std::string& name, const Tensor& t);

  // route an existing tape value (e.g. a gradcheck parameter) to this name;
  // bind() returns it instead of creating a leaf
  void preset(const std::string& name, Value v) { presets_.push_back({name, v}); }

  struct Binding {
    std::string name;
    Value value;
    bool trainable;
  };
  const std::vector<Binding>& bindings() const { return bindings_; }
  Tape& tape() { return tape_; }

 private:
  Tape& tape_;
  std::function<bool(const std::string&)> trainable_;
  std::vector<Binding> bindings_;
  std::vector<std::pair<std::string, Value>> presets_;
};

// Signal on a hierarchy level; row count includes padding vertices.
struct GraphSignal {
  int level = 0;
  Value features;
};

// K-order Chebyshev filter bank: theta[k] is F_in x F_out.
struct ChebLayer {
  int level = 0;
  int order = 3;
  int64_t in_width = 0, out_width = 0;
  std::vector<Tensor> theta;

  void init(uint64_t seed, const std::string& prefix);
  void visit(const std::string& prefix, const ParamVisitor& fn);
};

// f_out = sum_k T_k(L~) f theta_k with the T_k recurrence applied to signal
// columns; dense T_k matrices are never formed. theta_k must already live on
// the tape.
Value cheb_apply(Tape& t, const SparsePtr& rescaled_laplacian, Value f,
                 const std::vector<Value>& theta);

GraphSignal cheb_conv(Binder& b, const std::string& prefix, const ChebLayer& layer,
                      const GraphSignal& signal, const CoarseningHierarchy& hierarchy);

struct DenseLayer {
  int64_t in_width = 0, out_width = 0;
  bool has_bias = true;
  Tensor w;  // in x out
  Tensor bias;  // 1 x out

  void init(uint64_t seed, const std::string& prefix);
  void visit(const std::string& prefix, const ParamVisitor& fn);
  Value forward(Binder& b, const std::string& prefix, Value x) const;  // x: N x in
};

struct NetConfig {
  int64_t latent_width = 512;
  int64_t fc1_out = 1024;
  int64_t coarse_feat = 64;                         // decoder features at the coarsest level
  std::array<int64_t, 3> dec_hidden = {48, 32, 16};  // conv widths before the 3-wide output
  int cheb_order = 3;
  int64_t joints = 21;
  std::array<int64_t, 2> reg_widths = {8, 8};
  std::array<int64_t, 4> enc_widths = {8, 16, 32, 64};
  int image_size = 256;
  int image_channels = 3;
  int heatmap_size = 64;
};

// Everything the networks need about the fixed mesh: topology, coarsening
// hierarchy with per-level spectral operators, and the level layout used by
// the decoder (two x4 upsampling stages) and the regressor (two poolings).
struct ModelContext {
  std::shared_ptr<const MeshTopology> topology;
  CoarseningHierarchy hierarchy;
  NetConfig cfg;
  int coarse_level = 4;
  int mid_level = 2;

  static ModelContext build(std::shared_ptr<const MeshTopology> topology, NetConfig cfg,
                            int num_levels = 4);

  int64_t real_vertices() const { return topology->vertex_count(); }
  int64_t padded(int level) const { return hierarchy.level(level).padded_count; }

  IndexPlanPtr slice_real_rows;  // padded level-0 Nx3 -> real Nx3
  IndexPlanPtr pad_real_rows;    // real Nx3 -> padded level-0 Nx3 (zeros on fakes)
};

// Fig.-style decoder: two FC layers to a coarse 64-wide signal, then two
// upsample-by-4 stages with two graph convolutions each; output columns are
// (u, v, d) with u,v in normalized image units and d root-relative,
// scale-normalized depth.
struct MeshDecoder {
  DenseLayer fc1, fc2;
  ChebLayer conv_mid_a, conv_mid_b;
  ChebLayer conv_fine_a, conv_fine_b;

  static MeshDecoder make(const ModelContext& ctx);
  void init(uint64_t seed);
  void visit(const ParamVisitor& fn);

  // latent: 1 x latent_width; returns real-vertex UVD (N x 3)
  Value forward(Binder& b, const ModelContext& ctx, Value latent) const;
};

// Strictly linear map from mesh vertices to joints: two linear graph
// convolutions interleaved with average pooling, then one bias-free dense
// layer. No nonlinearity anywhere.
struct PoseRegressor {
  ChebLayer conv1, conv2;
  DenseLayer out;  // no bias

  static PoseRegressor make(const ModelContext& ctx);
  void init(uint64_t seed);
  void visit(const ParamVisitor& fn);

  // vertices: real N x 3 (level 0); returns J x 3
  Value forward(Binder& b, const ModelContext& ctx, Value vertices) const;
};

// Stand-in image backbone: four stride-2 3x3 convolutions, a 1x1 heat-map
// head upsampled to 64x64, and a latent head reading the pooled trunk
// together with the (estimated or substituted) heat-maps.
struct ToyEncoder {
  struct Conv {
    int64_t in_ch = 0, out_ch = 0;
    Tensor w;     // out_ch x (in_ch*9)
    Tensor bias;  // out_ch x 1
  };
  std::array<Conv, 4> convs;
  Conv head;  // 1x1: joints x trunk_width
  DenseLayer latent;

  // index plans cached per configuration
  struct Plans;
  std::shared_ptr<const Plans> plans;

  static ToyEncoder make(const NetConfig& cfg);
  void init(uint64_t seed);
  void visit(const ParamVisitor& fn);

  struct Out {
    Value heatmaps;  // J x 64 x 64
    Value latent;    // 1 x latent_width
  };
  // image: H x W x C tensor; when substitute_heatmaps is set, the latent head
  // reads it instead of the estimated maps (the heat-map output is unchanged)
  Out forward(Binder& b, const NetConfig& cfg, const Tensor& image,
              const Tensor* substitute_heatmaps = nullptr) const;
};

struct Model {
  ToyEncoder encoder;
  MeshDecoder decoder;
  PoseRegressor regressor;

  static Model make(const ModelContext& ctx);
  void init(uint64_t seed);
  void visit(const ParamVisitor& fn);
};

}  // namespace meshpose
