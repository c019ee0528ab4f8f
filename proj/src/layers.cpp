#include "meshpose/layers.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "meshpose/rng.hpp"

namespace meshpose {

Tensor glorot_uniform(Shape shape, int64_t fan_in, int64_t fan_out, uint64_t master_seed,
                      const std::string& name) {
  SplitMix64 rng(master_seed ^ fnv1a(name.c_str()));
  double bound = std::sqrt(6.0 / double(fan_in + fan_out));
  Tensor t(std::move(shape));
  double* d = t.mut();
  for (int64_t i = 0; i < t.numel(); ++i) d[i] = (2.0 * rng.uniform() - 1.0) * bound;
  return t;
}

Value Binder::bind(const std::string& name, const Tensor& t) {
  for (const auto& [pname, pv] : presets_) {
    if (pname == name) return pv;
  }
  for (const auto& b : bindings_) {
    if (b.name == name) return b.value;
  }
  bool trainable = trainable_ ? trainable_(name) : true;
  Value v = trainable ? tape_.parameter(t) : tape_.constant(t);
  bindings_.push_back({name, v, trainable});
  return v;
}

void ChebLayer::init(uint64_t seed, const std::string& prefix) {
  theta.clear();
  for (int k = 0; k < order; ++k) {
    theta.push_back(glorot_uniform({in_width, out_width}, in_width, out_width, seed,
                                   prefix + ".t" + std::to_string(k)));
  }
}

void ChebLayer::visit(const std::string& prefix, const ParamVisitor& fn) {
  for (int k = 0; k < order; ++k) fn(prefix + ".t" + std::to_string(k), theta[size_t(k)]);
}

Value cheb_apply(Tape& t, const SparsePtr& rescaled_laplacian, Value f,
                 const std::vector<Value>& theta) {
  if (theta.empty()) throw std::invalid_argument("cheb_apply: need K >= 1 filter matrices");
  Value acc = t.matmul(f, theta[0]);
  if (theta.size() == 1) return acc;

  Value t_prev2 = f;                                   // T_0 f
  Value t_prev = t.sparse_apply(rescaled_laplacian, f);  // T_1 f
  acc = t.add(acc, t.matmul(t_prev, theta[1]));
  for (size_t k = 2; k < theta.size(); ++k) {
    Value t_cur = t.sub(t.scale(t.sparse_apply(rescaled_laplacian, t_prev), 2.0), t_prev2);
    acc = t.add(acc, t.matmul(t_cur, theta[k]));
    t_prev2 = t_prev;
    t_prev = t_cur;
  }
  return acc;
}

GraphSignal cheb_conv(Binder& b, const std::string& prefix, const ChebLayer& layer,
                      const GraphSignal& signal, const CoarseningHierarchy& hierarchy) {
  Tape& t = b.tape();
  if (signal.level != layer.level)
    throw std::invalid_argument("cheb_conv: signal at level " + std::to_string(signal.level) +
                                " but layer expects level " + std::to_string(layer.level));
  const auto& lv = hierarchy.level(layer.level);
  const Tensor& f = t.val(signal.features);
  if (f.shape().size() != 2 || f.shape()[0] != lv.padded_count)
    throw std::invalid_argument("cheb_conv: signal shape " + shape_str(f.shape()) + " does not match " +
                                std::to_string(lv.padded_count) + " vertices at level " +
                                std::to_string(layer.level));
  if (f.shape()[1] != layer.in_width)
    throw std::invalid_argument("cheb_conv: signal width " + std::to_string(f.shape()[1]) +
                                " but layer takes " + std::to_string(layer.in_width));
  if (layer.order < 1 || int(layer.theta.size()) != layer.order)
    throw std::invalid_argument("cheb_conv: layer must hold K >= 1 filter matrices");

  std::vector<Value> theta;
  theta.reserve(layer.theta.size());
  for (size_t k = 0; k < layer.theta.size(); ++k)
    theta.push_back(b.bind(prefix + ".t" + std::to_string(k), layer.theta[k]));
  return {layer.level, cheb_apply(t, lv.laplacian.rescaled, signal.features, theta)};
}

void DenseLayer::init(uint64_t seed, const std::string& prefix) {
  w = glorot_uniform({in_width, out_width}, in_width, out_width, seed, prefix + ".w");
  if (has_bias) bias = Tensor({1, out_width});
}

void DenseLayer::visit(const std::string& prefix, const ParamVisitor& fn) {
  fn(prefix + ".w", w);
  if (has_bias) fn(prefix + ".b", bias);
}

namespace {

// broadcast a 1 x F row to N x F
Value bcast_row(Tape& t, Value row, int64_t n) {
  const Tensor& r = t.val(row);
  auto plan = IndexPlan::rows(r.shape(), std::vector<int64_t>(size_t(n), 0));
  return t.gather(row, plan);
}

// broadcast a C x 1 column to C x M
Value bcast_col(Tape& t, Value col, int64_t m) {
  const Tensor& c = t.val(col);
  auto plan = std::make_shared<IndexPlan>();
  plan->in_shape = c.shape();
  plan->out_shape = {c.shape()[0], m};
  plan->idx.reserve(size_t(c.shape()[0] * m));
  for (int64_t i = 0; i < c.shape()[0]; ++i)
    for (int64_t j = 0; j < m; ++j) plan->idx.push_back(i);
  return t.gather(col, plan);
}

}  // namespace

Value DenseLayer::forward(Binder& b, const std::string& prefix, Value x) const {
  Tape& t = b.tape();
  Value y = t.matmul(x, b.bind(prefix + ".w", w));
  if (has_bias) {
    Value bv = b.bind(prefix + ".b", bias);
    y = t.add(y, bcast_row(t, bv, t.val(x).shape()[0]));
  }
  return y;
}

ModelContext ModelContext::build(std::shared_ptr<const MeshTopology> topology, NetConfig cfg,
                                 int num_levels) {
  if (num_levels != 4)
    throw std::invalid_argument("ModelContext: the decoder's two x4 upsampling stages need exactly 4 levels");
  ModelContext ctx;
  ctx.topology = std::move(topology);
  ctx.cfg = cfg;
  ctx.hierarchy = CoarseningHierarchy::build(build_adjacency(*ctx.topology), num_levels);
  ctx.coarse_level = num_levels;
  ctx.mid_level = num_levels - 2;

  const int64_t n = ctx.topology->vertex_count();
  const int64_t p0 = ctx.hierarchy.level(0).padded_count;
  std::vector<int64_t> real_rows(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) real_rows[size_t(i)] = i;
  ctx.slice_real_rows = IndexPlan::rows({p0, 3}, real_rows);

  auto pad = std::make_shared<IndexPlan>();
  pad->in_shape = {n, 3};
  pad->out_shape = {p0, 3};
  pad->idx.reserve(size_t(n * 3));
  for (int64_t i = 0; i < n * 3; ++i) pad->idx.push_back(i);
  ctx.pad_real_rows = pad;
  return ctx;
}

MeshDecoder MeshDecoder::make(const ModelContext& ctx) {
  const auto& cfg = ctx.cfg;
  MeshDecoder d;
  d.fc1 = {cfg.latent_width, cfg.fc1_out, true, {}, {}};
  d.fc2 = {cfg.fc1_out, ctx.padded(ctx.coarse_level) * cfg.coarse_feat, true, {}, {}};
  d.conv_mid_a = {ctx.mid_level, cfg.cheb_order, cfg.coarse_feat, cfg.dec_hidden[0], {}};
  d.conv_mid_b = {ctx.mid_level, cfg.cheb_order, cfg.dec_hidden[0], cfg.dec_hidden[1], {}};
  d.conv_fine_a = {0, cfg.cheb_order, cfg.dec_hidden[1], cfg.dec_hidden[2], {}};
  d.conv_fine_b = {0, cfg.cheb_order, cfg.dec_hidden[2], 3, {}};
  return d;
}

void MeshDecoder::init(uint64_t seed) {
  fc1.init(seed, "dec.fc1");
  fc2.init(seed, "dec.fc2");
  conv_mid_a.init(seed, "dec.mid_a");
  conv_mid_b.init(seed, "dec.mid_b");
  conv_fine_a.init(seed, "dec.fine_a");
  conv_fine_b.init(seed, "dec.fine_b");
}

void MeshDecoder::visit(const ParamVisitor& fn) {
  fc1.visit("dec.fc1", fn);
  fc2.visit("dec.fc2", fn);
  conv_mid_a.visit("dec.mid_a", fn);
  conv_mid_b.visit("dec.mid_b", fn);
  conv_fine_a.visit("dec.fine_a", fn);
  conv_fine_b.visit("dec.fine_b", fn);
}

Value MeshDecoder::forward(Binder& b, const ModelContext& ctx, Value latent) const {
  Tape& t = b.tape();
  const Tensor& l = t.val(latent);
  if (l.shape().size() != 2 || l.shape()[0] != 1 || l.shape()[1] != ctx.cfg.latent_width)
    throw std::invalid_argument("decoder: latent must be 1x" + std::to_string(ctx.cfg.latent_width) +
                                ", got " + shape_str(l.shape()));

  Value h = t.relu(fc1.forward(b, "dec.fc1", latent));
  Value h2 = fc2.forward(b, "dec.fc2", h);
  Value coarse = t.reshape(h2, {ctx.padded(ctx.coarse_level), ctx.cfg.coarse_feat});

  // x4: two single-level upsamples
  Value s = t.sparse_apply(ctx.hierarchy.upsample_matrix(ctx.coarse_level - 1), coarse);
  s = t.sparse_apply(ctx.hierarchy.upsample_matrix(ctx.coarse_level - 2), s);

  GraphSignal g{ctx.mid_level, s};
  g = cheb_conv(b, "dec.mid_a", conv_mid_a, g, ctx.hierarchy);
  g.features = t.relu(g.features);
  g = cheb_conv(b, "dec.mid_b", conv_mid_b, g, ctx.hierarchy);
  g.features = t.relu(g.features);

  Value s2 = t.sparse_apply(ctx.hierarchy.upsample_matrix(1), g.features);
  s2 = t.sparse_apply(ctx.hierarchy.upsample_matrix(0), s2);

  GraphSignal g2{0, s2};
  g2 = cheb_conv(b, "dec.fine_a", conv_fine_a, g2, ctx.hierarchy);
  g2.features = t.relu(g2.features);
  g2 = cheb_conv(b, "dec.fine_b", conv_fine_b, g2, ctx.hierarchy);
  // no activation on the UVD output

  return t.gather(g2.features, ctx.slice_real_rows);
}

PoseRegressor PoseRegressor::make(const ModelContext& ctx) {
  const auto& cfg = ctx.cfg;
  PoseRegressor r;
  r.conv1 = {0, cfg.cheb_order, 3, cfg.reg_widths[0], {}};
  r.conv2 = {1, cfg.cheb_order, cfg.reg_widths[0], cfg.reg_widths[1], {}};
  r.out = {ctx.padded(2) * cfg.reg_widths[1], cfg.joints * 3, false, {}, {}};
  return r;
}

void PoseRegressor::init(uint64_t seed) {
  conv1.init(seed, "reg.conv1");
  conv2.init(seed, "reg.conv2");
  out.init(seed, "reg.out");
}

void PoseRegressor::visit(const ParamVisitor& fn) {
  conv1.visit("reg.conv1", fn);
  conv2.visit("reg.conv2", fn);
  out.visit("reg.out", fn);
}

Value PoseRegressor::forward(Binder& b, const ModelContext& ctx, Value vertices) const {
  Tape& t = b.tape();
  const Tensor& v = t.val(vertices);
  if (v.shape().size() != 2 || v.shape()[0] != ctx.real_vertices() || v.shape()[1] != 3)
    throw std::invalid_argument("regressor: vertices must be " + std::to_string(ctx.real_vertices()) +
                                "x3, got " + shape_str(v.shape()));

  Value padded = t.scatter_add(vertices, ctx.pad_real_rows);
  GraphSignal g{0, padded};
  g = cheb_conv(b, "reg.conv1", conv1, g, ctx.hierarchy);
  Value pooled = t.sparse_apply(ctx.hierarchy.pool_matrix(0), g.features);
  GraphSignal g1{1, pooled};
  g1 = cheb_conv(b, "reg.conv2", conv2, g1, ctx.hierarchy);
  Value pooled2 = t.sparse_apply(ctx.hierarchy.pool_matrix(1), g1.features);
  Value flat = t.reshape(pooled2, {1, ctx.padded(2) * ctx.cfg.reg_widths[1]});
  Value joints = out.forward(b, "reg.out", flat);
  return t.reshape(joints, {ctx.cfg.joints, 3});
}

// ---- ToyEncoder ----

struct ToyEncoder::Plans {
  struct ConvPlan {
    IndexPlanPtr pad;     // scatter: input -> zero-padded (C, H+2, W+2)
    IndexPlanPtr im2col;  // gather: padded -> (C*9, Ho*Wo)
    int64_t ho = 0, wo = 0;
  };
  std::array<ConvPlan, 4> conv;
  IndexPlanPtr hm_upsample;  // (J, S*S) -> (J, hm, hm) nearest
  IndexPlanPtr trunk_gap;    // scatter (Ct, S*S) -> (Ct, 1)
  IndexPlanPtr hm_pool;      // scatter (J, hm, hm) -> (1, J*64) 8x8 block sums
  IndexPlanPtr cat_trunk;    // scatter (1, Ct) -> (1, Ct + J*64)
  IndexPlanPtr cat_hm;       // scatter (1, J*64) -> (1, Ct + J*64)
  int64_t trunk_spatial = 0;
  int64_t latent_in = 0;
};

namespace {

IndexPlanPtr make_pad_plan(Shape in_shape, int64_t c, int64_t h, int64_t w, bool hwc) {
  auto p = std::make_shared<IndexPlan>();
  p->in_shape = std::move(in_shape);
  p->out_shape = {c, h + 2, w + 2};
  p->idx.assign(size_t(c * h * w), 0);
  for (int64_t ci = 0; ci < c; ++ci)
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x = 0; x < w; ++x) {
        int64_t src = hwc ? (y * w + x) * c + ci : ci * h * w + y * w + x;
        p->idx[size_t(src)] = ci * (h + 2) * (w + 2) + (y + 1) * (w + 2) + (x + 1);
      }
  return p;
}

IndexPlanPtr make_im2col_plan(int64_t c, int64_t h, int64_t w) {
  const int64_t ho = h / 2, wo = w / 2;
  auto p = std::make_shared<IndexPlan>();
  p->in_shape = {c, h + 2, w + 2};
  p->out_shape = {c * 9, ho * wo};
  p->idx.reserve(size_t(c * 9 * ho * wo));
  for (int64_t ci = 0; ci < c; ++ci)
    for (int64_t ky = 0; ky < 3; ++ky)
      for (int64_t kx = 0; kx < 3; ++kx)
        for (int64_t oy = 0; oy < ho; ++oy)
          for (int64_t ox = 0; ox < wo; ++ox)
            p->idx.push_back(ci * (h + 2) * (w + 2) + (oy * 2 + ky) * (w + 2) + (ox * 2 + kx));
  return p;
}

}  // namespace

ToyEncoder ToyEncoder::make(const NetConfig& cfg) {
  if (cfg.image_size % 16 != 0)
    throw std::invalid_argument("encoder: image size must be divisible by 16");
  ToyEncoder e;
  int64_t ch = cfg.image_channels;
  int64_t h = cfg.image_size;
  auto plans = std::make_shared<Plans>();
  for (int i = 0; i < 4; ++i) {
    int64_t out_ch = cfg.enc_widths[size_t(i)];
    e.convs[size_t(i)] = {ch, out_ch, {}, {}};
    Shape in_shape = i == 0 ? Shape{h, h, ch} : Shape{ch, h, h};
    plans->conv[size_t(i)].pad = make_pad_plan(in_shape, ch, h, h, i == 0);
    plans->conv[size_t(i)].im2col = make_im2col_plan(ch, h, h);
    plans->conv[size_t(i)].ho = plans->conv[size_t(i)].wo = h / 2;
    ch = out_ch;
    h /= 2;
  }
  const int64_t s = h;  // trunk spatial side (image_size/16)
  const int64_t j = cfg.joints;
  const int64_t hm = cfg.heatmap_size;
  if (hm % s != 0) throw std::invalid_argument("encoder: heat-map size must be a multiple of trunk size");
  const int64_t up = hm / s;
  e.head = {ch, j, {}, {}};

  plans->trunk_spatial = s * s;
  auto& pl = *plans;

  auto upplan = std::make_shared<IndexPlan>();
  upplan->in_shape = {j, s * s};
  upplan->out_shape = {j, hm, hm};
  upplan->idx.reserve(size_t(j * hm * hm));
  for (int64_t ji = 0; ji < j; ++ji)
    for (int64_t y = 0; y < hm; ++y)
      for (int64_t x = 0; x < hm; ++x) upplan->idx.push_back(ji * s * s + (y / up) * s + (x / up));
  pl.hm_upsample = upplan;

  auto gap = std::make_shared<IndexPlan>();
  gap->in_shape = {ch, s * s};
  gap->out_shape = {ch, 1};
  gap->idx.reserve(size_t(ch * s * s));
  for (int64_t ci = 0; ci < ch; ++ci)
    for (int64_t q = 0; q < s * s; ++q) gap->idx.push_back(ci);
  pl.trunk_gap = gap;

  // 8x8 block pooling of the heat-maps for the latent head
  const int64_t blocks = hm / 8;
  auto hmpool = std::make_shared<IndexPlan>();
  hmpool->in_shape = {j, hm, hm};
  hmpool->out_shape = {1, j * blocks * blocks};
  hmpool->idx.reserve(size_t(j * hm * hm));
  for (int64_t ji = 0; ji < j; ++ji)
    for (int64_t y = 0; y < hm; ++y)
      for (int64_t x = 0; x < hm; ++x)
        hmpool->idx.push_back(ji * blocks * blocks + (y / 8) * blocks + (x / 8));
  pl.hm_pool = hmpool;

  pl.latent_in = ch + j * blocks * blocks;
  auto cat_a = std::make_shared<IndexPlan>();
  cat_a->in_shape = {1, ch};
  cat_a->out_shape = {1, pl.latent_in};
  for (int64_t i = 0; i < ch; ++i) cat_a->idx.push_back(i);
  pl.cat_trunk = cat_a;
  auto cat_b = std::make_shared<IndexPlan>();
  cat_b->in_shape = {1, j * blocks * blocks};
  cat_b->out_shape = {1, pl.latent_in};
  for (int64_t i = 0; i < j * blocks * blocks; ++i) cat_b->idx.push_back(ch + i);
  pl.cat_hm = cat_b;

  e.latent = {pl.latent_in, cfg.latent_width, true, {}, {}};
  e.plans = std::move(plans);
  return e;
}

void ToyEncoder::init(uint64_t seed) {
  for (size_t i = 0; i < convs.size(); ++i) {
    auto& c = convs[i];
    std::string name = "enc.conv" + std::to_string(i + 1);
    c.w = glorot_uniform({c.out_ch, c.in_ch * 9}, c.in_ch * 9, c.out_ch, seed, name + ".w");
    c.bias = Tensor({c.out_ch, 1});
  }
  head.w = glorot_uniform({head.out_ch, head.in_ch}, head.in_ch, head.out_ch, seed, "enc.head.w");
  head.bias = Tensor({head.out_ch, 1});
  latent.init(seed, "enc.latent");
}

void ToyEncoder::visit(const ParamVisitor& fn) {
  for (size_t i = 0; i < convs.size(); ++i) {
    std::string name = "enc.conv" + std::to_string(i + 1);
    fn(name + ".w", convs[i].w);
    fn(name + ".b", convs[i].bias);
  }
  fn("enc.head.w", head.w);
  fn("enc.head.b", head.bias);
  latent.visit("enc.latent", fn);
}

ToyEncoder::Out ToyEncoder::forward(Binder& b, const NetConfig& cfg, const Tensor& image,
                                    const Tensor* substitute_heatmaps) const {
  Tape& t = b.tape();
  Shape expect{cfg.image_size, cfg.image_size, cfg.image_channels};
  if (image.shape() != expect)
    throw std::invalid_argument("encoder: image must be " + shape_str(expect) + ", got " +
                                shape_str(image.shape()));

  Value x = t.constant(image);
  for (size_t i = 0; i < convs.size(); ++i) {
    const auto& cp = plans->conv[i];
    const auto& c = convs[i];
    std::string name = "enc.conv" + std::to_string(i + 1);
    Value padded = t.scatter_add(x, cp.pad);
    Value patches = t.gather(padded, cp.im2col);
    Value y = t.matmul(b.bind(name + ".w", c.w), patches);
    y = t.add(y, bcast_col(t, b.bind(name + ".b", c.bias), cp.ho * cp.wo));
    x = t.relu(y);  // (out_ch, ho*wo)
    if (i + 1 < convs.size()) x = t.reshape(x, {c.out_ch, cp.ho, cp.wo});
  }

  // heat-map head: 1x1 conv then nearest upsample
  Value hm_small = t.matmul(b.bind("enc.head.w", head.w), x);
  hm_small = t.add(hm_small, bcast_col(t, b.bind("enc.head.b", head.bias), plans->trunk_spatial));
  Value heatmaps = t.gather(hm_small, plans->hm_upsample);

  // latent head: pooled trunk + pooled heat-maps -> dense
  Value gap = t.scale(t.scatter_add(x, plans->trunk_gap), 1.0 / double(plans->trunk_spatial));
  Value gap_row = t.reshape(gap, {1, convs.back().out_ch});

  Value hm_for_latent = heatmaps;
  if (substitute_heatmaps) {
    if (substitute_heatmaps->shape() != t.val(heatmaps).shape())
      throw std::invalid_argument("encoder: substituted heat-maps must be " +
                                  shape_str(t.val(heatmaps).shape()));
    hm_for_latent = t.constant(*substitute_heatmaps);
  }
  Value hm_pooled = t.scale(t.scatter_add(hm_for_latent, plans->hm_pool), 1.0 / 64.0);

  Value cat = t.add(t.scatter_add(gap_row, plans->cat_trunk), t.scatter_add(hm_pooled, plans->cat_hm));
  Value lat = latent.forward(b, "enc.latent", cat);
  return {heatmaps, lat};
}

Model Model::make(const ModelContext& ctx) {
  Model m;
  m.encoder = ToyEncoder::make(ctx.cfg);
  m.decoder = MeshDecoder::make(ctx);
  m.regressor = PoseRegressor::make(ctx);
  return m;
}

void Model::init(uint64_t seed) {
  encoder.init(seed);
  decoder.init(seed);
  regressor.init(seed);
}

void Model::visit(const ParamVisitor& fn) {
  encoder.visit(fn);
  decoder.visit(fn);
  regressor.visit(fn);
}

}  // namespace meshpose
