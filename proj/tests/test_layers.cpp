#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <Eigen/Dense>

#include "doctest.h"
#include "meshpose/gradcheck.hpp"
#include "meshpose/layers.hpp"
#include "test_util.hpp"

using namespace meshpose;
using meshpose::testutil::random_edges;
using meshpose::testutil::random_tensor;

namespace {

Eigen::MatrixXd to_dense(const SparseMatrix& s) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(s.rows(), s.cols());
  for (int64_t r = 0; r < s.rows(); ++r)
    for (int64_t p = s.row_ptr()[size_t(r)]; p < s.row_ptr()[size_t(r) + 1]; ++p)
      m(r, s.col_idx()[size_t(p)]) = s.values()[size_t(p)];
  return m;
}

Eigen::MatrixXd to_eigen(const Tensor& t) {
  Eigen::MatrixXd m(t.shape()[0], t.shape()[1]);
  for (int64_t i = 0; i < t.shape()[0]; ++i)
    for (int64_t j = 0; j < t.shape()[1]; ++j) m(i, j) = t.at({i, j});
  return m;
}

// dense-polynomial oracle: materializes T_k(L~) matrices explicitly
Eigen::MatrixXd dense_cheb_oracle(const Eigen::MatrixXd& lt, const Eigen::MatrixXd& f,
                                  const std::vector<Eigen::MatrixXd>& theta) {
  Eigen::MatrixXd tk_2 = Eigen::MatrixXd::Identity(lt.rows(), lt.cols());
  Eigen::MatrixXd out = tk_2 * f * theta[0];
  if (theta.size() == 1) return out;
  Eigen::MatrixXd tk_1 = lt;
  out += tk_1 * f * theta[1];
  for (size_t k = 2; k < theta.size(); ++k) {
    Eigen::MatrixXd tk = 2.0 * lt * tk_1 - tk_2;
    out += tk * f * theta[k];
    tk_2 = tk_1;
    tk_1 = tk;
  }
  return out;
}

NetConfig tiny_config() {
  NetConfig cfg;
  cfg.latent_width = 6;
  cfg.fc1_out = 5;
  cfg.coarse_feat = 4;
  cfg.dec_hidden = {4, 3, 3};
  cfg.cheb_order = 3;
  cfg.joints = 2;
  cfg.reg_widths = {3, 3};
  cfg.enc_widths = {2, 3, 3, 4};
  cfg.image_size = 32;
  cfg.heatmap_size = 8;
  return cfg;
}

ModelContext tiny_context() {
  auto topo = std::make_shared<MeshTopology>(
      6, std::vector<std::array<int, 3>>{{0, 1, 2}, {1, 2, 3}, {2, 3, 4}, {3, 4, 5}});
  return ModelContext::build(topo, tiny_config());
}

}  // namespace

TEST_CASE("cheb_apply: K=1 identity filter is the identity") {
  Adjacency a = Adjacency::from_edges(4, {{0, 1}, {1, 2}, {2, 3}});
  auto lp = build_laplacian_pair(a);
  Tape t;
  SplitMix64 rng(1);
  Tensor f = random_tensor(rng, {4, 2});
  Value fv = t.constant(f);
  Tensor eye({2, 2}, {1, 0, 0, 1});
  Value out = cheb_apply(t, lp.rescaled, fv, {t.constant(eye)});
  CHECK(meshpose::testutil::bitwise_equal(t.val(out), f));
}

TEST_CASE("cheb_apply: 2-vertex path worked example") {
  // lambda_max = 2 exactly, L~ = [[0,-1],[-1,0]]
  Adjacency a = Adjacency::from_edges(2, {{0, 1}});
  auto l = normalized_laplacian(a);
  auto lt = rescale_laplacian(*l, 2.0);
  Tape t;
  Value f = t.constant(Tensor({2, 1}, {1, 0}));
  Value th = t.constant(Tensor({1, 1}, {1}));
  Value out = cheb_apply(t, lt, f, {th, th});
  CHECK(t.val(out).at({0, 0}) == 1.0);
  CHECK(t.val(out).at({1, 0}) == -1.0);
}

TEST_CASE("cheb_apply matches the dense T_k oracle on 100 random graphs") {
  SplitMix64 rng(61);
  for (int trial = 0; trial < 100; ++trial) {
    int n = 2 + int(rng.below(11));
    Adjacency a = Adjacency::from_edges(n, random_edges(rng, n, 0.4));
    auto lp = build_laplacian_pair(a);
    int K = 1 + int(rng.below(4));
    int fin = 1 + int(rng.below(3));
    int fout = 1 + int(rng.below(3));
    Tensor f = random_tensor(rng, {n, fin});
    std::vector<Tensor> theta;
    std::vector<Eigen::MatrixXd> theta_e;
    for (int k = 0; k < K; ++k) {
      theta.push_back(random_tensor(rng, {fin, fout}));
      theta_e.push_back(to_eigen(theta.back()));
    }
    Tape t;
    std::vector<Value> tv;
    for (auto& th : theta) tv.push_back(t.constant(th));
    Value out = cheb_apply(t, lp.rescaled, t.constant(f), tv);
    Eigen::MatrixXd expect = dense_cheb_oracle(to_dense(*lp.rescaled), to_eigen(f), theta_e);
    double maxdiff = 0;
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = 0; j < fout; ++j)
        maxdiff = std::max(maxdiff, std::fabs(t.val(out).at({i, j}) - expect(i, j)));
    CHECK(maxdiff <= 1e-10);
  }
}

TEST_CASE("cheb_apply is linear in the signal and the filters") {
  SplitMix64 rng(62);
  Adjacency a = Adjacency::from_edges(6, random_edges(rng, 6, 0.5));
  auto lp = build_laplacian_pair(a);
  Tensor f1 = random_tensor(rng, {6, 2});
  Tensor f2 = random_tensor(rng, {6, 2});
  Tensor th0 = random_tensor(rng, {2, 3});
  Tensor th1 = random_tensor(rng, {2, 3});
  double al = 1.3, be = -0.7;

  auto eval = [&](const Tensor& f, const Tensor& t0, const Tensor& t1) {
    Tape t;
    Value out = cheb_apply(t, lp.rescaled, t.constant(f), {t.constant(t0), t.constant(t1)});
    return t.val(out);
  };

  Tensor mix({6, 2});
  for (int64_t i = 0; i < mix.numel(); ++i)
    mix.mut()[i] = al * f1.data()[i] + be * f2.data()[i];
  Tensor lhs = eval(mix, th0, th1);
  Tensor r1 = eval(f1, th0, th1);
  Tensor r2 = eval(f2, th0, th1);
  for (int64_t i = 0; i < lhs.numel(); ++i)
    CHECK(lhs.data()[i] == doctest::Approx(al * r1.data()[i] + be * r2.data()[i]).epsilon(1e-12));

  // linearity in theta_0 with the other filter zeroed (the full map is the
  // sum of the per-k terms, each linear in its own theta_k)
  Tensor zero({2, 3});
  Tensor thmix({2, 3});
  for (int64_t i = 0; i < thmix.numel(); ++i)
    thmix.mut()[i] = al * th0.data()[i] + be * th1.data()[i];
  Tensor l2 = eval(f1, thmix, zero);
  Tensor a2 = eval(f1, th0, zero);
  Tensor b2 = eval(f1, th1, zero);
  for (int64_t i = 0; i < l2.numel(); ++i)
    CHECK(l2.data()[i] == doctest::Approx(al * a2.data()[i] + be * b2.data()[i]).epsilon(1e-12));
  // additivity across filter orders
  Tensor both = eval(f1, th0, th1);
  Tensor only0 = eval(f1, th0, zero);
  Tensor only1 = eval(f1, zero, th1);
  for (int64_t i = 0; i < both.numel(); ++i)
    CHECK(both.data()[i] == doctest::Approx(only0.data()[i] + only1.data()[i]).epsilon(1e-12));
}

TEST_CASE("cheb_apply is permutation equivariant") {
  SplitMix64 rng(63);
  for (int trial = 0; trial < 20; ++trial) {
    int n = 3 + int(rng.below(8));
    auto edges = random_edges(rng, n, 0.5);
    // random permutation
    std::vector<int> perm(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) perm[size_t(i)] = i;
    for (int i = n - 1; i > 0; --i) std::swap(perm[size_t(i)], perm[rng.below(uint64_t(i + 1))]);

    std::vector<std::pair<int, int>> pedges;
    for (auto [i, j] : edges) pedges.push_back({perm[size_t(i)], perm[size_t(j)]});

    // rescale both with the fixed bound 2 so the rescaled operators are exact
    // permutations of each other (the power-iteration estimate is not
    // permutation-covariant at the last ulp)
    auto lt = rescale_laplacian(*normalized_laplacian(Adjacency::from_edges(n, edges)), 2.0);
    auto ltp = rescale_laplacian(*normalized_laplacian(Adjacency::from_edges(n, pedges)), 2.0);

    Tensor f = random_tensor(rng, {n, 2});
    Tensor pf({n, 2});
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < 2; ++c) pf.mut()[perm[size_t(i)] * 2 + c] = f.at({i, c});
    Tensor th0 = random_tensor(rng, {2, 2});
    Tensor th1 = random_tensor(rng, {2, 2});

    Tape t1;
    Value o1 = cheb_apply(t1, lt, t1.constant(f), {t1.constant(th0), t1.constant(th1)});
    Tape t2;
    Value o2 = cheb_apply(t2, ltp, t2.constant(pf), {t2.constant(th0), t2.constant(th1)});
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < 2; ++c)
        CHECK(std::fabs(t2.val(o2).at({perm[size_t(i)], c}) - t1.val(o1).at({i, c})) <= 1e-12);
  }
}

TEST_CASE("cheb_conv validates level and width") {
  ModelContext ctx = tiny_context();
  Model m = Model::make(ctx);
  m.init(7);
  Tape t;
  Binder b(t);
  Value f = t.constant(Tensor({ctx.padded(0), 3}));
  GraphSignal sig{1, f};  // wrong level
  CHECK_THROWS_AS(cheb_conv(b, "reg.conv1", m.regressor.conv1, sig, ctx.hierarchy),
                  std::invalid_argument);
  GraphSignal sig2{0, t.constant(Tensor({ctx.padded(0), 5}))};  // wrong width
  CHECK_THROWS_AS(cheb_conv(b, "reg.conv1", m.regressor.conv1, sig2, ctx.hierarchy),
                  std::invalid_argument);
}

TEST_CASE("decoder: zero parameters give zero UVD; shape is always Nx3") {
  ModelContext ctx = tiny_context();
  MeshDecoder dec = MeshDecoder::make(ctx);
  dec.init(3);
  dec.visit([](const std::string&, Tensor& t) { t = Tensor(t.shape()); });  // zero all
  Tape t;
  Binder b(t);
  SplitMix64 rng(5);
  Value out = dec.forward(b, ctx, t.constant(random_tensor(rng, {1, ctx.cfg.latent_width})));
  CHECK(t.val(out).shape() == Shape{ctx.real_vertices(), 3});
  for (int64_t i = 0; i < t.val(out).numel(); ++i) CHECK(t.val(out).data()[i] == 0.0);
}

TEST_CASE("decoder output depends deterministically on the seed") {
  ModelContext ctx = tiny_context();
  MeshDecoder d1 = MeshDecoder::make(ctx);
  MeshDecoder d2 = MeshDecoder::make(ctx);
  d1.init(42);
  d2.init(42);
  SplitMix64 rng(9);
  Tensor latent = random_tensor(rng, {1, ctx.cfg.latent_width});
  Tape t1, t2;
  Binder b1(t1), b2(t2);
  Value o1 = d1.forward(b1, ctx, t1.constant(latent));
  Value o2 = d2.forward(b2, ctx, t2.constant(latent));
  CHECK(meshpose::testutil::bitwise_equal(t1.val(o1), t2.val(o2)));
}

TEST_CASE("regressor is exactly linear") {
  ModelContext ctx = tiny_context();
  PoseRegressor reg = PoseRegressor::make(ctx);
  reg.init(11);
  SplitMix64 rng(12);
  const int64_t n = ctx.real_vertices();

  auto run = [&](const Tensor& verts) {
    Tape t;
    Binder b(t);
    Value out = reg.forward(b, ctx, t.constant(verts));
    return t.val(out);
  };

  SUBCASE("zero vertices give zero joints") {
    Tensor out = run(Tensor({n, 3}));
    CHECK(out.shape() == Shape{ctx.cfg.joints, 3});
    for (int64_t i = 0; i < out.numel(); ++i) CHECK(out.data()[i] == 0.0);
  }

  SUBCASE("superposition") {
    Tensor x = random_tensor(rng, {n, 3});
    Tensor y = random_tensor(rng, {n, 3});
    double al = 0.8, be = -1.9;
    Tensor mix({n, 3});
    for (int64_t i = 0; i < mix.numel(); ++i)
      mix.mut()[i] = al * x.data()[i] + be * y.data()[i];
    Tensor rmix = run(mix);
    Tensor rx = run(x);
    Tensor ry = run(y);
    for (int64_t i = 0; i < rmix.numel(); ++i)
      CHECK(rmix.data()[i] == doctest::Approx(al * rx.data()[i] + be * ry.data()[i]).epsilon(1e-12));
  }

  SUBCASE("zero Hessian: second differences vanish") {
    Tensor x = random_tensor(rng, {n, 3});
    Tensor d = random_tensor(rng, {n, 3});
    double h = 1e-3;
    Tensor xp({n, 3}), xm({n, 3});
    for (int64_t i = 0; i < x.numel(); ++i) {
      xp.mut()[i] = x.data()[i] + h * d.data()[i];
      xm.mut()[i] = x.data()[i] - h * d.data()[i];
    }
    Tensor fp = run(xp), fm = run(xm), f0 = run(x);
    for (int64_t i = 0; i < f0.numel(); ++i) {
      double second = fp.data()[i] - 2 * f0.data()[i] + fm.data()[i];
      CHECK(std::fabs(second) <= 1e-8);
    }
  }
}

TEST_CASE("encoder: zero image and zero parameters give zero outputs") {
  NetConfig cfg = tiny_config();
  ToyEncoder enc = ToyEncoder::make(cfg);
  enc.init(3);
  enc.visit([](const std::string&, Tensor& t) { t = Tensor(t.shape()); });
  Tape t;
  Binder b(t);
  Tensor img({cfg.image_size, cfg.image_size, cfg.image_channels});
  auto out = enc.forward(b, cfg, img);
  for (int64_t i = 0; i < t.val(out.heatmaps).numel(); ++i) CHECK(t.val(out.heatmaps).data()[i] == 0.0);
  for (int64_t i = 0; i < t.val(out.latent).numel(); ++i) CHECK(t.val(out.latent).data()[i] == 0.0);
}

TEST_CASE("encoder: heat-maps are 64x64 and latent matches width at default config") {
  NetConfig cfg;  // defaults
  ToyEncoder enc = ToyEncoder::make(cfg);
  enc.init(1);
  Tape t;
  Binder b(t);
  SplitMix64 rng(2);
  Tensor img = random_tensor(rng, {256, 256, 3}, 0.0, 1.0);
  auto out = enc.forward(b, cfg, img);
  CHECK(t.val(out.heatmaps).shape() == Shape{21, 64, 64});
  CHECK(t.val(out.latent).shape() == Shape{1, 512});
  CHECK(t.val(out.heatmaps).all_finite());
  CHECK(t.val(out.latent).all_finite());
}

TEST_CASE("encoder rejects a wrong channel count") {
  NetConfig cfg = tiny_config();
  ToyEncoder enc = ToyEncoder::make(cfg);
  enc.init(3);
  Tape t;
  Binder b(t);
  Tensor img({cfg.image_size, cfg.image_size, 4});
  CHECK_THROWS_AS(enc.forward(b, cfg, img), std::invalid_argument);
}

TEST_CASE("encoder: substituting heat-maps changes the latent, not the heat-map output") {
  NetConfig cfg = tiny_config();
  ToyEncoder enc = ToyEncoder::make(cfg);
  enc.init(17);
  SplitMix64 rng(18);
  Tensor img = random_tensor(rng, {cfg.image_size, cfg.image_size, cfg.image_channels}, 0.0, 1.0);
  Tensor subst = random_tensor(rng, {cfg.joints, cfg.heatmap_size, cfg.heatmap_size}, 0.0, 1.0);

  Tape t1;
  Binder b1(t1);
  auto plain = enc.forward(b1, cfg, img);
  Tape t2;
  Binder b2(t2);
  auto subbed = enc.forward(b2, cfg, img, &subst);

  CHECK(meshpose::testutil::bitwise_equal(t1.val(plain.heatmaps), t2.val(subbed.heatmaps)));
  CHECK_FALSE(meshpose::testutil::bitwise_equal(t1.val(plain.latent), t2.val(subbed.latent)));
}

TEST_CASE("gradcheck: cheb_conv, decoder, regressor and encoder at tiny sizes") {
  ModelContext ctx = tiny_context();
  SplitMix64 rng(77);

  SUBCASE("cheb filter parameters") {
    Adjacency a = Adjacency::from_edges(5, random_edges(rng, 5, 0.5));
    auto lp = build_laplacian_pair(a);
    Tensor f = random_tensor(rng, {5, 2});
    auto fn = [&](Tape& t, const std::vector<Value>& vs) {
      Value out = cheb_apply(t, lp.rescaled, t.constant(f), {vs[0], vs[1], vs[2]});
      return t.reduce_sum(t.square(out));
    };
    auto rep = gradcheck(fn,
                         {random_tensor(rng, {2, 2}), random_tensor(rng, {2, 2}),
                          random_tensor(rng, {2, 2})},
                         1e-6, 1e-4);
    CHECK(rep.ok);
  }

  SUBCASE("decoder parameters (squared-output objective)") {
    MeshDecoder dec = MeshDecoder::make(ctx);
    dec.init(5);
    SplitMix64 r2(6);
    Tensor latent = random_tensor(r2, {1, ctx.cfg.latent_width});
    std::vector<std::string> names;
    std::vector<Tensor> point;
    dec.visit([&](const std::string& n, Tensor& t) {
      names.push_back(n);
      point.push_back(t);
    });
    auto fn = [&](Tape& t, const std::vector<Value>& vs) {
      Binder b(t);
      for (size_t i = 0; i < names.size(); ++i) b.preset(names[i], vs[i]);
      Value out = dec.forward(b, ctx, t.constant(latent));
      return t.reduce_sum(t.square(out));
    };
    auto rep = gradcheck(fn, point, 1e-6, 1e-4, names);
    CHECK(rep.ok);
  }

  SUBCASE("regressor parameters") {
    PoseRegressor reg = PoseRegressor::make(ctx);
    reg.init(8);
    SplitMix64 r3(9);
    Tensor verts = random_tensor(r3, {ctx.real_vertices(), 3});
    std::vector<std::string> names;
    std::vector<Tensor> point;
    reg.visit([&](const std::string& n, Tensor& t) {
      names.push_back(n);
      point.push_back(t);
    });
    auto fn = [&](Tape& t, const std::vector<Value>& vs) {
      Binder b(t);
      for (size_t i = 0; i < names.size(); ++i) b.preset(names[i], vs[i]);
      Value out = reg.forward(b, ctx, t.constant(verts));
      return t.reduce_sum(t.square(out));
    };
    auto rep = gradcheck(fn, point, 1e-6, 1e-4, names);
    CHECK(rep.ok);
  }

  SUBCASE("encoder parameters") {
    NetConfig cfg = tiny_config();
    ToyEncoder enc = ToyEncoder::make(cfg);
    enc.init(21);
    SplitMix64 r4(22);
    Tensor img = random_tensor(r4, {cfg.image_size, cfg.image_size, cfg.image_channels}, 0.0, 1.0);
    std::vector<std::string> names;
    std::vector<Tensor> point;
    // randomize every tensor (zero-init biases would pin padding patches
    // exactly on the relu kink, where finite differences are undefined)
    enc.visit([&](const std::string& n, Tensor& t) {
      t = random_tensor(r4, t.shape(), -0.4, 0.4);
      names.push_back(n);
      point.push_back(t);
    });
    auto fn2 = [&](Tape& t, const std::vector<Value>& vs) {
      Binder b(t);
      for (size_t i = 0; i < names.size(); ++i) b.preset(names[i], vs[i]);
      auto out = enc.forward(b, cfg, img);
      Value s1 = t.reduce_sum(t.square(out.heatmaps));
      Value s2 = t.reduce_sum(t.square(out.latent));
      return t.add(s1, s2);
    };
    auto rep = gradcheck(fn2, point, 1e-6, 1e-4, names);
    CHECK(rep.ok);
  }
}
