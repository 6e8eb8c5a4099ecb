#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "siamtrack/backbone.hpp"
#include "siamtrack/errors.hpp"
#include "siamtrack/net/grad_check.hpp"
#include "test_util.hpp"

namespace siamtrack::backbone {
namespace {

using net::Graph;
using net::LayerSpec;
using net::Mode;
using net::Param;
using net::Var;
using testing::max_abs_diff;
using testing::random_tensor;

// Shape law written out independently of the library calculator.
std::size_t out_size(std::size_t in, const LayerSpec& l) {
  return (in + 2 * l.padding - l.kernel) / l.stride + 1;
}

BackboneParams initialized(const BackboneConfig& cfg, std::uint64_t seed) {
  BackboneParams p = make_params(cfg);
  std::mt19937_64 rng(seed);
  p.initialize(cfg, rng);
  return p;
}

BackboneConfig tiny() {
  BackboneConfig c;
  c.input_channels = 1;
  c.conv = {LayerSpec::conv("conv1", 3, 1, 3), LayerSpec::conv("conv2", 3, 1, 3),
            LayerSpec::conv("conv3", 3, 1, 2), LayerSpec::conv("conv4", 3, 1, 2),
            LayerSpec::conv("conv5", 3, 1, 2)};
  c.pool = {LayerSpec::maxpool("pool1", 2, 1), LayerSpec::maxpool("pool2", 2, 1)};
  c.align3 = LayerSpec::maxpool("align3", 5, 1);
  c.align4 = LayerSpec::maxpool("align4", 3, 1);
  c.conv6_channels = 2;
  return c;
}

TEST(Backbone, PaperPresetShapeCalculator) {
  const BackboneShapes s = infer_shapes(BackboneConfig::paper(), 471, 471);
  EXPECT_EQ(s.f3, (Shape{1, 53, 53, 384}));
  EXPECT_EQ(s.f4, (Shape{1, 51, 51, 384}));
  EXPECT_EQ(s.f5, (Shape{1, 49, 49, 256}));
  EXPECT_EQ(s.fmap, (Shape{1, 49, 49, 1024}));
  EXPECT_EQ(s.finalmap, (Shape{1, 49, 49, 256}));
}

TEST(Backbone, PaperPresetForwardShapes) {
  const BackboneConfig cfg = BackboneConfig::paper();
  BackboneParams p = initialized(cfg, 1);
  Graph g(false);
  const Var img = g.constant(random_tensor({1, 471, 471, 1}, 2));
  const Hierarchy h = forward_backbone(g, img, cfg, p, Mode::kEval);
  const FusedFeature f = fuse(g, h, cfg, p, Mode::kEval);
  EXPECT_EQ(g.value(h.f3).shape(), (Shape{1, 53, 53, 384}));
  EXPECT_EQ(g.value(h.f4).shape(), (Shape{1, 51, 51, 384}));
  EXPECT_EQ(g.value(h.f5).shape(), (Shape{1, 49, 49, 256}));
  EXPECT_EQ(g.value(f.fmap).shape(), (Shape{1, 49, 49, 1024}));
  EXPECT_EQ(g.value(f.finalmap).shape(), (Shape{1, 49, 49, 256}));
  EXPECT_TRUE(g.value(f.finalmap).all_finite());
}

TEST(Backbone, DeskPresetShapes) {
  const BackboneConfig cfg = BackboneConfig::desk();
  std::size_t n = 159;
  n = out_size(n, cfg.conv[0]);
  n = out_size(n, cfg.pool[0]);
  n = out_size(n, cfg.conv[1]);
  n = out_size(n, cfg.pool[1]);
  const BackboneShapes s = infer_shapes(cfg, 159, 159);
  EXPECT_EQ(s.f3.h, n - 2);
  EXPECT_EQ(s.f4.h, s.f3.h - 2);
  EXPECT_EQ(s.f5.h, s.f4.h - 2);
  EXPECT_EQ(s.f5.h, 28u);
  EXPECT_EQ(s.finalmap, (Shape{1, 28, 28, 32}));
  EXPECT_EQ(infer_shapes(cfg, 63, 63).finalmap, (Shape{1, 4, 4, 32}));
}

TEST(Backbone, TotalStride) {
  EXPECT_EQ(total_stride(BackboneConfig::paper()), 8u);
  EXPECT_EQ(total_stride(BackboneConfig::desk()), 4u);
  EXPECT_EQ(total_stride(tiny()), 1u);
}

TEST(Backbone, ReceptiveOffsetMatchesProbe) {
  // Hand sum of (kernel - 1) / 2 times the jump: 2 + 2 + 4 + 4 + 3 * 4.
  const BackboneConfig cfg = BackboneConfig::desk();
  const double offset = receptive_offset(cfg);
  EXPECT_DOUBLE_EQ(offset, 24.0);
}

TEST(Backbone, TooSmallInputNamesLayer) {
  try {
    infer_shapes(BackboneConfig::paper(), 40, 40);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("conv"), std::string::npos) << e.what();
  }
  const BackboneConfig cfg = BackboneConfig::desk();
  BackboneParams p = initialized(cfg, 1);
  Graph g(false);
  EXPECT_THROW(embed(g, g.constant(Tensor({1, 20, 20, 1})), cfg, p, Mode::kEval), ConfigError);
}

TEST(Backbone, ZeroBranchesGiveBiasBroadcast) {
  const BackboneConfig cfg = tiny();
  BackboneParams p = initialized(cfg, 3);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t c = 0; c < p.fuse_bn[i].bias.value.size(); ++c)
      p.fuse_bn[i].bias.value[c] = 0.1 * static_cast<double>(c + 1 + i);
  }
  for (std::size_t c = 0; c < 2; ++c) p.conv6.bias.value[c] = -0.3 + c;
  Graph g(false);
  Hierarchy h{g.constant(Tensor({1, 9, 9, 2})), g.constant(Tensor({1, 7, 7, 2})),
              g.constant(Tensor({1, 5, 5, 2}))};
  const Tensor out = g.value(fuse(g, h, cfg, p, Mode::kTrain).finalmap);
  ASSERT_EQ(out.shape(), (Shape{1, 5, 5, 2}));
  // BN of a constant map yields beta; conv6 then mixes the betas.
  std::vector<double> beta;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t c = 0; c < 2; ++c) beta.push_back(p.fuse_bn[i].bias.value[c]);
  for (std::size_t o = 0; o < 2; ++o) {
    double expected = p.conv6.bias.value[o];
    for (std::size_t i = 0; i < 6; ++i) expected += beta[i] * p.conv6.weight.value(0, 0, i, o);
    for (std::size_t y = 0; y < 5; ++y)
      for (std::size_t x = 0; x < 5; ++x) EXPECT_NEAR(out(0, y, x, o), expected, 1e-12);
  }
}

TEST(Backbone, EveryBranchReachesFinalmap) {
  const BackboneConfig cfg = tiny();
  BackboneParams p = initialized(cfg, 4);
  const Tensor f3 = random_tensor({1, 9, 9, 2}, 5);
  const Tensor f4 = random_tensor({1, 7, 7, 2}, 6);
  const Tensor f5 = random_tensor({1, 5, 5, 2}, 7);
  auto run = [&](const Tensor& a, const Tensor& b, const Tensor& c) {
    Graph g(false);
    Hierarchy h{g.constant(a), g.constant(b), g.constant(c)};
    return g.value(fuse(g, h, cfg, p, Mode::kEval).finalmap);
  };
  const Tensor base = run(f3, f4, f5);
  for (int branch = 0; branch < 3; ++branch) {
    Tensor a = f3, b = f4, c = f5;
    Tensor& t = branch == 0 ? a : branch == 1 ? b : c;
    const std::size_t centre = t.index(0, t.shape().h / 2, t.shape().w / 2, 0);
    t[centre] += 10.0;
    EXPECT_GT(max_abs_diff(run(a, b, c), base), 1e-6) << "branch " << branch;
  }
}

TEST(Backbone, FusionBranchesAreNormalized) {
  const BackboneConfig cfg = tiny();
  BackboneParams p = initialized(cfg, 8);
  Graph g(false);
  const Var img = g.constant(random_tensor({2, 15, 15, 1}, 9));
  const FusedFeature f = fuse(g, forward_backbone(g, img, cfg, p, Mode::kTrain), cfg, p, Mode::kTrain);
  const Tensor& fm = g.value(f.fmap);
  ASSERT_EQ(fm.shape().c, 6u);
  const double count = static_cast<double>(fm.size() / fm.shape().c);
  for (std::size_t c = 0; c < 6; ++c) {
    double sum = 0.0, sq = 0.0;
    for (std::size_t i = c; i < fm.size(); i += 6) sum += fm[i];
    const double mean = sum / count;
    for (std::size_t i = c; i < fm.size(); i += 6) sq += (fm[i] - mean) * (fm[i] - mean);
    EXPECT_NEAR(mean, 0.0, 1e-10) << "channel " << c;
    // Biased variance of the normalised block is var / (var + eps).
    EXPECT_NEAR(sq / count, 1.0, 1e-3) << "channel " << c;
  }
}

TEST(Backbone, ConcatKeepsBranchOrder) {
  const BackboneConfig cfg = tiny();
  BackboneParams p = initialized(cfg, 10);
  Graph g(false);
  const Tensor f5 = random_tensor({1, 5, 5, 2}, 11);
  Hierarchy h{g.constant(Tensor({1, 9, 9, 2})), g.constant(Tensor({1, 7, 7, 2})), g.constant(f5)};
  const Tensor fm = g.value(fuse(g, h, cfg, p, Mode::kTrain).fmap);
  // The first four channels come from constant branches and are exactly zero.
  for (std::size_t i = 0; i < fm.size(); ++i) {
    if (i % 6 < 4) EXPECT_EQ(fm[i], 0.0);
  }
  double energy = 0.0;
  for (std::size_t i = 4; i < fm.size(); i += 6) energy += fm[i] * fm[i];
  EXPECT_GT(energy, 1.0);
}

TEST(Backbone, CompositeGradient) {
  const BackboneConfig cfg = tiny();
  BackboneParams p = initialized(cfg, 12);
  Param img("img", {2, 17, 17, 1});
  img.value = random_tensor(img.value.shape(), 13);
  // Conv biases feeding batch-norm cancel out and carry no gradient.
  std::vector<Param*> wrt{&img};
  for (std::size_t i = 0; i < 5; ++i) wrt.push_back(&p.conv[i].weight);
  for (auto& b : p.bn) net::append_params(b, wrt);
  for (auto& b : p.fuse_bn) net::append_params(b, wrt);
  net::append_params(p.conv6, wrt);
  // Whole-network perturbations of 1e-3 cross ReLU and pooling kinks, so
  // the end-to-end probe uses a finer step; layers are checked at 1e-3.
  net::GradCheckOptions opts;
  opts.max_entries = 12;
  opts.step = 1e-5;
  const auto report = net::grad_check(
      [&](Graph& g) { return embed(g, g.param(img), cfg, p, Mode::kTrain); }, wrt, opts);
  EXPECT_TRUE(report.passed(1e-4)) << report.worst << " " << report.max_rel_error << " "
                                    << report.worst_analytic << " " << report.worst_numeric;
}

TEST(Backbone, FusionGradient) {
  const BackboneConfig cfg = tiny();
  BackboneParams p = initialized(cfg, 14);
  Param f3("f3", {2, 9, 9, 2}), f4("f4", {2, 7, 7, 2}), f5("f5", {2, 5, 5, 2});
  f3.value = random_tensor(f3.value.shape(), 15);
  f4.value = random_tensor(f4.value.shape(), 16);
  f5.value = random_tensor(f5.value.shape(), 17);
  std::vector<Param*> wrt{&f3, &f4, &f5};
  for (auto& b : p.fuse_bn) net::append_params(b, wrt);
  net::append_params(p.conv6, wrt);
  const auto report = net::grad_check(
      [&](Graph& g) {
        Hierarchy h{g.param(f3), g.param(f4), g.param(f5)};
        return fuse(g, h, cfg, p, Mode::kTrain).finalmap;
      },
      wrt);
  EXPECT_TRUE(report.passed(1e-4)) << report.worst << " " << report.max_rel_error;
}

TEST(Backbone, ForwardMatchesCalculatorOnRandomConfigs) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> k(1, 3), s(1, 2), ch(1, 3), in(24, 40);
  int tested = 0;
  for (int trial = 0; trial < 60; ++trial) {
    BackboneConfig c = tiny();
    c.conv[0] = LayerSpec::conv("conv1", 2 * k(rng) - 1, s(rng), ch(rng));
    c.pool[0] = LayerSpec::maxpool("pool1", k(rng) + 1, s(rng));
    c.conv[1] = LayerSpec::conv("conv2", 2 * k(rng) - 1, 1, ch(rng));
    c.pool[1] = LayerSpec::maxpool("pool2", k(rng) + 1, s(rng));
    for (std::size_t i = 2; i < 5; ++i) c.conv[i] = LayerSpec::conv("conv", 3, 1, ch(rng));
    c.conv6_channels = ch(rng);
    const std::size_t n = in(rng);
    BackboneShapes shapes;
    try {
      shapes = infer_shapes(c, n, n + 1);
    } catch (const ConfigError&) {
      continue;
    }
    BackboneParams p = initialized(c, trial);
    Graph g(false);
    const Hierarchy h = forward_backbone(g, g.constant(random_tensor({1, n, n + 1, 1}, trial)), c, p,
                                         Mode::kTrain);
    const FusedFeature f = fuse(g, h, c, p, Mode::kTrain);
    EXPECT_EQ(g.value(h.f3).shape(), shapes.f3);
    EXPECT_EQ(g.value(h.f5).shape(), shapes.f5);
    EXPECT_EQ(g.value(f.fmap).shape(), shapes.fmap);
    EXPECT_EQ(g.value(f.finalmap).shape(), shapes.finalmap);
    ++tested;
  }
  EXPECT_GT(tested, 20);
}

}  // namespace
}  // namespace siamtrack::backbone
