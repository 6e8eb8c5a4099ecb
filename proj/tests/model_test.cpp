#include <gtest/gtest.h>

#include <set>

#include "siamtrack/errors.hpp"
#include "siamtrack/model.hpp"
#include "siamtrack/net/grad_check.hpp"
#include "test_util.hpp"

namespace siamtrack {
namespace {

using testing::uniform_tensor;

// Independent shape arithmetic: out = floor((in - k) / s) + 1.
std::size_t after(std::size_t in, std::size_t k, std::size_t s) { return (in - k) / s + 1; }

std::size_t paper_f5(std::size_t in) {
  std::size_t x = after(in, 11, 2);
  x = after(x, 3, 2);
  x = after(x, 5, 1);
  x = after(x, 3, 2);
  return x - 6;
}

TEST(ModelGeometry, PaperPreset) {
  const auto geo = geometry(ModelConfig::paper());
  // 135 -> 63 -> 31 -> 27 -> 13 -> 7 through conv5.
  EXPECT_EQ(paper_f5(135), 7u);
  EXPECT_EQ(paper_f5(471), 53u - 4u);
  EXPECT_EQ(geo.exemplar_feature.h, 7u);
  EXPECT_EQ(geo.search_feature.h, 49u);
  EXPECT_EQ(geo.exemplar_feature.c, 256u);
  EXPECT_EQ(geo.stride, 8u);
  // 49 - 7 + 1 = 43 full response; margin floor(7 / 8) = 0.
  EXPECT_EQ(geo.crop_margin, 0u);
  EXPECT_EQ(geo.response_size, 43u);
}

TEST(ModelGeometry, DeskPreset) {
  const auto geo = geometry(ModelConfig::desk());
  EXPECT_EQ(geo.exemplar_feature.h, 4u);
  EXPECT_EQ(geo.exemplar_feature.c, 32u);
  EXPECT_EQ(geo.search_feature.h, 28u);
  EXPECT_EQ(geo.crop_margin, 0u);
  EXPECT_EQ(geo.response_size, 25u);
  EXPECT_EQ(geo.stride, 4u);
  // Centre of an m = 4 exemplar footprint: 24 + 4 * 1.5.
  EXPECT_DOUBLE_EQ(geo.receptive_offset, 30.0);
}

TEST(ModelGeometry, ErrorsNameTheField) {
  ModelConfig c = ModelConfig::desk();
  c.exemplar_size = 20;
  try {
    geometry(c);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("model.exemplar_size"), std::string::npos);
  }

  c = ModelConfig::desk();
  c.search_size = 40;
  try {
    geometry(c);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("model.search_size"), std::string::npos);
  }

  c = ModelConfig::desk();
  c.search_size = 163;  // one more feature cell: even response
  EXPECT_THROW(geometry(c), ConfigError);

  c = ModelConfig::desk();
  c.cf.crop_margin = 20;
  try {
    geometry(c);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("model.cf.crop_margin"), std::string::npos);
  }

  EXPECT_THROW(ModelConfig::from_preset("huge"), ConfigError);
}

TEST(SiameseModel, ForwardShapes) {
  for (const bool spatial : {true, false}) {
    for (const bool cf : {true, false}) {
      ModelConfig c = ModelConfig::desk();
      c.use_spatial = spatial;
      c.use_cf = cf;
      SiameseModel m(c);
      m.initialize(3);
      net::Graph g(false);
      const auto x = g.constant(uniform_tensor({2, 63, 63, 1}, 1, 0.0, 1.0));
      const auto z = g.constant(uniform_tensor({2, 159, 159, 1}, 2, 0.0, 1.0));
      const Tensor& r = g.value(m.forward(g, x, z, net::Mode::kEval));
      EXPECT_EQ(r.shape(), (Shape{2, 25, 25, 1}));
      EXPECT_TRUE(r.all_finite());
    }
  }
}

TEST(SiameseModel, InitializationIsSeeded) {
  SiameseModel a(ModelConfig::desk()), b(ModelConfig::desk()), c(ModelConfig::desk());
  a.initialize(5);
  b.initialize(5);
  c.initialize(6);
  const auto sa = a.state(), sb = b.state(), sc = c.state();
  ASSERT_EQ(sa.size(), sb.size());
  bool any_diff = false;
  for (std::size_t i = 0; i < sa.size(); ++i) {
    EXPECT_EQ(sa[i].name, sb[i].name);
    EXPECT_EQ(testing::max_abs_diff(*sa[i].tensor, *sb[i].tensor), 0.0);
    any_diff = any_diff || testing::max_abs_diff(*sa[i].tensor, *sc[i].tensor) > 0.0;
  }
  EXPECT_TRUE(any_diff);
}

TEST(SiameseModel, StateNamesAreUnique) {
  SiameseModel m(ModelConfig::desk());
  std::set<std::string> names;
  for (const auto& e : m.state()) EXPECT_TRUE(names.insert(e.name).second) << e.name;
  EXPECT_TRUE(names.count("adjust.scale"));
  EXPECT_TRUE(names.count("adjust.bias"));
}

TEST(SiameseModel, AdjustLayerIsAffine) {
  // Scores depend affinely on (scale, bias); check both analytically and by
  // finite differences.
  SiameseModel m(ModelConfig::desk());
  m.initialize(9);
  const Tensor x = uniform_tensor({1, 63, 63, 1}, 4, 0.0, 1.0);
  const Tensor z = uniform_tensor({1, 159, 159, 1}, 5, 0.0, 1.0);
  auto run = [&](net::Graph& g) { return m.forward(g, g.constant(x), g.constant(z), net::Mode::kEval); };

  net::Param* scale = nullptr;
  net::Param* bias = nullptr;
  for (auto* p : m.params()) {
    if (p->name == "adjust.scale") scale = p;
    if (p->name == "adjust.bias") bias = p;
  }
  ASSERT_TRUE(scale && bias);

  net::Graph g0(false);
  const Tensor base = g0.value(run(g0));
  scale->value[0] = 2.0;
  bias->value[0] = 0.5;
  net::Graph g1(false);
  const Tensor moved = g1.value(run(g1));
  for (std::size_t i = 0; i < base.size(); ++i) EXPECT_NEAR(moved[i], 2.0 * base[i] + 0.5, 1e-9);

  net::Param* const wrt[] = {scale, bias};
  const auto report = net::grad_check(run, wrt);
  EXPECT_TRUE(report.passed(1e-4)) << report.max_rel_error;
}

}  // namespace
}  // namespace siamtrack
