#include "siamtrack/spatial_aware.hpp"

#include "siamtrack/errors.hpp"

namespace siamtrack::spatial {

using net::LayerSpec;
using net::Var;

Tensor AffineParams::as_tensor() const {
  return Tensor({1, 1, 1, 6}, std::vector<double>(theta.begin(), theta.end()));
}

SpatialAwareConfig SpatialAwareConfig::paper() {
  SpatialAwareConfig c;
  c.loc_conv = {LayerSpec::conv("loc1", 3, 2, 64, 1), LayerSpec::conv("loc2", 3, 2, 64, 1),
                LayerSpec::conv("loc3", 3, 2, 64, 1)};
  c.se_reduction = 16;
  return c;
}

SpatialAwareConfig SpatialAwareConfig::desk() {
  SpatialAwareConfig c;
  c.loc_conv = {LayerSpec::conv("loc1", 3, 2, 16, 1), LayerSpec::conv("loc2", 3, 2, 16, 1),
                LayerSpec::conv("loc3", 3, 2, 16, 1)};
  c.se_reduction = 4;
  return c;
}

SpatialAwareParams make_params(const SpatialAwareConfig& cfg, const Shape& input) {
  if (cfg.se_reduction < 1) throw ConfigError("se.reduction: must be >= 1");
  SpatialAwareParams p;
  Shape s{1, input.h, input.w, input.c};
  for (std::size_t i = 0; i < 3; ++i) {
    p.loc_conv[i] = net::make_conv_params("spatial.loc_conv" + std::to_string(i + 1),
                                          cfg.loc_conv[i].kernel, s.c, cfg.loc_conv[i].channels_out);
    s = net::infer_shape(cfg.loc_conv[i], s);
  }
  p.loc_fc = net::make_fc_params("spatial.loc_fc", s.h * s.w * s.c, 6);
  const std::size_t hidden = (input.c + cfg.se_reduction - 1) / cfg.se_reduction;
  p.se_fc1 = net::make_fc_params("spatial.se_fc1", input.c, hidden);
  p.se_fc2 = net::make_fc_params("spatial.se_fc2", hidden, input.c);
  return p;
}

void SpatialAwareParams::initialize(const SpatialAwareConfig& cfg, std::mt19937_64& rng) {
  for (std::size_t i = 0; i < 3; ++i) {
    const Shape& w = loc_conv[i].weight.value.shape();
    net::xavier_improved(loc_conv[i], cfg.loc_conv[i].kernel * cfg.loc_conv[i].kernel * w.w, rng);
  }
  loc_fc.weight.value.fill(0.0);
  const auto id = AffineParams::identity().theta;
  for (std::size_t i = 0; i < 6; ++i) loc_fc.bias.value[i] = id[i];
  net::xavier_improved(se_fc1, se_fc1.weight.value.shape().w, rng);
  net::xavier_improved(se_fc2, se_fc2.weight.value.shape().w, rng);
}

void SpatialAwareParams::append_state(std::vector<net::StateEntry>& out) {
  for (auto& l : loc_conv) net::append_state(l, out);
  net::append_state(loc_fc, out);
  net::append_state(se_fc1, out);
  net::append_state(se_fc2, out);
}

void SpatialAwareParams::append_params(std::vector<net::Param*>& out) {
  for (auto& l : loc_conv) net::append_params(l, out);
  net::append_params(loc_fc, out);
  net::append_params(se_fc1, out);
  net::append_params(se_fc2, out);
}

Var localize(net::Graph& g, Var x, const SpatialAwareConfig& cfg, SpatialAwareParams& p) {
  Var h = x;
  for (std::size_t i = 0; i < 3; ++i) h = net::relu(g, net::conv2d(g, h, p.loc_conv[i], cfg.loc_conv[i]));
  return net::fully_connected(g, h, p.loc_fc);
}

SamplingGrid affine_grid(const AffineParams& theta, std::size_t h, std::size_t w) {
  return net::affine_grid_forward(theta.as_tensor(), h, w);
}

Var spatial_transform(net::Graph& g, Var x, const SpatialAwareConfig& cfg, SpatialAwareParams& p) {
  const Shape s = g.value(x).shape();
  const Var theta = localize(g, x, cfg, p);
  const Var grid = net::affine_grid(g, theta, s.h, s.w);
  return net::bilinear_sample(g, x, grid);
}

Var attention_weights(net::Graph& g, Var v, SpatialAwareParams& p) {
  Var s = net::global_avg_pool(g, v);
  s = net::relu(g, net::fully_connected(g, s, p.se_fc1));
  return net::sigmoid(g, net::fully_connected(g, s, p.se_fc2));
}

Var channel_attention(net::Graph& g, Var v, SpatialAwareParams& p) {
  return net::channel_scale(g, v, attention_weights(g, v, p));
}

Var spatial_aware(net::Graph& g, Var x, const SpatialAwareConfig& cfg, SpatialAwareParams& p) {
  return channel_attention(g, spatial_transform(g, x, cfg, p), p);
}

}  // namespace siamtrack::spatial
