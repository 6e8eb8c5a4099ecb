#include "siamtrack/backbone.hpp"

#include "siamtrack/errors.hpp"

namespace siamtrack::backbone {

using net::LayerSpec;
using net::Mode;
using net::Var;

BackboneConfig BackboneConfig::paper() {
  BackboneConfig c;
  c.input_channels = 1;
  c.conv = {LayerSpec::conv("conv1", 11, 2, 96), LayerSpec::conv("conv2", 5, 1, 256),
            LayerSpec::conv("conv3", 3, 1, 384), LayerSpec::conv("conv4", 3, 1, 384),
            LayerSpec::conv("conv5", 3, 1, 256)};
  c.pool = {LayerSpec::maxpool("pool1", 3, 2), LayerSpec::maxpool("pool2", 3, 2)};
  c.align3 = LayerSpec::maxpool("align3", 5, 1);
  c.align4 = LayerSpec::maxpool("align4", 3, 1);
  c.conv6_channels = 256;
  return c;
}

BackboneConfig BackboneConfig::desk() {
  BackboneConfig c;
  c.input_channels = 1;
  c.conv = {LayerSpec::conv("conv1", 5, 2, 16), LayerSpec::conv("conv2", 3, 1, 32),
            LayerSpec::conv("conv3", 3, 1, 48), LayerSpec::conv("conv4", 3, 1, 48),
            LayerSpec::conv("conv5", 3, 1, 32)};
  c.pool = {LayerSpec::maxpool("pool1", 3, 2), LayerSpec::maxpool("pool2", 3, 1)};
  c.align3 = LayerSpec::maxpool("align3", 5, 1);
  c.align4 = LayerSpec::maxpool("align4", 3, 1);
  c.conv6_channels = 32;
  return c;
}

BackboneShapes infer_shapes(const BackboneConfig& cfg, std::size_t height, std::size_t width) {
  using net::infer_shape;
  BackboneShapes s;
  Shape x{1, height, width, cfg.input_channels};
  x = infer_shape(cfg.conv[0], x);
  x = infer_shape(cfg.pool[0], x);
  x = infer_shape(cfg.conv[1], x);
  x = infer_shape(cfg.pool[1], x);
  s.f3 = infer_shape(cfg.conv[2], x);
  s.f4 = infer_shape(cfg.conv[3], s.f3);
  s.f5 = infer_shape(cfg.conv[4], s.f4);
  const Shape a3 = infer_shape(cfg.align3, s.f3);
  const Shape a4 = infer_shape(cfg.align4, s.f4);
  if (a3.h != s.f5.h || a3.w != s.f5.w || a4.h != s.f5.h || a4.w != s.f5.w) {
    throw ConfigError("fusion: aligned maps " + to_string(a3) + ", " + to_string(a4) +
                      " do not match conv5 " + to_string(s.f5));
  }
  s.fmap = {1, s.f5.h, s.f5.w, s.f3.c + s.f4.c + s.f5.c};
  s.finalmap = {1, s.f5.h, s.f5.w, cfg.conv6_channels};
  return s;
}

std::size_t total_stride(const BackboneConfig& cfg) {
  std::size_t k = 1;
  for (const auto& l : cfg.conv) k *= l.stride;
  for (const auto& l : cfg.pool) k *= l.stride;
  return k;
}

double receptive_offset(const BackboneConfig& cfg) {
  double offset = 0.0;
  double jump = 1.0;
  const LayerSpec* path[] = {&cfg.conv[0], &cfg.pool[0], &cfg.conv[1], &cfg.pool[1],
                             &cfg.conv[2], &cfg.conv[3], &cfg.conv[4]};
  for (const LayerSpec* l : path) {
    offset += jump * (0.5 * static_cast<double>(l->kernel - 1) - static_cast<double>(l->padding));
    jump *= static_cast<double>(l->stride);
  }
  return offset;
}

BackboneParams make_params(const BackboneConfig& cfg) {
  BackboneParams p;
  std::size_t in = cfg.input_channels;
  for (std::size_t i = 0; i < 5; ++i) {
    const std::string idx = std::to_string(i + 1);
    p.conv[i] = net::make_conv_params("backbone.conv" + idx, cfg.conv[i].kernel, in,
                                      cfg.conv[i].channels_out);
    p.bn[i] = net::make_batchnorm_params("backbone.bn" + idx, cfg.conv[i].channels_out);
    in = cfg.conv[i].channels_out;
  }
  const std::size_t branch[3] = {cfg.conv[2].channels_out, cfg.conv[3].channels_out,
                                 cfg.conv[4].channels_out};
  for (std::size_t i = 0; i < 3; ++i) {
    p.fuse_bn[i] = net::make_batchnorm_params("backbone.fuse_bn" + std::to_string(i + 3), branch[i]);
  }
  p.conv6 = net::make_conv_params("backbone.conv6", 1, branch[0] + branch[1] + branch[2],
                                  cfg.conv6_channels);
  return p;
}

void BackboneParams::initialize(const BackboneConfig& cfg, std::mt19937_64& rng) {
  std::size_t in = cfg.input_channels;
  for (std::size_t i = 0; i < 5; ++i) {
    net::xavier_improved(conv[i], cfg.conv[i].kernel * cfg.conv[i].kernel * in, rng);
    in = cfg.conv[i].channels_out;
  }
  net::xavier_improved(conv6, conv6.weight.value.shape().w, rng);
}

void BackboneParams::append_state(std::vector<net::StateEntry>& out) {
  for (std::size_t i = 0; i < 5; ++i) {
    net::append_state(conv[i], out);
    net::append_state(bn[i], out);
  }
  for (auto& b : fuse_bn) net::append_state(b, out);
  net::append_state(conv6, out);
}

void BackboneParams::append_params(std::vector<net::Param*>& out) {
  for (std::size_t i = 0; i < 5; ++i) {
    net::append_params(conv[i], out);
    net::append_params(bn[i], out);
  }
  for (auto& b : fuse_bn) net::append_params(b, out);
  net::append_params(conv6, out);
}

namespace {

Var conv_block(net::Graph& g, Var x, const LayerSpec& spec, net::LayerParams& conv,
               net::LayerParams& bn, Mode mode, bool activate) {
  Var y = net::conv2d(g, x, conv, spec);
  y = net::batchnorm(g, y, bn, mode);
  return activate ? net::relu(g, y) : y;
}

}  // namespace

Hierarchy forward_backbone(net::Graph& g, Var images, const BackboneConfig& cfg,
                           BackboneParams& params, Mode mode) {
  const Shape& in = g.value(images).shape();
  if (in.c != cfg.input_channels) {
    throw ConfigError("conv1: input has " + std::to_string(in.c) + " channels, expected " +
                      std::to_string(cfg.input_channels));
  }
  infer_shapes(cfg, in.h, in.w);

  Var x = conv_block(g, images, cfg.conv[0], params.conv[0], params.bn[0], mode, true);
  x = net::maxpool(g, x, cfg.pool[0]);
  x = conv_block(g, x, cfg.conv[1], params.conv[1], params.bn[1], mode, true);
  x = net::maxpool(g, x, cfg.pool[1]);
  Hierarchy h;
  const bool act = cfg.relu_before_fusion;
  h.f3 = conv_block(g, x, cfg.conv[2], params.conv[2], params.bn[2], mode, act);
  h.f4 = conv_block(g, h.f3, cfg.conv[3], params.conv[3], params.bn[3], mode, act);
  h.f5 = conv_block(g, h.f4, cfg.conv[4], params.conv[4], params.bn[4], mode, act);
  return h;
}

FusedFeature fuse(net::Graph& g, const Hierarchy& h, const BackboneConfig& cfg,
                  BackboneParams& params, Mode mode) {
  const Var a3 = net::maxpool(g, h.f3, cfg.align3);
  const Var a4 = net::maxpool(g, h.f4, cfg.align4);
  const Shape& s3 = g.value(a3).shape();
  const Shape& s4 = g.value(a4).shape();
  const Shape& s5 = g.value(h.f5).shape();
  if (s3.h != s5.h || s3.w != s5.w || s4.h != s5.h || s4.w != s5.w) {
    throw ShapeError("fusion: aligned maps " + to_string(s3) + ", " + to_string(s4) +
                     " do not match " + to_string(s5));
  }
  const Var parts[] = {net::batchnorm(g, a3, params.fuse_bn[0], mode),
                       net::batchnorm(g, a4, params.fuse_bn[1], mode),
                       net::batchnorm(g, h.f5, params.fuse_bn[2], mode)};
  FusedFeature f;
  f.fmap = net::concat(g, parts);
  f.finalmap = net::conv2d(g, f.fmap, params.conv6, LayerSpec::conv("conv6", 1, 1, cfg.conv6_channels));
  return f;
}

Var embed(net::Graph& g, Var images, const BackboneConfig& cfg, BackboneParams& params, Mode mode) {
  return fuse(g, forward_backbone(g, images, cfg, params, mode), cfg, params, mode).finalmap;
}

}  // namespace siamtrack::backbone
