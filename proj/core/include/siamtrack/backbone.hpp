#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include "siamtrack/net/graph.hpp"
#include "siamtrack/net/init.hpp"
#include "siamtrack/net/layers.hpp"

namespace siamtrack::backbone {

/// Layer table of the shared embedding network:
///
///   conv1 -> bn -> relu -> pool1 -> conv2 -> bn -> relu -> pool2
///   -> conv3 (f3) -> conv4 (f4) -> conv5 (f5)     each followed by bn, relu
///   fmap = concat(bn(align3(f3)), bn(align4(f4)), bn(f5))
///   finalmap = conv6(fmap)                        1x1, no activation
struct BackboneConfig {
  std::size_t input_channels = 1;
  std::array<net::LayerSpec, 5> conv;
  std::array<net::LayerSpec, 2> pool;
  net::LayerSpec align3;
  net::LayerSpec align4;
  std::size_t conv6_channels = 0;
  /// ReLU after the batch-norm of conv3..conv5, before fusion.
  bool relu_before_fusion = true;

  /// AlexNet-like stack that yields 53/51/49 maps at stride 8 from a 471 input.
  static BackboneConfig paper();
  /// Stride-4 stack with (16, 32, 48, 48, 32) channels for 63 / 159 inputs.
  static BackboneConfig desk();
};

struct BackboneShapes {
  Shape f3, f4, f5, fmap, finalmap;
};

/// Shape calculator. Throws ConfigError naming the first layer whose window
/// does not fit, or "fusion" when the aligned maps disagree.
BackboneShapes infer_shapes(const BackboneConfig& cfg, std::size_t height, std::size_t width);

/// Product of the strides on the path to finalmap.
std::size_t total_stride(const BackboneConfig& cfg);

/// Input-pixel coordinate of the centre of finalmap cell 0 along one axis.
double receptive_offset(const BackboneConfig& cfg);

struct BackboneParams {
  std::array<net::LayerParams, 5> conv;
  std::array<net::LayerParams, 5> bn;
  std::array<net::LayerParams, 3> fuse_bn;
  net::LayerParams conv6;

  void initialize(const BackboneConfig& cfg, std::mt19937_64& rng);
  void append_state(std::vector<net::StateEntry>& out);
  void append_params(std::vector<net::Param*>& out);
};

BackboneParams make_params(const BackboneConfig& cfg);

struct Hierarchy {
  net::Var f3, f4, f5;
};

struct FusedFeature {
  net::Var fmap;
  net::Var finalmap;
};

Hierarchy forward_backbone(net::Graph& g, net::Var images, const BackboneConfig& cfg,
                           BackboneParams& params, net::Mode mode);

FusedFeature fuse(net::Graph& g, const Hierarchy& h, const BackboneConfig& cfg,
                  BackboneParams& params, net::Mode mode);

/// fuse(forward_backbone(images)).finalmap
net::Var embed(net::Graph& g, net::Var images, const BackboneConfig& cfg, BackboneParams& params,
               net::Mode mode);

}  // namespace siamtrack::backbone
