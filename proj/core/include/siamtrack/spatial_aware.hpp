#pragma once

#include <array>
#include <random>
#include <vector>

#include "siamtrack/net/graph.hpp"
#include "siamtrack/net/init.hpp"
#include "siamtrack/net/layers.hpp"

namespace siamtrack::spatial {

/// 2x3 affine matrix, row-major: [t11 t12 t13 t21 t22 t23].
struct AffineParams {
  std::array<double, 6> theta{1, 0, 0, 0, 1, 0};

  static AffineParams identity() { return {}; }
  static AffineParams translation(double tx, double ty) { return {{1, 0, tx, 0, 1, ty}}; }
  Tensor as_tensor() const;
};

/// (n, h, w, 2) normalised input coordinates, channel 0 = x, 1 = y.
using SamplingGrid = Tensor;

/// Per-channel gates in (0, 1), shaped (n, 1, 1, C).
using ChannelWeights = Tensor;

struct SpatialAwareConfig {
  /// Localisation net: three convs (each followed by ReLU), then FC -> 6.
  std::array<net::LayerSpec, 3> loc_conv;
  /// Squeeze-and-excitation reduction ratio; hidden width is ceil(C / r).
  std::size_t se_reduction = 4;

  static SpatialAwareConfig paper();
  static SpatialAwareConfig desk();
};

struct SpatialAwareParams {
  std::array<net::LayerParams, 3> loc_conv;
  net::LayerParams loc_fc;
  net::LayerParams se_fc1;
  net::LayerParams se_fc2;

  /// Xavier for the hidden layers; the localisation FC starts at zero
  /// weights with the identity transform as its bias.
  void initialize(const SpatialAwareConfig& cfg, std::mt19937_64& rng);
  void append_state(std::vector<net::StateEntry>& out);
  void append_params(std::vector<net::Param*>& out);
};

/// `input` is the (1, h, w, C) shape of the feature map the block sees.
SpatialAwareParams make_params(const SpatialAwareConfig& cfg, const Shape& input);

/// theta (n, 1, 1, 6) predicted by the localisation net.
net::Var localize(net::Graph& g, net::Var x, const SpatialAwareConfig& cfg, SpatialAwareParams& p);

SamplingGrid affine_grid(const AffineParams& theta, std::size_t h, std::size_t w);

/// localize -> affine grid -> bilinear sample; output shape equals input shape.
net::Var spatial_transform(net::Graph& g, net::Var x, const SpatialAwareConfig& cfg,
                           SpatialAwareParams& p);

/// Gates phi = sigmoid(fc2(relu(fc1(gap(v))))).
net::Var attention_weights(net::Graph& g, net::Var v, SpatialAwareParams& p);

/// v' = v * phi, channel-wise.
net::Var channel_attention(net::Graph& g, net::Var v, SpatialAwareParams& p);

/// channel_attention(spatial_transform(x)).
net::Var spatial_aware(net::Graph& g, net::Var x, const SpatialAwareConfig& cfg,
                       SpatialAwareParams& p);

}  // namespace siamtrack::spatial
