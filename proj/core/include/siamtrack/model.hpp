#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "siamtrack/backbone.hpp"
#include "siamtrack/cf.hpp"
#include "siamtrack/net/graph.hpp"
#include "siamtrack/spatial_aware.hpp"

namespace siamtrack {

/// Full similarity function f(x, z) = adjust(crop(w(nu(phi(x))) * phi(z))).
struct ModelConfig {
  std::string preset = "desk";
  backbone::BackboneConfig backbone = backbone::BackboneConfig::desk();
  spatial::SpatialAwareConfig spatial = spatial::SpatialAwareConfig::desk();
  cf::CFConfig cf;
  std::size_t exemplar_size = 63;
  std::size_t search_size = 159;
  bool use_spatial = true;
  bool use_cf = true;
  /// Initial value of the learnable score scale and bias.
  double adjust_scale = 1.0;
  double adjust_bias = 0.0;

  static ModelConfig paper();
  static ModelConfig desk();
  static ModelConfig from_preset(const std::string& name);
};

struct ModelGeometry {
  Shape exemplar_feature;  // (1, m, m, C)
  Shape search_feature;
  std::size_t crop_margin = 0;
  std::size_t response_size = 0;  // after crop, odd
  std::size_t response_origin = 0;
  std::size_t stride = 0;
  /// Search-image pixel under the centre of response cell 0 of the uncropped map.
  double receptive_offset = 0.0;
};

/// Validates the crop sizes against the layer table. Throws ConfigError
/// naming the offending field.
ModelGeometry geometry(const ModelConfig& cfg);

class SiameseModel {
 public:
  explicit SiameseModel(ModelConfig cfg);

  /// Fan-in Gaussian weights, identity localiser, adjust from the config.
  void initialize(std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  const ModelGeometry& geom() const { return geom_; }

  /// phi
  net::Var embed(net::Graph& g, net::Var images, net::Mode mode);
  /// nu(phi(x)) or phi(x) when the spatial block is disabled.
  net::Var exemplar_embedding(net::Graph& g, net::Var exemplars, net::Mode mode);
  /// Correlation-filter template of exemplar features (or the features
  /// themselves when the CF block is disabled).
  net::Var make_template(net::Graph& g, net::Var exemplar_features);
  /// Cropped, adjusted response maps (n, r, r, 1).
  net::Var score(net::Graph& g, net::Var templ, net::Var search_features);
  net::Var forward(net::Graph& g, net::Var exemplars, net::Var searches, net::Mode mode);

  /// Every persisted tensor, in checkpoint order.
  std::vector<net::StateEntry> state();
  std::vector<net::Param*> params();

 private:
  ModelConfig cfg_;
  ModelGeometry geom_;
  backbone::BackboneParams backbone_;
  spatial::SpatialAwareParams spatial_;
  net::Param adjust_scale_;
  net::Param adjust_bias_;
};

}  // namespace siamtrack
