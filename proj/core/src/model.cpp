#include "siamtrack/model.hpp"

#include <random>

#include "siamtrack/errors.hpp"

namespace siamtrack {

using net::Var;

ModelConfig ModelConfig::paper() {
  ModelConfig c;
  c.preset = "paper";
  c.backbone = backbone::BackboneConfig::paper();
  c.spatial = spatial::SpatialAwareConfig::paper();
  c.exemplar_size = 135;
  c.search_size = 471;
  return c;
}

ModelConfig ModelConfig::desk() { return ModelConfig{}; }

ModelConfig ModelConfig::from_preset(const std::string& name) {
  if (name == "desk") return desk();
  if (name == "paper") return paper();
  throw ConfigError("preset: unknown preset '" + name + "' (expected desk or paper)");
}

ModelGeometry geometry(const ModelConfig& cfg) {
  ModelGeometry geo;
  try {
    geo.exemplar_feature = backbone::infer_shapes(cfg.backbone, cfg.exemplar_size, cfg.exemplar_size).finalmap;
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("model.exemplar_size: ") + e.what());
  }
  try {
    geo.search_feature = backbone::infer_shapes(cfg.backbone, cfg.search_size, cfg.search_size).finalmap;
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("model.search_size: ") + e.what());
  }
  const std::size_t m = geo.exemplar_feature.h;
  if (geo.search_feature.h < m) {
    throw ConfigError("model.search_size: search features smaller than exemplar features");
  }
  const std::size_t full = geo.search_feature.h - m + 1;
  geo.crop_margin = cfg.cf.margin(m);
  if (2 * geo.crop_margin >= full) {
    throw ConfigError("model.cf.crop_margin: " + std::to_string(geo.crop_margin) +
                      " too large for a " + std::to_string(full) + " response");
  }
  geo.response_size = full - 2 * geo.crop_margin;
  if (geo.response_size % 2 == 0) {
    throw ConfigError("model.search_size: response size " + std::to_string(geo.response_size) +
                      " is even; no centre cell");
  }
  geo.response_origin = geo.crop_margin;
  geo.stride = backbone::total_stride(cfg.backbone);
  geo.receptive_offset = backbone::receptive_offset(cfg.backbone) +
                         static_cast<double>(geo.stride) * (static_cast<double>(m) - 1.0) / 2.0;
  if (!(cfg.cf.lambda_scale > 0.0)) throw ConfigError("model.cf.lambda_scale: must be > 0");
  if (!(cfg.cf.sigma_scale > 0.0)) throw ConfigError("model.cf.sigma_scale: must be > 0");
  return geo;
}

SiameseModel::SiameseModel(ModelConfig cfg)
    : cfg_(std::move(cfg)),
      geom_(geometry(cfg_)),
      backbone_(backbone::make_params(cfg_.backbone)),
      spatial_(spatial::make_params(cfg_.spatial, geom_.exemplar_feature)),
      adjust_scale_("adjust.scale", {1, 1, 1, 1}, cfg_.adjust_scale),
      adjust_bias_("adjust.bias", {1, 1, 1, 1}, cfg_.adjust_bias) {}

void SiameseModel::initialize(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  backbone_.initialize(cfg_.backbone, rng);
  spatial_.initialize(cfg_.spatial, rng);
  adjust_scale_.value.fill(cfg_.adjust_scale);
  adjust_bias_.value.fill(cfg_.adjust_bias);
}

Var SiameseModel::embed(net::Graph& g, Var images, net::Mode mode) {
  return backbone::embed(g, images, cfg_.backbone, backbone_, mode);
}

Var SiameseModel::exemplar_embedding(net::Graph& g, Var exemplars, net::Mode mode) {
  const Var f = embed(g, exemplars, mode);
  return cfg_.use_spatial ? spatial::spatial_aware(g, f, cfg_.spatial, spatial_) : f;
}

Var SiameseModel::make_template(net::Graph& g, Var exemplar_features) {
  return cfg_.use_cf ? cf::make_template(g, exemplar_features, cfg_.cf) : exemplar_features;
}

Var SiameseModel::score(net::Graph& g, Var templ, Var search_features) {
  Var r = cf::cross_correlate(g, templ, search_features);
  r = net::crop(g, r, geom_.crop_margin);
  return net::scalar_affine(g, r, g.param(adjust_scale_), g.param(adjust_bias_));
}

Var SiameseModel::forward(net::Graph& g, Var exemplars, Var searches, net::Mode mode) {
  const Var t = make_template(g, exemplar_embedding(g, exemplars, mode));
  return score(g, t, embed(g, searches, mode));
}

std::vector<net::StateEntry> SiameseModel::state() {
  std::vector<net::StateEntry> out;
  backbone_.append_state(out);
  spatial_.append_state(out);
  out.push_back({adjust_scale_.name, &adjust_scale_.value});
  out.push_back({adjust_bias_.name, &adjust_bias_.value});
  return out;
}

std::vector<net::Param*> SiameseModel::params() {
  std::vector<net::Param*> out;
  backbone_.append_params(out);
  spatial_.append_params(out);
  out.push_back(&adjust_scale_);
  out.push_back(&adjust_bias_);
  return out;
}

}  // namespace siamtrack
