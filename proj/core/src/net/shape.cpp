#include <cmath>

#include "siamtrack/errors.hpp"
#include "siamtrack/net/layers.hpp"

namespace siamtrack::net {

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::kConv: return "conv";
    case LayerKind::kMaxPool: return "maxpool";
    case LayerKind::kBatchNorm: return "batchnorm";
    case LayerKind::kFullyConnected: return "fullyconnected";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kSigmoid: return "sigmoid";
    case LayerKind::kConcat: return "concat";
    case LayerKind::kCrop: return "crop";
    case LayerKind::kBilinearSample: return "bilinearsample";
  }
  return "unknown";
}

LayerSpec LayerSpec::conv(std::string name, std::size_t kernel, std::size_t stride,
                          std::size_t channels_out, std::size_t padding) {
  return {LayerKind::kConv, kernel, stride, channels_out, padding, std::move(name)};
}

LayerSpec LayerSpec::maxpool(std::string name, std::size_t kernel, std::size_t stride,
                             std::size_t padding) {
  return {LayerKind::kMaxPool, kernel, stride, 0, padding, std::move(name)};
}

LayerParams make_conv_params(const std::string& name, std::size_t kernel, std::size_t in,
                             std::size_t out) {
  LayerParams p;
  p.weight = Param(name + ".weight", {kernel, kernel, in, out});
  p.bias = Param(name + ".bias", {1, 1, 1, out});
  return p;
}

LayerParams make_fc_params(const std::string& name, std::size_t in, std::size_t out) {
  LayerParams p;
  p.weight = Param(name + ".weight", {1, 1, in, out});
  p.bias = Param(name + ".bias", {1, 1, 1, out});
  return p;
}

LayerParams make_batchnorm_params(const std::string& name, std::size_t channels) {
  LayerParams p;
  p.weight = Param(name + ".gamma", {1, 1, 1, channels}, 1.0);
  p.bias = Param(name + ".beta", {1, 1, 1, channels}, 0.0);
  p.running_mean = Tensor({1, 1, 1, channels}, 0.0);
  p.running_var = Tensor({1, 1, 1, channels}, 1.0);
  return p;
}

std::optional<std::size_t> window_output_size(std::size_t in, std::size_t kernel,
                                              std::size_t stride, std::size_t padding) {
  if (kernel == 0 || stride == 0) return std::nullopt;
  const std::size_t padded = in + 2 * padding;
  if (padded < kernel) return std::nullopt;
  return (padded - kernel) / stride + 1;
}

Shape infer_shape(const LayerSpec& spec, const Shape& in) {
  const std::string label = spec.name.empty() ? to_string(spec.kind) : spec.name;
  if (spec.kind != LayerKind::kConv && spec.kind != LayerKind::kMaxPool) {
    throw ConfigError(label + ": shape inference only covers conv and maxpool layers");
  }
  if (spec.kernel < 1 || spec.stride < 1) {
    throw ConfigError(label + ": kernel and stride must be >= 1");
  }
  const auto oh = window_output_size(in.h, spec.kernel, spec.stride, spec.padding);
  const auto ow = window_output_size(in.w, spec.kernel, spec.stride, spec.padding);
  if (!oh || !ow) {
    throw ConfigError(label + ": kernel " + std::to_string(spec.kernel) + " does not fit input " +
                      std::to_string(in.h) + "x" + std::to_string(in.w));
  }
  const std::size_t channels = spec.kind == LayerKind::kConv ? spec.channels_out : in.c;
  return {in.n, *oh, *ow, channels};
}

}  // namespace siamtrack::net
