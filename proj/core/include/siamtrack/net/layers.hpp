#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "siamtrack/net/graph.hpp"
#include "siamtrack/tensor.hpp"

namespace siamtrack::net {

enum class LayerKind {
  kConv,
  kMaxPool,
  kBatchNorm,
  kFullyConnected,
  kRelu,
  kSigmoid,
  kConcat,
  kCrop,
  kBilinearSample,
};

std::string to_string(LayerKind kind);

struct LayerSpec {
  LayerKind kind = LayerKind::kConv;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t channels_out = 1;
  std::size_t padding = 0;
  std::string name;

  static LayerSpec conv(std::string name, std::size_t kernel, std::size_t stride,
                        std::size_t channels_out, std::size_t padding = 0);
  static LayerSpec maxpool(std::string name, std::size_t kernel, std::size_t stride,
                           std::size_t padding = 0);
};

/// Parameters of one layer. Convolution weights are laid out as
/// (kernel, kernel, in, out) in the (n, h, w, c) slots; fully connected
/// weights as (1, 1, in, out). Batch-norm stores gamma in `weight` and beta
/// in `bias` and carries running statistics.
struct LayerParams {
  Param weight;
  Param bias;
  Tensor running_mean;
  Tensor running_var;

  void zero_grad() {
    weight.zero_grad();
    bias.zero_grad();
  }
};

LayerParams make_conv_params(const std::string& name, std::size_t kernel, std::size_t in,
                             std::size_t out);
LayerParams make_fc_params(const std::string& name, std::size_t in, std::size_t out);
LayerParams make_batchnorm_params(const std::string& name, std::size_t channels);

// ---------------------------------------------------------------------------
// Shape calculator

/// floor((in + 2*padding - kernel) / stride) + 1, or nullopt when the window
/// does not fit.
std::optional<std::size_t> window_output_size(std::size_t in, std::size_t kernel,
                                              std::size_t stride, std::size_t padding);

/// Output shape of a conv or max-pool layer. Throws ConfigError naming the
/// layer when the input is too small or the spec is invalid.
Shape infer_shape(const LayerSpec& spec, const Shape& in);

// ---------------------------------------------------------------------------
// Kernels. Pure functions of their inputs; the graph ops below wrap them.

Tensor conv2d_forward(const Tensor& x, const Tensor& weight, const Tensor& bias,
                      const LayerSpec& spec);
/// Any of dx / dweight / dbias may be null. Results are accumulated.
void conv2d_backward(const Tensor& x, const Tensor& weight, const Tensor& dy,
                     const LayerSpec& spec, Tensor* dx, Tensor* dweight, Tensor* dbias);

/// `argmax` receives, per output element, the flat input index it came from.
Tensor maxpool_forward(const Tensor& x, const LayerSpec& spec,
                       std::vector<std::size_t>* argmax = nullptr);
void maxpool_backward(const Tensor& dy, std::span<const std::size_t> argmax, Tensor& dx);

struct BatchNormOptions {
  double epsilon = 1e-5;
  /// running <- momentum * running + (1 - momentum) * batch
  double momentum = 0.9;
  /// Training mode only: fold the batch statistics into the running ones.
  bool update_running = true;
};

/// Per-channel normalisation over (n, h, w). Training mode uses the batch
/// statistics; evaluation mode uses `p.running_mean` / `p.running_var`.
Tensor batchnorm_forward(const Tensor& x, LayerParams& p, Mode mode,
                         const BatchNormOptions& opts = {});

Tensor fc_forward(const Tensor& x, const Tensor& weight, const Tensor& bias);

// ---------------------------------------------------------------------------
// Graph ops

Var conv2d(Graph& g, Var x, Var weight, Var bias, const LayerSpec& spec);
Var conv2d(Graph& g, Var x, LayerParams& p, const LayerSpec& spec);
Var maxpool(Graph& g, Var x, const LayerSpec& spec);
Var batchnorm(Graph& g, Var x, Var gamma, Var beta, LayerParams& stats, Mode mode,
              const BatchNormOptions& opts = {});
Var batchnorm(Graph& g, Var x, LayerParams& p, Mode mode, const BatchNormOptions& opts = {});
/// Treats each batch item as a flat vector of h*w*c values; output (n,1,1,out).
Var fully_connected(Graph& g, Var x, Var weight, Var bias);
Var fully_connected(Graph& g, Var x, LayerParams& p);
Var relu(Graph& g, Var x);
Var sigmoid(Graph& g, Var x);
/// Channel-axis concatenation; blocks keep argument order.
Var concat(Graph& g, std::span<const Var> parts);
/// Removes `margin` rows and columns from every spatial side.
Var crop(Graph& g, Var x, std::size_t margin);
Var global_avg_pool(Graph& g, Var x);
/// out[n,h,w,c] = x[n,h,w,c] * weights[n,0,0,c].
Var channel_scale(Graph& g, Var x, Var weights);
/// Elementwise product with a fixed (1,h,w,1) mask broadcast over n and c.
Var spatial_mask(Graph& g, Var x, const Tensor& mask);
/// out = scale * x + bias with scalar (1,1,1,1) parameters.
Var scalar_affine(Graph& g, Var x, Var scale, Var bias);
/// Sum of out[i] * weights[i]; used to reduce an op to a scalar.
Var weighted_sum(Graph& g, Var x, const Tensor& weights);

// ---------------------------------------------------------------------------
// Spatial sampling

/// Maps normalised [-1, 1] coordinates through a 2x3 affine matrix.
/// theta: (n,1,1,6) row-major [t11 t12 t13 t21 t22 t23].
/// Returns (n,h,w,2) with channel 0 = x_in, channel 1 = y_in.
Tensor affine_grid_forward(const Tensor& theta, std::size_t h, std::size_t w);
Var affine_grid(Graph& g, Var theta, std::size_t h, std::size_t w);

/// Bilinear sampling of `u` (n,H,W,C) at `grid` (n,h,w,2) normalised
/// coordinates; samples outside the input read zero.
Tensor bilinear_sample_forward(const Tensor& u, const Tensor& grid);
Var bilinear_sample(Graph& g, Var u, Var grid);

/// Normalised coordinate of pixel index `i` on an axis of `size` pixels.
double pixel_to_normalized(double i, std::size_t size);
double normalized_to_pixel(double x, std::size_t size);

}  // namespace siamtrack::net
