#include <cmath>

#include "siamtrack/errors.hpp"
#include "siamtrack/net/layers.hpp"

namespace siamtrack::net {
namespace {

struct Normalized {
  Tensor xhat;
  std::vector<double> inv_std;
};

void check_channels(const Tensor& x, const LayerParams& p) {
  const std::size_t c = x.shape().c;
  if (p.weight.value.size() != c || p.bias.value.size() != c) {
    throw ShapeError("batchnorm: " + p.weight.name + " has " + std::to_string(p.weight.value.size()) +
                     " channels, input has " + std::to_string(c));
  }
}

// Normalises x with either batch or running statistics; updates the running
// statistics in training mode.
Normalized normalize(const Tensor& x, LayerParams& p, Mode mode, const BatchNormOptions& opts) {
  const Shape& s = x.shape();
  const std::size_t channels = s.c;
  const std::size_t count = s.n * s.h * s.w;
  std::vector<double> mean(channels, 0.0), var(channels, 0.0);
  if (mode == Mode::kTrain) {
    for (std::size_t i = 0; i < x.size(); ++i) mean[i % channels] += x[i];
    for (double& m : mean) m /= static_cast<double>(count);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = x[i] - mean[i % channels];
      var[i % channels] += d * d;
    }
    for (double& v : var) v /= static_cast<double>(count);
    if (opts.update_running && !p.running_mean.empty()) {
      const double unbias = count > 1 ? static_cast<double>(count) / static_cast<double>(count - 1) : 1.0;
      for (std::size_t c = 0; c < channels; ++c) {
        p.running_mean[c] = opts.momentum * p.running_mean[c] + (1.0 - opts.momentum) * mean[c];
        p.running_var[c] = opts.momentum * p.running_var[c] + (1.0 - opts.momentum) * var[c] * unbias;
      }
    }
  } else {
    if (p.running_mean.size() != channels || p.running_var.size() != channels) {
      throw ShapeError("batchnorm: missing running statistics for " + p.weight.name);
    }
    for (std::size_t c = 0; c < channels; ++c) {
      mean[c] = p.running_mean[c];
      var[c] = std::max(0.0, p.running_var[c]);
    }
  }
  Normalized r{Tensor(s), std::vector<double>(channels)};
  for (std::size_t c = 0; c < channels; ++c) r.inv_std[c] = 1.0 / std::sqrt(var[c] + opts.epsilon);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::size_t c = i % channels;
    r.xhat[i] = (x[i] - mean[c]) * r.inv_std[c];
  }
  return r;
}

Tensor scale_shift(const Tensor& xhat, const Tensor& gamma, const Tensor& beta) {
  Tensor out(xhat.shape());
  const std::size_t channels = xhat.shape().c;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::size_t c = i % channels;
    out[i] = gamma[c] * xhat[i] + beta[c];
  }
  return out;
}

}  // namespace

Tensor batchnorm_forward(const Tensor& x, LayerParams& p, Mode mode, const BatchNormOptions& opts) {
  check_channels(x, p);
  const Normalized nrm = normalize(x, p, mode, opts);
  return scale_shift(nrm.xhat, p.weight.value, p.bias.value);
}

Var batchnorm(Graph& g, Var x, Var gamma, Var beta, LayerParams& stats, Mode mode,
              const BatchNormOptions& opts) {
  check_channels(g.value(x), stats);
  Normalized nrm = normalize(g.value(x), stats, mode, opts);
  Tensor out = scale_shift(nrm.xhat, g.value(gamma), g.value(beta));
  return g.record(std::move(out), {x, gamma, beta},
                  [x, gamma, beta, mode, nrm = std::move(nrm)](Graph& gr, Var self) {
                    const Tensor& dy = gr.grad_slot(self);
                    const Tensor& gv = gr.value(gamma);
                    const std::size_t channels = dy.shape().c;
                    const double count = static_cast<double>(dy.size() / channels);
                    std::vector<double> sum_dy(channels, 0.0), sum_dy_xhat(channels, 0.0);
                    for (std::size_t i = 0; i < dy.size(); ++i) {
                      sum_dy[i % channels] += dy[i];
                      sum_dy_xhat[i % channels] += dy[i] * nrm.xhat[i];
                    }
                    if (gr.requires_grad(gamma)) {
                      Tensor& dg = gr.grad_slot(gamma);
                      for (std::size_t c = 0; c < channels; ++c) dg[c] += sum_dy_xhat[c];
                    }
                    if (gr.requires_grad(beta)) {
                      Tensor& db = gr.grad_slot(beta);
                      for (std::size_t c = 0; c < channels; ++c) db[c] += sum_dy[c];
                    }
                    if (!gr.requires_grad(x)) return;
                    Tensor& dx = gr.grad_slot(x);
                    for (std::size_t i = 0; i < dy.size(); ++i) {
                      const std::size_t c = i % channels;
                      const double k = gv[c] * nrm.inv_std[c];
                      if (mode == Mode::kTrain) {
                        dx[i] += k * (dy[i] - sum_dy[c] / count - nrm.xhat[i] * sum_dy_xhat[c] / count);
                      } else {
                        dx[i] += k * dy[i];
                      }
                    }
                  });
}

Var batchnorm(Graph& g, Var x, LayerParams& p, Mode mode, const BatchNormOptions& opts) {
  return batchnorm(g, x, g.param(p.weight), g.param(p.bias), p, mode, opts);
}

}  // namespace siamtrack::net
