#include <Eigen/Core>
#include <cmath>

#include "siamtrack/errors.hpp"
#include "siamtrack/net/layers.hpp"

namespace siamtrack::net {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!(a.shape() == b.shape())) {
    throw ShapeError(std::string(what) + ": " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
}

}  // namespace

Tensor fc_forward(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  const std::size_t n = x.shape().n;
  const std::size_t in = x.sample_size();
  const std::size_t out = weight.shape().c;
  if (weight.shape().w != in) {
    throw ShapeError("fully connected: input length " + std::to_string(in) + ", weights expect " +
                     std::to_string(weight.shape().w));
  }
  if (bias.size() != out) throw ShapeError("fully connected: bias size mismatch");
  Tensor y({n, 1, 1, out});
  const ConstMatMap xm(x.data(), static_cast<long>(n), static_cast<long>(in));
  const ConstMatMap wm(weight.data(), static_cast<long>(in), static_cast<long>(out));
  MatMap ym(y.data(), static_cast<long>(n), static_cast<long>(out));
  ym.noalias() = xm * wm;
  ym.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bias.data(), static_cast<long>(out));
  return y;
}

Var fully_connected(Graph& g, Var x, Var weight, Var bias) {
  Tensor y = fc_forward(g.value(x), g.value(weight), g.value(bias));
  return g.record(std::move(y), {x, weight, bias}, [x, weight, bias](Graph& gr, Var self) {
    const Tensor& dy = gr.grad_slot(self);
    const Tensor& xv = gr.value(x);
    const Tensor& wv = gr.value(weight);
    const long n = static_cast<long>(xv.shape().n);
    const long in = static_cast<long>(xv.sample_size());
    const long out = static_cast<long>(wv.shape().c);
    const ConstMatMap dym(dy.data(), n, out);
    if (gr.requires_grad(x)) {
      MatMap dx(gr.grad_slot(x).data(), n, in);
      dx.noalias() += dym * ConstMatMap(wv.data(), in, out).transpose();
    }
    if (gr.requires_grad(weight)) {
      MatMap dw(gr.grad_slot(weight).data(), in, out);
      dw.noalias() += ConstMatMap(xv.data(), n, in).transpose() * dym;
    }
    if (gr.requires_grad(bias)) {
      Eigen::Map<Eigen::RowVectorXd> db(gr.grad_slot(bias).data(), out);
      db += dym.colwise().sum();
    }
  });
}

Var fully_connected(Graph& g, Var x, LayerParams& p) {
  return fully_connected(g, x, g.param(p.weight), g.param(p.bias));
}

Var relu(Graph& g, Var x) {
  Tensor y = g.value(x);
  for (double& v : y.values()) v = v > 0.0 ? v : 0.0;
  return g.record(std::move(y), {x}, [x](Graph& gr, Var self) {
    const Tensor& dy = gr.grad_slot(self);
    const Tensor& xv = gr.value(x);
    Tensor& dx = gr.grad_slot(x);
    for (std::size_t i = 0; i < dy.size(); ++i) {
      if (xv[i] > 0.0) dx[i] += dy[i];
    }
  });
}

Var sigmoid(Graph& g, Var x) {
  Tensor y = g.value(x);
  for (double& v : y.values()) {
    v = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  return g.record(std::move(y), {x}, [x](Graph& gr, Var self) {
    const Tensor& dy = gr.grad_slot(self);
    const Tensor& yv = gr.value(self);
    Tensor& dx = gr.grad_slot(x);
    for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i] * yv[i] * (1.0 - yv[i]);
  });
}

Var concat(Graph& g, std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  Shape s = g.value(parts[0]).shape();
  std::vector<std::size_t> offsets;
  std::size_t channels = 0;
  for (Var p : parts) {
    const Shape& ps = g.value(p).shape();
    if (ps.n != s.n || ps.h != s.h || ps.w != s.w) {
      throw ShapeError("concat: spatial shape " + to_string(ps) + " vs " + to_string(s));
    }
    offsets.push_back(channels);
    channels += ps.c;
  }
  s.c = channels;
  Tensor out(s);
  const std::size_t pixels = s.n * s.h * s.w;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& v = g.value(parts[k]);
    const std::size_t pc = v.shape().c;
    for (std::size_t p = 0; p < pixels; ++p) {
      for (std::size_t c = 0; c < pc; ++c) out[p * channels + offsets[k] + c] = v[p * pc + c];
    }
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return g.record(std::move(out), inputs, [inputs, offsets, channels](Graph& gr, Var self) {
    const Tensor& dy = gr.grad_slot(self);
    const Shape& s = dy.shape();
    const std::size_t pixels = s.n * s.h * s.w;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      if (!gr.requires_grad(inputs[k])) continue;
      Tensor& dx = gr.grad_slot(inputs[k]);
      const std::size_t pc = dx.shape().c;
      for (std::size_t p = 0; p < pixels; ++p) {
        for (std::size_t c = 0; c < pc; ++c) dx[p * pc + c] += dy[p * channels + offsets[k] + c];
      }
    }
  });
}

Var crop(Graph& g, Var x, std::size_t margin) {
  const Tensor& xv = g.value(x);
  const Shape& xs = xv.shape();
  if (2 * margin >= xs.h || 2 * margin >= xs.w) {
    throw ShapeError("crop: margin " + std::to_string(margin) + " too large for " + to_string(xs));
  }
  if (margin == 0) {
    return g.record(xv, {x}, [x](Graph& gr, Var self) { gr.accumulate(x, gr.grad_slot(self)); });
  }
  const Shape os{xs.n, xs.h - 2 * margin, xs.w - 2 * margin, xs.c};
  Tensor out(os);
  for (std::size_t n = 0; n < os.n; ++n)
    for (std::size_t h = 0; h < os.h; ++h)
      for (std::size_t w = 0; w < os.w; ++w)
        for (std::size_t c = 0; c < os.c; ++c) out(n, h, w, c) = xv(n, h + margin, w + margin, c);
  return g.record(std::move(out), {x}, [x, margin](Graph& gr, Var self) {
    const Tensor& dy = gr.grad_slot(self);
    Tensor& dx = gr.grad_slot(x);
    const Shape& os = dy.shape();
    for (std::size_t n = 0; n < os.n; ++n)
      for (std::size_t h = 0; h < os.h; ++h)
        for (std::size_t w = 0; w < os.w; ++w)
          for (std::size_t c = 0; c < os.c; ++c) dx(n, h + margin, w + margin, c) += dy(n, h, w, c);
  });
}

Var global_avg_pool(Graph& g, Var x) {
  const Tensor& xv = g.value(x);
  const Shape& xs = xv.shape();
  const double area = static_cast<double>(xs.h * xs.w);
  Tensor out({xs.n, 1, 1, xs.c});
  for (std::size_t n = 0; n < xs.n; ++n)
    for (std::size_t p = 0; p < xs.h * xs.w; ++p)
      for (std::size_t c = 0; c < xs.c; ++c) out[n * xs.c + c] += xv.sample_data(n)[p * xs.c + c] / area;
  return g.record(std::move(out), {x}, [x, area](Graph& gr, Var self) {
    const Tensor& dy = gr.grad_slot(self);
    Tensor& dx = gr.grad_slot(x);
    const Shape& xs = dx.shape();
    for (std::size_t n = 0; n < xs.n; ++n)
      for (std::size_t p = 0; p < xs.h * xs.w; ++p)
        for (std::size_t c = 0; c < xs.c; ++c) dx.sample_data(n)[p * xs.c + c] += dy[n * xs.c + c] / area;
  });
}

Var channel_scale(Graph& g, Var x, Var weights) {
  const Tensor& xv = g.value(x);
  const Tensor& wv = g.value(weights);
  const Shape& xs = xv.shape();
  if (!(wv.shape() == Shape{xs.n, 1, 1, xs.c})) {
    throw ShapeError("channel scale: weights " + to_string(wv.shape()) + " for input " + to_string(xs));
  }
  Tensor out(xs);
  const std::size_t pixels = xs.h * xs.w;
  for (std::size_t n = 0; n < xs.n; ++n)
    for (std::size_t p = 0; p < pixels; ++p)
      for (std::size_t c = 0; c < xs.c; ++c) {
        const std::size_t i = (n * pixels + p) * xs.c + c;
        out[i] = xv[i] * wv[n * xs.c + c];
      }
  return g.record(std::move(out), {x, weights}, [x, weights](Graph& gr, Var self) {
    const Tensor& dy = gr.grad_slot(self);
    const Tensor& xv = gr.value(x);
    const Tensor& wv = gr.value(weights);
    const Shape& xs = xv.shape();
    const std::size_t pixels = xs.h * xs.w;
    Tensor* dx = gr.requires_grad(x) ? &gr.grad_slot(x) : nullptr;
    Tensor* dw = gr.requires_grad(weights) ? &gr.grad_slot(weights) : nullptr;
    for (std::size_t n = 0; n < xs.n; ++n)
      for (std::size_t p = 0; p < pixels; ++p)
        for (std::size_t c = 0; c < xs.c; ++c) {
          const std::size_t i = (n * pixels + p) * xs.c + c;
          if (dx != nullptr) (*dx)[i] += dy[i] * wv[n * xs.c + c];
          if (dw != nullptr) (*dw)[n * xs.c + c] += dy[i] * xv[i];
        }
  });
}

Var spatial_mask(Graph& g, Var x, const Tensor& mask) {
  const Tensor& xv = g.value(x);
  const Shape& xs = xv.shape();
  if (mask.shape().h != xs.h || mask.shape().w != xs.w || mask.size() != xs.h * xs.w) {
    throw ShapeError("spatial mask: mask " + to_string(mask.shape()) + " for input " + to_string(xs));
  }
  Tensor out(xs);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * mask[(i / xs.c) % (xs.h * xs.w)];
  return g.record(std::move(out), {x}, [x, mask](Graph& gr, Var self) {
    const Tensor& dy = gr.grad_slot(self);
    Tensor& dx = gr.grad_slot(x);
    const Shape& xs = dx.shape();
    for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i] * mask[(i / xs.c) % (xs.h * xs.w)];
  });
}

Var scalar_affine(Graph& g, Var x, Var scale, Var bias) {
  if (g.value(scale).size() != 1 || g.value(bias).size() != 1) {
    throw ShapeError("scalar affine: scale and bias must be scalars");
  }
  const double a = g.value(scale)[0];
  const double b = g.value(bias)[0];
  Tensor out = g.value(x);
  for (double& v : out.values()) v = a * v + b;
  return g.record(std::move(out), {x, scale, bias}, [x, scale, bias](Graph& gr, Var self) {
    const Tensor& dy = gr.grad_slot(self);
    const Tensor& xv = gr.value(x);
    const double a = gr.value(scale)[0];
    double da = 0.0, db = 0.0;
    const bool want_x = gr.requires_grad(x);
    Tensor* dx = want_x ? &gr.grad_slot(x) : nullptr;
    for (std::size_t i = 0; i < dy.size(); ++i) {
      da += dy[i] * xv[i];
      db += dy[i];
      if (dx != nullptr) (*dx)[i] += a * dy[i];
    }
    if (gr.requires_grad(scale)) gr.grad_slot(scale)[0] += da;
    if (gr.requires_grad(bias)) gr.grad_slot(bias)[0] += db;
  });
}

Var weighted_sum(Graph& g, Var x, const Tensor& weights) {
  const Tensor& xv = g.value(x);
  require_same_shape(xv, weights, "weighted sum");
  double total = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) total += xv[i] * weights[i];
  return g.record(Tensor({1, 1, 1, 1}, total), {x}, [x, weights](Graph& gr, Var self) {
    const double dy = gr.grad_slot(self)[0];
    Tensor& dx = gr.grad_slot(x);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy * weights[i];
  });
}

}  // namespace siamtrack::net
