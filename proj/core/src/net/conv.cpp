#include <Eigen/Core>
#include <algorithm>

#include "siamtrack/errors.hpp"
#include "siamtrack/net/layers.hpp"

namespace siamtrack::net {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

// Upper bound on the im2col scratch buffer, in doubles.
constexpr std::size_t kColumnBudget = std::size_t{1} << 22;

struct ConvGeometry {
  std::size_t n, in_h, in_w, in_c;
  std::size_t out_h, out_w, out_c;
  std::size_t kernel, stride, padding;
  std::size_t patch;  // kernel * kernel * in_c
  std::size_t rows_per_chunk;
};

ConvGeometry geometry(const Tensor& x, const Tensor& weight, const LayerSpec& spec) {
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  const std::string label = spec.name.empty() ? "conv" : spec.name;
  if (ws.n != spec.kernel || ws.h != spec.kernel) {
    throw ShapeError(label + ": weight " + to_string(ws) + " does not match kernel " +
                     std::to_string(spec.kernel));
  }
  if (ws.w != xs.c) {
    throw ShapeError(label + ": input has " + std::to_string(xs.c) + " channels, weights expect " +
                     std::to_string(ws.w));
  }
  const Shape out = infer_shape({LayerKind::kConv, spec.kernel, spec.stride, ws.c, spec.padding,
                                 label},
                                xs);
  ConvGeometry g{xs.n,    xs.h,        xs.w,    xs.c,         out.h, out.w, out.c,
                 spec.kernel, spec.stride, spec.padding, spec.kernel * spec.kernel * xs.c, 0};
  g.rows_per_chunk = std::max<std::size_t>(1, kColumnBudget / std::max<std::size_t>(1, g.out_w * g.patch));
  g.rows_per_chunk = std::min(g.rows_per_chunk, g.out_h);
  return g;
}

// Fills `cols` with patches for output rows [row0, row0 + rows) of sample n.
void im2col(const Tensor& x, const ConvGeometry& g, std::size_t n, std::size_t row0,
            std::size_t rows, double* cols) {
  const double* src = x.sample_data(n);
  for (std::size_t oh = row0; oh < row0 + rows; ++oh) {
    for (std::size_t ow = 0; ow < g.out_w; ++ow) {
      double* dst = cols + ((oh - row0) * g.out_w + ow) * g.patch;
      for (std::size_t kh = 0; kh < g.kernel; ++kh) {
        const long ih = static_cast<long>(oh * g.stride + kh) - static_cast<long>(g.padding);
        for (std::size_t kw = 0; kw < g.kernel; ++kw) {
          const long iw = static_cast<long>(ow * g.stride + kw) - static_cast<long>(g.padding);
          double* d = dst + (kh * g.kernel + kw) * g.in_c;
          if (ih < 0 || iw < 0 || ih >= static_cast<long>(g.in_h) || iw >= static_cast<long>(g.in_w)) {
            std::fill_n(d, g.in_c, 0.0);
          } else {
            std::copy_n(src + (static_cast<std::size_t>(ih) * g.in_w + static_cast<std::size_t>(iw)) * g.in_c,
                        g.in_c, d);
          }
        }
      }
    }
  }
}

void col2im(const double* cols, const ConvGeometry& g, std::size_t n, std::size_t row0,
            std::size_t rows, Tensor& dx) {
  double* dst = dx.sample_data(n);
  for (std::size_t oh = row0; oh < row0 + rows; ++oh) {
    for (std::size_t ow = 0; ow < g.out_w; ++ow) {
      const double* src = cols + ((oh - row0) * g.out_w + ow) * g.patch;
      for (std::size_t kh = 0; kh < g.kernel; ++kh) {
        const long ih = static_cast<long>(oh * g.stride + kh) - static_cast<long>(g.padding);
        if (ih < 0 || ih >= static_cast<long>(g.in_h)) continue;
        for (std::size_t kw = 0; kw < g.kernel; ++kw) {
          const long iw = static_cast<long>(ow * g.stride + kw) - static_cast<long>(g.padding);
          if (iw < 0 || iw >= static_cast<long>(g.in_w)) continue;
          const double* s = src + (kh * g.kernel + kw) * g.in_c;
          double* d = dst + (static_cast<std::size_t>(ih) * g.in_w + static_cast<std::size_t>(iw)) * g.in_c;
          for (std::size_t c = 0; c < g.in_c; ++c) d[c] += s[c];
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d_forward(const Tensor& x, const Tensor& weight, const Tensor& bias,
                      const LayerSpec& spec) {
  const ConvGeometry g = geometry(x, weight, spec);
  if (bias.size() != g.out_c) {
    throw ShapeError((spec.name.empty() ? std::string("conv") : spec.name) + ": bias size " +
                     std::to_string(bias.size()) + " != " + std::to_string(g.out_c));
  }
  Tensor out({g.n, g.out_h, g.out_w, g.out_c});
  std::vector<double> cols(g.rows_per_chunk * g.out_w * g.patch);
  const ConstMatMap w(weight.data(), static_cast<long>(g.patch), static_cast<long>(g.out_c));
  const Eigen::Map<const Eigen::RowVectorXd> b(bias.data(), static_cast<long>(g.out_c));
  for (std::size_t n = 0; n < g.n; ++n) {
    for (std::size_t row0 = 0; row0 < g.out_h; row0 += g.rows_per_chunk) {
      const std::size_t rows = std::min(g.rows_per_chunk, g.out_h - row0);
      const long m = static_cast<long>(rows * g.out_w);
      im2col(x, g, n, row0, rows, cols.data());
      const ConstMatMap colm(cols.data(), m, static_cast<long>(g.patch));
      MatMap outm(out.sample_data(n) + row0 * g.out_w * g.out_c, m, static_cast<long>(g.out_c));
      outm.noalias() = colm * w;
      outm.rowwise() += b;
    }
  }
  return out;
}

void conv2d_backward(const Tensor& x, const Tensor& weight, const Tensor& dy,
                     const LayerSpec& spec, Tensor* dx, Tensor* dweight, Tensor* dbias) {
  const ConvGeometry g = geometry(x, weight, spec);
  if (!(dy.shape() == Shape{g.n, g.out_h, g.out_w, g.out_c})) {
    throw ShapeError("conv backward: upstream gradient " + to_string(dy.shape()));
  }
  std::vector<double> cols(g.rows_per_chunk * g.out_w * g.patch);
  const ConstMatMap w(weight.data(), static_cast<long>(g.patch), static_cast<long>(g.out_c));
  for (std::size_t n = 0; n < g.n; ++n) {
    for (std::size_t row0 = 0; row0 < g.out_h; row0 += g.rows_per_chunk) {
      const std::size_t rows = std::min(g.rows_per_chunk, g.out_h - row0);
      const long m = static_cast<long>(rows * g.out_w);
      const ConstMatMap dym(dy.sample_data(n) + row0 * g.out_w * g.out_c, m,
                            static_cast<long>(g.out_c));
      if (dbias != nullptr) {
        Eigen::Map<Eigen::RowVectorXd> db(dbias->data(), static_cast<long>(g.out_c));
        db += dym.colwise().sum();
      }
      if (dweight != nullptr) {
        im2col(x, g, n, row0, rows, cols.data());
        const ConstMatMap colm(cols.data(), m, static_cast<long>(g.patch));
        MatMap dw(dweight->data(), static_cast<long>(g.patch), static_cast<long>(g.out_c));
        dw.noalias() += colm.transpose() * dym;
      }
      if (dx != nullptr) {
        MatMap colm(cols.data(), m, static_cast<long>(g.patch));
        colm.noalias() = dym * w.transpose();
        col2im(cols.data(), g, n, row0, rows, *dx);
      }
    }
  }
}

Var conv2d(Graph& g, Var x, Var weight, Var bias, const LayerSpec& spec) {
  Tensor out = conv2d_forward(g.value(x), g.value(weight), g.value(bias), spec);
  return g.record(std::move(out), {x, weight, bias}, [x, weight, bias, spec](Graph& gr, Var self) {
    const Tensor& dy = gr.grad_slot(self);
    Tensor* dx = gr.requires_grad(x) ? &gr.grad_slot(x) : nullptr;
    Tensor* dw = gr.requires_grad(weight) ? &gr.grad_slot(weight) : nullptr;
    Tensor* db = gr.requires_grad(bias) ? &gr.grad_slot(bias) : nullptr;
    conv2d_backward(gr.value(x), gr.value(weight), dy, spec, dx, dw, db);
  });
}

Var conv2d(Graph& g, Var x, LayerParams& p, const LayerSpec& spec) {
  return conv2d(g, x, g.param(p.weight), g.param(p.bias), spec);
}

}  // namespace siamtrack::net
