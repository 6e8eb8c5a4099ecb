#include <cmath>

#include "siamtrack/errors.hpp"
#include "siamtrack/net/layers.hpp"

namespace siamtrack::net {
namespace {

// Grid points this close to a pixel centre are treated as exactly on it, so
// that identity and whole-pixel warps reproduce their input bit-for-bit.
constexpr double kSnap = 1e-10;

double snap(double p) {
  const double r = std::round(p);
  return std::abs(p - r) < kSnap ? r : p;
}

double half_extent(std::size_t size) { return size > 1 ? 0.5 * static_cast<double>(size - 1) : 0.0; }

struct Tap {
  long x0, y0;
  double wx, wy;  // fractional offsets toward x0 + 1 / y0 + 1
};

Tap locate(double gx, double gy, std::size_t w, std::size_t h) {
  const double px = snap(normalized_to_pixel(gx, w));
  const double py = snap(normalized_to_pixel(gy, h));
  const double fx = std::floor(px);
  const double fy = std::floor(py);
  return {static_cast<long>(fx), static_cast<long>(fy), px - fx, py - fy};
}

}  // namespace

double pixel_to_normalized(double i, std::size_t size) {
  return size > 1 ? i / half_extent(size) - 1.0 : 0.0;
}

double normalized_to_pixel(double x, std::size_t size) { return (x + 1.0) * half_extent(size); }

Tensor affine_grid_forward(const Tensor& theta, std::size_t h, std::size_t w) {
  if (theta.sample_size() != 6) throw ShapeError("affine grid: theta must have 6 values per item");
  if (h < 1 || w < 1) throw ShapeError("affine grid: empty output size");
  const std::size_t n = theta.shape().n;
  Tensor grid({n, h, w, 2});
  for (std::size_t b = 0; b < n; ++b) {
    const double* t = theta.sample_data(b);
    for (std::size_t i = 0; i < h; ++i) {
      const double yo = pixel_to_normalized(static_cast<double>(i), h);
      for (std::size_t j = 0; j < w; ++j) {
        const double xo = pixel_to_normalized(static_cast<double>(j), w);
        grid(b, i, j, 0) = t[0] * xo + t[1] * yo + t[2];
        grid(b, i, j, 1) = t[3] * xo + t[4] * yo + t[5];
      }
    }
  }
  return grid;
}

Var affine_grid(Graph& g, Var theta, std::size_t h, std::size_t w) {
  Tensor grid = affine_grid_forward(g.value(theta), h, w);
  return g.record(std::move(grid), {theta}, [theta](Graph& gr, Var self) {
    const Tensor& dg = gr.grad_slot(self);
    Tensor& dt = gr.grad_slot(theta);
    const Shape& s = dg.shape();
    for (std::size_t b = 0; b < s.n; ++b) {
      double* t = dt.sample_data(b);
      for (std::size_t i = 0; i < s.h; ++i) {
        const double yo = pixel_to_normalized(static_cast<double>(i), s.h);
        for (std::size_t j = 0; j < s.w; ++j) {
          const double xo = pixel_to_normalized(static_cast<double>(j), s.w);
          const double gx = dg(b, i, j, 0);
          const double gy = dg(b, i, j, 1);
          t[0] += gx * xo;
          t[1] += gx * yo;
          t[2] += gx;
          t[3] += gy * xo;
          t[4] += gy * yo;
          t[5] += gy;
        }
      }
    }
  });
}

Tensor bilinear_sample_forward(const Tensor& u, const Tensor& grid) {
  const Shape& us = u.shape();
  const Shape& gs = grid.shape();
  if (gs.c != 2 || gs.n != us.n) {
    throw ShapeError("bilinear sample: grid " + to_string(gs) + " for input " + to_string(us));
  }
  Tensor v({us.n, gs.h, gs.w, us.c});
  const long H = static_cast<long>(us.h);
  const long W = static_cast<long>(us.w);
  for (std::size_t b = 0; b < us.n; ++b) {
    for (std::size_t i = 0; i < gs.h; ++i) {
      for (std::size_t j = 0; j < gs.w; ++j) {
        const Tap t = locate(grid(b, i, j, 0), grid(b, i, j, 1), us.w, us.h);
        double* out = &v(b, i, j, 0);
        for (int dy = 0; dy < 2; ++dy) {
          const long y = t.y0 + dy;
          if (y < 0 || y >= H) continue;
          const double wy = dy ? t.wy : 1.0 - t.wy;
          for (int dx = 0; dx < 2; ++dx) {
            const long x = t.x0 + dx;
            if (x < 0 || x >= W) continue;
            const double wgt = wy * (dx ? t.wx : 1.0 - t.wx);
            if (wgt == 0.0) continue;
            const double* in = u.data() + u.index(b, static_cast<std::size_t>(y), static_cast<std::size_t>(x), 0);
            for (std::size_t c = 0; c < us.c; ++c) out[c] += wgt * in[c];
          }
        }
      }
    }
  }
  return v;
}

Var bilinear_sample(Graph& g, Var u, Var grid) {
  Tensor v = bilinear_sample_forward(g.value(u), g.value(grid));
  return g.record(std::move(v), {u, grid}, [u, grid](Graph& gr, Var self) {
    const Tensor& dv = gr.grad_slot(self);
    const Tensor& uv = gr.value(u);
    const Tensor& gv = gr.value(grid);
    const Shape& us = uv.shape();
    const Shape& gs = gv.shape();
    Tensor* du = gr.requires_grad(u) ? &gr.grad_slot(u) : nullptr;
    Tensor* dg = gr.requires_grad(grid) ? &gr.grad_slot(grid) : nullptr;
    const long H = static_cast<long>(us.h);
    const long W = static_cast<long>(us.w);
    auto inside = [&](long y, long x) { return y >= 0 && y < H && x >= 0 && x < W; };
    for (std::size_t b = 0; b < us.n; ++b) {
      for (std::size_t i = 0; i < gs.h; ++i) {
        for (std::size_t j = 0; j < gs.w; ++j) {
          const Tap t = locate(gv(b, i, j, 0), gv(b, i, j, 1), us.w, us.h);
          const double* d = dv.data() + dv.index(b, i, j, 0);
          double dpx = 0.0, dpy = 0.0;
          for (int oy = 0; oy < 2; ++oy) {
            for (int ox = 0; ox < 2; ++ox) {
              const long y = t.y0 + oy;
              const long x = t.x0 + ox;
              if (!inside(y, x)) continue;
              const double wy = oy ? t.wy : 1.0 - t.wy;
              const double wx = ox ? t.wx : 1.0 - t.wx;
              const std::size_t base = uv.index(b, static_cast<std::size_t>(y), static_cast<std::size_t>(x), 0);
              for (std::size_t c = 0; c < us.c; ++c) {
                if (du != nullptr) (*du)[base + c] += wy * wx * d[c];
                // d(weight)/d(px) is +wy for the right column, -wy for the left.
                dpx += (ox ? wy : -wy) * uv[base + c] * d[c];
                dpy += (oy ? wx : -wx) * uv[base + c] * d[c];
              }
            }
          }
          if (dg != nullptr) {
            (*dg)(b, i, j, 0) += dpx * half_extent(us.w);
            (*dg)(b, i, j, 1) += dpy * half_extent(us.h);
          }
        }
      }
    }
  });
}

}  // namespace siamtrack::net
