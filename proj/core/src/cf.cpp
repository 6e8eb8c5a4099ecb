#include "siamtrack/cf.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <map>
#include <mutex>
#include <numbers>
#include <tuple>
#include <vector>

#include "siamtrack/errors.hpp"
#include "siamtrack/net/layers.hpp"

namespace siamtrack::cf {

namespace {

using cplx = std::complex<double>;

// Batched 2-D DFT of d interleaved channels of an m x m map. Plans are
// created once per (m, d, sign); execution through the new-array interface
// is thread-safe.
class Fft {
 public:
  static void run(std::size_t m, std::size_t d, int sign, const cplx* in, cplx* out) {
    fftw_plan plan = instance().plan(m, d, sign);
    fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in)),
                     reinterpret_cast<fftw_complex*>(out));
  }

 private:
  static Fft& instance() {
    static Fft fft;
    return fft;
  }

  ~Fft() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  fftw_plan plan(std::size_t m, std::size_t d, int sign) {
    std::lock_guard lock(mutex_);
    const auto key = std::make_tuple(m, d, sign);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    const int n[2] = {static_cast<int>(m), static_cast<int>(m)};
    const int dist = 1;
    const int stride = static_cast<int>(d);
    std::vector<cplx> a(m * m * d), b(m * m * d);
    fftw_plan p = fftw_plan_many_dft(2, n, static_cast<int>(d),
                                     reinterpret_cast<fftw_complex*>(a.data()), nullptr, stride,
                                     dist, reinterpret_cast<fftw_complex*>(b.data()), nullptr,
                                     stride, dist, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (p == nullptr) throw std::runtime_error("fftw: plan creation failed");
    plans_.emplace(key, p);
    return p;
  }

  std::mutex mutex_;
  std::map<std::tuple<std::size_t, std::size_t, int>, fftw_plan> plans_;
};

std::size_t check_square(const Shape& s) {
  if (s.h != s.w) throw ShapeError("solve_cf: feature map must be square, got " + to_string(s));
  if (s.h == 0 || s.c == 0) throw ShapeError("solve_cf: empty feature map " + to_string(s));
  return s.h;
}

void check_lambda(double lambda) {
  if (!(lambda > 0.0)) throw ConfigError("cf.lambda: must be > 0");
}

std::vector<cplx> forward_fft(const double* x, std::size_t m, std::size_t d) {
  std::vector<cplx> in(x, x + m * m * d), out(m * m * d);
  Fft::run(m, d, FFTW_FORWARD, in.data(), out.data());
  return out;
}

std::vector<cplx> target_spectrum(std::size_t m, double sigma) {
  const Tensor y = gaussian_target(m, sigma);
  return forward_fft(y.data(), m, 1);
}

// Shared denominator sum_c |X_c|^2 + lambda per bin.
std::vector<double> denominator(const std::vector<cplx>& X, std::size_t bins, std::size_t d,
                                double lambda) {
  std::vector<double> D(bins, lambda);
  for (std::size_t k = 0; k < bins; ++k)
    for (std::size_t c = 0; c < d; ++c) D[k] += std::norm(X[k * d + c]);
  return D;
}

}  // namespace

Tensor gaussian_target(std::size_t m, double sigma) {
  if (!(sigma > 0.0)) throw ConfigError("cf.sigma: must be > 0");
  Tensor y({1, m, m, 1});
  for (std::size_t i = 0; i < m; ++i) {
    const double di = static_cast<double>(std::min(i, m - i));
    for (std::size_t j = 0; j < m; ++j) {
      const double dj = static_cast<double>(std::min(j, m - j));
      y(0, i, j, 0) = std::exp(-(di * di + dj * dj) / (2.0 * sigma * sigma));
    }
  }
  return y;
}

Tensor cosine_window(std::size_t m) {
  std::vector<double> v(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double k = static_cast<double>(std::min(i, m - 1 - i));
    const double s = std::sin(std::numbers::pi * (k + 0.5) / static_cast<double>(m));
    v[i] = s * s;
  }
  Tensor w({1, m, m, 1});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) w(0, i, j, 0) = v[i] * v[j];
  return w;
}

Tensor solve_cf_forward(const Tensor& x, double lambda, double sigma) {
  const Shape& s = x.shape();
  const std::size_t m = check_square(s);
  check_lambda(lambda);
  const std::size_t d = s.c;
  const std::size_t bins = m * m;
  const std::vector<cplx> Y = target_spectrum(m, sigma);
  Tensor w(s);
  std::vector<cplx> W(bins * d), out(bins * d);
  for (std::size_t n = 0; n < s.n; ++n) {
    const std::vector<cplx> X = forward_fft(x.sample_data(n), m, d);
    const std::vector<double> D = denominator(X, bins, d, lambda);
    for (std::size_t k = 0; k < bins; ++k)
      for (std::size_t c = 0; c < d; ++c) W[k * d + c] = X[k * d + c] * std::conj(Y[k]) / D[k];
    Fft::run(m, d, FFTW_BACKWARD, W.data(), out.data());
    double* dst = w.sample_data(n);
    for (std::size_t i = 0; i < bins * d; ++i) dst[i] = out[i].real() / static_cast<double>(bins);
  }
  return w;
}

Tensor solve_cf_backward(const Tensor& x, const Tensor& g, double lambda, double sigma) {
  const Shape& s = x.shape();
  const std::size_t m = check_square(s);
  const std::size_t d = s.c;
  const std::size_t bins = m * m;
  const double inv_n = 1.0 / static_cast<double>(bins);
  const std::vector<cplx> Y = target_spectrum(m, sigma);
  Tensor dx(s);
  std::vector<cplx> B(bins * d), out(bins * d);
  for (std::size_t n = 0; n < s.n; ++n) {
    const std::vector<cplx> X = forward_fft(x.sample_data(n), m, d);
    const std::vector<cplx> G = forward_fft(g.sample_data(n), m, d);
    const std::vector<double> D = denominator(X, bins, d, lambda);
    for (std::size_t k = 0; k < bins; ++k) {
      const cplx yc = std::conj(Y[k]);
      double S = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const cplx A = std::conj(G[k * d + c]) * inv_n;
        S += (X[k * d + c] * yc * A).real();
      }
      S /= D[k] * D[k];
      for (std::size_t c = 0; c < d; ++c) {
        const cplx A = std::conj(G[k * d + c]) * inv_n;
        B[k * d + c] = yc * A / D[k] - 2.0 * S * std::conj(X[k * d + c]);
      }
    }
    Fft::run(m, d, FFTW_FORWARD, B.data(), out.data());
    double* dst = dx.sample_data(n);
    for (std::size_t i = 0; i < bins * d; ++i) dst[i] = out[i].real();
  }
  return dx;
}

net::Var solve_cf(net::Graph& g, net::Var x, double lambda, double sigma) {
  Tensor w = solve_cf_forward(g.value(x), lambda, sigma);
  return g.record(std::move(w), {x}, [x, lambda, sigma](net::Graph& gr, net::Var self) {
    gr.grad_slot(x) += solve_cf_backward(gr.value(x), gr.grad_slot(self), lambda, sigma);
  });
}

CFTemplate solve_cf(const Tensor& x, double lambda, double sigma) {
  CFTemplate t;
  t.w = solve_cf_forward(x, lambda, sigma);
  t.lambda = lambda;
  t.gauss_sigma = sigma;
  return t;
}

net::Var make_template(net::Graph& g, net::Var x, const CFConfig& cfg) {
  const std::size_t m = check_square(g.value(x).shape());
  if (cfg.cosine_window) x = net::spatial_mask(g, x, cosine_window(m));
  return solve_cf(g, x, cfg.lambda(m), cfg.sigma(m));
}

double fourier_objective(const Tensor& x, const Tensor& w, double lambda, double sigma) {
  const Shape& s = x.shape();
  const std::size_t m = check_square(s);
  const std::size_t d = s.c;
  const std::size_t bins = m * m;
  const std::vector<cplx> Y = target_spectrum(m, sigma);
  double total = 0.0;
  for (std::size_t n = 0; n < s.n; ++n) {
    const std::vector<cplx> X = forward_fft(x.sample_data(n), m, d);
    const std::vector<cplx> W = forward_fft(w.sample_data(n), m, d);
    for (std::size_t k = 0; k < bins; ++k) {
      cplx r = -Y[k];
      for (std::size_t c = 0; c < d; ++c) {
        r += std::conj(W[k * d + c]) * X[k * d + c];
        total += lambda * std::norm(W[k * d + c]);
      }
      total += std::norm(r);
    }
  }
  return total / static_cast<double>(bins);
}

namespace {

void check_correlation(const Shape& ws, const Shape& zs) {
  if (ws.c != zs.c) {
    throw ShapeError("cross_correlate: template has " + std::to_string(ws.c) +
                     " channels, search has " + std::to_string(zs.c));
  }
  if (ws.h > zs.h || ws.w > zs.w) {
    throw ShapeError("cross_correlate: template " + to_string(ws) + " larger than search " +
                     to_string(zs));
  }
  if (ws.n != 1 && ws.n != zs.n) {
    throw ShapeError("cross_correlate: template batch " + std::to_string(ws.n) +
                     " does not match search batch " + std::to_string(zs.n));
  }
}

Tensor as_kernel(const Tensor& w, std::size_t n) {
  const Shape& s = w.shape();
  const double* src = w.sample_data(s.n == 1 ? 0 : n);
  return Tensor({s.h, s.w, s.c, 1}, std::vector<double>(src, src + w.sample_size()));
}

net::LayerSpec correlation_spec(const Shape& ws) {
  return net::LayerSpec::conv("xcorr", ws.h, 1, 1);
}

}  // namespace

Tensor cross_correlate_forward(const Tensor& w, const Tensor& z) {
  const Shape& ws = w.shape();
  const Shape& zs = z.shape();
  check_correlation(ws, zs);
  if (ws.h != ws.w) throw ShapeError("cross_correlate: template must be square");
  const net::LayerSpec spec = correlation_spec(ws);
  const Tensor bias({1, 1, 1, 1});
  std::vector<Tensor> parts;
  parts.reserve(zs.n);
  for (std::size_t n = 0; n < zs.n; ++n)
    parts.push_back(net::conv2d_forward(z.sample(n), as_kernel(w, n), bias, spec));
  return Tensor::stack(parts);
}

net::Var cross_correlate(net::Graph& g, net::Var w, net::Var z) {
  Tensor out = cross_correlate_forward(g.value(w), g.value(z));
  return g.record(std::move(out), {w, z}, [w, z](net::Graph& gr, net::Var self) {
    const Tensor& wv = gr.value(w);
    const Tensor& zv = gr.value(z);
    const Tensor& dy = gr.grad_slot(self);
    const net::LayerSpec spec = correlation_spec(wv.shape());
    const bool want_w = gr.requires_grad(w);
    const bool want_z = gr.requires_grad(z);
    Tensor* dw = want_w ? &gr.grad_slot(w) : nullptr;
    Tensor* dz = want_z ? &gr.grad_slot(z) : nullptr;
    const std::size_t nz = zv.shape().n;
    for (std::size_t n = 0; n < nz; ++n) {
      const Tensor kernel = as_kernel(wv, n);
      Tensor dkernel(kernel.shape());
      Tensor dzn(zv.sample(n).shape());
      conv2d_backward(zv.sample(n), kernel, dy.sample(n), spec, want_z ? &dzn : nullptr,
                      want_w ? &dkernel : nullptr, nullptr);
      if (want_z) {
        double* dst = dz->sample_data(n);
        for (std::size_t i = 0; i < dzn.size(); ++i) dst[i] += dzn[i];
      }
      if (want_w) {
        double* dst = dw->sample_data(wv.shape().n == 1 ? 0 : n);
        for (std::size_t i = 0; i < dkernel.size(); ++i) dst[i] += dkernel[i];
      }
    }
  });
}

ResponseMap cross_correlate(const CFTemplate& t, const Tensor& z, std::size_t stride) {
  ResponseMap r;
  r.scores = cross_correlate_forward(t.w, z);
  r.stride = stride;
  return r;
}

ResponseMap crop(const ResponseMap& r, std::size_t margin) {
  net::Graph g(false);
  ResponseMap out;
  out.scores = g.value(net::crop(g, g.constant(r.scores), margin));
  out.stride = r.stride;
  out.origin = r.origin + margin;
  return out;
}

}  // namespace siamtrack::cf
