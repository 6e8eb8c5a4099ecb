#pragma once

#include <cstddef>
#include <optional>

#include "siamtrack/net/graph.hpp"
#include "siamtrack/tensor.hpp"

namespace siamtrack::cf {

/// Hyper-parameters of the correlation-filter block, relative to the
/// exemplar feature side m.
struct CFConfig {
  /// lambda = lambda_scale * m * m
  double lambda_scale = 1e-2;
  /// sigma = sigma_scale * m, in feature cells
  double sigma_scale = 0.1;
  bool cosine_window = true;
  /// Defaults to floor(m / 8) when unset.
  std::optional<std::size_t> crop_margin;

  double lambda(std::size_t m) const { return lambda_scale * static_cast<double>(m * m); }
  double sigma(std::size_t m) const { return sigma_scale * static_cast<double>(m); }
  std::size_t margin(std::size_t m) const { return crop_margin.value_or(m / 8); }
};

struct CFTemplate {
  Tensor w;  // (n, m, m, d)
  double lambda = 0.0;
  double gauss_sigma = 0.0;
  std::size_t crop_margin = 0;
};

/// Scores of a valid cross-correlation. Cell (i, j) of `scores` sits at cell
/// (i + origin, j + origin) of the uncropped correlation grid; multiply by
/// `stride` for search-image pixels.
struct ResponseMap {
  Tensor scores;  // (n, h, w, 1)
  std::size_t stride = 1;
  std::size_t origin = 0;
};

/// m x m Gaussian peaked at the circular origin: y[i][j] = exp(-(di^2 + dj^2) / (2 sigma^2))
/// with di = min(i, m - i).
Tensor gaussian_target(std::size_t m, double sigma);

/// Separable raised-cosine window sin^2(pi (i + 0.5) / m); strictly positive.
Tensor cosine_window(std::size_t m);

/// Per-sample closed-form ridge regression in the Fourier domain:
///   W_c = X_c conj(Y) / (sum_c |X_c|^2 + lambda)
/// which minimises sum_u (sum_{c,t} w_c[t] x_c[t + u] - y[u])^2 + lambda |w|^2
/// over circular shifts u.
Tensor solve_cf_forward(const Tensor& x, double lambda, double sigma);
/// Gradient of <g, solve_cf_forward(x)> with respect to x.
Tensor solve_cf_backward(const Tensor& x, const Tensor& g, double lambda, double sigma);

net::Var solve_cf(net::Graph& g, net::Var x, double lambda, double sigma);
CFTemplate solve_cf(const Tensor& x, double lambda, double sigma);

/// Optional window followed by solve_cf with the config's lambda and sigma.
net::Var make_template(net::Graph& g, net::Var x, const CFConfig& cfg);

/// Objective value of `w` evaluated bin-wise in the Fourier domain.
double fourier_objective(const Tensor& x, const Tensor& w, double lambda, double sigma);

/// Valid cross-correlation summed over channels:
///   out[n, i, j] = sum_{a, b, c} w[n', a, b, c] z[n, i + a, j + b, c]
/// with n' = n, or 0 when w has a single item.
Tensor cross_correlate_forward(const Tensor& w, const Tensor& z);
net::Var cross_correlate(net::Graph& g, net::Var w, net::Var z);
ResponseMap cross_correlate(const CFTemplate& t, const Tensor& z, std::size_t stride = 1);

ResponseMap crop(const ResponseMap& r, std::size_t margin);

}  // namespace siamtrack::cf
