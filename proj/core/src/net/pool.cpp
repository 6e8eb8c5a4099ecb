#include <limits>

#include "siamtrack/errors.hpp"
#include "siamtrack/net/layers.hpp"

namespace siamtrack::net {

Tensor maxpool_forward(const Tensor& x, const LayerSpec& spec, std::vector<std::size_t>* argmax) {
  const Shape& xs = x.shape();
  LayerSpec as_pool = spec;
  as_pool.kind = LayerKind::kMaxPool;
  const Shape os = infer_shape(as_pool, xs);
  Tensor out(os);
  if (argmax != nullptr) argmax->assign(out.size(), 0);
  const long pad = static_cast<long>(spec.padding);
  for (std::size_t n = 0; n < os.n; ++n) {
    for (std::size_t oh = 0; oh < os.h; ++oh) {
      for (std::size_t ow = 0; ow < os.w; ++ow) {
        for (std::size_t c = 0; c < os.c; ++c) {
          double best = -std::numeric_limits<double>::infinity();
          std::size_t best_index = 0;
          for (std::size_t kh = 0; kh < spec.kernel; ++kh) {
            const long ih = static_cast<long>(oh * spec.stride + kh) - pad;
            if (ih < 0 || ih >= static_cast<long>(xs.h)) continue;
            for (std::size_t kw = 0; kw < spec.kernel; ++kw) {
              const long iw = static_cast<long>(ow * spec.stride + kw) - pad;
              if (iw < 0 || iw >= static_cast<long>(xs.w)) continue;
              const std::size_t i = x.index(n, static_cast<std::size_t>(ih), static_cast<std::size_t>(iw), c);
              if (x[i] > best) {
                best = x[i];
                best_index = i;
              }
            }
          }
          const std::size_t o = out.index(n, oh, ow, c);
          out[o] = best;
          if (argmax != nullptr) (*argmax)[o] = best_index;
        }
      }
    }
  }
  return out;
}

void maxpool_backward(const Tensor& dy, std::span<const std::size_t> argmax, Tensor& dx) {
  if (argmax.size() != dy.size()) throw ShapeError("maxpool backward: argmax size mismatch");
  for (std::size_t o = 0; o < dy.size(); ++o) dx[argmax[o]] += dy[o];
}

Var maxpool(Graph& g, Var x, const LayerSpec& spec) {
  std::vector<std::size_t> argmax;
  Tensor out = maxpool_forward(g.value(x), spec, g.recording() ? &argmax : nullptr);
  return g.record(std::move(out), {x}, [x, argmax = std::move(argmax)](Graph& gr, Var self) {
    maxpool_backward(gr.grad_slot(self), argmax, gr.grad_slot(x));
  });
}

}  // namespace siamtrack::net
