#include "siamtrack/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "siamtrack/cf.hpp"
#include "siamtrack/errors.hpp"
#include "siamtrack/train.hpp"

namespace siamtrack::track {

void TrackerConfig::validate() const {
  if (!std::is_sorted(scales.begin(), scales.end()) || scales[1] != 1.0 || !(scales[0] > 0.0)) {
    throw ConfigError("tracker.scales: must be positive, ascending, with middle scale 1");
  }
  if (scale_damping < 0.0 || scale_damping > 1.0) throw ConfigError("tracker.scale_damping: must be in [0, 1]");
  if (update_rate < 0.0 || update_rate > 1.0) throw ConfigError("tracker.update_rate: must be in [0, 1]");
  if (scale_penalty <= 0.0 || scale_penalty > 1.0) throw ConfigError("tracker.scale_penalty: must be in (0, 1]");
  if (window_influence < 0.0 || window_influence > 1.0) {
    throw ConfigError("tracker.window_influence: must be in [0, 1]");
  }
  if (upsample == 0) throw ConfigError("tracker.upsample: must be >= 1");
  if (!(min_scale > 0.0) || min_scale > 1.0 || max_scale < 1.0) {
    throw ConfigError("tracker.min_scale/max_scale: need 0 < min_scale <= 1 <= max_scale");
  }
}

namespace {

Tensor upsample_map(const Tensor& r, std::size_t factor) {
  if (factor == 1) return r;
  const std::size_t n = r.shape().h;
  const std::size_t u = (n - 1) * factor + 1;
  Tensor out({1, u, u, 1});
  for (std::size_t i = 0; i < u; ++i) {
    const double si = static_cast<double>(i) / static_cast<double>(factor);
    const std::size_t i0 = std::min(static_cast<std::size_t>(si), n - 2);
    const double fi = si - static_cast<double>(i0);
    for (std::size_t j = 0; j < u; ++j) {
      const double sj = static_cast<double>(j) / static_cast<double>(factor);
      const std::size_t j0 = std::min(static_cast<std::size_t>(sj), n - 2);
      const double fj = sj - static_cast<double>(j0);
      out(0, i, j, 0) = (1 - fi) * ((1 - fj) * r(0, i0, j0, 0) + fj * r(0, i0, j0 + 1, 0)) +
                        fi * ((1 - fj) * r(0, i0 + 1, j0, 0) + fj * r(0, i0 + 1, j0 + 1, 0));
    }
  }
  return out;
}

}  // namespace

Choice choose(const Tensor& responses, const TrackerConfig& cfg) {
  const Shape& s = responses.shape();
  const std::size_t mid = s.n / 2;
  Choice best;
  best.score = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < s.n; ++k) {
    Tensor r = upsample_map(responses.sample(k), s.h > 1 ? cfg.upsample : 1);
    const std::size_t n = r.shape().h;
    if (cfg.window_influence > 0.0) {
      const auto [lo, hi] = std::minmax_element(r.values().begin(), r.values().end());
      const double range = *hi - *lo;
      const Tensor win = cf::cosine_window(n);
      for (std::size_t i = 0; i < r.size(); ++i) {
        const double norm = range > 0.0 ? (r[i] - *lo) / range : 0.0;
        r[i] = (1.0 - cfg.window_influence) * norm + cfg.window_influence * win[i];
      }
    }
    const auto it = std::max_element(r.values().begin(), r.values().end());
    double peak = *it;
    if (k != mid) peak -= (1.0 - cfg.scale_penalty) * std::abs(peak);
    if (peak > best.score) {
      const auto idx = static_cast<std::size_t>(it - r.values().begin());
      const double f = static_cast<double>(s.h > 1 ? cfg.upsample : 1);
      best.scale_index = k;
      best.row = static_cast<double>(idx / n) / f;
      best.col = static_cast<double>(idx % n) / f;
      best.score = peak;
    }
  }
  return best;
}

double cell_to_pixels(double cell, std::size_t response_size, std::size_t stride, double crop_scale) {
  const double centre = (static_cast<double>(response_size) - 1.0) / 2.0;
  return static_cast<double>(stride) * (cell - centre) / crop_scale;
}

double damp_scale(double old_scale, double chosen, double gamma) {
  return (1.0 - gamma) * old_scale + gamma * chosen;
}

SiameseTracker::SiameseTracker(SiameseModel& model, TrackerConfig cfg)
    : model_(model), cfg_(std::move(cfg)) {
  cfg_.validate();
}

double SiameseTracker::crop_scale() const {
  const ModelConfig& mc = model_.config();
  return train::crop_geometry(state_.box(), mc.exemplar_size, mc.search_size).scale;
}

Tensor SiameseTracker::exemplar_template(const Image& frame) {
  const ModelConfig& mc = model_.config();
  const auto geo = train::crop_geometry(state_.box(), mc.exemplar_size, mc.search_size);
  const Image crop = crop_resample(frame, state_.cx, state_.cy, geo.exemplar_side, mc.exemplar_size,
                                   frame.mean());
  net::Graph g(false);
  const net::Var f = model_.exemplar_embedding(g, g.constant(to_tensor(crop)), net::Mode::kEval);
  return g.value(model_.make_template(g, f));
}

Box SiameseTracker::initialize(const Image& frame, const Box& box, std::size_t frame_index) {
  if (!box.valid()) throw ConfigError("tracker: degenerate initial box");
  state_ = {};
  state_.cx = box.cx();
  state_.cy = box.cy();
  state_.base_w = box.w;
  state_.base_h = box.h;
  state_.scale = 1.0;
  state_.frame_index = frame_index;
  state_.templ = exemplar_template(frame);
  return box;
}

Tensor SiameseTracker::responses(const Image& frame) {
  const ModelConfig& mc = model_.config();
  const auto geo = train::crop_geometry(state_.box(), mc.exemplar_size, mc.search_size);
  const double fill = frame.mean();
  std::vector<Image> crops;
  for (double sc : cfg_.scales)
    crops.push_back(crop_resample(frame, state_.cx, state_.cy, geo.search_side * sc, mc.search_size, fill));
  net::Graph g(false);
  const net::Var z = model_.embed(g, g.constant(train::stack_images(crops)), net::Mode::kEval);
  return g.value(model_.score(g, g.constant(state_.templ), z));
}

Box SiameseTracker::update(const Image& frame, std::size_t frame_index) {
  const Tensor r = responses(frame);
  const Choice c = choose(r, cfg_);
  const ModelGeometry& geo = model_.geom();
  const double s_i = crop_scale() / cfg_.scales[c.scale_index];
  state_.cx += cell_to_pixels(c.col, geo.response_size, geo.stride, s_i);
  state_.cy += cell_to_pixels(c.row, geo.response_size, geo.stride, s_i);
  state_.cx = std::clamp(state_.cx, 0.0, static_cast<double>(frame.width()));
  state_.cy = std::clamp(state_.cy, 0.0, static_cast<double>(frame.height()));
  const double chosen = state_.scale * cfg_.scales[c.scale_index];
  state_.scale = std::clamp(damp_scale(state_.scale, chosen, cfg_.scale_damping), cfg_.min_scale,
                            cfg_.max_scale);
  state_.frame_index = frame_index;
  if (cfg_.template_update == TemplateUpdate::kCfRefresh && cfg_.update_rate > 0.0) {
    const Tensor fresh = exemplar_template(frame);
    const double rho = cfg_.update_rate;
    for (std::size_t i = 0; i < fresh.size(); ++i)
      state_.templ[i] = (1.0 - rho) * state_.templ[i] + rho * fresh[i];
  }
  return state_.box();
}

std::vector<Box> track_sequence(Tracker& tracker, const data::Sequence& seq, const Box& init) {
  if (seq.size() == 0) throw IoError("sequence " + seq.name + " is empty");
  std::vector<Box> out;
  out.reserve(seq.size());
  out.push_back(tracker.initialize(seq.frame(0), init, 0));
  for (std::size_t f = 1; f < seq.size(); ++f) out.push_back(tracker.update(seq.frame(f), f));
  return out;
}

}  // namespace siamtrack::track
