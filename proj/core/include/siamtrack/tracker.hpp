#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "siamtrack/dataset.hpp"
#include "siamtrack/image.hpp"
#include "siamtrack/model.hpp"

namespace siamtrack::track {

/// Common interface of everything the evaluation protocol can drive.
class Tracker {
 public:
  virtual ~Tracker() = default;
  /// Frame index is the position in the sequence; returns the echoed box.
  virtual Box initialize(const Image& frame, const Box& box, std::size_t frame_index) = 0;
  virtual Box update(const Image& frame, std::size_t frame_index) = 0;
};

enum class TemplateUpdate { kFrozen, kCfRefresh };

struct TrackerConfig {
  std::array<double, 3> scales{0.9745, 1.0, 1.0375};
  /// new = (1 - damping) * old + damping * chosen
  double scale_damping = 0.59;
  TemplateUpdate template_update = TemplateUpdate::kFrozen;
  /// template = (1 - rate) * template + rate * fresh
  double update_rate = 0.01;
  /// Peaks of the non-unit scales lose (1 - scale_penalty) of their magnitude; 1 disables.
  double scale_penalty = 1.0;
  /// Blend weight of a raised-cosine prior on the normalised response; 0 disables.
  double window_influence = 0.0;
  /// Bilinear response up-sampling factor; 1 disables.
  std::size_t upsample = 1;
  /// Scale is kept within [min_scale, max_scale] of the initial size.
  double min_scale = 0.2;
  double max_scale = 5.0;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

struct TrackerState {
  double cx = 0.0;
  double cy = 0.0;
  double base_w = 0.0;  // initial size
  double base_h = 0.0;
  double scale = 1.0;
  Tensor templ;  // (1, m, m, C)
  std::size_t frame_index = 0;

  double w() const { return base_w * scale; }
  double h() const { return base_h * scale; }
  Box box() const { return Box::from_center(cx, cy, w(), h()); }
};

/// Location of the best candidate over all scales.
struct Choice {
  std::size_t scale_index = 0;
  double row = 0.0;  // response-cell coordinates, fractional when up-sampled
  double col = 0.0;
  double score = 0.0;
};

/// Arg-max over the (n_scales, r, r, 1) responses after the optional window
/// prior, scale penalty and up-sampling.
Choice choose(const Tensor& responses, const TrackerConfig& cfg);

/// Image displacement k (u - c) / s of response cell u from the centre cell c,
/// for crop scale factor s.
double cell_to_pixels(double cell, std::size_t response_size, std::size_t stride, double crop_scale);

/// (1 - gamma) old + gamma chosen.
double damp_scale(double old_scale, double chosen, double gamma);

class SiameseTracker : public Tracker {
 public:
  SiameseTracker(SiameseModel& model, TrackerConfig cfg);

  Box initialize(const Image& frame, const Box& box, std::size_t frame_index = 0) override;
  Box update(const Image& frame, std::size_t frame_index) override;

  const TrackerState& state() const { return state_; }
  /// Response maps for every configured scale around the current state.
  Tensor responses(const Image& frame);
  /// Crop scale factor s (model input pixels per source pixel) at the current size.
  double crop_scale() const;

 private:
  Tensor exemplar_template(const Image& frame);

  SiameseModel& model_;
  TrackerConfig cfg_;
  TrackerState state_;
};

/// One box per frame; the first echoes `init`.
std::vector<Box> track_sequence(Tracker& tracker, const data::Sequence& seq, const Box& init);

}  // namespace siamtrack::track
