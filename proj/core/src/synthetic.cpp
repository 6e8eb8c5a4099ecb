#include "siamtrack/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "siamtrack/errors.hpp"

namespace siamtrack::data {

namespace {

struct Blob {
  double x, y;    // centre
  double vx, vy;  // velocity
  double sx, sy;  // standard deviations
  double amplitude;
};

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

Image value_noise(const SyntheticConfig& cfg, std::mt19937_64& rng) {
  Image bg(cfg.width, cfg.height, cfg.background_level);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  // Two octaves: coarse lattice and one at half the cell size.
  const double weights[2] = {0.65, 0.35};
  for (int octave = 0; octave < 2; ++octave) {
    const double cell = cfg.texture_cell / (1 << octave);
    const auto gw = static_cast<std::size_t>(std::ceil(cfg.width / cell)) + 2;
    const auto gh = static_cast<std::size_t>(std::ceil(cfg.height / cell)) + 2;
    std::vector<double> lattice(gw * gh);
    for (double& v : lattice) v = unit(rng);
    for (std::size_t y = 0; y < cfg.height; ++y) {
      const double gy = y / cell;
      const auto y0 = static_cast<std::size_t>(gy);
      const double ty = smoothstep(gy - y0);
      for (std::size_t x = 0; x < cfg.width; ++x) {
        const double gx = x / cell;
        const auto x0 = static_cast<std::size_t>(gx);
        const double tx = smoothstep(gx - x0);
        const double a = lattice[y0 * gw + x0], b = lattice[y0 * gw + x0 + 1];
        const double c = lattice[(y0 + 1) * gw + x0], d = lattice[(y0 + 1) * gw + x0 + 1];
        const double v = (1 - ty) * ((1 - tx) * a + tx * b) + ty * ((1 - tx) * c + tx * d);
        bg.at(x, y) += cfg.background_amplitude * weights[octave] * v;
      }
    }
  }
  return bg;
}

Blob spawn(const SyntheticConfig& cfg, std::mt19937_64& rng, double amp_lo, double amp_hi) {
  std::uniform_real_distribution<double> sigma(cfg.sigma_min, cfg.sigma_max);
  std::uniform_real_distribution<double> amp(amp_lo, amp_hi);
  std::uniform_real_distribution<double> vel(-cfg.max_speed, cfg.max_speed);
  Blob b{};
  b.sx = sigma(rng);
  b.sy = std::clamp(b.sx * std::uniform_real_distribution<double>(0.7, 1.4)(rng), cfg.sigma_min,
                    cfg.sigma_max);
  std::uniform_real_distribution<double> px(2.0 * b.sx, cfg.width - 2.0 * b.sx);
  std::uniform_real_distribution<double> py(2.0 * b.sy, cfg.height - 2.0 * b.sy);
  b.x = px(rng);
  b.y = py(rng);
  b.vx = vel(rng);
  b.vy = vel(rng);
  b.amplitude = amp(rng);
  return b;
}

// Random smooth walk reflected so the box stays inside the frame.
void advance(Blob& b, const SyntheticConfig& cfg, std::mt19937_64& rng) {
  std::normal_distribution<double> acc(0.0, cfg.acceleration);
  b.vx += acc(rng);
  b.vy += acc(rng);
  const double speed = std::hypot(b.vx, b.vy);
  if (speed > cfg.max_speed) {
    b.vx *= cfg.max_speed / speed;
    b.vy *= cfg.max_speed / speed;
  }
  b.x += b.vx;
  b.y += b.vy;
  const double lo_x = 2.0 * b.sx, hi_x = cfg.width - 2.0 * b.sx;
  const double lo_y = 2.0 * b.sy, hi_y = cfg.height - 2.0 * b.sy;
  if (b.x < lo_x) { b.x = 2 * lo_x - b.x; b.vx = std::abs(b.vx); }
  if (b.x > hi_x) { b.x = 2 * hi_x - b.x; b.vx = -std::abs(b.vx); }
  if (b.y < lo_y) { b.y = 2 * lo_y - b.y; b.vy = std::abs(b.vy); }
  if (b.y > hi_y) { b.y = 2 * hi_y - b.y; b.vy = -std::abs(b.vy); }
}

void render(Image& img, const Blob& b) {
  const auto x0 = static_cast<long>(std::max(0.0, std::floor(b.x - 4 * b.sx)));
  const auto x1 = static_cast<long>(std::min<double>(img.width() - 1, std::ceil(b.x + 4 * b.sx)));
  const auto y0 = static_cast<long>(std::max(0.0, std::floor(b.y - 4 * b.sy)));
  const auto y1 = static_cast<long>(std::min<double>(img.height() - 1, std::ceil(b.y + 4 * b.sy)));
  for (long y = y0; y <= y1; ++y) {
    // Pixel centres at integer + 0.5.
    const double dy = (y + 0.5 - b.y) / b.sy;
    for (long x = x0; x <= x1; ++x) {
      const double dx = (x + 0.5 - b.x) / b.sx;
      img.at(x, y) += b.amplitude * std::exp(-0.5 * (dx * dx + dy * dy));
    }
  }
}

}  // namespace

SequenceDataset gen_synthetic(const SyntheticConfig& cfg) {
  if (cfg.width < 8 * cfg.sigma_max || cfg.height < 8 * cfg.sigma_max) {
    throw ConfigError("synthetic.width/height: frame too small for sigma_max " +
                      std::to_string(cfg.sigma_max));
  }
  if (!(cfg.sigma_min > 0.0) || cfg.sigma_min > cfg.sigma_max) {
    throw ConfigError("synthetic.sigma_min: must be in (0, sigma_max]");
  }
  SequenceDataset ds;
  ds.source = Source::kSynthetic;
  std::mt19937_64 master(cfg.seed);
  for (std::size_t s = 0; s < cfg.sequences; ++s) {
    std::mt19937_64 rng(master());
    Sequence seq;
    char name[32];
    std::snprintf(name, sizeof name, "synth%03zu", s + 1);
    seq.name = name;
    const Image background = value_noise(cfg, rng);
    Blob target = spawn(cfg, rng, cfg.target_amplitude_min, cfg.target_amplitude_max);
    std::vector<Blob> others;
    for (std::size_t d = 0; d < cfg.distractors; ++d)
      others.push_back(spawn(cfg, rng, cfg.distractor_amplitude_min, cfg.distractor_amplitude_max));
    std::normal_distribution<double> noise(0.0, cfg.noise_sigma);
    for (std::size_t f = 0; f < cfg.frames; ++f) {
      if (f > 0) {
        advance(target, cfg, rng);
        for (Blob& o : others) advance(o, cfg, rng);
      }
      Image frame = background;
      for (const Blob& o : others) render(frame, o);
      render(frame, target);
      if (cfg.noise_sigma > 0.0)
        for (double& v : frame.pixels()) v += noise(rng);
      quantize_8bit(frame);
      seq.images.push_back(std::move(frame));
      seq.boxes.push_back(Box::from_center(target.x, target.y, 4.0 * target.sx, 4.0 * target.sy));
    }
    ds.sequences.push_back(std::move(seq));
  }
  return ds;
}

}  // namespace siamtrack::data
