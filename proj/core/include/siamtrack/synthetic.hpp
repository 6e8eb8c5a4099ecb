#pragma once

#include <cstdint>

#include "siamtrack/dataset.hpp"

namespace siamtrack::data {

/// Thermal-like scenes: a bright Gaussian target and dimmer distractors
/// drifting over a smooth textured background.
struct SyntheticConfig {
  std::size_t sequences = 8;
  std::size_t frames = 100;
  std::size_t width = 192;
  std::size_t height = 160;
  std::size_t distractors = 2;
  double background_level = 0.05;
  double background_amplitude = 0.3;
  /// Side of the coarse value-noise lattice, in pixels.
  double texture_cell = 16.0;
  double noise_sigma = 0.01;
  double target_amplitude_min = 0.55;
  double target_amplitude_max = 0.65;
  double distractor_amplitude_min = 0.2;
  double distractor_amplitude_max = 0.3;
  double sigma_min = 4.0;
  double sigma_max = 8.0;
  /// Per-frame speed cap and random acceleration, pixels per frame.
  double max_speed = 2.0;
  double acceleration = 0.3;
  std::uint64_t seed = 7;
};

/// Target box is (4 sigma_x) x (4 sigma_y) centred on the blob. Frames are
/// quantised to 8 bits so a disk round-trip is lossless.
SequenceDataset gen_synthetic(const SyntheticConfig& cfg);

}  // namespace siamtrack::data
