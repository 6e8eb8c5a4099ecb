#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "siamtrack/tensor.hpp"

namespace siamtrack {

/// Axis-aligned box, top-left origin, 0-based continuous pixel coordinates.
struct Box {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double cx() const { return x + 0.5 * w; }
  double cy() const { return y + 0.5 * h; }
  bool valid() const { return w > 0.0 && h > 0.0; }
  static Box from_center(double cx, double cy, double w, double h) {
    return {cx - 0.5 * w, cy - 0.5 * h, w, h};
  }
  bool operator==(const Box&) const = default;
};

double iou(const Box& a, const Box& b);

/// Single-channel image with intensities in [0, 1], row-major.
class Image {
 public:
  Image() = default;
  Image(std::size_t width, std::size_t height, double fill = 0.0)
      : width_(width), height_(height), pixels_(width * height, fill) {}

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  bool empty() const { return pixels_.empty(); }
  double& at(std::size_t x, std::size_t y) { return pixels_[y * width_ + x]; }
  double at(std::size_t x, std::size_t y) const { return pixels_[y * width_ + x]; }
  std::span<double> pixels() { return pixels_; }
  std::span<const double> pixels() const { return pixels_; }
  double mean() const;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<double> pixels_;
};

/// Reads any format OpenCV decodes. Multi-channel images become the plain
/// average of their channels; 16-bit data is scaled by 1/65535.
Image load_image(const std::filesystem::path& path);
/// 8-bit grayscale PNG.
void save_png(const Image& img, const std::filesystem::path& path);
/// Colour PNG with box outlines; colours are BGR.
struct Overlay {
  Box box;
  unsigned char b, g, r;
};
void save_overlay(const Image& img, std::span<const Overlay> boxes, const std::filesystem::path& path);

/// Rounds to the nearest 8-bit level, as a PNG round-trip would.
void quantize_8bit(Image& img);

/// Square bilinear crop of side `side` (source pixels) centred on (cx, cy),
/// resampled to `out_size` x `out_size`. Output pixel i samples the source
/// at cx + (i + 0.5 - out_size / 2) * side / out_size. Samples outside the
/// frame read `fill`.
Image crop_resample(const Image& img, double cx, double cy, double side, std::size_t out_size,
                    double fill);

/// (1, h, w, 1) tensor of the image.
Tensor to_tensor(const Image& img);

}  // namespace siamtrack
