#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace siamtrack {

/// Dense 4-d extent. Feature maps use (batch, height, width, channels);
/// weight tensors reuse the same four slots (see net/layers.hpp).
struct Shape {
  std::size_t n = 1;
  std::size_t h = 1;
  std::size_t w = 1;
  std::size_t c = 1;

  std::size_t size() const { return n * h * w * c; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& s);

/// Row-major NHWC array of doubles. Channels are the fastest-varying index.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  std::size_t index(std::size_t n, std::size_t h, std::size_t w, std::size_t c) const {
    return ((n * shape_.h + h) * shape_.w + w) * shape_.c + c;
  }
  double& operator()(std::size_t n, std::size_t h, std::size_t w, std::size_t c) {
    return data_[index(n, h, w, c)];
  }
  double operator()(std::size_t n, std::size_t h, std::size_t w, std::size_t c) const {
    return data_[index(n, h, w, c)];
  }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  /// Number of elements in one batch item.
  std::size_t sample_size() const { return shape_.h * shape_.w * shape_.c; }
  double* sample_data(std::size_t n) { return data_.data() + n * sample_size(); }
  const double* sample_data(std::size_t n) const { return data_.data() + n * sample_size(); }

  /// Copy of batch item `n` as a batch of one.
  Tensor sample(std::size_t n) const;
  /// Concatenate along the batch axis; all parts must agree on (h, w, c).
  static Tensor stack(std::span<const Tensor> parts);

  void fill(double v);
  Tensor& operator+=(const Tensor& other);
  Tensor& operator*=(double s);
  bool all_finite() const;
  /// Reinterpret with a new shape of equal element count.
  Tensor reshaped(Shape shape) const;

 private:
  Shape shape_{0, 0, 0, 0};
  std::vector<double> data_;
};

/// A rank-3 (H x W x C) map, optionally batched along n.
using FeatureMap = Tensor;

}  // namespace siamtrack
