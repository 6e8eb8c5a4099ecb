#include "siamtrack/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "siamtrack/errors.hpp"

namespace siamtrack {

std::string to_string(const Shape& s) {
  return "(" + std::to_string(s.n) + "," + std::to_string(s.h) + "," + std::to_string(s.w) + "," +
         std::to_string(s.c) + ")";
}

Tensor::Tensor(Shape shape, double fill) : shape_(shape), data_(shape.size(), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(shape), data_(std::move(values)) {
  if (data_.size() != shape_.size()) {
    throw ShapeError("tensor: " + std::to_string(data_.size()) + " values for shape " +
                     to_string(shape_));
  }
}

Tensor Tensor::sample(std::size_t n) const {
  if (n >= shape_.n) throw ShapeError("tensor: batch index out of range");
  Tensor out({1, shape_.h, shape_.w, shape_.c});
  std::copy_n(sample_data(n), sample_size(), out.data());
  return out;
}

Tensor Tensor::stack(std::span<const Tensor> parts) {
  if (parts.empty()) return Tensor();
  Shape s = parts.front().shape();
  std::size_t total = 0;
  for (const auto& p : parts) {
    const auto& ps = p.shape();
    if (ps.h != s.h || ps.w != s.w || ps.c != s.c) {
      throw ShapeError("tensor stack: " + to_string(ps) + " vs " + to_string(s));
    }
    total += ps.n;
  }
  s.n = total;
  Tensor out(s);
  double* dst = out.data();
  for (const auto& p : parts) dst = std::copy(p.data_.begin(), p.data_.end(), dst);
  return out;
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor& Tensor::operator+=(const Tensor& other) {
  if (!(other.shape_ == shape_)) {
    throw ShapeError("tensor +=: " + to_string(other.shape_) + " vs " + to_string(shape_));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Tensor& Tensor::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape.size() != size()) {
    throw ShapeError("tensor reshape: " + to_string(shape_) + " -> " + to_string(shape));
  }
  Tensor out = *this;
  out.shape_ = shape;
  return out;
}

}  // namespace siamtrack
