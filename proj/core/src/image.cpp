#include "siamtrack/image.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "siamtrack/errors.hpp"

namespace siamtrack {

namespace {

// Overlap of [0, wa] and [d, d + wb]; exact for d = 0 and wa = wb.
double overlap_1d(double wa, double d, double wb) {
  return std::max(0.0, std::min(wa, d + wb) - std::max(0.0, d));
}

}  // namespace

double iou(const Box& a, const Box& b) {
  const double inter = overlap_1d(a.w, b.x - a.x, b.w) * overlap_1d(a.h, b.y - a.y, b.h);
  const double uni = a.w * a.h + b.w * b.h - inter;
  return uni > 0.0 ? std::min(1.0, inter / uni) : 0.0;
}

double Image::mean() const {
  if (pixels_.empty()) return 0.0;
  return std::accumulate(pixels_.begin(), pixels_.end(), 0.0) / static_cast<double>(pixels_.size());
}

Image load_image(const std::filesystem::path& path) {
  const cv::Mat raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (raw.empty()) throw IoError("cannot read image " + path.string());
  double scale = 1.0;
  switch (raw.depth()) {
    case CV_8U: scale = 1.0 / 255.0; break;
    case CV_16U: scale = 1.0 / 65535.0; break;
    case CV_32F:
    case CV_64F: scale = 1.0; break;
    default: throw IoError("unsupported pixel depth in " + path.string());
  }
  cv::Mat data;
  raw.convertTo(data, CV_64F, scale);
  const int channels = data.channels();
  Image img(static_cast<std::size_t>(data.cols), static_cast<std::size_t>(data.rows));
  for (int y = 0; y < data.rows; ++y) {
    const double* row = data.ptr<double>(y);
    for (int x = 0; x < data.cols; ++x) {
      double sum = 0.0;
      for (int c = 0; c < channels; ++c) sum += row[x * channels + c];
      img.at(x, y) = sum / channels;
    }
  }
  return img;
}

namespace {

cv::Mat to_mat8(const Image& img) {
  cv::Mat out(static_cast<int>(img.height()), static_cast<int>(img.width()), CV_8UC1);
  for (std::size_t y = 0; y < img.height(); ++y)
    for (std::size_t x = 0; x < img.width(); ++x)
      out.at<unsigned char>(static_cast<int>(y), static_cast<int>(x)) =
          static_cast<unsigned char>(std::lround(std::clamp(img.at(x, y), 0.0, 1.0) * 255.0));
  return out;
}

void write(const cv::Mat& m, const std::filesystem::path& path) {
  if (!cv::imwrite(path.string(), m)) throw IoError("cannot write image " + path.string());
}

}  // namespace

void save_png(const Image& img, const std::filesystem::path& path) { write(to_mat8(img), path); }

void save_overlay(const Image& img, std::span<const Overlay> boxes, const std::filesystem::path& path) {
  cv::Mat colour;
  cv::cvtColor(to_mat8(img), colour, cv::COLOR_GRAY2BGR);
  for (const Overlay& o : boxes) {
    const cv::Rect r(static_cast<int>(std::lround(o.box.x)), static_cast<int>(std::lround(o.box.y)),
                     static_cast<int>(std::lround(o.box.w)), static_cast<int>(std::lround(o.box.h)));
    cv::rectangle(colour, r, cv::Scalar(o.b, o.g, o.r), 1);
  }
  write(colour, path);
}

void quantize_8bit(Image& img) {
  for (double& v : img.pixels()) v = static_cast<double>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)) * (1.0 / 255.0);
}

Image crop_resample(const Image& img, double cx, double cy, double side, std::size_t out_size,
                    double fill) {
  Image out(out_size, out_size, fill);
  const double step = side / static_cast<double>(out_size);
  const double half = 0.5 * static_cast<double>(out_size);
  const auto w = static_cast<long>(img.width());
  const auto h = static_cast<long>(img.height());
  auto read = [&](long x, long y) {
    return (x < 0 || y < 0 || x >= w || y >= h) ? fill : img.at(x, y);
  };
  for (std::size_t i = 0; i < out_size; ++i) {
    // Pixel centres sit at integer + 0.5 in box coordinates.
    const double sy = cy + (static_cast<double>(i) + 0.5 - half) * step - 0.5;
    const long y0 = static_cast<long>(std::floor(sy));
    const double fy = sy - static_cast<double>(y0);
    for (std::size_t j = 0; j < out_size; ++j) {
      const double sx = cx + (static_cast<double>(j) + 0.5 - half) * step - 0.5;
      const long x0 = static_cast<long>(std::floor(sx));
      const double fx = sx - static_cast<double>(x0);
      out.at(j, i) = (1 - fy) * ((1 - fx) * read(x0, y0) + fx * read(x0 + 1, y0)) +
                     fy * ((1 - fx) * read(x0, y0 + 1) + fx * read(x0 + 1, y0 + 1));
    }
  }
  return out;
}

Tensor to_tensor(const Image& img) {
  return Tensor({1, img.height(), img.width(), 1},
                std::vector<double>(img.pixels().begin(), img.pixels().end()));
}

}  // namespace siamtrack
