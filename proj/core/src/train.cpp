#include "siamtrack/train.hpp"

#include <spdlog/spdlog.h>

#include <cmath>

#include "siamtrack/errors.hpp"

namespace siamtrack::train {

CropGeometry crop_geometry(const Box& box, std::size_t exemplar_size, std::size_t search_size) {
  if (!box.valid()) {
    throw ConfigError("degenerate box " + std::to_string(box.w) + "x" + std::to_string(box.h));
  }
  CropGeometry g;
  g.pad = (box.w + box.h) / 4.0;
  g.exemplar_side = std::sqrt((box.w + 2 * g.pad) * (box.h + 2 * g.pad));
  g.scale = static_cast<double>(exemplar_size) / g.exemplar_side;
  g.search_side = static_cast<double>(search_size) / g.scale;
  return g;
}

std::optional<PairSample> crop_pair(const data::Sequence& seq, std::size_t i, std::size_t j,
                                    std::size_t exemplar_size, std::size_t search_size) {
  const Box& bi = seq.boxes.at(i);
  const Box& bj = seq.boxes.at(j);
  if (!bi.valid() || !bj.valid()) {
    spdlog::warn("sequence {}: skipping pair ({}, {}) with a degenerate box", seq.name, i, j);
    return std::nullopt;
  }
  const Image fi = seq.frame(i);
  const Image fj = i == j ? fi : seq.frame(j);
  const CropGeometry gi = crop_geometry(bi, exemplar_size, search_size);
  const CropGeometry gj = crop_geometry(bj, exemplar_size, search_size);
  PairSample p;
  p.exemplar = crop_resample(fi, bi.cx(), bi.cy(), gi.exemplar_side, exemplar_size, fi.mean());
  p.search = crop_resample(fj, bj.cx(), bj.cy(), gj.search_side, search_size, fj.mean());
  return p;
}

std::size_t LabelMap::positives() const {
  std::size_t n = 0;
  for (double v : y.values()) n += v > 0.0;
  return n;
}

LabelMap make_labels(std::size_t rows, std::size_t cols, double stride, double radius,
                     LabelNorm norm) {
  if (rows % 2 == 0 || cols % 2 == 0) {
    throw ConfigError("labels: response " + std::to_string(rows) + "x" + std::to_string(cols) +
                      " has even dimensions; no centre cell");
  }
  if (!(stride > 0.0) || !(radius > 0.0)) throw ConfigError("labels: stride and radius must be > 0");
  LabelMap m;
  m.y = Tensor({1, rows, cols, 1});
  m.stride = stride;
  m.radius = radius;
  m.center_row = rows / 2;
  m.center_col = cols / 2;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double dr = static_cast<double>(r) - static_cast<double>(m.center_row);
      const double dc = static_cast<double>(c) - static_cast<double>(m.center_col);
      const double dist = norm == LabelNorm::kEuclidean ? std::hypot(dr, dc)
                                                        : std::max(std::abs(dr), std::abs(dc));
      m.y(0, r, c, 0) = stride * dist <= radius ? 1.0 : -1.0;
    }
  }
  return m;
}

double logistic_loss(double v, double y) {
  const double t = -y * v;
  return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

double logistic_loss_grad(double v, double y) {
  // -y * sigmoid(-y v)
  const double t = -y * v;
  const double sig = t >= 0.0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t));
  return -y * sig;
}

Tensor loss_weights(const LabelMap& labels, LossWeighting weighting) {
  Tensor w(labels.y.shape());
  const std::size_t n = w.size();
  if (weighting == LossWeighting::kUniform) {
    w.fill(1.0 / static_cast<double>(n));
    return w;
  }
  const std::size_t pos = labels.positives();
  const std::size_t neg = n - pos;
  for (std::size_t i = 0; i < n; ++i) {
    const bool positive = labels.y[i] > 0.0;
    const std::size_t count = positive ? pos : neg;
    // A class without cells hands its weight to the other class.
    const double share = (pos == 0 || neg == 0) ? 1.0 : 0.5;
    w[i] = share / static_cast<double>(count);
  }
  return w;
}

namespace {

void check_scores(const Shape& s, const LabelMap& labels) {
  const Shape& ls = labels.y.shape();
  if (s.h != ls.h || s.w != ls.w || s.c != 1) {
    throw ShapeError("map_loss: scores " + to_string(s) + " do not match labels " + to_string(ls));
  }
}

}  // namespace

double map_loss(const Tensor& scores, const LabelMap& labels, LossWeighting weighting) {
  check_scores(scores.shape(), labels);
  if (scores.shape().n != 1) throw ShapeError("map_loss: expected a single score map");
  const Tensor w = loss_weights(labels, weighting);
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) total += w[i] * logistic_loss(scores[i], labels.y[i]);
  return total;
}

net::Var map_loss(net::Graph& g, net::Var scores, const LabelMap& labels, LossWeighting weighting) {
  const Tensor& v = g.value(scores);
  check_scores(v.shape(), labels);
  const Tensor w = loss_weights(labels, weighting);
  const std::size_t cells = w.size();
  const double inv_n = 1.0 / static_cast<double>(v.shape().n);
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i)
    total += w[i % cells] * logistic_loss(v[i], labels.y[i % cells]);
  Tensor out({1, 1, 1, 1}, total * inv_n);
  const Tensor y = labels.y;
  return g.record(std::move(out), {scores}, [scores, w, y, inv_n](net::Graph& gr, net::Var self) {
    const double seed = gr.grad_slot(self)[0];
    const Tensor& v = gr.value(scores);
    Tensor& dv = gr.grad_slot(scores);
    const std::size_t cells = w.size();
    for (std::size_t i = 0; i < v.size(); ++i)
      dv[i] += seed * inv_n * w[i % cells] * logistic_loss_grad(v[i], y[i % cells]);
  });
}

std::size_t TrainSchedule::iterations_per_epoch() const {
  return std::max<std::size_t>(1, pairs_per_epoch / std::max<std::size_t>(1, batch_size));
}

TrainSchedule TrainSchedule::paper() {
  TrainSchedule s;
  s.epochs = 40;
  s.pairs_per_epoch = 50000;
  s.batch_size = 8;
  s.lr_start = 1e-2;
  s.lr_end = 1e-5;
  s.label_radius = 8.0;
  return s;
}

TrainSchedule TrainSchedule::desk() { return TrainSchedule{}; }

double learning_rate(const TrainSchedule& s, std::size_t epoch) {
  if (s.epochs <= 1 || s.lr_start == s.lr_end) return s.lr_start;
  const double t = static_cast<double>(epoch) / static_cast<double>(s.epochs - 1);
  return s.lr_start * std::pow(s.lr_end / s.lr_start, t);
}

PairSampler::PairSampler(const data::SequenceDataset& ds, std::size_t frame_gap, std::uint64_t seed)
    : ds_(ds), gap_(frame_gap), rng_(seed) {
  if (ds.empty()) throw TrainingError("training dataset is empty");
  for (const auto& s : ds.sequences)
    if (s.size() == 0) throw TrainingError("sequence " + s.name + " has no frames");
}

PairSampler::Draw PairSampler::next() {
  Draw d{};
  d.sequence = std::uniform_int_distribution<std::size_t>(0, ds_.sequences.size() - 1)(rng_);
  const std::size_t n = ds_.sequences[d.sequence].size();
  std::uniform_int_distribution<std::size_t> frame(0, n - 1);
  // Rejection keeps the draw uniform over valid pairs.
  do {
    d.i = frame(rng_);
    d.j = frame(rng_);
  } while ((d.i > d.j ? d.i - d.j : d.j - d.i) > gap_);
  return d;
}

Sgd::Sgd(std::vector<net::Param*> params, double momentum, double weight_decay)
    : params_(std::move(params)), momentum_(momentum), weight_decay_(weight_decay) {
  velocity_.reserve(params_.size());
  for (net::Param* p : params_) velocity_.emplace_back(p->value.shape());
}

void Sgd::zero_grad() {
  for (net::Param* p : params_) p->zero_grad();
}

void Sgd::step(double lr) {
  for (std::size_t k = 0; k < params_.size(); ++k) {
    net::Param& p = *params_[k];
    Tensor& v = velocity_[k];
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i] = momentum_ * v[i] + p.grad[i] + weight_decay_ * p.value[i];
      p.value[i] -= lr * v[i];
    }
  }
}

Tensor stack_images(std::span<const Image> images) {
  std::vector<Tensor> parts;
  parts.reserve(images.size());
  for (const Image& im : images) parts.push_back(to_tensor(im));
  return Tensor::stack(parts);
}

TrainResult train(SiameseModel& model, const data::SequenceDataset& ds, const TrainSchedule& s,
                  const EpochCallback& on_epoch) {
  if (s.batch_size == 0) throw ConfigError("train.batch_size: must be >= 1");
  if (s.epochs == 0) throw ConfigError("train.epochs: must be >= 1");
  if (!(s.lr_start >= s.lr_end) || s.lr_end < 0.0) {
    throw ConfigError("train.lr_start/lr_end: need lr_start >= lr_end >= 0");
  }
  const ModelConfig& cfg = model.config();
  const ModelGeometry& geo = model.geom();
  const LabelMap labels = make_labels(geo.response_size, geo.response_size,
                                      static_cast<double>(geo.stride), s.label_radius, s.label_norm);
  PairSampler sampler(ds, s.frame_gap, s.seed);
  Sgd opt(model.params(), s.momentum, s.weight_decay);
  TrainResult result;
  std::size_t iteration = 0;
  for (std::size_t epoch = 0; epoch < s.epochs; ++epoch) {
    const double lr = learning_rate(s, epoch);
    double epoch_loss = 0.0;
    const std::size_t iters = s.iterations_per_epoch();
    for (std::size_t it = 0; it < iters; ++it, ++iteration) {
      std::vector<Image> exemplars, searches;
      while (exemplars.size() < s.batch_size) {
        const auto d = sampler.next();
        auto pair = crop_pair(ds.sequences[d.sequence], d.i, d.j, cfg.exemplar_size, cfg.search_size);
        if (!pair) continue;
        exemplars.push_back(std::move(pair->exemplar));
        searches.push_back(std::move(pair->search));
      }
      net::Graph g;
      const net::Var x = g.constant(stack_images(exemplars));
      const net::Var z = g.constant(stack_images(searches));
      const net::Var scores = model.forward(g, x, z, net::Mode::kTrain);
      const net::Var loss = map_loss(g, scores, labels, s.weighting);
      const double value = g.value(loss)[0];
      if (!std::isfinite(value)) {
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", iteration " +
                            std::to_string(iteration));
      }
      opt.zero_grad();
      g.backward(loss);
      opt.step(lr);
      result.iterations.push_back({iteration, epoch, lr, value});
      epoch_loss += value;
    }
    const EpochSummary summary{epoch, epoch_loss / static_cast<double>(iters)};
    result.epochs.push_back(summary);
    spdlog::info("epoch {} lr {:.3g} mean loss {:.5f}", epoch, lr, summary.mean_loss);
    if (on_epoch) on_epoch(summary);
  }
  return result;
}

}  // namespace siamtrack::train
