#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "siamtrack/dataset.hpp"
#include "siamtrack/model.hpp"
#include "siamtrack/net/graph.hpp"

namespace siamtrack::train {

/// Context-padded crop geometry: p = (w + h) / 4 and
/// s (w + 2p) * s (h + 2p) = A with A = exemplar_size^2.
struct CropGeometry {
  double pad = 0.0;
  double scale = 0.0;
  /// Source-pixel sides of the exemplar and search crops.
  double exemplar_side = 0.0;
  double search_side = 0.0;
};

/// Throws ConfigError for a degenerate box.
CropGeometry crop_geometry(const Box& box, std::size_t exemplar_size, std::size_t search_size);

struct PairSample {
  Image exemplar;
  Image search;
};

/// Exemplar from frame i, search from frame j, each centred on its own box
/// and filled with the frame mean outside the image. Returns nullopt (with a
/// warning) when either box is degenerate.
std::optional<PairSample> crop_pair(const data::Sequence& seq, std::size_t i, std::size_t j,
                                    std::size_t exemplar_size, std::size_t search_size);

enum class LabelNorm { kEuclidean, kChebyshev };

/// y[u] = +1 iff k * ||u - c|| <= R, else -1; c is the centre cell.
struct LabelMap {
  Tensor y;  // (1, rows, cols, 1)
  double stride = 0.0;
  double radius = 0.0;
  std::size_t center_row = 0;
  std::size_t center_col = 0;

  std::size_t positives() const;
};

/// Throws ConfigError on even dimensions or non-positive k / R.
LabelMap make_labels(std::size_t rows, std::size_t cols, double stride, double radius,
                     LabelNorm norm = LabelNorm::kEuclidean);

/// log(1 + exp(-y v)) without overflow.
double logistic_loss(double v, double y);
/// d/dv of logistic_loss.
double logistic_loss_grad(double v, double y);

enum class LossWeighting { kBalanced, kUniform };

/// Per-cell weights summing to 1: uniform 1/N, or balanced with the
/// positive and negative cells each sharing 1/2.
Tensor loss_weights(const LabelMap& labels, LossWeighting weighting);

/// Weighted mean logistic loss of one (1, r, r, 1) score map. Throws
/// ShapeError on a shape mismatch.
double map_loss(const Tensor& scores, const LabelMap& labels, LossWeighting weighting);

/// Batch mean of map_loss as a graph op.
net::Var map_loss(net::Graph& g, net::Var scores, const LabelMap& labels, LossWeighting weighting);

struct TrainSchedule {
  std::size_t epochs = 10;
  std::size_t pairs_per_epoch = 160;
  std::size_t batch_size = 8;
  double lr_start = 1e-2;
  double lr_end = 1e-3;
  double momentum = 0.9;
  double weight_decay = 0.0;
  std::size_t frame_gap = 100;
  double label_radius = 8.0;
  LabelNorm label_norm = LabelNorm::kEuclidean;
  LossWeighting weighting = LossWeighting::kBalanced;
  std::uint64_t seed = 7;

  std::size_t iterations_per_epoch() const;
  static TrainSchedule paper();
  static TrainSchedule desk();
};

/// lr_start * (lr_end / lr_start)^(e / (E - 1)).
double learning_rate(const TrainSchedule& s, std::size_t epoch);

/// Uniform over sequences, then uniform over frame pairs with |i - j| <= T.
class PairSampler {
 public:
  PairSampler(const data::SequenceDataset& ds, std::size_t frame_gap, std::uint64_t seed);

  struct Draw {
    std::size_t sequence, i, j;
  };
  Draw next();

 private:
  const data::SequenceDataset& ds_;
  std::size_t gap_;
  std::mt19937_64 rng_;
};

/// SGD with classical momentum: v = mu v + (g + wd p); p -= lr v.
class Sgd {
 public:
  Sgd(std::vector<net::Param*> params, double momentum, double weight_decay);
  void zero_grad();
  void step(double lr);

 private:
  std::vector<net::Param*> params_;
  std::vector<Tensor> velocity_;
  double momentum_;
  double weight_decay_;
};

struct IterationRecord {
  std::size_t iteration;
  std::size_t epoch;
  double lr;
  double loss;
};

struct EpochSummary {
  std::size_t epoch;
  double mean_loss;
};

struct TrainResult {
  std::vector<IterationRecord> iterations;
  std::vector<EpochSummary> epochs;
};

/// Runs after every epoch, e.g. to write a checkpoint.
using EpochCallback = std::function<void(const EpochSummary&)>;

/// (n, size, size, 1) batch of square images.
Tensor stack_images(std::span<const Image> images);

/// Deterministic single-threaded SGD loop. Throws TrainingError on a
/// non-finite loss.
TrainResult train(SiameseModel& model, const data::SequenceDataset& ds, const TrainSchedule& s,
                  const EpochCallback& on_epoch = {});

}  // namespace siamtrack::train
