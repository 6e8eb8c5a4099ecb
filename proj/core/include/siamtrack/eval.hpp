#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "siamtrack/dataset.hpp"
#include "siamtrack/tracker.hpp"

namespace siamtrack::eval {

struct EvalConfig {
  /// A frame fails when its overlap is <= failure_threshold.
  double failure_threshold = 0.0;
  /// Re-initialisation happens this many frames after a failure.
  std::size_t reinit_skip = 5;
  /// Frames after a re-initialisation left out of the accuracy.
  std::size_t burn_in = 10;
  /// EAO interval; defaults to [median / 2, 2 * median] of the sequence lengths.
  std::optional<std::size_t> eao_low;
  std::optional<std::size_t> eao_high;
};

enum class FrameStatus { kInit, kTracked, kBurnIn, kFailure, kSkipped };

struct OverlapSeries {
  std::string sequence;
  std::vector<double> iou;  // NaN where no prediction exists
  std::vector<FrameStatus> status;
  std::vector<std::size_t> failures;
  std::vector<std::size_t> reinits;
  std::vector<std::vector<std::string>> tags;

  std::size_t size() const { return iou.size(); }
};

/// Plays back a box log: every call returns the logged box of that frame.
class ReplayTracker : public track::Tracker {
 public:
  explicit ReplayTracker(std::vector<Box> boxes) : boxes_(std::move(boxes)) {}
  Box initialize(const Image&, const Box& box, std::size_t) override { return box; }
  Box update(const Image&, std::size_t frame_index) override { return boxes_.at(frame_index); }

 private:
  std::vector<Box> boxes_;
};

/// Supervised protocol: track, detect failures against ground truth, skip
/// `reinit_skip` frames and re-initialise from ground truth.
OverlapSeries run_supervised(track::Tracker& tracker, const data::Sequence& seq, const EvalConfig& cfg);

/// Same protocol over a box log; no images are needed. Throws IoError naming
/// the sequence when the log and ground truth lengths differ.
OverlapSeries run_supervised(const std::vector<Box>& log, const data::Sequence& seq, const EvalConfig& cfg);

/// True for frames entering the accuracy average.
bool counted(FrameStatus s);

/// Mean overlap over counted frames, pooled across the given series; NaN
/// when nothing is counted.
double accuracy(std::span<const OverlapSeries> series);
double accuracy(const OverlapSeries& series);
std::size_t robustness(std::span<const OverlapSeries> series);
std::size_t robustness(const OverlapSeries& series);

struct EAOCurve {
  std::vector<double> phi;  // phi[Ns - 1]
  std::size_t low = 1;
  std::size_t high = 1;
  double score = 0.0;
};

/// Each series contributes one run: its overlaps from the first frame up to
/// the first failure, zero from the failure on. Phi(Ns) averages the mean
/// overlap of the first Ns frames over runs that failed or reach Ns frames.
EAOCurve eao(std::span<const OverlapSeries> series, std::optional<std::size_t> low = std::nullopt,
             std::optional<std::size_t> high = std::nullopt);

struct ScopeResult {
  std::string scope;
  double accuracy = 0.0;
  std::size_t robustness = 0;
  std::optional<double> eao;
};

struct Report {
  std::vector<OverlapSeries> series;
  EAOCurve curve;
  /// "all", then one "seq:<name>" per sequence, then one "attr:<tag>" per tag.
  std::vector<ScopeResult> scopes;
};

Report make_report(std::vector<OverlapSeries> series, const EvalConfig& cfg);

/// <dir>/<sequence>_frames.csv, <dir>/summary.csv, <dir>/eao_curve.csv.
void write_report(const Report& report, const std::filesystem::path& dir);

}  // namespace siamtrack::eval
