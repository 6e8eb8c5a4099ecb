#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "siamtrack/config.hpp"
#include "siamtrack/eval.hpp"
#include "siamtrack/train.hpp"

namespace siamtrack::app {

struct TrainOutput {
  train::TrainResult result;
  std::vector<std::filesystem::path> checkpoints;  // manifests, one per epoch
  std::filesystem::path final_checkpoint;           // <out>/model.json
  std::filesystem::path loss_log;                   // <out>/loss.csv
};

/// Trains on paths.data or, with paths.synthetic, on gen_synthetic(cfg.synthetic).
/// Writes <out>/epoch_NNN.{bin,json}, <out>/model.{bin,json}, <out>/loss.csv
/// and <out>/config.txt.
TrainOutput cmd_train(const RunConfig& cfg);

struct TrackOutput {
  std::string sequence;
  std::vector<Box> boxes;
  std::filesystem::path log;
};

/// Tracks every sequence under paths.data with the checkpoint at
/// paths.checkpoint. Writes <out>/<sequence>.txt and, with paths.overlay,
/// <out>/<sequence>_overlay/NNNNNNNN.png.
std::vector<TrackOutput> cmd_track(const RunConfig& cfg);

/// Scores box logs from paths.logs (one <sequence>.txt each) or, without
/// logs, runs the checkpoint at paths.checkpoint under the supervised
/// protocol. Writes the report files into paths.out.
eval::Report cmd_eval(const RunConfig& cfg);

/// Writes gen_synthetic(cfg.synthetic) to paths.out. Refuses a non-empty
/// directory unless paths.force.
void cmd_synth(const RunConfig& cfg);

/// Parses "x,y,w,h". Throws ConfigError naming paths.init_box.
Box parse_box(const std::string& text);

}  // namespace siamtrack::app
