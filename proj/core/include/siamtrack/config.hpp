#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "siamtrack/eval.hpp"
#include "siamtrack/model.hpp"
#include "siamtrack/synthetic.hpp"
#include "siamtrack/tracker.hpp"
#include "siamtrack/train.hpp"

namespace siamtrack {

struct PathsConfig {
  std::string data;        // dataset root or single sequence directory
  std::string out;         // output directory or file
  std::string checkpoint;  // manifest (.json) of a checkpoint
  std::string logs;        // directory of <sequence>.txt box logs for eval
  std::string init_box;    // "x,y,w,h"; empty uses the first ground-truth box
  bool synthetic = false;
  bool overlay = false;
  bool force = false;
};

/// Everything a command needs. Serialised as `dotted.key = value` lines.
struct RunConfig {
  std::string preset = "desk";
  std::uint64_t seed = 7;
  ModelConfig model;
  train::TrainSchedule train;
  /// Total SGD iterations; overrides train.pairs_per_epoch when set.
  std::optional<std::size_t> iterations;
  data::SyntheticConfig synthetic;
  track::TrackerConfig tracker;
  eval::EvalConfig eval;
  PathsConfig paths;

  static RunConfig from_preset(const std::string& name);
  /// The training schedule with `seed` and `iterations` folded in.
  train::TrainSchedule schedule() const;
  /// Throws ConfigError naming the first invalid field.
  void validate() const;
};

/// Every key accepted by parse / apply, in serialisation order.
std::vector<std::string> config_keys();

std::string serialize(const RunConfig& cfg);

/// `key = value` lines; '#' starts a comment. Throws ConfigError with the
/// line number on malformed input.
std::map<std::string, std::string> parse_kv(const std::string& text);

/// Overwrites the named fields. Throws ConfigError naming an unknown key or
/// unparsable value.
void apply(RunConfig& cfg, const std::map<std::string, std::string>& kv);

/// Preset defaults (from `preset` in the text, else `fallback_preset`)
/// overridden by the text.
RunConfig parse_config(const std::string& text, const std::string& fallback_preset = "desk");

}  // namespace siamtrack
