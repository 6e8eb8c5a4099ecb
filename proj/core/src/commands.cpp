#include "siamtrack/commands.hpp"

#include <spdlog/spdlog.h>

#include <cstdio>
#include <fstream>

#include "siamtrack/checkpoint.hpp"
#include "siamtrack/dataset.hpp"
#include "siamtrack/errors.hpp"
#include "siamtrack/synthetic.hpp"
#include "siamtrack/tracker.hpp"

namespace siamtrack::app {

namespace fs = std::filesystem;

namespace {

fs::path require_out(const RunConfig& cfg) {
  if (cfg.paths.out.empty()) throw ConfigError("paths.out: output path required (--out)");
  return cfg.paths.out;
}

void require_existing(const std::string& path, const char* key) {
  if (path.empty()) throw ConfigError(std::string(key) + ": path required");
  if (!fs::exists(path)) throw ConfigError(std::string(key) + ": '" + path + "' does not exist");
}

std::string epoch_stem(std::size_t epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "epoch_%03zu", epoch);
  return buf;
}

SiameseModel load_model(const RunConfig& cfg) {
  require_existing(cfg.paths.checkpoint, "paths.checkpoint");
  SiameseModel model(cfg.model);
  const auto m = ckpt::load(model, cfg.paths.checkpoint);
  spdlog::info("loaded checkpoint {} (preset {}, epoch {}, loss {:.4f})", cfg.paths.checkpoint, m.preset, m.epoch,
               m.train_loss);
  return model;
}

}  // namespace

Box parse_box(const std::string& text) {
  double v[4];
  char tail = 0;
  if (std::sscanf(text.c_str(), "%lf,%lf,%lf,%lf%c", &v[0], &v[1], &v[2], &v[3], &tail) != 4) {
    throw ConfigError("paths.init_box: expected 'x,y,w,h', got '" + text + "'");
  }
  const Box b{v[0], v[1], v[2], v[3]};
  if (!b.valid()) throw ConfigError("paths.init_box: width and height must be positive");
  return b;
}

TrainOutput cmd_train(const RunConfig& cfg) {
  cfg.validate();
  if (!cfg.paths.synthetic) require_existing(cfg.paths.data, "paths.data");
  const fs::path out = require_out(cfg);

  const data::SequenceDataset ds =
      cfg.paths.synthetic ? data::gen_synthetic(cfg.synthetic) : data::load_dataset(cfg.paths.data);
  if (ds.empty()) throw ConfigError("paths.data: no sequences found");

  fs::create_directories(out);
  {
    std::ofstream c(out / "config.txt");
    c << serialize(cfg);
  }

  SiameseModel model(cfg.model);
  model.initialize(cfg.seed);
  const auto schedule = cfg.schedule();
  spdlog::info("training preset {} on {} sequences: {} epochs x {} iterations, batch {}", cfg.preset,
               ds.sequences.size(), schedule.epochs, schedule.iterations_per_epoch(), schedule.batch_size);

  TrainOutput result;
  const std::string config_text = serialize(cfg);
  auto on_epoch = [&](const train::EpochSummary& e) {
    ckpt::Manifest meta;
    meta.epoch = e.epoch + 1;
    meta.train_loss = e.mean_loss;
    meta.seed = cfg.seed;
    meta.config = config_text;
    const fs::path stem = out / epoch_stem(e.epoch + 1);
    ckpt::save(model, meta, stem);
    result.checkpoints.push_back(fs::path(stem).concat(".json"));
  };
  result.result = train::train(model, ds, schedule, on_epoch);

  ckpt::Manifest final_meta;
  final_meta.epoch = schedule.epochs;
  final_meta.train_loss = result.result.epochs.empty() ? 0.0 : result.result.epochs.back().mean_loss;
  final_meta.seed = cfg.seed;
  final_meta.config = config_text;
  ckpt::save(model, final_meta, out / "model");
  result.final_checkpoint = out / "model.json";

  result.loss_log = out / "loss.csv";
  std::ofstream log(result.loss_log);
  log << "iteration,epoch,lr,loss\n";
  char line[128];
  for (const auto& r : result.result.iterations) {
    std::snprintf(line, sizeof line, "%zu,%zu,%.8g,%.10g\n", r.iteration, r.epoch + 1, r.lr, r.loss);
    log << line;
  }
  if (!log) throw IoError("cannot write " + result.loss_log.string());
  return result;
}

std::vector<TrackOutput> cmd_track(const RunConfig& cfg) {
  cfg.validate();
  require_existing(cfg.paths.data, "paths.data");
  const fs::path out = require_out(cfg);
  SiameseModel model = load_model(cfg);
  const auto ds = data::load_dataset(cfg.paths.data);
  fs::create_directories(out);

  std::vector<TrackOutput> results;
  for (const auto& seq : ds.sequences) {
    if (seq.size() == 0) continue;
    const Box init = cfg.paths.init_box.empty() ? seq.boxes.front() : parse_box(cfg.paths.init_box);
    track::SiameseTracker tracker(model, cfg.tracker);
    TrackOutput r{seq.name, track::track_sequence(tracker, seq, init), out / (seq.name + ".txt")};
    data::write_boxes(r.log, r.boxes);

    if (cfg.paths.overlay) {
      const fs::path dir = out / (seq.name + "_overlay");
      fs::create_directories(dir);
      char name[32];
      for (std::size_t i = 0; i < seq.size(); ++i) {
        const Overlay boxes[] = {{seq.boxes[i], 0, 200, 0}, {r.boxes[i], 0, 0, 255}};
        std::snprintf(name, sizeof name, "%08zu.png", i + 1);
        save_overlay(seq.frame(i), boxes, dir / name);
      }
    }
    double mean = 0.0;
    for (std::size_t i = 0; i < seq.size(); ++i) mean += iou(r.boxes[i], seq.boxes[i]);
    spdlog::info("{}: {} frames, mean IoU vs ground truth {:.3f}", seq.name, seq.size(), mean / seq.size());
    results.push_back(std::move(r));
  }
  return results;
}

eval::Report cmd_eval(const RunConfig& cfg) {
  cfg.validate();
  require_existing(cfg.paths.data, "paths.data");
  const fs::path out = require_out(cfg);
  const auto ds = data::load_dataset(cfg.paths.data);

  std::vector<eval::OverlapSeries> series;
  if (!cfg.paths.logs.empty()) {
    require_existing(cfg.paths.logs, "paths.logs");
    for (const auto& seq : ds.sequences) {
      const fs::path log = fs::path(cfg.paths.logs) / (seq.name + ".txt");
      if (!fs::exists(log)) throw IoError(seq.name + ": missing box log " + log.string());
      series.push_back(eval::run_supervised(data::read_boxes(log), seq, cfg.eval));
    }
  } else {
    if (cfg.paths.checkpoint.empty()) throw ConfigError("paths.logs: box logs or paths.checkpoint required");
    SiameseModel model = load_model(cfg);
    for (const auto& seq : ds.sequences) {
      track::SiameseTracker tracker(model, cfg.tracker);
      series.push_back(eval::run_supervised(tracker, seq, cfg.eval));
    }
  }

  auto report = eval::make_report(std::move(series), cfg.eval);
  eval::write_report(report, out);
  const auto& all = report.scopes.front();
  spdlog::info("A {:.4f}  R {}  EAO {:.4f}", all.accuracy, all.robustness, all.eao.value_or(0.0));
  return report;
}

void cmd_synth(const RunConfig& cfg) {
  const fs::path out = require_out(cfg);
  if (fs::exists(out) && !fs::is_empty(out)) {
    if (!cfg.paths.force) throw IoError(out.string() + " exists and is not empty (use --force)");
    fs::remove_all(out);
  }
  const auto ds = data::gen_synthetic(cfg.synthetic);
  data::save_dataset(ds, out);
  spdlog::info("wrote {} sequences x {} frames to {}", ds.sequences.size(), cfg.synthetic.frames, out.string());
}

}  // namespace siamtrack::app
