#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "siamtrack/commands.hpp"
#include "siamtrack/config.hpp"
#include "siamtrack/errors.hpp"

namespace {

using namespace siamtrack;

// Values collected from the command line before the config is assembled.
struct CliValues {
  std::string config_file;
  std::optional<std::string> preset;
  std::map<std::string, std::string> keys;  // dotted key -> value
  bool synthetic = false, overlay = false, force = false, verbose = false;
};

void add_common(CLI::App* cmd, CliValues& v) {
  cmd->add_option("--config", v.config_file, "Config file of `key = value` lines");
  cmd->add_option("--preset", v.preset, "Model/training preset (desk, paper)");
  cmd->add_flag("-v,--verbose", v.verbose, "Debug logging");

  // Short aliases for the most used keys.
  const std::pair<const char*, const char*> aliases[] = {
      {"--seed", "seed"},           {"--out", "paths.out"},          {"--data,--sequence", "paths.data"},
      {"--checkpoint", "paths.checkpoint"}, {"--logs", "paths.logs"}, {"--init-box", "paths.init_box"},
      {"--iters", "train.iterations"}};
  for (const auto& [flag, key] : aliases) {
    cmd->add_option_function<std::string>(flag, [&v, key = std::string(key)](const std::string& s) { v.keys[key] = s; },
                                          key == std::string("seed") ? std::string("Random seed")
                                                                     : "Same as --" + std::string(key));
  }
  cmd->add_flag("--synthetic", v.synthetic, "Train on generated synthetic sequences");
  cmd->add_flag("--overlay", v.overlay, "Also write frames with drawn boxes");
  cmd->add_flag("--force", v.force, "Overwrite a non-empty output directory");

  // Every config key is also a flag of the same name.
  for (const auto& key : config_keys()) {
    if (key == "preset" || key == "seed") continue;
    auto* opt = cmd->add_option_function<std::string>(
        "--" + key, [&v, key](const std::string& s) { v.keys[key] = s; }, "");
    opt->group("Config keys");
  }
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig assemble(const CliValues& v) {
  std::map<std::string, std::string> file_kv;
  if (!v.config_file.empty()) file_kv = parse_kv(read_text(v.config_file));

  std::string preset = "desk";
  if (auto it = file_kv.find("preset"); it != file_kv.end()) preset = it->second;
  if (v.preset) preset = *v.preset;

  RunConfig cfg = RunConfig::from_preset(preset);
  file_kv.erase("preset");
  siamtrack::apply(cfg, file_kv);
  siamtrack::apply(cfg, v.keys);
  if (v.synthetic) cfg.paths.synthetic = true;
  if (v.overlay) cfg.paths.overlay = true;
  if (v.force) cfg.paths.force = true;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Siamese tracker with hierarchical fusion, spatial attention and a correlation-filter layer"};
  app.require_subcommand(1);
  CliValues v;

  auto* train = app.add_subcommand("train", "Train a model; writes per-epoch checkpoints and loss.csv");
  auto* track = app.add_subcommand("track", "Track sequences with a checkpoint; writes box logs");
  auto* eval = app.add_subcommand("eval", "Score box logs or a checkpoint; writes CSV reports");
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  auto* show = app.add_subcommand("config", "Print the assembled configuration");
  for (auto* cmd : {train, track, eval, synth, show}) add_common(cmd, v);

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(v.verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    const RunConfig cfg = assemble(v);
    if (*train) {
      const auto out = app::cmd_train(cfg);
      std::cout << out.final_checkpoint.string() << '\n';
    } else if (*track) {
      for (const auto& r : app::cmd_track(cfg)) std::cout << r.log.string() << '\n';
    } else if (*eval) {
      const auto report = app::cmd_eval(cfg);
      for (const auto& s : report.scopes) {
        std::cout << s.scope << " A=" << s.accuracy << " R=" << s.robustness;
        if (s.eao) std::cout << " EAO=" << *s.eao;
        std::cout << '\n';
      }
    } else if (*synth) {
      app::cmd_synth(cfg);
    } else if (*show) {
      cfg.validate();
      std::cout << serialize(cfg);
    }
  } catch (const ConfigError& e) {
    spdlog::error("configuration error: {}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
