#include "siamtrack/config.hpp"

#include <charconv>
#include <cstdint>
#include <sstream>

#include "siamtrack/errors.hpp"

namespace siamtrack {

RunConfig RunConfig::from_preset(const std::string& name) {
  RunConfig c;
  c.preset = name;
  c.model = ModelConfig::from_preset(name);
  c.train = name == "paper" ? train::TrainSchedule::paper() : train::TrainSchedule::desk();
  return c;
}

train::TrainSchedule RunConfig::schedule() const {
  train::TrainSchedule s = train;
  s.seed = seed;
  if (iterations) s.pairs_per_epoch = (*iterations + s.epochs - 1) / s.epochs * s.batch_size;
  return s;
}

void RunConfig::validate() const {
  if (preset != model.preset) throw ConfigError("preset: '" + preset + "' does not match model.preset '" + model.preset + "'");
  geometry(model);
  tracker.validate();
  if (train.batch_size == 0) throw ConfigError("train.batch_size: must be >= 1");
  if (train.epochs == 0) throw ConfigError("train.epochs: must be >= 1");
  if (!(train.lr_start >= train.lr_end) || !(train.lr_end > 0.0)) {
    throw ConfigError("train.lr_start: must be >= train.lr_end > 0");
  }
  if (!(train.label_radius > 0.0)) throw ConfigError("train.label_radius: must be > 0");
  if (iterations && (*iterations < train.epochs)) {
    throw ConfigError("train.iterations: must be at least train.epochs");
  }
  if (eval.failure_threshold < 0.0 || eval.failure_threshold > 1.0) {
    throw ConfigError("eval.failure_threshold: must be in [0, 1]");
  }
  if (eval.reinit_skip == 0) throw ConfigError("eval.reinit_skip: must be >= 1");
}

namespace {

static_assert(std::is_same_v<std::uint64_t, unsigned long> && std::is_same_v<std::size_t, unsigned long>);

std::string format_double(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw ConfigError(key + ": invalid value '" + value + "' (expected " + expected + ")");
}

template <typename Int>
Int parse_int(const std::string& key, const std::string& v) {
  Int out{};
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || end != v.data() + v.size()) bad_value(key, v, "a non-negative integer");
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || end != v.data() + v.size()) bad_value(key, v, "a number");
  return out;
}

// Visits every field with its key. The visitor receives (key, field&).
template <typename Config, typename V>
void visit(Config& c, V&& v) {
  v("preset", c.preset);
  v("seed", c.seed);

  auto& m = c.model;
  v("model.preset", m.preset);
  v("model.exemplar_size", m.exemplar_size);
  v("model.search_size", m.search_size);
  v("model.use_spatial", m.use_spatial);
  v("model.use_cf", m.use_cf);
  v("model.adjust_scale", m.adjust_scale);
  v("model.adjust_bias", m.adjust_bias);
  v("model.backbone.input_channels", m.backbone.input_channels);
  for (std::size_t i = 0; i < 5; ++i) v("model.backbone.conv" + std::to_string(i + 1), m.backbone.conv[i]);
  for (std::size_t i = 0; i < 2; ++i) v("model.backbone.pool" + std::to_string(i + 1), m.backbone.pool[i]);
  v("model.backbone.align3", m.backbone.align3);
  v("model.backbone.align4", m.backbone.align4);
  v("model.backbone.conv6_channels", m.backbone.conv6_channels);
  v("model.backbone.relu_before_fusion", m.backbone.relu_before_fusion);
  for (std::size_t i = 0; i < 3; ++i) v("model.spatial.loc" + std::to_string(i + 1), m.spatial.loc_conv[i]);
  v("model.spatial.se_reduction", m.spatial.se_reduction);
  v("model.cf.lambda_scale", m.cf.lambda_scale);
  v("model.cf.sigma_scale", m.cf.sigma_scale);
  v("model.cf.cosine_window", m.cf.cosine_window);
  v("model.cf.crop_margin", m.cf.crop_margin);

  auto& t = c.train;
  v("train.epochs", t.epochs);
  v("train.pairs_per_epoch", t.pairs_per_epoch);
  v("train.batch_size", t.batch_size);
  v("train.lr_start", t.lr_start);
  v("train.lr_end", t.lr_end);
  v("train.momentum", t.momentum);
  v("train.weight_decay", t.weight_decay);
  v("train.frame_gap", t.frame_gap);
  v("train.label_radius", t.label_radius);
  v("train.label_norm", t.label_norm);
  v("train.weighting", t.weighting);
  v("train.iterations", c.iterations);

  auto& s = c.synthetic;
  v("synthetic.sequences", s.sequences);
  v("synthetic.frames", s.frames);
  v("synthetic.width", s.width);
  v("synthetic.height", s.height);
  v("synthetic.distractors", s.distractors);
  v("synthetic.background_level", s.background_level);
  v("synthetic.background_amplitude", s.background_amplitude);
  v("synthetic.texture_cell", s.texture_cell);
  v("synthetic.noise_sigma", s.noise_sigma);
  v("synthetic.target_amplitude_min", s.target_amplitude_min);
  v("synthetic.target_amplitude_max", s.target_amplitude_max);
  v("synthetic.distractor_amplitude_min", s.distractor_amplitude_min);
  v("synthetic.distractor_amplitude_max", s.distractor_amplitude_max);
  v("synthetic.sigma_min", s.sigma_min);
  v("synthetic.sigma_max", s.sigma_max);
  v("synthetic.max_speed", s.max_speed);
  v("synthetic.acceleration", s.acceleration);
  v("synthetic.seed", s.seed);

  auto& k = c.tracker;
  v("tracker.scales", k.scales);
  v("tracker.scale_damping", k.scale_damping);
  v("tracker.template_update", k.template_update);
  v("tracker.update_rate", k.update_rate);
  v("tracker.scale_penalty", k.scale_penalty);
  v("tracker.window_influence", k.window_influence);
  v("tracker.upsample", k.upsample);
  v("tracker.min_scale", k.min_scale);
  v("tracker.max_scale", k.max_scale);

  auto& e = c.eval;
  v("eval.failure_threshold", e.failure_threshold);
  v("eval.reinit_skip", e.reinit_skip);
  v("eval.burn_in", e.burn_in);
  v("eval.eao_low", e.eao_low);
  v("eval.eao_high", e.eao_high);

  auto& p = c.paths;
  v("paths.data", p.data);
  v("paths.out", p.out);
  v("paths.checkpoint", p.checkpoint);
  v("paths.logs", p.logs);
  v("paths.init_box", p.init_box);
  v("paths.synthetic", p.synthetic);
  v("paths.overlay", p.overlay);
  v("paths.force", p.force);
}

template <typename E>
struct EnumNames;

template <>
struct EnumNames<track::TemplateUpdate> {
  static constexpr std::pair<track::TemplateUpdate, const char*> kNames[] = {
      {track::TemplateUpdate::kFrozen, "frozen"}, {track::TemplateUpdate::kCfRefresh, "cf_refresh"}};
};
template <>
struct EnumNames<train::LossWeighting> {
  static constexpr std::pair<train::LossWeighting, const char*> kNames[] = {
      {train::LossWeighting::kBalanced, "balanced"}, {train::LossWeighting::kUniform, "uniform"}};
};
template <>
struct EnumNames<train::LabelNorm> {
  static constexpr std::pair<train::LabelNorm, const char*> kNames[] = {
      {train::LabelNorm::kEuclidean, "euclidean"}, {train::LabelNorm::kChebyshev, "chebyshev"}};
};

template <typename E>
concept NamedEnum = requires { EnumNames<E>::kNames; };

// Flattens one field to (key, text) pairs.
struct Writer {
  std::vector<std::pair<std::string, std::string>> out;

  void operator()(const std::string& k, const std::string& v) { out.emplace_back(k, v); }
  void operator()(const std::string& k, bool v) { out.emplace_back(k, v ? "true" : "false"); }
  void operator()(const std::string& k, std::size_t v) { out.emplace_back(k, std::to_string(v)); }
  void operator()(const std::string& k, double v) { out.emplace_back(k, format_double(v)); }
  void operator()(const std::string& k, const std::optional<std::size_t>& v) {
    out.emplace_back(k, v ? std::to_string(*v) : "auto");
  }
  void operator()(const std::string& k, const std::array<double, 3>& v) {
    out.emplace_back(k, format_double(v[0]) + "," + format_double(v[1]) + "," + format_double(v[2]));
  }
  void operator()(const std::string& k, const net::LayerSpec& l) {
    (*this)(k + ".kernel", l.kernel);
    (*this)(k + ".stride", l.stride);
    if (l.kind == net::LayerKind::kConv) (*this)(k + ".channels", l.channels_out);
    (*this)(k + ".padding", l.padding);
  }
  template <NamedEnum E>
  void operator()(const std::string& k, E v) {
    for (const auto& [value, name] : EnumNames<E>::kNames)
      if (value == v) out.emplace_back(k, name);
  }
};

// Assigns fields present in the map and marks their keys as used.
struct Reader {
  const std::map<std::string, std::string>& kv;
  std::map<std::string, bool>& used;

  const std::string* find(const std::string& k) {
    const auto it = kv.find(k);
    if (it == kv.end()) return nullptr;
    used[k] = true;
    return &it->second;
  }

  void operator()(const std::string& k, std::string& v) {
    if (const auto* s = find(k)) v = *s;
  }
  void operator()(const std::string& k, bool& v) {
    if (const auto* s = find(k)) {
      if (*s == "true" || *s == "1") v = true;
      else if (*s == "false" || *s == "0") v = false;
      else bad_value(k, *s, "true or false");
    }
  }
  void operator()(const std::string& k, std::size_t& v) {
    if (const auto* s = find(k)) v = parse_int<std::size_t>(k, *s);
  }
  void operator()(const std::string& k, double& v) {
    if (const auto* s = find(k)) v = parse_double(k, *s);
  }
  void operator()(const std::string& k, std::optional<std::size_t>& v) {
    if (const auto* s = find(k)) {
      if (*s == "auto" || s->empty()) v.reset();
      else v = parse_int<std::size_t>(k, *s);
    }
  }
  void operator()(const std::string& k, std::array<double, 3>& v) {
    if (const auto* s = find(k)) {
      std::istringstream ss(*s);
      std::string part;
      std::size_t i = 0;
      while (std::getline(ss, part, ',')) {
        if (i == 3) bad_value(k, *s, "three comma-separated numbers");
        v[i++] = parse_double(k, trim(part));
      }
      if (i != 3) bad_value(k, *s, "three comma-separated numbers");
    }
  }
  void operator()(const std::string& k, net::LayerSpec& l) {
    (*this)(k + ".kernel", l.kernel);
    (*this)(k + ".stride", l.stride);
    if (l.kind == net::LayerKind::kConv) (*this)(k + ".channels", l.channels_out);
    (*this)(k + ".padding", l.padding);
  }
  template <NamedEnum E>
  void operator()(const std::string& k, E& v) {
    if (const auto* s = find(k)) {
      for (const auto& [value, name] : EnumNames<E>::kNames) {
        if (*s == name) {
          v = value;
          return;
        }
      }
      std::string expected;
      for (const auto& [value, name] : EnumNames<E>::kNames) expected += (expected.empty() ? "" : " or ") + std::string(name);
      bad_value(k, *s, expected.c_str());
    }
  }
};

}  // namespace

std::vector<std::string> config_keys() {
  RunConfig c;
  Writer w;
  visit(c, w);
  std::vector<std::string> keys;
  for (auto& [k, v] : w.out) keys.push_back(k);
  return keys;
}

std::string serialize(const RunConfig& cfg) {
  Writer w;
  visit(cfg, w);
  std::string out;
  for (const auto& [k, v] : w.out) out += k + " = " + v + "\n";
  return out;
}

std::map<std::string, std::string> parse_kv(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

void apply(RunConfig& cfg, const std::map<std::string, std::string>& kv) {
  std::map<std::string, bool> used;
  Reader r{kv, used};
  visit(cfg, r);
  for (const auto& [k, v] : kv)
    if (!used.count(k)) throw ConfigError(k + ": unknown configuration key");
}

RunConfig parse_config(const std::string& text, const std::string& fallback_preset) {
  const auto kv = parse_kv(text);
  const auto it = kv.find("preset");
  RunConfig cfg = RunConfig::from_preset(it != kv.end() ? it->second : fallback_preset);
  siamtrack::apply(cfg, kv);
  return cfg;
}

}  // namespace siamtrack
