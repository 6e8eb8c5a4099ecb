#include "siamtrack/eval.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include "siamtrack/errors.hpp"

namespace siamtrack::eval {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// The protocol itself; `predict(f, reinit)` returns the tracker output at
// frame f, initialising when `reinit` is set.
template <typename Predict>
OverlapSeries protocol(const data::Sequence& seq, const EvalConfig& cfg, Predict predict) {
  const std::size_t n = seq.size();
  if (n == 0) throw IoError("sequence " + seq.name + " is empty");
  OverlapSeries s;
  s.sequence = seq.name;
  s.iou.assign(n, kNaN);
  s.status.assign(n, FrameStatus::kSkipped);
  s.tags = seq.tags;
  std::size_t f = 0;
  std::size_t burn_until = 0;  // frames < burn_until are burn-in
  bool reinit = true;
  while (f < n) {
    if (reinit) {
      const Box b = predict(f, true);
      s.iou[f] = iou(b, seq.boxes[f]);
      s.status[f] = FrameStatus::kInit;
      if (f > 0) {
        s.reinits.push_back(f);
        burn_until = f + 1 + cfg.burn_in;
      }
      reinit = false;
      ++f;
      continue;
    }
    const Box b = predict(f, false);
    const double o = iou(b, seq.boxes[f]);
    s.iou[f] = o;
    if (o <= cfg.failure_threshold) {
      s.status[f] = FrameStatus::kFailure;
      s.failures.push_back(f);
      f += std::max<std::size_t>(1, cfg.reinit_skip);
      reinit = true;
      continue;
    }
    s.status[f] = f < burn_until ? FrameStatus::kBurnIn : FrameStatus::kTracked;
    ++f;
  }
  return s;
}

}  // namespace

OverlapSeries run_supervised(track::Tracker& tracker, const data::Sequence& seq, const EvalConfig& cfg) {
  return protocol(seq, cfg, [&](std::size_t f, bool init) {
    try {
      const Image frame = seq.frame(f);
      return init ? tracker.initialize(frame, seq.boxes[f], f) : tracker.update(frame, f);
    } catch (const std::exception& e) {
      throw std::runtime_error("sequence " + seq.name + ", frame " + std::to_string(f + 1) + ": " + e.what());
    }
  });
}

OverlapSeries run_supervised(const std::vector<Box>& log, const data::Sequence& seq, const EvalConfig& cfg) {
  if (log.size() != seq.size()) {
    throw IoError("sequence " + seq.name + ": box log has " + std::to_string(log.size()) +
                  " lines but ground truth has " + std::to_string(seq.size()));
  }
  return protocol(seq, cfg, [&](std::size_t f, bool init) { return init ? seq.boxes[f] : log[f]; });
}

bool counted(FrameStatus s) { return s == FrameStatus::kTracked; }

double accuracy(std::span<const OverlapSeries> series) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& s : series)
    for (std::size_t f = 0; f < s.size(); ++f)
      if (counted(s.status[f])) {
        sum += s.iou[f];
        ++n;
      }
  return n == 0 ? kNaN : sum / static_cast<double>(n);
}

double accuracy(const OverlapSeries& series) { return accuracy(std::span(&series, 1)); }

std::size_t robustness(std::span<const OverlapSeries> series) {
  std::size_t n = 0;
  for (const auto& s : series) n += s.failures.size();
  return n;
}

std::size_t robustness(const OverlapSeries& series) { return series.failures.size(); }

EAOCurve eao(std::span<const OverlapSeries> series, std::optional<std::size_t> low,
             std::optional<std::size_t> high) {
  if (series.empty()) throw std::invalid_argument("eao: no sequences");
  struct Run {
    std::vector<double> overlap;
    bool failed;
  };
  std::vector<Run> runs;
  std::vector<std::size_t> lengths;
  std::size_t max_len = 0;
  for (const auto& s : series) {
    Run r;
    const std::size_t end = s.failures.empty() ? s.size() : s.failures.front();
    r.failed = !s.failures.empty();
    r.overlap.assign(s.iou.begin(), s.iou.begin() + static_cast<std::ptrdiff_t>(end));
    runs.push_back(std::move(r));
    lengths.push_back(s.size());
    max_len = std::max(max_len, s.size());
  }
  EAOCurve c;
  c.phi.assign(max_len, 0.0);
  for (std::size_t ns = 1; ns <= max_len; ++ns) {
    double total = 0.0;
    std::size_t used = 0;
    for (std::size_t k = 0; k < runs.size(); ++k) {
      if (!runs[k].failed && lengths[k] < ns) continue;
      double sum = 0.0;
      for (std::size_t f = 0; f < std::min(ns, runs[k].overlap.size()); ++f) sum += runs[k].overlap[f];
      total += sum / static_cast<double>(ns);
      ++used;
    }
    c.phi[ns - 1] = used == 0 ? 0.0 : total / static_cast<double>(used);
  }
  std::sort(lengths.begin(), lengths.end());
  const std::size_t mid = lengths.size() / 2;
  const double median = lengths.size() % 2 ? static_cast<double>(lengths[mid])
                                           : 0.5 * static_cast<double>(lengths[mid - 1] + lengths[mid]);
  std::size_t lo = low.value_or(static_cast<std::size_t>(std::max(1.0, std::floor(median / 2.0))));
  std::size_t hi = high.value_or(static_cast<std::size_t>(std::ceil(2.0 * median)));
  if (lo < 1 || hi > max_len || lo > hi) {
    const std::size_t clo = std::clamp<std::size_t>(lo, 1, max_len);
    const std::size_t chi = std::clamp<std::size_t>(hi, clo, max_len);
    if (low || high) spdlog::warn("eao: interval [{}, {}] clamped to [{}, {}]", lo, hi, clo, chi);
    lo = clo;
    hi = chi;
  }
  c.low = lo;
  c.high = hi;
  double sum = 0.0;
  for (std::size_t ns = lo; ns <= hi; ++ns) sum += c.phi[ns - 1];
  c.score = sum / static_cast<double>(hi - lo + 1);
  return c;
}

Report make_report(std::vector<OverlapSeries> series, const EvalConfig& cfg) {
  Report r;
  r.series = std::move(series);
  r.curve = eao(r.series, cfg.eao_low, cfg.eao_high);
  r.scopes.push_back({"all", accuracy(r.series), robustness(r.series), r.curve.score});
  for (const auto& s : r.series) r.scopes.push_back({"seq:" + s.sequence, accuracy(s), robustness(s), std::nullopt});
  std::set<std::string> tags;
  for (const auto& s : r.series)
    for (const auto& t : s.tags) tags.insert(t.begin(), t.end());
  for (const std::string& tag : tags) {
    double sum = 0.0;
    std::size_t n = 0, failures = 0;
    for (const auto& s : r.series) {
      for (std::size_t f = 0; f < s.size() && f < s.tags.size(); ++f) {
        if (std::find(s.tags[f].begin(), s.tags[f].end(), tag) == s.tags[f].end()) continue;
        if (counted(s.status[f])) {
          sum += s.iou[f];
          ++n;
        }
        failures += s.status[f] == FrameStatus::kFailure;
      }
    }
    r.scopes.push_back({"attr:" + tag, n ? sum / static_cast<double>(n) : kNaN, failures, std::nullopt});
  }
  return r;
}

void write_report(const Report& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const std::string& name) {
    std::ofstream out(dir / name);
    if (!out) throw IoError("cannot write " + (dir / name).string());
    out.precision(10);
    return out;
  };
  for (const auto& s : report.series) {
    auto out = open(s.sequence + "_frames.csv");
    out << "frame,iou,failed\n";
    for (std::size_t f = 0; f < s.size(); ++f) {
      out << f + 1 << ',';
      if (!std::isnan(s.iou[f])) out << s.iou[f];
      out << ',' << (s.status[f] == FrameStatus::kFailure ? 1 : 0) << '\n';
    }
  }
  {
    auto out = open("summary.csv");
    out << "scope,A,R,EAO\n";
    for (const auto& sc : report.scopes) {
      out << sc.scope << ',';
      if (!std::isnan(sc.accuracy)) out << sc.accuracy;
      out << ',' << sc.robustness << ',';
      if (sc.eao) out << *sc.eao;
      out << '\n';
    }
  }
  auto out = open("eao_curve.csv");
  out << "Ns,phi\n";
  for (std::size_t k = 0; k < report.curve.phi.size(); ++k) out << k + 1 << ',' << report.curve.phi[k] << '\n';
}

}  // namespace siamtrack::eval
