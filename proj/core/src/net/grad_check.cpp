#include "siamtrack/net/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace siamtrack::net {
namespace {

double projected(const GraphBuilder& build, const Tensor& probe) {
  Graph g(false);
  const Tensor& v = g.value(build(g));
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) total += v[i] * probe[i];
  return total;
}

}  // namespace

GradCheckReport grad_check(const GraphBuilder& build, std::span<Param* const> wrt,
                           const GradCheckOptions& opts) {
  GradCheckReport report;
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  for (Param* p : wrt) p->zero_grad();
  Tensor probe;
  {
    Graph g(true);
    const Var out = build(g);
    probe = Tensor(g.value(out).shape());
    for (double& v : probe.values()) v = normal(rng);
    g.backward(out, probe);
  }

  for (Param* p : wrt) {
    std::vector<std::size_t> entries(p->value.size());
    std::iota(entries.begin(), entries.end(), std::size_t{0});
    if (opts.max_entries > 0 && entries.size() > opts.max_entries) {
      std::shuffle(entries.begin(), entries.end(), rng);
      entries.resize(opts.max_entries);
      std::sort(entries.begin(), entries.end());
    }
    for (std::size_t i : entries) {
      const double saved = p->value[i];
      p->value[i] = saved + opts.step;
      const double up = projected(build, probe);
      p->value[i] = saved - opts.step;
      const double down = projected(build, probe);
      p->value[i] = saved;

      const double numeric = (up - down) / (2.0 * opts.step);
      const double analytic = p->grad[i];
      ++report.checked;
      if (!std::isfinite(numeric) || !std::isfinite(analytic)) {
        report.finite = false;
        report.worst = p->name + "[" + std::to_string(i) + "]";
        report.worst_analytic = analytic;
        report.worst_numeric = numeric;
        continue;
      }
      const double denom = std::max({std::abs(analytic), std::abs(numeric), opts.floor});
      const double rel = std::abs(analytic - numeric) / denom;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst = p->name + "[" + std::to_string(i) + "]";
        report.worst_analytic = analytic;
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace siamtrack::net
