#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include "siamtrack/net/graph.hpp"

namespace siamtrack::net {

struct GradCheckOptions {
  double step = 1e-3;
  /// Denominator floor in the relative error.
  double floor = 1e-6;
  /// Seed of the random projection that reduces the output to a scalar and
  /// of the entry subsampling.
  std::uint64_t seed = 1;
  /// Entries checked per parameter; 0 checks every entry.
  std::size_t max_entries = 0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  bool finite = true;
  std::size_t checked = 0;
  std::string worst;  // "<param>[<index>]"
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;

  bool passed(double tolerance) const { return finite && max_rel_error <= tolerance; }
};

/// Builds a fresh graph reading the current values of the Params under test
/// and returns the op output.
using GraphBuilder = std::function<Var(Graph&)>;

/// Compares the tape gradient of <out, r> (r a fixed Gaussian projection)
/// against central differences for every entry of every Param in `wrt`:
/// max |analytic - numeric| / max(|analytic|, |numeric|, floor).
/// Param values are restored before returning; their grads are overwritten.
GradCheckReport grad_check(const GraphBuilder& build, std::span<Param* const> wrt,
                           const GradCheckOptions& opts = {});

}  // namespace siamtrack::net
