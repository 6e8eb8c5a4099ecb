#pragma once

#include <vector>

#include "siamtrack/dataset.hpp"
#include "siamtrack/eval.hpp"

namespace siamtrack::testing {

// Ten frames, ground truth fixed at (10, 10, 10, 10). With threshold 0,
// reinit_skip 2 and burn_in 1 the protocol runs:
//   f0 init | f1 1 | f2 1/3 | f3 1/2 | f4 fail | f5 skip | f6 init | f7 burn-in 2/3 | f8 2/3 | f9 1/2
inline data::Sequence fixture_sequence() {
  data::Sequence s;
  s.name = "fixture";
  s.boxes.assign(10, Box{10, 10, 10, 10});
  return s;
}

inline std::vector<Box> fixture_log() {
  return {
      {10, 10, 10, 10},    // f0 (replaced by ground truth at init)
      {10, 10, 10, 10},    // f1: 1
      {15, 10, 10, 10},    // f2: 50 / 150
      {10, 10, 10, 5},     // f3: 50 / 100
      {100, 100, 10, 10},  // f4: 0, failure
      {0, 0, 1, 1},        // f5: skipped
      {0, 0, 1, 1},        // f6: re-initialised from ground truth
      {12, 10, 10, 10},    // f7: 80 / 120, burn-in
      {10, 12, 10, 10},    // f8: 80 / 120
      {10, 10, 20, 10},    // f9: 100 / 200
  };
}

inline eval::EvalConfig fixture_config() {
  eval::EvalConfig c;
  c.failure_threshold = 0.0;
  c.reinit_skip = 2;
  c.burn_in = 1;
  return c;
}

// Counted frames f1, f2, f3, f8, f9.
inline constexpr double kFixtureAccuracy = (1.0 + 1.0 / 3.0 + 0.5 + 2.0 / 3.0 + 0.5) / 5.0;
// One run truncated at the failure: overlaps 1, 1, 1/3, 1/2 then zeros, so
// phi(Ns) = (17/6) / Ns for Ns >= 4. Interval [10/2, 2*10] clamps to [5, 10].
inline constexpr double kFixtureEao =
    (17.0 / 6.0) * (1.0 / 5 + 1.0 / 6 + 1.0 / 7 + 1.0 / 8 + 1.0 / 9 + 1.0 / 10) / 6.0;

}  // namespace siamtrack::testing
