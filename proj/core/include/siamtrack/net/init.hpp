#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "siamtrack/net/layers.hpp"

namespace siamtrack::net {

/// Fan-in scaled Gaussian: N(0, 2 / fan_in) weights, zero bias.
void xavier_improved(LayerParams& p, std::size_t fan_in, std::mt19937_64& rng);

/// Named handle to a tensor that is persisted in checkpoints.
struct StateEntry {
  std::string name;
  Tensor* tensor;
};

/// weight, bias and (for batch-norm) running mean / variance, in that order.
void append_state(LayerParams& p, std::vector<StateEntry>& out);
void append_params(LayerParams& p, std::vector<Param*>& out);

}  // namespace siamtrack::net
