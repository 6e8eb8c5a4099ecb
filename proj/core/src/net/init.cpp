#include "siamtrack/net/init.hpp"

#include <cmath>

namespace siamtrack::net {

void xavier_improved(LayerParams& p, std::size_t fan_in, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  for (double& v : p.weight.value.values()) v = normal(rng);
  p.bias.value.fill(0.0);
}

void append_state(LayerParams& p, std::vector<StateEntry>& out) {
  out.push_back({p.weight.name, &p.weight.value});
  out.push_back({p.bias.name, &p.bias.value});
  if (!p.running_mean.empty()) {
    const std::string base = p.weight.name.substr(0, p.weight.name.rfind('.'));
    out.push_back({base + ".running_mean", &p.running_mean});
    out.push_back({base + ".running_var", &p.running_var});
  }
}

void append_params(LayerParams& p, std::vector<Param*>& out) {
  out.push_back(&p.weight);
  out.push_back(&p.bias);
}

}  // namespace siamtrack::net
