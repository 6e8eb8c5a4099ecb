#include <benchmark/benchmark.h>

#include "siamtrack/model.hpp"
#include "siamtrack/synthetic.hpp"
#include "siamtrack/tracker.hpp"
#include "siamtrack/train.hpp"

namespace {

using namespace siamtrack;

SiameseModel desk_model() {
  SiameseModel model(ModelConfig::desk());
  model.initialize(7);
  return model;
}

const data::Sequence& clip() {
  static const data::Sequence seq = [] {
    data::SyntheticConfig sc;
    sc.sequences = 1;
    sc.frames = 20;
    return data::gen_synthetic(sc).sequences.front();
  }();
  return seq;
}

void BM_TrainStep(benchmark::State& state) {
  SiameseModel model = desk_model();
  const auto& mc = model.config();
  const auto batch = static_cast<std::size_t>(state.range(0));
  const Tensor x = train::stack_images(std::vector<Image>(batch, Image(mc.exemplar_size, mc.exemplar_size, 0.3)));
  const Tensor z = train::stack_images(std::vector<Image>(batch, Image(mc.search_size, mc.search_size, 0.3)));
  const auto labels = train::make_labels(model.geom().response_size, model.geom().response_size,
                                         static_cast<double>(model.geom().stride), 8.0);
  for (auto _ : state) {
    net::Graph g;
    const net::Var scores = model.forward(g, g.constant(x), g.constant(z), net::Mode::kTrain);
    const net::Var loss = train::map_loss(g, scores, labels, train::LossWeighting::kBalanced);
    g.backward(loss);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch));
}
BENCHMARK(BM_TrainStep)->Arg(1)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_TrackerUpdate(benchmark::State& state) {
  const auto& seq = clip();
  SiameseModel model = desk_model();
  track::SiameseTracker tracker(model, {});
  tracker.initialize(seq.frame(0), seq.boxes[0]);
  std::size_t f = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(tracker.update(seq.frame(f), f));
    if (++f == seq.size()) {
      state.PauseTiming();
      tracker.initialize(seq.frame(0), seq.boxes[0]);
      f = 1;
      state.ResumeTiming();
    }
  }
  state.counters["fps"] = benchmark::Counter(static_cast<double>(state.iterations()), benchmark::Counter::kIsRate);
}
BENCHMARK(BM_TrackerUpdate)->Unit(benchmark::kMillisecond);

}  // namespace
