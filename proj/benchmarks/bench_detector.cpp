#include <benchmark/benchmark.h>

#include "tripath/detector.hpp"
#include "tripath/embeddings.hpp"
#include "tripath/trainer.hpp"

using namespace tripath;

namespace {

DetectorInput instance(std::size_t m, std::size_t d, std::uint64_t seed) {
  DetectorInput in;
  in.states.e_q = stub_embed("q" + std::to_string(seed), d, seed);
  in.states.e_a_dir = stub_embed("a" + std::to_string(seed), d, seed);
  in.states.e_q_rev = stub_embed("r" + std::to_string(seed), d, seed);
  std::vector<std::string> units;
  for (std::size_t i = 0; i < m; ++i) units.push_back("unit " + std::to_string(i));
  in.units = embed_units(units, d, seed);
  return in;
}

void BM_Forward(benchmark::State& state) {
  DetectorConfig cfg;
  cfg.hidden_dim = static_cast<int>(state.range(0));
  const auto params = init_params<float>(cfg, 1);
  const auto in = instance(static_cast<std::size_t>(state.range(1)), static_cast<std::size_t>(cfg.hidden_dim), 1);
  for (auto _ : state) benchmark::DoNotOptimize(forward<float>(in, params, cfg).logits);
}
BENCHMARK(BM_Forward)->Args({32, 4})->Args({32, 16})->Args({64, 8})->Args({128, 8});

// One optimizer step on a full default-size batch.
void BM_TrainStep(benchmark::State& state) {
  DetectorConfig cfg;
  cfg.hidden_dim = static_cast<int>(state.range(0));
  auto params = init_params<float>(cfg, 1);
  std::vector<DetectorInput> batch;
  for (int i = 0; i < cfg.batch_size; ++i) batch.push_back(instance(3 + i % 4, static_cast<std::size_t>(cfg.hidden_dim), i));
  auto flat = flatten(params);
  AdamOptimizer adam(flat.size(), cfg.learning_rate);
  for (auto _ : state) {
    auto grad = make_zero_params<float>(cfg);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      loss_and_gradient(batch[i], static_cast<int>(i % 2), params, cfg, grad, 1.0f / cfg.batch_size);
    }
    auto g = flatten(grad);
    clip_grad_norm(g, 1.0);
    adam.step(flat, g);
    unflatten<float>(flat, params);
  }
  state.SetItemsProcessed(state.iterations() * cfg.batch_size);
}
BENCHMARK(BM_TrainStep)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace
