#include <benchmark/benchmark.h>

#include <random>

#include "tripath/metrics.hpp"
#include "tripath/segmenter.hpp"

using namespace tripath;

namespace {

std::string cot_text(int sentences) {
  static const char* parts[] = {"The river floods every spring because the snow melts quickly.",
                                "Therefore the farmers plant late in the season.",
                                "As a result, the harvest moves into early autumn.",
                                "First, note that the soil stays wet for weeks, e.g. after 3.5 cm of rain.",
                                "Then the roots need time to settle."};
  std::string out;
  for (int i = 0; i < sentences; ++i) out += std::string(parts[i % 5]) + " ";
  return out;
}

void BM_Segment(benchmark::State& state) {
  const auto text = cot_text(static_cast<int>(state.range(0)));
  const auto lexicon = default_lexicon();
  for (auto _ : state) benchmark::DoNotOptimize(segment_cot(text, lexicon, 3, 1 << 20).units.size());
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(text.size()));
}
BENCHMARK(BM_Segment)->Arg(5)->Arg(50)->Arg(500);

void BM_Auroc(benchmark::State& state) {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> scores;
  std::vector<int> labels;
  for (std::int64_t i = 0; i < state.range(0); ++i) {
    scores.push_back(u(gen));
    labels.push_back(static_cast<int>(i % 2));
  }
  for (auto _ : state) benchmark::DoNotOptimize(auroc(scores, labels));
}
BENCHMARK(BM_Auroc)->Arg(1000)->Arg(100000);

}  // namespace

BENCHMARK_MAIN();
