#include <random>

#include <benchmark/benchmark.h>

#include "blindtrack/estimator.hpp"
#include "blindtrack/eval.hpp"
#include "support.hpp"

namespace bt = blindtrack;

namespace {

bt::Region scattered(std::mt19937_64& rng, int n) {
  std::vector<bt::Rect> rects;
  std::uniform_int_distribution<int> x(0, 600), y(0, 440), s(1, 40);
  for (int i = 0; i < n; ++i) rects.push_back({x(rng), y(rng), s(rng), s(rng)});
  return bt::Region::from_rects(rects);
}

void BM_TranslateClip(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const bt::Region r = scattered(rng, static_cast<int>(state.range(0)));
  const bt::Rect screen{0, 0, 640, 480};
  int k = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(r.translate_clip({(k % 7) - 3, (k % 5) - 2}, screen));
    ++k;
  }
}
BENCHMARK(BM_TranslateClip)->Arg(4)->Arg(32)->Arg(256);

void BM_Subtract(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const bt::Region a = scattered(rng, static_cast<int>(state.range(0)));
  const bt::Region b = scattered(rng, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(a.subtract(b));
}
BENCHMARK(BM_Subtract)->Arg(4)->Arg(32)->Arg(256);

void BM_ClickFromUnknown(benchmark::State& state) {
  const auto m = bt::test::pacemaker();
  for (auto _ : state) {
    auto est = bt::Estimator::init_unknown(m, {});
    est.on_click();
    benchmark::DoNotOptimize(est.estimate());
  }
}
BENCHMARK(BM_ClickFromUnknown);

void BM_TrackTrace(benchmark::State& state) {
  const auto m = bt::test::pacemaker();
  const auto corpus = bt::test::corpus(1, 77);
  bt::TrackOptions o;
  o.start = state.range(0) ? bt::StartMode::kUnknown : bt::StartMode::kKnown;
  for (auto _ : state) benchmark::DoNotOptimize(bt::track_trace(m, corpus[0].trace, o, "b"));
}
BENCHMARK(BM_TrackTrace)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
