#include <benchmark/benchmark.h>

#include <cmath>
#include <numbers>
#include <random>

#include "qbe/mfcc/mfcc.hpp"
#include "qbe/search/dtw_search.hpp"

using namespace qbe;

namespace {

Matrix random_distances(std::size_t rows, std::size_t cols, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Matrix m(rows, cols);
    for (auto& v : m.values()) v = u(rng);
    return m;
}

featio::FeatureMatrix random_features(std::size_t frames, std::size_t dims, unsigned seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<float> g;
    featio::FeatureMatrix f;
    f.data = DenseMatrix<float>(frames, dims);
    for (auto& v : f.data.values()) v = g(rng);
    return f;
}

void BM_WindowCost(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto d = random_distances(n, n, 1);
    search::DtwWorkspace ws;
    for (auto _ : state) benchmark::DoNotOptimize(search::dtw_window_cost(d, 0, n, ws));
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_WindowCost)->Arg(20)->Arg(50)->Arg(100);

void BM_WindowBeats(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto d = random_distances(n, n, 2);
    search::DtwWorkspace ws;
    for (auto _ : state) benchmark::DoNotOptimize(search::dtw_window_beats(d, 0, n, 0.3, ws));
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_WindowBeats)->Arg(20)->Arg(50)->Arg(100);

void BM_DetectionScore(benchmark::State& state) {
    const auto q = random_features(50, 39, 3);
    const auto t = random_features(static_cast<std::size_t>(state.range(0)), 39, 4);
    const search::SearchConfig cfg;
    for (auto _ : state) benchmark::DoNotOptimize(search::detection_score(q, t, cfg));
    state.counters["windows"] = static_cast<double>(state.range(0) - 50 + 1);
}
BENCHMARK(BM_DetectionScore)->Arg(120)->Arg(200)->Arg(400)->Unit(benchmark::kMicrosecond);

void BM_Mfcc39(benchmark::State& state) {
    featio::AudioBuffer a{{}, 8000};
    std::mt19937 rng(5);
    std::normal_distribution<double> g(0.0, 0.05);
    for (int i = 0; i < 8000 * 3; ++i) a.samples.push_back(0.3 * std::sin(2.0 * std::numbers::pi * 440.0 * i / 8000.0) + g(rng));
    const mfcc::MfccConfig cfg;
    for (auto _ : state) benchmark::DoNotOptimize(mfcc::extract_mfcc_with_deltas(a, cfg));
    state.SetLabel("3 s at 8 kHz");
}
BENCHMARK(BM_Mfcc39)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
