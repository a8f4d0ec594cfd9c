// Microbenchmarks for the per-image hot paths. Sizes follow a typical
// dashcam-style frame (512 x 1024, 20 classes) unless the op is quadratic.
#include <benchmark/benchmark.h>

#include <random>

#include "segdiag/confusion.hpp"
#include "segdiag/distance_transform.hpp"
#include "segdiag/error_taxonomy.hpp"
#include "segdiag/metrics.hpp"
#include "segdiag/resample.hpp"
#include "segdiag/scores.hpp"
#include "segdiag/taxonomy.hpp"
#include "segdiag/uncertainty.hpp"

namespace {

using namespace segdiag;

constexpr int kHeight = 512;
constexpr int kWidth = 1024;
constexpr int kClasses = 20;

Taxonomy bench_taxonomy() {
    std::vector<ClassDef> classes;
    for (int i = 0; i < kClasses; ++i) {
        classes.push_back({static_cast<ClassId>(i), "c" + std::to_string(i)});
    }
    return Taxonomy(std::move(classes), ClassId{0}, 255,
                    {{"pair", {1, 2}}, {"trio", {3, 4, 5}}});
}

LabelMap random_labels(std::mt19937& rng, int h, int w) {
    LabelMap m(h, w);
    std::uniform_int_distribution<int> cls(0, kClasses - 1);
    for (auto& v : m.data()) v = static_cast<ClassId>(cls(rng));
    return m;
}

ScoreTensor random_scores(std::mt19937& rng, int h, int w, int c) {
    ScoreTensor s(h, w, c);
    std::uniform_real_distribution<float> u(0.01f, 1.0f);
    for (int r = 0; r < h; ++r) {
        for (int col = 0; col < w; ++col) {
            auto px = s.pixel(r, col);
            float sum = 0.0f;
            for (auto& v : px) sum += v = u(rng);
            for (auto& v : px) v /= sum;
        }
    }
    s.set_normalized(true);
    return s;
}

void BM_AccumulateConfusion(benchmark::State& state) {
    std::mt19937 rng(1);
    Taxonomy t = bench_taxonomy();
    LabelMap gt = random_labels(rng, kHeight, kWidth);
    LabelMap pred = random_labels(rng, kHeight, kWidth);
    for (auto _ : state) {
        benchmark::DoNotOptimize(accumulate_confusion(gt, pred, t));
    }
    state.SetItemsProcessed(state.iterations() * gt.size());
}
BENCHMARK(BM_AccumulateConfusion);

void BM_SquaredDistanceTransform(benchmark::State& state) {
    std::mt19937 rng(2);
    Image<std::uint8_t> seeds(kHeight, kWidth, 0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& v : seeds.data()) v = u(rng) < 0.02 ? 1 : 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(squared_euclidean_distance(seeds));
    }
    state.SetItemsProcessed(state.iterations() * seeds.size());
}
BENCHMARK(BM_SquaredDistanceTransform);

void BM_UncertaintyMap(benchmark::State& state) {
    std::mt19937 rng(3);
    ScoreTensor scores = random_scores(rng, kHeight / 2, kWidth / 2, kClasses);
    auto measure = state.range(0) == 0 ? UncertaintyMeasure::relative_entropy
                                       : UncertaintyMeasure::relative_probability;
    for (auto _ : state) {
        benchmark::DoNotOptimize(uncertainty_map(scores, measure));
    }
    state.SetItemsProcessed(state.iterations() * scores.height() * scores.width());
}
BENCHMARK(BM_UncertaintyMap)->Arg(0)->Arg(1);

void BM_BicubicResizeTensor(benchmark::State& state) {
    std::mt19937 rng(4);
    ScoreTensor src = random_scores(rng, 128, 128, kClasses);
    for (auto _ : state) {
        benchmark::DoNotOptimize(bicubic_resize(src, 512, 512));
    }
}
BENCHMARK(BM_BicubicResizeTensor);

void BM_MislocalisationGain(benchmark::State& state) {
    std::mt19937 rng(5);
    int h = 256, w = 256;
    Taxonomy t = bench_taxonomy();
    LabelMap gt = random_labels(rng, h, w);
    LabelMap pred = gt;
    std::uniform_int_distribution<int> coin(0, 9);
    std::uniform_int_distribution<int> cls(0, kClasses - 1);
    for (auto& v : pred.data()) {
        if (coin(rng) == 0) v = static_cast<ClassId>(cls(rng));
    }
    ConfusionMatrix cm = accumulate_confusion(gt, pred, t);
    std::vector<int> radii{static_cast<int>(state.range(0))};
    for (auto _ : state) {
        benchmark::DoNotOptimize(mislocalisation_gain(gt, pred, cm, t, radii));
    }
    state.SetItemsProcessed(state.iterations() * gt.size());
}
BENCHMARK(BM_MislocalisationGain)->Arg(5)->Arg(15);

void BM_TopnMetrics(benchmark::State& state) {
    std::mt19937 rng(6);
    Taxonomy t = bench_taxonomy();
    LabelMap gt = random_labels(rng, kHeight / 2, kWidth / 2);
    ScoreTensor scores = random_scores(rng, kHeight / 2, kWidth / 2, kClasses);
    for (auto _ : state) {
        benchmark::DoNotOptimize(topn_metrics(gt, scores, 2, t));
    }
    state.SetItemsProcessed(state.iterations() * gt.size());
}
BENCHMARK(BM_TopnMetrics);

}  // namespace

BENCHMARK_MAIN();
