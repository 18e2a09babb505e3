// Benchmarks for query scoring, full-store ranking, and metric aggregation
// at realistic store sizes.

#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "rsim/feature_store.hpp"
#include "rsim/metrics.hpp"
#include "rsim/network.hpp"
#include "rsim/retrieval.hpp"
#include "rsim/rng.hpp"
#include "rsim/tensor.hpp"

using namespace rsim;

namespace {

FeatureStore make_store(std::size_t records, const Shape& extents, std::uint64_t seed) {
    FeatureStore store(extents);
    Rng rng(seed);
    for (std::size_t i = 0; i < records; ++i) {
        const std::string label = "class_" + std::to_string(i % 8);
        store.add(label + "/img_" + std::to_string(i) + ".png", label,
                  Tensor::uniform(extents, -1.0, 1.0, rng));
    }
    return store;
}

void BM_EuclideanRankAll(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const FeatureStore store = make_store(n, {8, 8, 32}, 1);
    const Tensor query = store.features_as_tensor(0);
    const auto scorer = make_distance_scorer(ScorerKind::euclidean);
    for (auto _ : state) benchmark::DoNotOptimize(rank_all(store, query, *scorer));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EuclideanRankAll)->Arg(100)->Arg(400)->Arg(1600);

void BM_CosineRankAll(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const FeatureStore store = make_store(n, {8, 8, 32}, 1);
    const Tensor query = store.features_as_tensor(0);
    const auto scorer = make_distance_scorer(ScorerKind::cosine);
    for (auto _ : state) benchmark::DoNotOptimize(rank_all(store, query, *scorer));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_CosineRankAll)->Arg(400);

void BM_DiscriminatorScoreBatch(benchmark::State& state) {
    const NetworkConfig cfg = NetworkConfig::compact();
    Rng rng(1);
    const FeatureStore store = make_store(static_cast<std::size_t>(state.range(0)),
                                          cfg.latent_shape(), 2);
    const Tensor query = store.features_as_tensor(0);
    const auto scorer = make_discriminator_scorer(cfg, init_discriminator(cfg, rng));
    for (auto _ : state) benchmark::DoNotOptimize(rank_all(store, query, *scorer));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_DiscriminatorScoreBatch)->Arg(64)->Arg(256);

void BM_ComputeMetrics(benchmark::State& state) {
    Rng rng(3);
    std::vector<RankedQuery> queries;
    for (int q = 0; q < 80; ++q) {
        RankedQuery rq;
        rq.query_label = "class_" + std::to_string(q % 8);
        for (int i = 0; i < 400; ++i)
            rq.ranked_labels.push_back("class_" + std::to_string(rng.uniform_int(0, 7)));
        rq.ranked_labels[static_cast<std::size_t>(rng.uniform_int(0, 399))] = rq.query_label;
        queries.push_back(std::move(rq));
    }
    for (auto _ : state) benchmark::DoNotOptimize(compute_metrics(queries));
    state.SetItemsProcessed(state.iterations() * 80);
}
BENCHMARK(BM_ComputeMetrics);

} // namespace

BENCHMARK_MAIN();
