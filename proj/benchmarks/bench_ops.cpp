// Microbenchmarks for the tensor kernels and network forward/backward
// passes, at the geometries the compact configuration actually runs.

#include <benchmark/benchmark.h>

#include "rsim/graph.hpp"
#include "rsim/network.hpp"
#include "rsim/rng.hpp"
#include "rsim/tensor.hpp"
#include "rsim/training.hpp"

using namespace rsim;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed) {
    Rng rng(seed);
    return Tensor::uniform(std::move(shape), -1.0, 1.0, rng);
}

void BM_Conv2dForward(benchmark::State& state) {
    const int c = static_cast<int>(state.range(0));
    const Tensor x = random_tensor({32, 32, c}, 1);
    const Tensor w = random_tensor({3, 3, c, 2 * c}, 2);
    const Tensor b = random_tensor({2 * c}, 3);
    for (auto _ : state) {
        Graph g;
        benchmark::DoNotOptimize(g.value(g.conv2d(g.weight(x), g.weight(w), g.weight(b), 2, 1)));
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Conv2dForward)->Arg(8)->Arg(16)->Arg(32);

void BM_Conv2dBackward(benchmark::State& state) {
    const int c = static_cast<int>(state.range(0));
    Tensor x = random_tensor({32, 32, c}, 1);
    Tensor w = random_tensor({3, 3, c, 2 * c}, 2);
    Tensor b = random_tensor({2 * c}, 3);
    for (auto _ : state) {
        Graph g;
        Var y = g.conv2d(g.param(x), g.param(w), g.param(b), 2, 1);
        g.backward(g.sum(g.mul(y, y)));
        x.zero_grad();
        w.zero_grad();
        b.zero_grad();
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Conv2dBackward)->Arg(8)->Arg(16)->Arg(32);

void BM_TransposedConvForward(benchmark::State& state) {
    const int c = static_cast<int>(state.range(0));
    const Tensor x = random_tensor({16, 16, c}, 1);
    const Tensor w = random_tensor({4, 4, c / 2, c}, 2);
    const Tensor b = random_tensor({c / 2}, 3);
    for (auto _ : state) {
        Graph g;
        benchmark::DoNotOptimize(
            g.value(g.conv2d_transpose(g.weight(x), g.weight(w), g.weight(b), 2, 1)));
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_TransposedConvForward)->Arg(16)->Arg(32);

void BM_Maxpool2(benchmark::State& state) {
    const Tensor x = random_tensor({64, 64, 16}, 1);
    for (auto _ : state) {
        Graph g;
        benchmark::DoNotOptimize(g.value(g.maxpool2(g.weight(x))));
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Maxpool2);

void BM_BatchnormTrain(benchmark::State& state) {
    Tensor x = random_tensor({16, 16, 16, 16}, 1);
    BatchNormState bn = BatchNormState::create(16);
    for (auto _ : state) {
        Graph g;
        benchmark::DoNotOptimize(g.value(g.batchnorm2d(g.param(x), bn, BnMode::train)));
        x.zero_grad();
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_BatchnormTrain);

void BM_EncodeImage(benchmark::State& state) {
    const NetworkConfig cfg = NetworkConfig::compact();
    Rng rng(1);
    const AutoencoderParams params = init_autoencoder(cfg, rng);
    const Tensor image = random_tensor({cfg.input_h, cfg.input_w, cfg.input_c}, 2);
    for (auto _ : state) benchmark::DoNotOptimize(encode(image, cfg, params));
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_EncodeImage);

void BM_ReconstructImage(benchmark::State& state) {
    const NetworkConfig cfg = NetworkConfig::compact();
    Rng rng(1);
    const AutoencoderParams params = init_autoencoder(cfg, rng);
    const Tensor features = random_tensor(cfg.latent_shape(), 2);
    for (auto _ : state) benchmark::DoNotOptimize(decode(features, cfg, params));
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_ReconstructImage);

void BM_DiscriminatePair(benchmark::State& state) {
    const NetworkConfig cfg = NetworkConfig::compact();
    Rng rng(1);
    const DiscriminatorParams params = init_discriminator(cfg, rng);
    const Tensor fa = random_tensor(cfg.latent_shape(), 2);
    const Tensor fb = random_tensor(cfg.latent_shape(), 3);
    for (auto _ : state) benchmark::DoNotOptimize(discriminate(fa, fb, cfg, params));
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_DiscriminatePair);

void BM_AutoencoderTrainStep(benchmark::State& state) {
    const NetworkConfig cfg = NetworkConfig::compact();
    Rng rng(1);
    AutoencoderParams params = init_autoencoder(cfg, rng);
    Tensor batch = random_tensor({4, cfg.input_h, cfg.input_w, cfg.input_c}, 2);
    for (double& v : batch.data) v = 0.5 + 0.4 * v;
    TrainConfig tc;
    Optimizer opt(parameters(params), tc);
    for (auto _ : state) {
        Graph g;
        Var x = g.weight(batch);
        Var z = encode(g, x, cfg, params, BnMode::train);
        g.backward(mse_loss(g, decode(g, z, cfg, params, BnMode::train), x));
        opt.step();
    }
    state.SetItemsProcessed(state.iterations() * 4);
}
BENCHMARK(BM_AutoencoderTrainStep);

} // namespace

BENCHMARK_MAIN();
