#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "rsim/errors.hpp"
#include "rsim/network.hpp"
#include "rsim/rng.hpp"
#include "rsim/tensor.hpp"

using namespace rsim;

TEST_CASE("compact config geometry") {
    const NetworkConfig cfg = NetworkConfig::compact();
    cfg.validate();
    CHECK(cfg.input_h == 64);
    CHECK(cfg.input_c == 3);
    CHECK(cfg.latent_shape() == Shape{8, 8, 32});
    CHECK(cfg.discriminator_input_shape() == Shape{8, 8, 64});
    CHECK(cfg.discriminator_flat() == 128);
    // 8*8*32 latent elements over 64*64*3 input elements.
    CHECK(cfg.compression_ratio() == doctest::Approx(2048.0 / 12288.0).epsilon(1e-12));
    CHECK(cfg.compression_ratio() <= 0.17);
}

TEST_CASE("full config geometry") {
    const NetworkConfig cfg = NetworkConfig::full();
    cfg.validate();
    CHECK(cfg.input_h == 256);
    CHECK(cfg.latent_shape() == Shape{8, 8, 512});
    CHECK(cfg.compression_ratio() <= 0.17);
}

TEST_CASE("activation convention is positional") {
    NetworkConfig cfg = NetworkConfig::compact();
    // Scramble, then let the convention restore the canonical pattern.
    for (auto& s : cfg.encoder) s.activation = Activation::sigmoid;
    for (auto& s : cfg.decoder) s.activation = Activation::linear;
    cfg.apply_default_activations();
    for (std::size_t i = 0; i + 1 < cfg.encoder.size(); ++i)
        CHECK(cfg.encoder[i].activation == Activation::relu);
    CHECK(cfg.encoder.back().activation == Activation::linear);
    for (std::size_t i = 0; i + 1 < cfg.decoder.size(); ++i)
        CHECK(cfg.decoder[i].activation == Activation::relu);
    CHECK(cfg.decoder.back().activation == Activation::sigmoid);
    for (const auto& s : cfg.discriminator) CHECK(s.activation == Activation::relu);
}

TEST_CASE("block spec validation") {
    ResidualBlockSpec ok{BlockKind::identity, 8, 8, 1, BlockDirection::encode, Activation::relu};
    ok.validate();
    ResidualBlockSpec channel_change = ok;
    channel_change.out_c = 16;
    CHECK_THROWS_AS(channel_change.validate(), ValueError);
    ResidualBlockSpec strided_identity = ok;
    strided_identity.stride = 2;
    CHECK_THROWS_AS(strided_identity.validate(), ValueError);
    ResidualBlockSpec bad_stride = ok;
    bad_stride.kind = BlockKind::projection;
    bad_stride.stride = 3;
    CHECK_THROWS_AS(bad_stride.validate(), ValueError);
}

TEST_CASE("config validation catches broken chains") {
    NetworkConfig cfg = NetworkConfig::compact();
    cfg.encoder[1].in_c = 99;
    CHECK_THROWS_AS(cfg.validate(), ShapeError);

    NetworkConfig odd = NetworkConfig::compact();
    odd.input_h = 63; // not divisible by the stride chain
    CHECK_THROWS_AS(odd.validate(), ShapeError);
}

TEST_CASE("initialization is seed-deterministic with canonical draw order") {
    const NetworkConfig cfg = NetworkConfig::compact();
    Rng a(5), b(5), c(6);
    AutoencoderParams pa = init_autoencoder(cfg, a);
    AutoencoderParams pb = init_autoencoder(cfg, b);
    AutoencoderParams pc = init_autoencoder(cfg, c);
    CHECK(pa.encoder[0].conv1.kernel.data == pb.encoder[0].conv1.kernel.data);
    CHECK(pa.decoder[2].conv2.kernel.data == pb.decoder[2].conv2.kernel.data);
    CHECK(pa.encoder[0].conv1.kernel.data != pc.encoder[0].conv1.kernel.data);
    // Biases start at zero, batchnorm at identity.
    for (double v : pa.encoder[0].conv1.bias.data) CHECK(v == 0.0);
    for (double v : pa.encoder[0].bn1.gamma.data) CHECK(v == 1.0);
}

TEST_CASE("he initialization variance tracks fan-in") {
    // Large kernel so the sample deviation concentrates: std ~ sqrt(2/fan_in).
    ResidualBlockSpec spec{BlockKind::projection, 32, 64, 2, BlockDirection::encode,
                           Activation::relu};
    Rng rng(7);
    const ResidualBlockParams p = init_block(spec, rng);
    const auto& k = p.conv1.kernel; // fan_in = 3*3*32
    double mean = 0.0;
    for (double v : k.data) mean += v;
    mean /= static_cast<double>(k.size());
    double var = 0.0;
    for (double v : k.data) var += (v - mean) * (v - mean);
    var /= static_cast<double>(k.size());
    const double expected = 2.0 / (3.0 * 3.0 * 32.0);
    CHECK(std::abs(mean) < 0.01);
    CHECK(var == doctest::Approx(expected).epsilon(0.15));
}

TEST_CASE("parameters() excludes running statistics") {
    const NetworkConfig cfg = NetworkConfig::compact();
    Rng rng(3);
    AutoencoderParams ae = init_autoencoder(cfg, rng);
    const std::vector<Tensor*> ps = parameters(ae);
    for (const Tensor* t : ps) {
        for (const auto& blk : ae.encoder) {
            CHECK(t != &blk.bn1.running_mean);
            CHECK(t != &blk.bn1.running_var);
            CHECK(t != &blk.bn2.running_mean);
            CHECK(t != &blk.bn2.running_var);
        }
    }
    // conv1 kernel/bias, bn1 gamma/beta, conv2 kernel/bias, bn2 gamma/beta,
    // projection kernel/bias per block; every compact block projects.
    CHECK(ps.size() == (cfg.encoder.size() + cfg.decoder.size()) * 10);
}

TEST_CASE("zeroed main path turns an identity block into plain relu") {
    ResidualBlockSpec spec{BlockKind::identity, 2, 2, 1, BlockDirection::encode, Activation::relu};
    Rng rng(9);
    ResidualBlockParams p = init_block(spec, rng);
    for (double& v : p.conv1.kernel.data) v = 0.0;
    for (double& v : p.conv2.kernel.data) v = 0.0;

    Tensor x = Tensor::uniform({2, 4, 4, 2}, -1.0, 1.0, rng);
    Graph g;
    const Var y = residual_block(g, g.input(x), spec, p, BnMode::train);
    const Tensor& out = g.value(y);
    for (std::int64_t i = 0; i < x.size(); ++i)
        CHECK(out.data[i] == doctest::Approx(std::max(0.0, x.data[i])).epsilon(1e-12));
}

TEST_CASE("encode and decode shapes round-trip the config") {
    const NetworkConfig cfg = NetworkConfig::compact();
    Rng rng(21);
    const AutoencoderParams ae = init_autoencoder(cfg, rng);
    const Tensor img = Tensor::uniform({64, 64, 3}, 0.0, 1.0, rng);
    const Tensor z = encode(img, cfg, ae);
    CHECK(z.shape == cfg.latent_shape());
    const Tensor y = decode(z, cfg, ae);
    CHECK(y.shape == Shape{64, 64, 3});
    // The decoder ends in a sigmoid, so reconstructions live in (0,1).
    for (double v : y.data) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("discriminate emits probability rows, match first") {
    const NetworkConfig cfg = NetworkConfig::compact();
    Rng rng(22);
    const AutoencoderParams ae = init_autoencoder(cfg, rng);
    const DiscriminatorParams disc = init_discriminator(cfg, rng);
    const Tensor img = Tensor::uniform({64, 64, 3}, 0.0, 1.0, rng);
    const Tensor za = encode(img, cfg, ae);
    const Tensor zb = za;
    const Tensor probs = discriminate(za, zb, cfg, disc);
    CHECK(probs.shape == Shape{2});
    CHECK(probs.data[0] + probs.data[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(probs.data[0] >= 0.0);
    CHECK(probs.data[0] <= 1.0);
}

TEST_CASE("eval-mode forward is batching-neutral") {
    // Per-sample eval-mode arithmetic is identical inside and outside a
    // batch, so scoring in batches cannot change results.
    const NetworkConfig cfg = NetworkConfig::compact();
    Rng rng(23);
    const AutoencoderParams ae = init_autoencoder(cfg, rng);
    const DiscriminatorParams disc = init_discriminator(cfg, rng);

    std::vector<Tensor> feats;
    for (int i = 0; i < 3; ++i)
        feats.push_back(encode(Tensor::uniform({64, 64, 3}, 0.0, 1.0, rng), cfg, ae));

    std::vector<const Tensor*> fa{&feats[0], &feats[0], &feats[0]};
    std::vector<const Tensor*> fb{&feats[0], &feats[1], &feats[2]};
    const Tensor batch_a = stack_batch(fa);
    const Tensor batch_b = stack_batch(fb);
    const Tensor batched = discriminate(batch_a, batch_b, cfg, disc);
    CHECK(batched.shape == Shape{3, 2});
    for (int i = 0; i < 3; ++i) {
        const Tensor single = discriminate(*fa[static_cast<std::size_t>(i)],
                                           *fb[static_cast<std::size_t>(i)], cfg, disc);
        CHECK(batched.data[2 * i] == single.data[0]);
        CHECK(batched.data[2 * i + 1] == single.data[1]);
    }
}

TEST_CASE("const forwards leave parameters and running stats untouched") {
    const NetworkConfig cfg = NetworkConfig::compact();
    Rng rng(24);
    const AutoencoderParams ae = init_autoencoder(cfg, rng);
    const std::vector<double> rm_before = ae.encoder[0].bn1.running_mean.data;
    const Tensor img = Tensor::uniform({64, 64, 3}, 0.0, 1.0, rng);
    (void)encode(img, cfg, ae);
    CHECK(ae.encoder[0].bn1.running_mean.data == rm_before);
}

TEST_CASE("train-mode forward updates running statistics") {
    const NetworkConfig cfg = NetworkConfig::compact();
    Rng rng(25);
    AutoencoderParams ae = init_autoencoder(cfg, rng);
    const std::vector<double> rm_before = ae.encoder[0].bn1.running_mean.data;
    const Tensor batch = Tensor::uniform({2, 64, 64, 3}, 0.0, 1.0, rng);
    Graph g;
    (void)encode(g, g.input(batch), cfg, ae, BnMode::train);
    CHECK(ae.encoder[0].bn1.running_mean.data != rm_before);
}
