#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <vector>

#include "rsim/errors.hpp"
#include "rsim/graph.hpp"
#include "rsim/network.hpp"
#include "rsim/rng.hpp"
#include "rsim/tensor.hpp"
#include "rsim/training.hpp"

using namespace rsim;

namespace {

// Single projection block each way keeps training steps cheap.
NetworkConfig tiny_config() {
    NetworkConfig cfg;
    cfg.input_h = 8;
    cfg.input_w = 8;
    cfg.input_c = 2;
    cfg.encoder = {{BlockKind::projection, 2, 4, 2, BlockDirection::encode, Activation::relu}};
    cfg.decoder = {{BlockKind::projection, 4, 2, 2, BlockDirection::decode, Activation::relu}};
    cfg.discriminator = {{BlockKind::projection, 8, 4, 2, BlockDirection::encode, Activation::relu}};
    cfg.apply_default_activations();
    return cfg;
}

double scalar_loss(const std::function<Var(Graph&)>& build) {
    Graph g;
    return g.value(build(g)).data[0];
}

// Two well-separated feature clusters in the tiny config's latent shape.
void make_clusters(std::vector<Tensor>& feats, std::vector<std::string>& labels, int per_class,
                   Rng& rng) {
    for (int i = 0; i < 2 * per_class; ++i) {
        const bool first = i < per_class;
        Tensor f = Tensor::uniform({4, 4, 4}, -0.5, 0.5, rng);
        for (double& v : f.data) v += first ? 2.0 : -2.0;
        feats.push_back(std::move(f));
        labels.push_back(first ? "alpha" : "beta");
    }
}

} // namespace

TEST_CASE("train config validation") {
    TrainConfig ok;
    ok.validate();
    TrainConfig bad = ok;
    bad.batch_size = 1;
    CHECK_THROWS_AS(bad.validate(), ValueError);
    bad = ok;
    bad.learning_rate = 0.0;
    CHECK_THROWS_AS(bad.validate(), ValueError);
    bad = ok;
    bad.beta2 = 1.0;
    CHECK_THROWS_AS(bad.validate(), ValueError);
    bad = ok;
    bad.target_loss = -1.0;
    CHECK_THROWS_AS(bad.validate(), ValueError);
}

TEST_CASE("adam first step matches the bias-corrected formula") {
    Tensor p({2}, {1.0, -1.0});
    TrainConfig tc;
    tc.optimizer = OptimizerKind::adam;
    tc.learning_rate = 0.1;
    Optimizer opt({&p}, tc);
    p.ensure_grad();
    p.grad[0] = 2.0;
    p.grad[1] = -0.5;
    opt.step();
    // After bias correction the first step is lr * g / (|g| + eps).
    CHECK(p.data[0] == doctest::Approx(1.0 - 0.1 * 2.0 / (2.0 + 1e-8)).epsilon(1e-12));
    CHECK(p.data[1] == doctest::Approx(-1.0 + 0.1 * 0.5 / (0.5 + 1e-8)).epsilon(1e-12));
    CHECK(p.grad == std::vector<double>{0.0, 0.0}); // step consumes gradients
}

TEST_CASE("sgd momentum accumulates velocity") {
    Tensor p({1}, {0.0});
    TrainConfig tc;
    tc.optimizer = OptimizerKind::sgd_momentum;
    tc.learning_rate = 0.1;
    tc.momentum = 0.9;
    Optimizer opt({&p}, tc);
    p.ensure_grad();
    p.grad[0] = 1.0;
    opt.step(); // v = 1.0, p = -0.1
    p.grad[0] = 1.0;
    opt.step(); // v = 1.9, p = -0.29
    CHECK(p.data[0] == doctest::Approx(-0.29).epsilon(1e-12));
}

TEST_CASE("mse closed-form values") {
    Tensor pred({2}, {1.0, 0.0});
    Tensor target({2}, {0.0, 0.0});
    const double v = scalar_loss(
        [&](Graph& g) { return mse_loss(g, g.input(pred), g.input(target)); });
    CHECK(v == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("bce equals ln 2 at the uniform distribution for either class") {
    Tensor probs({2}, {0.5, 0.5});
    for (int cls = 0; cls < 2; ++cls) {
        Tensor target({2}, {cls == 0 ? 1.0 : 0.0, cls == 0 ? 0.0 : 1.0});
        const double v = scalar_loss(
            [&](Graph& g) { return bce_loss(g, g.input(probs), g.input(target)); });
        CHECK(v == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    }
}

TEST_CASE("bce clamps extreme probabilities to a finite loss") {
    Tensor probs({2}, {0.0, 1.0});
    Tensor target({2}, {1.0, 0.0}); // the impossible outcome happened
    const double v = scalar_loss(
        [&](Graph& g) { return bce_loss(g, g.input(probs), g.input(target)); });
    CHECK(std::isfinite(v));
    CHECK(v == doctest::Approx(-std::log(1e-12)).epsilon(1e-9));
    CHECK(v >= 0.0);
}

TEST_CASE("bce rejects shapes that are not probability rows") {
    Graph g;
    const Var three = g.input(Tensor({3}, {0.2, 0.3, 0.5}));
    CHECK_THROWS_AS(bce_loss(g, three, three), ShapeError);
}

TEST_CASE("stratified split keeps per-class proportions") {
    std::vector<std::string> labels;
    for (int i = 0; i < 100; ++i) labels.push_back("a");
    for (int i = 0; i < 100; ++i) labels.push_back("b");
    const DatasetSplit split = split_indices(labels, {0.8, 17});
    CHECK(split.train.size() == 160);
    CHECK(split.test.size() == 40);

    std::map<std::string, int> train_count;
    for (std::size_t i : split.train) train_count[labels[i]]++;
    CHECK(train_count["a"] == 80);
    CHECK(train_count["b"] == 80);

    // Disjoint and exhaustive.
    std::set<std::size_t> all(split.train.begin(), split.train.end());
    all.insert(split.test.begin(), split.test.end());
    CHECK(all.size() == 200);

    CHECK(std::is_sorted(split.train.begin(), split.train.end()));
    CHECK(std::is_sorted(split.test.begin(), split.test.end()));
}

TEST_CASE("split is deterministic per seed and varies across seeds") {
    std::vector<std::string> labels(40, "a");
    for (int i = 0; i < 40; ++i) labels.push_back("b");
    const DatasetSplit s1 = split_indices(labels, {0.8, 3});
    const DatasetSplit s2 = split_indices(labels, {0.8, 3});
    const DatasetSplit s3 = split_indices(labels, {0.8, 4});
    CHECK(s1.train == s2.train);
    CHECK(s1.test == s2.test);
    CHECK(s1.train != s3.train);
}

TEST_CASE("split keeps both sides non-empty and singletons in train") {
    std::vector<std::string> labels{"solo", "pair", "pair"};
    const DatasetSplit split = split_indices(labels, {0.99, 0});
    // The singleton class trains; the pair is forced to leave one for test.
    CHECK(std::find(split.train.begin(), split.train.end(), 0u) != split.train.end());
    int pair_test = 0;
    for (std::size_t i : split.test) pair_test += labels[i] == "pair" ? 1 : 0;
    CHECK(pair_test == 1);

    CHECK_THROWS_AS(split_indices(labels, {1.5, 0}), ValueError);
    CHECK_THROWS_AS(split_indices({}, {0.8, 0}), ValueError);
}

TEST_CASE("sample_pairs alternates balanced match and mismatch pairs") {
    std::vector<std::string> labels{"a", "a", "a", "b", "b", "c"};
    std::vector<std::size_t> pool{0, 1, 2, 3, 4, 5};
    Rng rng(8);
    const auto pairs = sample_pairs(labels, pool, 40, rng);
    REQUIRE(pairs.size() == 40);
    int matches = 0;
    for (const auto& pr : pairs) {
        CHECK(pr.a != pr.b);
        const bool same = labels[pr.a] == labels[pr.b];
        CHECK(pr.label == (same ? 1 : 0));
        matches += pr.label;
    }
    CHECK(matches == 20);
}

TEST_CASE("sample_pairs rejects impossible requests") {
    Rng rng(9);
    // One class only: no mismatch pair exists.
    CHECK_THROWS_AS(sample_pairs({"a", "a"}, {0, 1}, 2, rng), ValueError);
    // All classes singleton: no match pair exists.
    CHECK_THROWS_AS(sample_pairs({"a", "b"}, {0, 1}, 2, rng), ValueError);
}

TEST_CASE("autoencoder overfits a constant image") {
    const NetworkConfig cfg = NetworkConfig::compact();
    Rng rng(31);
    AutoencoderParams params = init_autoencoder(cfg, rng);

    Tensor img({64, 64, 3});
    for (int h = 0; h < 64; ++h)
        for (int w = 0; w < 64; ++w) {
            img.at3(h, w, 0) = 0.7;
            img.at3(h, w, 1) = 0.4;
            img.at3(h, w, 2) = 0.2;
        }
    const std::vector<Tensor> images{img, img};

    TrainConfig tc;
    tc.epochs = 200; // one batch per epoch -> 200 steps
    tc.batch_size = 2;
    tc.learning_rate = 5e-3;
    tc.patience = 0;
    tc.target_loss = 5e-4;
    tc.seed = 1;
    const TrainResult res = train_autoencoder(images, cfg, params, tc);
    CHECK(res.best_loss < 1e-3);
    CHECK(res.epoch_losses.size() <= 200);
}

TEST_CASE("autoencoder training is deterministic per seed") {
    const NetworkConfig cfg = tiny_config();
    Rng data_rng(32);
    std::vector<Tensor> images;
    for (int i = 0; i < 6; ++i)
        images.push_back(Tensor::uniform({8, 8, 2}, 0.0, 1.0, data_rng));

    TrainConfig tc;
    tc.epochs = 4;
    tc.batch_size = 2;
    tc.patience = 0;
    tc.seed = 77;

    std::vector<double> losses[2];
    for (int run = 0; run < 2; ++run) {
        Rng init(mix_seed(9, 9));
        AutoencoderParams params = init_autoencoder(cfg, init);
        losses[run] = train_autoencoder(images, cfg, params, tc).epoch_losses;
    }
    CHECK(losses[0] == losses[1]);
}

TEST_CASE("non-finite data raises DivergenceError") {
    const NetworkConfig cfg = tiny_config();
    Rng rng(33);
    AutoencoderParams params = init_autoencoder(cfg, rng);
    Tensor poisoned({8, 8, 2});
    poisoned.data[5] = std::numeric_limits<double>::quiet_NaN();
    TrainConfig tc;
    tc.epochs = 1;
    tc.batch_size = 2;
    CHECK_THROWS_AS(train_autoencoder({poisoned, poisoned}, cfg, params, tc), DivergenceError);
}

TEST_CASE("target_loss stops training once reached") {
    const NetworkConfig cfg = tiny_config();
    Rng rng(34);
    AutoencoderParams params = init_autoencoder(cfg, rng);
    std::vector<Tensor> images;
    for (int i = 0; i < 4; ++i)
        images.push_back(Tensor::uniform({8, 8, 2}, 0.0, 1.0, rng));
    TrainConfig tc;
    tc.epochs = 50;
    tc.batch_size = 2;
    tc.target_loss = 10.0; // any first epoch satisfies this
    const TrainResult res = train_autoencoder(images, cfg, params, tc);
    CHECK(res.epoch_losses.size() == 1);
    CHECK(res.early_stopped);
    CHECK(res.best_epoch == 0);
}

TEST_CASE("patience stops a stalled run and keeps the best epoch") {
    const NetworkConfig cfg = tiny_config();
    Rng rng(35);
    AutoencoderParams params = init_autoencoder(cfg, rng);
    std::vector<Tensor> images;
    for (int i = 0; i < 4; ++i)
        images.push_back(Tensor::uniform({8, 8, 2}, 0.0, 1.0, rng));
    TrainConfig tc;
    tc.epochs = 50;
    tc.batch_size = 2;
    tc.patience = 2;
    tc.min_delta = 1e9; // no improvement can ever count
    const TrainResult res = train_autoencoder(images, cfg, params, tc);
    CHECK(res.early_stopped);
    CHECK(res.epoch_losses.size() == 3); // best epoch plus two stalled ones
    CHECK(res.best_epoch == 0);
}

TEST_CASE("untrained discriminator sits exactly at chance level") {
    const NetworkConfig cfg = tiny_config();
    Rng rng(36);
    const DiscriminatorParams disc = init_discriminator(cfg, rng);
    const Tensor fa = Tensor::uniform({4, 4, 4}, -1.0, 1.0, rng);
    const Tensor fb = Tensor::uniform({4, 4, 4}, -1.0, 1.0, rng);
    const Tensor probs = discriminate(fa, fb, cfg, disc);
    CHECK(probs.data[0] == 0.5);
    CHECK(probs.data[1] == 0.5);

    Tensor target({2}, {1.0, 0.0});
    const double loss = scalar_loss(
        [&](Graph& g) { return bce_loss(g, g.input(probs), g.input(target)); });
    CHECK(loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("zero epochs returns the initial parameters untouched") {
    const NetworkConfig cfg = tiny_config();
    Rng rng(37);
    std::vector<Tensor> feats;
    std::vector<std::string> labels;
    make_clusters(feats, labels, 4, rng);
    std::vector<std::size_t> pool{0, 1, 2, 3, 4, 5, 6, 7};

    DiscriminatorParams disc = init_discriminator(cfg, rng);
    const std::vector<double> before = disc.blocks[0].conv1.kernel.data;
    TrainConfig tc;
    tc.epochs = 0;
    const TrainResult res = train_discriminator(feats, labels, pool, cfg, disc, tc);
    CHECK(res.best_epoch == -1);
    CHECK(res.epoch_losses.empty());
    CHECK(disc.blocks[0].conv1.kernel.data == before);
}

TEST_CASE("discriminator separates two separable classes") {
    const NetworkConfig cfg = tiny_config();
    Rng rng(38);
    std::vector<Tensor> feats;
    std::vector<std::string> labels;
    make_clusters(feats, labels, 12, rng);

    const DatasetSplit split = split_indices(labels, {0.75, 5});
    DiscriminatorParams disc = init_discriminator(cfg, rng);
    TrainConfig tc;
    tc.epochs = 30;
    tc.batch_size = 8;
    tc.learning_rate = 3e-3;
    tc.patience = 0;
    tc.seed = 11;
    const TrainResult res = train_discriminator(feats, labels, split.train, cfg, disc, tc, 64);
    CHECK(res.best_loss < 0.3);

    // Every held-out pairing must land on the right side of 0.5, and the
    // average match probability must separate cleanly.
    double match_sum = 0.0, mismatch_sum = 0.0;
    int match_n = 0, mismatch_n = 0, correct = 0, total = 0;
    for (std::size_t i = 0; i < split.test.size(); ++i) {
        for (std::size_t j = i + 1; j < split.test.size(); ++j) {
            const std::size_t a = split.test[i], b = split.test[j];
            const double p = discriminate(feats[a], feats[b], cfg, disc).data[0];
            const bool same = labels[a] == labels[b];
            if (same) {
                match_sum += p;
                ++match_n;
            } else {
                mismatch_sum += p;
                ++mismatch_n;
            }
            correct += (same ? p > 0.5 : p < 0.5) ? 1 : 0;
            ++total;
        }
    }
    REQUIRE(match_n > 0);
    REQUIRE(mismatch_n > 0);
    CHECK(static_cast<double>(correct) / total > 0.95);
    CHECK(match_sum / match_n > mismatch_sum / mismatch_n);
}

TEST_CASE("discriminator training is deterministic per seed") {
    const NetworkConfig cfg = tiny_config();
    Rng data_rng(39);
    std::vector<Tensor> feats;
    std::vector<std::string> labels;
    make_clusters(feats, labels, 6, data_rng);
    std::vector<std::size_t> pool(feats.size());
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;

    TrainConfig tc;
    tc.epochs = 3;
    tc.batch_size = 4;
    tc.seed = 21;
    std::vector<double> losses[2];
    for (int run = 0; run < 2; ++run) {
        Rng init(mix_seed(40, 1));
        DiscriminatorParams disc = init_discriminator(cfg, init);
        losses[run] = train_discriminator(feats, labels, pool, cfg, disc, tc).epoch_losses;
    }
    CHECK(losses[0] == losses[1]);
}
