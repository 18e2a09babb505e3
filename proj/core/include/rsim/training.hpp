#pragma once

// Optimizers, losses, dataset splitting, and the two training loops: image
// reconstruction for the autoencoder and match/mismatch classification for
// the discriminator. Both loops are deterministic given the config seed and
// run on a single thread.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rsim/graph.hpp"
#include "rsim/network.hpp"
#include "rsim/rng.hpp"
#include "rsim/tensor.hpp"

namespace rsim {

enum class OptimizerKind { adam, sgd_momentum };

struct TrainConfig {
    int epochs = 50;
    int batch_size = 16; // at least 2; batchnorm needs real batch statistics
    double learning_rate = 1e-3;
    OptimizerKind optimizer = OptimizerKind::adam;
    double momentum = 0.9; // sgd_momentum only
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    // Early stopping on the epoch training loss: stop after `patience`
    // consecutive epochs without an improvement of at least min_delta, and
    // restore the best epoch's parameters. patience 0 disables.
    int patience = 10;
    double min_delta = 1e-4;
    // Stop once an epoch's training loss drops to target_loss or below
    // (best parameters are still restored). 0 disables.
    double target_loss = 0.0;
    std::uint64_t seed = 0;

    void validate() const;
};

struct TrainResult {
    std::vector<double> epoch_losses;
    int best_epoch = -1; // 0-based; -1 when no epoch ran
    double best_loss = 0.0;
    bool early_stopped = false;
};

// Gradient-descent update over an externally owned parameter list. step()
// consumes and zeroes the accumulated .grad of every tensor.
class Optimizer {
public:
    Optimizer(std::vector<Tensor*> params, const TrainConfig& cfg);
    void step();
    const std::vector<Tensor*>& params() const { return params_; }

private:
    std::vector<Tensor*> params_;
    TrainConfig cfg_;
    std::int64_t t_ = 0;
    std::vector<std::vector<double>> m_; // adam first moment / sgd velocity
    std::vector<std::vector<double>> v_; // adam second moment
};

// Mean squared error over all elements of pred vs target.
Var mse_loss(Graph& g, Var pred, Var target);
// Cross-entropy of probability rows ([2] or [B,2]) against targets of the
// same shape; probabilities are clamped to [1e-12, 1 - 1e-12] before the
// log, and the result is the mean over rows.
Var bce_loss(Graph& g, Var probs, Var target);

// Stratified train/test split over parallel label/index lists. Each class is
// shuffled independently (seeded), then cut at round(n * train_fraction),
// clamped so both sides keep at least one element when n >= 2. Classes are
// processed in sorted label order, so the split depends only on the
// label multiset and the seed, not on input ordering.
struct SplitSpec {
    double train_fraction = 0.8;
    std::uint64_t seed = 0;
};

struct DatasetSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

DatasetSplit split_indices(const std::vector<std::string>& labels, const SplitSpec& spec);

// Feature-volume pair for discriminator training; label 1 = same class.
struct PairSample {
    std::size_t a = 0;
    std::size_t b = 0;
    int label = 0;
};

// Draws `count` pairs from `pool`, alternating match/mismatch so the classes
// stay balanced. Match pairs need a class with two pooled members; mismatch
// pairs need two distinct classes. Throws ValueError when impossible.
std::vector<PairSample> sample_pairs(const std::vector<std::string>& labels,
                                     const std::vector<std::size_t>& pool, std::size_t count,
                                     Rng& rng);

// Minimizes reconstruction MSE of decode(encode(x)) over the images (each
// [H,W,C] matching cfg). Updates params in place; on finish the best epoch's
// parameters are restored. Throws DivergenceError when the loss goes
// non-finite. on_epoch, when set, observes (epoch, mean loss) per epoch.
TrainResult train_autoencoder(const std::vector<Tensor>& images, const NetworkConfig& cfg,
                              AutoencoderParams& params, const TrainConfig& tc,
                              const std::function<void(int, double)>& on_epoch = {});

// Minimizes cross-entropy of the discriminator on feature pairs drawn from
// `pool` (indices into features/labels); pairs are resampled every epoch
// from the config seed. pairs_per_epoch 0 defaults to 2x the pool size.
TrainResult train_discriminator(const std::vector<Tensor>& features,
                                const std::vector<std::string>& labels,
                                const std::vector<std::size_t>& pool, const NetworkConfig& cfg,
                                DiscriminatorParams& params, const TrainConfig& tc,
                                std::size_t pairs_per_epoch = 0,
                                const std::function<void(int, double)>& on_epoch = {});

} // namespace rsim
