#include "rsim/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "rsim/errors.hpp"

namespace rsim {

namespace {
// Probability clamp for the cross-entropy log; flat (zero-gradient) outside.
constexpr double kProbLo = 1e-12;
constexpr double kProbHi = 1.0 - 1e-12;
} // namespace

void TrainConfig::validate() const {
    if (epochs < 0) throw ValueError("train config: epochs must be >= 0");
    if (batch_size < 2) throw ValueError("train config: batch size must be >= 2");
    if (!(learning_rate > 0.0)) throw ValueError("train config: learning rate must be positive");
    if (momentum < 0.0 || momentum >= 1.0) throw ValueError("train config: momentum must be in [0,1)");
    if (beta1 <= 0.0 || beta1 >= 1.0 || beta2 <= 0.0 || beta2 >= 1.0)
        throw ValueError("train config: adam betas must be in (0,1)");
    if (!(adam_eps > 0.0)) throw ValueError("train config: adam epsilon must be positive");
    if (patience < 0) throw ValueError("train config: patience must be >= 0");
    if (min_delta < 0.0) throw ValueError("train config: min_delta must be >= 0");
    if (target_loss < 0.0) throw ValueError("train config: target_loss must be >= 0");
}

Optimizer::Optimizer(std::vector<Tensor*> params, const TrainConfig& cfg)
    : params_(std::move(params)), cfg_(cfg) {
    cfg_.validate();
    m_.resize(params_.size());
    v_.resize(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i) {
        m_[i].assign(params_[i]->data.size(), 0.0);
        if (cfg_.optimizer == OptimizerKind::adam) v_[i].assign(params_[i]->data.size(), 0.0);
    }
}

void Optimizer::step() {
    ++t_;
    const double lr = cfg_.learning_rate;
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Tensor& p = *params_[i];
        p.ensure_grad(); // untouched params this step simply see zero gradient
        auto& m = m_[i];
        if (cfg_.optimizer == OptimizerKind::adam) {
            auto& v = v_[i];
            const double b1 = cfg_.beta1, b2 = cfg_.beta2;
            const double corr1 = 1.0 - std::pow(b1, static_cast<double>(t_));
            const double corr2 = 1.0 - std::pow(b2, static_cast<double>(t_));
            for (std::size_t j = 0; j < p.data.size(); ++j) {
                const double g = p.grad[j];
                m[j] = b1 * m[j] + (1.0 - b1) * g;
                v[j] = b2 * v[j] + (1.0 - b2) * g * g;
                const double mhat = m[j] / corr1;
                const double vhat = v[j] / corr2;
                p.data[j] -= lr * mhat / (std::sqrt(vhat) + cfg_.adam_eps);
            }
        } else {
            for (std::size_t j = 0; j < p.data.size(); ++j) {
                m[j] = cfg_.momentum * m[j] + p.grad[j];
                p.data[j] -= lr * m[j];
            }
        }
        p.zero_grad();
    }
}

Var mse_loss(Graph& g, Var pred, Var target) {
    const std::int64_t n = g.value(pred).size();
    Var diff = g.add(pred, g.scale(target, -1.0));
    return g.scale(g.sum(g.mul(diff, diff)), 1.0 / static_cast<double>(n));
}

Var bce_loss(Graph& g, Var probs, Var target) {
    const Tensor& p = g.value(probs);
    const Tensor& t = g.value(target);
    if (p.shape != t.shape)
        throw ShapeError("bce_loss: probs " + shape_str(p.shape) + " vs target " + shape_str(t.shape));
    const bool ok = (p.rank() == 1 && p.dim(0) == 2) || (p.rank() == 2 && p.dim(1) == 2);
    if (!ok) throw ShapeError("bce_loss: expected probability rows [2] or [B,2], got " + shape_str(p.shape));

    const double rows = static_cast<double>(p.size() / 2);
    double loss = 0.0;
    for (std::size_t i = 0; i < p.data.size(); ++i)
        loss -= t.data[i] * std::log(std::clamp(p.data[i], kProbLo, kProbHi));
    loss /= rows;

    return g.custom(
        {probs, target}, Tensor::scalar(loss),
        [rows](Graph& gg, const std::vector<Var>& ins, const std::vector<double>& gout) {
            const Tensor& pv = gg.value(ins[0]);
            const Tensor& tv = gg.value(ins[1]);
            const double go = gout[0] / rows;
            std::vector<double> gp(pv.data.size(), 0.0);
            std::vector<double> gt(tv.data.size(), 0.0);
            for (std::size_t i = 0; i < pv.data.size(); ++i) {
                const double pc = std::clamp(pv.data[i], kProbLo, kProbHi);
                // The clamp is flat outside (kProbLo, kProbHi): no gradient there.
                if (pv.data[i] > kProbLo && pv.data[i] < kProbHi) gp[i] = -go * tv.data[i] / pc;
                gt[i] = -go * std::log(pc);
            }
            gg.add_grad(ins[0], gp);
            gg.add_grad(ins[1], gt);
        });
}

DatasetSplit split_indices(const std::vector<std::string>& labels, const SplitSpec& spec) {
    if (!(spec.train_fraction > 0.0) || !(spec.train_fraction < 1.0))
        throw ValueError("split: train_fraction must be in (0,1)");
    if (labels.empty()) throw ValueError("split: no items");

    std::map<std::string, std::vector<std::size_t>> groups; // sorted by label
    for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(i);

    DatasetSplit out;
    std::uint64_t gi = 0;
    for (auto& [label, idx] : groups) {
        Rng rng(mix_seed(spec.seed, gi++));
        rng.shuffle(idx);
        const std::size_t n = idx.size();
        auto k = static_cast<std::size_t>(
            std::llround(static_cast<double>(n) * spec.train_fraction));
        if (n >= 2) k = std::clamp<std::size_t>(k, 1, n - 1);
        else k = 1; // singleton classes stay trainable
        out.train.insert(out.train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k));
        out.test.insert(out.test.end(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end());
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

std::vector<PairSample> sample_pairs(const std::vector<std::string>& labels,
                                     const std::vector<std::size_t>& pool, std::size_t count,
                                     Rng& rng) {
    std::map<std::string, std::vector<std::size_t>> by_label;
    for (std::size_t idx : pool) {
        if (idx >= labels.size()) throw ValueError("sample_pairs: pool index out of range");
        by_label[labels[idx]].push_back(idx);
    }
    std::vector<std::vector<std::size_t>> classes;
    classes.reserve(by_label.size());
    for (auto& [label, members] : by_label) classes.push_back(std::move(members));

    std::vector<std::size_t> rich; // classes that can yield a match pair
    for (std::size_t c = 0; c < classes.size(); ++c)
        if (classes[c].size() >= 2) rich.push_back(c);

    std::vector<PairSample> out;
    if (count == 0) return out;
    if (rich.empty()) throw ValueError("sample_pairs: no class in the pool has two members");
    if (classes.size() < 2) throw ValueError("sample_pairs: mismatch pairs need two classes");

    out.reserve(count);
    for (std::size_t n = 0; n < count; ++n) {
        if (n % 2 == 0) {
            const auto& members = classes[rich[rng.uniform_index(rich.size())]];
            const std::size_t i = rng.uniform_index(members.size());
            std::size_t j = rng.uniform_index(members.size() - 1);
            if (j >= i) ++j;
            out.push_back({members[i], members[j], 1});
        } else {
            const std::size_t ca = rng.uniform_index(classes.size());
            std::size_t cb = rng.uniform_index(classes.size() - 1);
            if (cb >= ca) ++cb;
            out.push_back({classes[ca][rng.uniform_index(classes[ca].size())],
                           classes[cb][rng.uniform_index(classes[cb].size())], 0});
        }
    }
    return out;
}

namespace {

// Shared epoch loop: runs `run_epoch(epoch)` -> mean loss, tracks the best
// epoch, applies early stopping, and restores the best parameter snapshot.
template <typename Params, typename RunEpoch>
TrainResult epoch_loop(Params& params, const TrainConfig& tc, RunEpoch&& run_epoch,
                       const std::function<void(int, double)>& on_epoch) {
    TrainResult res;
    Params best = params;
    double best_loss = std::numeric_limits<double>::infinity();
    int since_best = 0;
    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
        const double mean = run_epoch(epoch);
        if (!std::isfinite(mean))
            throw DivergenceError("training diverged at epoch " + std::to_string(epoch));
        res.epoch_losses.push_back(mean);
        if (on_epoch) on_epoch(epoch, mean);
        if (mean < best_loss - tc.min_delta) {
            best_loss = mean;
            res.best_epoch = epoch;
            res.best_loss = mean;
            best = params;
            since_best = 0;
        } else if (tc.patience > 0 && ++since_best >= tc.patience) {
            res.early_stopped = true;
            break;
        }
        if (tc.target_loss > 0.0 && mean <= tc.target_loss) {
            // Keep this epoch even when the improvement was below min_delta.
            if (mean < best_loss) {
                best_loss = mean;
                res.best_epoch = epoch;
                res.best_loss = mean;
                best = params;
            }
            res.early_stopped = true;
            break;
        }
    }
    if (res.best_epoch >= 0) params = std::move(best);
    return res;
}

} // namespace

TrainResult train_autoencoder(const std::vector<Tensor>& images, const NetworkConfig& cfg,
                              AutoencoderParams& params, const TrainConfig& tc,
                              const std::function<void(int, double)>& on_epoch) {
    tc.validate();
    cfg.validate();
    if (images.empty()) throw ValueError("train_autoencoder: no images");
    const Shape want{cfg.input_h, cfg.input_w, cfg.input_c};
    for (const auto& img : images)
        if (img.shape != want)
            throw ShapeError("train_autoencoder: image shape " + shape_str(img.shape) +
                             ", config expects " + shape_str(want));

    Optimizer opt(parameters(params), tc);
    for (Tensor* p : opt.params()) p->zero_grad();

    std::vector<std::size_t> order(images.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    auto run_epoch = [&](int epoch) {
        Rng shuffle_rng(mix_seed(tc.seed, 1, static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(order);
        double total = 0.0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(tc.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(tc.batch_size));
            std::vector<const Tensor*> batch;
            batch.reserve(end - start);
            for (std::size_t i = start; i < end; ++i) batch.push_back(&images[order[i]]);

            Graph g;
            Var x = g.input(stack_batch(batch));
            Var z = encode(g, x, cfg, params, BnMode::train);
            Var y = decode(g, z, cfg, params, BnMode::train);
            Var loss = mse_loss(g, y, x);
            const double lv = g.value(loss).data[0];
            if (!std::isfinite(lv))
                throw DivergenceError("autoencoder loss went non-finite at epoch " + std::to_string(epoch));
            g.backward(loss);
            opt.step();
            total += lv * static_cast<double>(end - start);
        }
        return total / static_cast<double>(order.size());
    };
    return epoch_loop(params, tc, run_epoch, on_epoch);
}

TrainResult train_discriminator(const std::vector<Tensor>& features,
                                const std::vector<std::string>& labels,
                                const std::vector<std::size_t>& pool, const NetworkConfig& cfg,
                                DiscriminatorParams& params, const TrainConfig& tc,
                                std::size_t pairs_per_epoch,
                                const std::function<void(int, double)>& on_epoch) {
    tc.validate();
    cfg.validate();
    if (features.size() != labels.size())
        throw ValueError("train_discriminator: features and labels differ in size");
    if (pool.empty()) throw ValueError("train_discriminator: empty training pool");
    const Shape want = cfg.latent_shape();
    for (std::size_t idx : pool) {
        if (idx >= features.size()) throw ValueError("train_discriminator: pool index out of range");
        if (features[idx].shape != want)
            throw ShapeError("train_discriminator: feature shape " + shape_str(features[idx].shape) +
                             ", encoder emits " + shape_str(want));
    }
    if (pairs_per_epoch == 0) pairs_per_epoch = 2 * pool.size();

    Optimizer opt(parameters(params), tc);
    for (Tensor* p : opt.params()) p->zero_grad();

    auto run_epoch = [&](int epoch) {
        Rng pair_rng(mix_seed(tc.seed, 2, static_cast<std::uint64_t>(epoch)));
        const auto pairs = sample_pairs(labels, pool, pairs_per_epoch, pair_rng);
        double total = 0.0;
        for (std::size_t start = 0; start < pairs.size(); start += static_cast<std::size_t>(tc.batch_size)) {
            const std::size_t end = std::min(pairs.size(), start + static_cast<std::size_t>(tc.batch_size));
            const auto bsize = static_cast<int>(end - start);
            std::vector<const Tensor*> fa, fb;
            fa.reserve(end - start);
            fb.reserve(end - start);
            Tensor targets({bsize, 2});
            for (std::size_t i = start; i < end; ++i) {
                fa.push_back(&features[pairs[i].a]);
                fb.push_back(&features[pairs[i].b]);
                const auto row = static_cast<std::int64_t>(i - start);
                targets.data[static_cast<std::size_t>(2 * row)] = pairs[i].label ? 1.0 : 0.0;
                targets.data[static_cast<std::size_t>(2 * row + 1)] = pairs[i].label ? 0.0 : 1.0;
            }

            Graph g;
            Var a = g.input(stack_batch(fa));
            Var b = g.input(stack_batch(fb));
            Var probs = discriminate(g, a, b, cfg, params, BnMode::train);
            Var loss = bce_loss(g, probs, g.input(std::move(targets)));
            const double lv = g.value(loss).data[0];
            if (!std::isfinite(lv))
                throw DivergenceError("discriminator loss went non-finite at epoch " + std::to_string(epoch));
            g.backward(loss);
            opt.step();
            total += lv * static_cast<double>(end - start);
        }
        return total / static_cast<double>(pairs.size());
    };
    return epoch_loop(params, tc, run_epoch, on_epoch);
}

} // namespace rsim
