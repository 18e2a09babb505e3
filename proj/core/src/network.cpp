#include "rsim/network.hpp"

#include <cmath>
#include <string>

#include "rsim/errors.hpp"

namespace rsim {

void ResidualBlockSpec::validate() const {
    if (in_c < 1 || out_c < 1)
        throw ValueError("block: channel counts must be positive, got in=" + std::to_string(in_c) +
                         " out=" + std::to_string(out_c));
    if (stride != 1 && stride != 2)
        throw ValueError("block: stride must be 1 or 2, got " + std::to_string(stride));
    if (kind == BlockKind::identity && (in_c != out_c || stride != 1))
        throw ValueError("block: identity skip requires matching channels and stride 1");
}

NetworkConfig NetworkConfig::compact() {
    NetworkConfig c;
    c.input_h = 64;
    c.input_w = 64;
    c.input_c = 3;
    c.encoder = {
        {BlockKind::projection, 3, 8, 2, BlockDirection::encode, Activation::relu},
        {BlockKind::projection, 8, 16, 2, BlockDirection::encode, Activation::relu},
        {BlockKind::projection, 16, 32, 2, BlockDirection::encode, Activation::relu},
    };
    c.decoder = {
        {BlockKind::projection, 32, 16, 2, BlockDirection::decode, Activation::relu},
        {BlockKind::projection, 16, 8, 2, BlockDirection::decode, Activation::relu},
        {BlockKind::projection, 8, 3, 2, BlockDirection::decode, Activation::relu},
    };
    c.discriminator = {
        {BlockKind::projection, 64, 64, 2, BlockDirection::encode, Activation::relu},
        {BlockKind::projection, 64, 64, 2, BlockDirection::encode, Activation::relu},
        {BlockKind::projection, 64, 32, 1, BlockDirection::encode, Activation::relu},
    };
    c.apply_default_activations();
    return c;
}

NetworkConfig NetworkConfig::full() {
    NetworkConfig c;
    c.input_h = 256;
    c.input_w = 256;
    c.input_c = 3;
    c.encoder = {
        {BlockKind::projection, 3, 32, 2, BlockDirection::encode, Activation::relu},
        {BlockKind::projection, 32, 64, 2, BlockDirection::encode, Activation::relu},
        {BlockKind::projection, 64, 128, 2, BlockDirection::encode, Activation::relu},
        {BlockKind::projection, 128, 256, 2, BlockDirection::encode, Activation::relu},
        {BlockKind::projection, 256, 512, 2, BlockDirection::encode, Activation::relu},
    };
    c.decoder = {
        {BlockKind::projection, 512, 256, 2, BlockDirection::decode, Activation::relu},
        {BlockKind::projection, 256, 128, 2, BlockDirection::decode, Activation::relu},
        {BlockKind::projection, 128, 64, 2, BlockDirection::decode, Activation::relu},
        {BlockKind::projection, 64, 32, 2, BlockDirection::decode, Activation::relu},
        {BlockKind::projection, 32, 3, 2, BlockDirection::decode, Activation::relu},
    };
    c.discriminator = {
        {BlockKind::projection, 1024, 512, 2, BlockDirection::encode, Activation::relu},
        {BlockKind::projection, 512, 256, 2, BlockDirection::encode, Activation::relu},
        {BlockKind::projection, 256, 128, 1, BlockDirection::encode, Activation::relu},
    };
    c.apply_default_activations();
    return c;
}

void NetworkConfig::apply_default_activations() {
    for (auto& s : encoder) s.activation = Activation::relu;
    for (auto& s : decoder) s.activation = Activation::relu;
    for (auto& s : discriminator) s.activation = Activation::relu;
    if (!encoder.empty()) encoder.back().activation = Activation::linear;
    if (!decoder.empty()) decoder.back().activation = Activation::sigmoid;
}

namespace {

// Walks spatial size through a stage list; checks exact halving/doubling.
void walk_spatial(const std::vector<ResidualBlockSpec>& stages, const char* what, int& h, int& w) {
    for (std::size_t i = 0; i < stages.size(); ++i) {
        const auto& s = stages[i];
        s.validate();
        if (s.stride == 2) {
            if (s.direction == BlockDirection::encode) {
                if (h % 2 != 0 || w % 2 != 0)
                    throw ShapeError(std::string(what) + " stage " + std::to_string(i) +
                                     ": stride-2 downsampling needs even spatial dims, got " +
                                     std::to_string(h) + "x" + std::to_string(w));
                h /= 2;
                w /= 2;
            } else {
                h *= 2;
                w *= 2;
            }
        }
        if (h < 1 || w < 1)
            throw ShapeError(std::string(what) + " stage " + std::to_string(i) + ": spatial size vanished");
    }
}

void check_chain(const std::vector<ResidualBlockSpec>& stages, int in_c, const char* what,
                 BlockDirection dir) {
    int c = in_c;
    for (std::size_t i = 0; i < stages.size(); ++i) {
        const auto& s = stages[i];
        if (s.direction != dir)
            throw ValueError(std::string(what) + " stage " + std::to_string(i) +
                             ": wrong block direction");
        if (s.in_c != c)
            throw ShapeError(std::string(what) + " stage " + std::to_string(i) + ": expects " +
                             std::to_string(s.in_c) + " channels but receives " + std::to_string(c));
        c = s.out_c;
    }
}

} // namespace

void NetworkConfig::validate() const {
    if (input_h < 1 || input_w < 1 || input_c < 1)
        throw ValueError("config: input dimensions must be positive");
    if (encoder.empty() || decoder.empty())
        throw ValueError("config: encoder and decoder must have at least one stage");

    check_chain(encoder, input_c, "encoder", BlockDirection::encode);
    int h = input_h, w = input_w;
    walk_spatial(encoder, "encoder", h, w);

    check_chain(decoder, encoder.back().out_c, "decoder", BlockDirection::decode);
    if (decoder.back().out_c != input_c)
        throw ShapeError("decoder: final stage emits " + std::to_string(decoder.back().out_c) +
                         " channels, input has " + std::to_string(input_c));
    int dh = h, dw = w;
    walk_spatial(decoder, "decoder", dh, dw);
    if (dh != input_h || dw != input_w)
        throw ShapeError("decoder: reconstructs " + std::to_string(dh) + "x" + std::to_string(dw) +
                         ", input is " + std::to_string(input_h) + "x" + std::to_string(input_w));

    if (!discriminator.empty()) {
        check_chain(discriminator, 2 * encoder.back().out_c, "discriminator", BlockDirection::encode);
        int sh = h, sw = w;
        walk_spatial(discriminator, "discriminator", sh, sw);
    }
}

Shape NetworkConfig::latent_shape() const {
    int h = input_h, w = input_w;
    walk_spatial(encoder, "encoder", h, w);
    return {h, w, encoder.back().out_c};
}

Shape NetworkConfig::discriminator_input_shape() const {
    Shape l = latent_shape();
    return {l[0], l[1], 2 * l[2]};
}

int NetworkConfig::discriminator_flat() const {
    if (discriminator.empty()) throw ValueError("config: no discriminator stages");
    Shape l = latent_shape();
    int h = l[0], w = l[1];
    walk_spatial(discriminator, "discriminator", h, w);
    return h * w * discriminator.back().out_c;
}

double NetworkConfig::compression_ratio() const {
    const Shape l = latent_shape();
    return static_cast<double>(numel(l)) /
           static_cast<double>(static_cast<std::int64_t>(input_h) * input_w * input_c);
}

namespace {

Tensor he_normal(const Shape& shape, int fan_in, Rng& rng) {
    Tensor t(shape);
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (auto& v : t.data) v = rng.normal(0.0, stddev);
    return t;
}

} // namespace

ResidualBlockParams init_block(const ResidualBlockSpec& spec, Rng& rng) {
    spec.validate();
    const bool dec2 = spec.direction == BlockDirection::decode && spec.stride == 2;
    ResidualBlockParams p;
    if (dec2) // transposed kernel layout is [k, k, out, in]
        p.conv1.kernel = he_normal({4, 4, spec.out_c, spec.in_c}, 4 * 4 * spec.in_c, rng);
    else
        p.conv1.kernel = he_normal({3, 3, spec.in_c, spec.out_c}, 3 * 3 * spec.in_c, rng);
    p.conv1.bias = Tensor::zeros({spec.out_c});
    p.bn1 = BatchNormState::create(spec.out_c);
    p.conv2.kernel = he_normal({3, 3, spec.out_c, spec.out_c}, 3 * 3 * spec.out_c, rng);
    p.conv2.bias = Tensor::zeros({spec.out_c});
    p.bn2 = BatchNormState::create(spec.out_c);
    if (spec.kind == BlockKind::projection) {
        ConvParams proj;
        if (dec2)
            proj.kernel = he_normal({2, 2, spec.out_c, spec.in_c}, 2 * 2 * spec.in_c, rng);
        else
            proj.kernel = he_normal({1, 1, spec.in_c, spec.out_c}, spec.in_c, rng);
        proj.bias = Tensor::zeros({spec.out_c});
        p.proj = std::move(proj);
    }
    return p;
}

AutoencoderParams init_autoencoder(const NetworkConfig& cfg, Rng& rng) {
    cfg.validate();
    AutoencoderParams p;
    for (const auto& s : cfg.encoder) p.encoder.push_back(init_block(s, rng));
    for (const auto& s : cfg.decoder) p.decoder.push_back(init_block(s, rng));
    return p;
}

DiscriminatorParams init_discriminator(const NetworkConfig& cfg, Rng& rng) {
    cfg.validate();
    if (cfg.discriminator.empty()) throw ValueError("config: no discriminator stages");
    DiscriminatorParams p;
    for (const auto& s : cfg.discriminator) p.blocks.push_back(init_block(s, rng));
    const int flat = cfg.discriminator_flat();
    // Zero head: the untrained discriminator outputs exactly (0.5, 0.5), so
    // training starts from chance-level cross-entropy. The class targets
    // break the symmetry on the first update.
    p.dense_w = Tensor::zeros({2, flat});
    p.dense_b = Tensor::zeros({2});
    return p;
}

std::vector<Tensor*> parameters(ResidualBlockParams& p) {
    std::vector<Tensor*> out{&p.conv1.kernel, &p.conv1.bias, &p.bn1.gamma, &p.bn1.beta,
                             &p.conv2.kernel, &p.conv2.bias, &p.bn2.gamma, &p.bn2.beta};
    if (p.proj) {
        out.push_back(&p.proj->kernel);
        out.push_back(&p.proj->bias);
    }
    return out;
}

std::vector<Tensor*> parameters(AutoencoderParams& p) {
    std::vector<Tensor*> out;
    for (auto& b : p.encoder)
        for (Tensor* t : parameters(b)) out.push_back(t);
    for (auto& b : p.decoder)
        for (Tensor* t : parameters(b)) out.push_back(t);
    return out;
}

std::vector<Tensor*> parameters(DiscriminatorParams& p) {
    std::vector<Tensor*> out;
    for (auto& b : p.blocks)
        for (Tensor* t : parameters(b)) out.push_back(t);
    out.push_back(&p.dense_w);
    out.push_back(&p.dense_b);
    return out;
}

namespace {

// Shared forward skeleton; Bind supplies param registration and batchnorm
// wiring so train (mutable) and eval (const) paths stay identical.
struct MutableBind {
    BnMode mode;
    Var tensor(Graph& g, Tensor& t) const { return g.param(t); }
    Var bn(Graph& g, Var x, BatchNormState& s) const { return g.batchnorm2d(x, s, mode); }
};

struct ConstBind {
    Var tensor(Graph& g, const Tensor& t) const { return g.weight(t); }
    Var bn(Graph& g, Var x, const BatchNormState& s) const { return g.batchnorm2d(x, s); }
};

template <typename Bind, typename Params>
Var block_forward(Graph& g, Var x, const ResidualBlockSpec& spec, Params& p, const Bind& bind) {
    spec.validate();
    if (spec.kind == BlockKind::projection && !p.proj)
        throw ValueError("block: projection parameters missing");
    const bool dec2 = spec.direction == BlockDirection::decode && spec.stride == 2;

    Var k1 = bind.tensor(g, p.conv1.kernel);
    Var b1 = bind.tensor(g, p.conv1.bias);
    Var h = dec2 ? g.conv2d_transpose(x, k1, b1, 2, 1) : g.conv2d(x, k1, b1, spec.stride, 1);
    h = bind.bn(g, h, p.bn1);
    h = g.relu(h);
    Var k2 = bind.tensor(g, p.conv2.kernel);
    Var b2 = bind.tensor(g, p.conv2.bias);
    h = g.conv2d(h, k2, b2, 1, 1);
    h = bind.bn(g, h, p.bn2);

    Var skip = x;
    if (spec.kind == BlockKind::projection) {
        Var pk = bind.tensor(g, p.proj->kernel);
        Var pb = bind.tensor(g, p.proj->bias);
        skip = dec2 ? g.conv2d_transpose(x, pk, pb, 2, 0) : g.conv2d(x, pk, pb, spec.stride, 0);
    }

    Var out = g.add(h, skip);
    switch (spec.activation) {
    case Activation::relu: return g.relu(out);
    case Activation::sigmoid: return g.sigmoid(out);
    case Activation::linear: return out;
    }
    throw ValueError("block: unknown activation");
}

template <typename Bind, typename Blocks>
Var stack_forward(Graph& g, Var x, const std::vector<ResidualBlockSpec>& specs, Blocks& blocks,
                  const Bind& bind, const char* what) {
    if (specs.size() != blocks.size())
        throw ValueError(std::string(what) + ": " + std::to_string(specs.size()) + " stages but " +
                         std::to_string(blocks.size()) + " parameter blocks");
    Var h = x;
    for (std::size_t i = 0; i < specs.size(); ++i) h = block_forward(g, h, specs[i], blocks[i], bind);
    return h;
}

template <typename Bind, typename Params>
Var discriminate_impl(Graph& g, Var fa, Var fb, const NetworkConfig& cfg, Params& p, const Bind& bind) {
    if (cfg.discriminator.empty()) throw ValueError("config: no discriminator stages");
    Var h = g.concat_channels(fa, fb);
    h = stack_forward(g, h, cfg.discriminator, p.blocks, bind, "discriminator");
    h = g.flatten(h);
    Var w = bind.tensor(g, p.dense_w);
    Var b = bind.tensor(g, p.dense_b);
    return g.softmax2(g.dense(h, w, b));
}

} // namespace

Var residual_block(Graph& g, Var x, const ResidualBlockSpec& spec, ResidualBlockParams& p, BnMode mode) {
    return block_forward(g, x, spec, p, MutableBind{mode});
}

Var residual_block(Graph& g, Var x, const ResidualBlockSpec& spec, const ResidualBlockParams& p) {
    return block_forward(g, x, spec, p, ConstBind{});
}

Var encode(Graph& g, Var x, const NetworkConfig& cfg, AutoencoderParams& p, BnMode mode) {
    return stack_forward(g, x, cfg.encoder, p.encoder, MutableBind{mode}, "encoder");
}

Var encode(Graph& g, Var x, const NetworkConfig& cfg, const AutoencoderParams& p) {
    return stack_forward(g, x, cfg.encoder, p.encoder, ConstBind{}, "encoder");
}

Var decode(Graph& g, Var z, const NetworkConfig& cfg, AutoencoderParams& p, BnMode mode) {
    return stack_forward(g, z, cfg.decoder, p.decoder, MutableBind{mode}, "decoder");
}

Var decode(Graph& g, Var z, const NetworkConfig& cfg, const AutoencoderParams& p) {
    return stack_forward(g, z, cfg.decoder, p.decoder, ConstBind{}, "decoder");
}

Var discriminate(Graph& g, Var fa, Var fb, const NetworkConfig& cfg, DiscriminatorParams& p,
                 BnMode mode) {
    return discriminate_impl(g, fa, fb, cfg, p, MutableBind{mode});
}

Var discriminate(Graph& g, Var fa, Var fb, const NetworkConfig& cfg, const DiscriminatorParams& p) {
    return discriminate_impl(g, fa, fb, cfg, p, ConstBind{});
}

Tensor encode(const Tensor& image, const NetworkConfig& cfg, const AutoencoderParams& p) {
    Graph g;
    Var out = encode(g, g.input(image), cfg, p);
    return g.value(out);
}

Tensor decode(const Tensor& features, const NetworkConfig& cfg, const AutoencoderParams& p) {
    Graph g;
    Var out = decode(g, g.input(features), cfg, p);
    return g.value(out);
}

Tensor discriminate(const Tensor& fa, const Tensor& fb, const NetworkConfig& cfg,
                    const DiscriminatorParams& p) {
    Graph g;
    Var out = discriminate(g, g.input(fa), g.input(fb), cfg, p);
    return g.value(out);
}

} // namespace rsim
