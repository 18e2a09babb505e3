#pragma once

// Residual building blocks and the three networks built from them: a
// convolutional encoder, its mirrored decoder, and a match/mismatch
// discriminator that consumes two encoded feature volumes. All images and
// feature volumes are H x W x C (or B x H x W x C) tensors in [0,1] for
// pixels.
//
// Block layout: main path conv1 -> bn1 -> relu -> conv2 -> bn2, added to a
// skip path (identity, or a 1x1 projection when channels/stride change),
// then the block activation. Encode blocks downsample with stride-2 3x3
// convs; decode blocks upsample with stride-2 transposed convs (4x4 main,
// 2x2 projection), chosen so spatial size exactly doubles.

#include <cstdint>
#include <optional>
#include <vector>

#include "rsim/graph.hpp"
#include "rsim/rng.hpp"
#include "rsim/tensor.hpp"

namespace rsim {

enum class BlockKind : std::uint32_t { identity = 0, projection = 1 };
enum class BlockDirection : std::uint32_t { encode = 0, decode = 1 };
enum class Activation : std::uint32_t { relu = 0, linear = 1, sigmoid = 2 };

struct ResidualBlockSpec {
    BlockKind kind = BlockKind::projection;
    int in_c = 0;
    int out_c = 0;
    int stride = 1; // 1 or 2
    BlockDirection direction = BlockDirection::encode;
    // Not serialized: positionally reassigned by apply_default_activations().
    Activation activation = Activation::relu;

    void validate() const;
};

// Stage lists for the full system. Activations follow a fixed convention:
// every block ends in relu except the last encoder block (linear, so feature
// values are unbounded) and the last decoder block (sigmoid, so
// reconstructions land in (0,1)).
struct NetworkConfig {
    int input_h = 0;
    int input_w = 0;
    int input_c = 0;
    std::vector<ResidualBlockSpec> encoder;
    std::vector<ResidualBlockSpec> decoder;
    std::vector<ResidualBlockSpec> discriminator;

    // 64x64x3 images -> 8x8x32 features; trains in seconds on one core.
    static NetworkConfig compact();
    // 256x256x3 images -> 8x8x512 features.
    static NetworkConfig full();

    void apply_default_activations();
    void validate() const;
    Shape latent_shape() const;               // encoder output, e.g. {8,8,32}
    Shape discriminator_input_shape() const;  // latent with doubled channels
    int discriminator_flat() const;           // flattened size feeding the dense head
    double compression_ratio() const;         // latent elements / input elements
};

struct ConvParams {
    Tensor kernel;
    Tensor bias;
};

struct ResidualBlockParams {
    ConvParams conv1;
    BatchNormState bn1;
    ConvParams conv2;
    BatchNormState bn2;
    std::optional<ConvParams> proj; // projection blocks only
};

struct AutoencoderParams {
    std::vector<ResidualBlockParams> encoder;
    std::vector<ResidualBlockParams> decoder;
};

struct DiscriminatorParams {
    std::vector<ResidualBlockParams> blocks;
    Tensor dense_w; // [2, flat]
    Tensor dense_b; // [2]
};

// He-style initialization, deterministic in the RNG stream. Draw order is
// the canonical parameter order (conv1, bn1, conv2, bn2, proj per block).
ResidualBlockParams init_block(const ResidualBlockSpec& spec, Rng& rng);
AutoencoderParams init_autoencoder(const NetworkConfig& cfg, Rng& rng);
DiscriminatorParams init_discriminator(const NetworkConfig& cfg, Rng& rng);

// Trainable-parameter pointers in canonical order (running stats excluded).
std::vector<Tensor*> parameters(ResidualBlockParams& p);
std::vector<Tensor*> parameters(AutoencoderParams& p);
std::vector<Tensor*> parameters(DiscriminatorParams& p);

// Graph-building forwards. The mutable overloads register parameters with
// the graph (gradients flow back into the param structs) and, in train mode,
// update batchnorm running statistics. The const overloads run in eval mode
// only and leave the params untouched.
Var residual_block(Graph& g, Var x, const ResidualBlockSpec& spec, ResidualBlockParams& p, BnMode mode);
Var residual_block(Graph& g, Var x, const ResidualBlockSpec& spec, const ResidualBlockParams& p);
Var encode(Graph& g, Var x, const NetworkConfig& cfg, AutoencoderParams& p, BnMode mode);
Var encode(Graph& g, Var x, const NetworkConfig& cfg, const AutoencoderParams& p);
Var decode(Graph& g, Var z, const NetworkConfig& cfg, AutoencoderParams& p, BnMode mode);
Var decode(Graph& g, Var z, const NetworkConfig& cfg, const AutoencoderParams& p);
// Concatenates the two feature volumes channelwise and returns softmax
// probabilities [2] (or [B,2]): index 0 = p(match), index 1 = p(mismatch).
Var discriminate(Graph& g, Var fa, Var fb, const NetworkConfig& cfg, DiscriminatorParams& p, BnMode mode);
Var discriminate(Graph& g, Var fa, Var fb, const NetworkConfig& cfg, const DiscriminatorParams& p);

// One-shot eval-mode conveniences (build a throwaway graph internally).
Tensor encode(const Tensor& image, const NetworkConfig& cfg, const AutoencoderParams& p);
Tensor decode(const Tensor& features, const NetworkConfig& cfg, const AutoencoderParams& p);
Tensor discriminate(const Tensor& fa, const Tensor& fb, const NetworkConfig& cfg,
                    const DiscriminatorParams& p);

} // namespace rsim
