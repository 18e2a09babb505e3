#pragma once

// Model checkpoint file format. Single binary file, little-endian:
//
//   magic "RSIM", version u32 (currently 1)
//   config: input_h, input_w, input_c (u32 each), then the three stage
//   lists (encoder, decoder, discriminator), each a u32 count followed by
//   kind, in_c, out_c, stride, direction as u32 per stage
//   sections bitmask u32: 1 = encoder params, 2 = decoder params,
//   4 = discriminator params
//   per present section, tensors in canonical order: rank u32, extents u32
//   each, data f64 little-endian. Block order is conv1 kernel/bias, bn1
//   gamma/beta/running mean/running var, conv2 kernel/bias, bn2 likewise,
//   then projection kernel/bias when present. The discriminator section
//   appends its dense weight [2, flat] and bias [2].
//
// Loading rebuilds the exact parameter tensors bit for bit. Errors: IoError
// for unreadable files or bad magic, VersionError for unknown versions,
// TruncationError for short files or trailing bytes.

#include <filesystem>
#include <optional>

#include "rsim/network.hpp"

namespace rsim {

struct Checkpoint {
    NetworkConfig config;
    std::optional<AutoencoderParams> autoencoder;
    std::optional<DiscriminatorParams> discriminator;

    void save(const std::filesystem::path& path) const;
    static Checkpoint load(const std::filesystem::path& path);
};

} // namespace rsim
