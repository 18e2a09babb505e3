#include "rsim/checkpoint.hpp"

#include <cstring>
#include <limits>

#include "binio.hpp"
#include "rsim/errors.hpp"

namespace rsim {

namespace {

constexpr char kMagic[4] = {'R', 'S', 'I', 'M'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kSecEncoder = 1;
constexpr std::uint32_t kSecDecoder = 2;
constexpr std::uint32_t kSecDiscriminator = 4;

void write_stages(binio::Writer& w, const std::vector<ResidualBlockSpec>& stages) {
    w.u32(static_cast<std::uint32_t>(stages.size()));
    for (const auto& s : stages) {
        w.u32(static_cast<std::uint32_t>(s.kind));
        w.u32(static_cast<std::uint32_t>(s.in_c));
        w.u32(static_cast<std::uint32_t>(s.out_c));
        w.u32(static_cast<std::uint32_t>(s.stride));
        w.u32(static_cast<std::uint32_t>(s.direction));
    }
}

std::vector<ResidualBlockSpec> read_stages(binio::Reader& r) {
    const std::uint32_t n = r.u32();
    if (n > 1024) throw IoError("checkpoint: implausible stage count " + std::to_string(n));
    std::vector<ResidualBlockSpec> stages(n);
    for (auto& s : stages) {
        const std::uint32_t kind = r.u32();
        if (kind > 1) throw IoError("checkpoint: bad block kind " + std::to_string(kind));
        s.kind = static_cast<BlockKind>(kind);
        s.in_c = static_cast<int>(r.u32());
        s.out_c = static_cast<int>(r.u32());
        s.stride = static_cast<int>(r.u32());
        const std::uint32_t dir = r.u32();
        if (dir > 1) throw IoError("checkpoint: bad block direction " + std::to_string(dir));
        s.direction = static_cast<BlockDirection>(dir);
    }
    return stages;
}

void write_tensor(binio::Writer& w, const Tensor& t) {
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (int d : t.shape) w.u32(static_cast<std::uint32_t>(d));
    for (double v : t.data) w.f64(v);
}

Tensor read_tensor(binio::Reader& r) {
    const std::uint32_t rank = r.u32();
    if (rank > 8) throw IoError("checkpoint: implausible tensor rank " + std::to_string(rank));
    Shape shape(rank);
    for (auto& d : shape) {
        const std::uint32_t e = r.u32();
        if (e == 0 || e > (1u << 24)) throw IoError("checkpoint: implausible tensor extent");
        d = static_cast<int>(e);
    }
    Tensor t(shape);
    for (auto& v : t.data) v = r.f64();
    return t;
}

void write_block(binio::Writer& w, const ResidualBlockParams& p) {
    write_tensor(w, p.conv1.kernel);
    write_tensor(w, p.conv1.bias);
    write_tensor(w, p.bn1.gamma);
    write_tensor(w, p.bn1.beta);
    write_tensor(w, p.bn1.running_mean);
    write_tensor(w, p.bn1.running_var);
    write_tensor(w, p.conv2.kernel);
    write_tensor(w, p.conv2.bias);
    write_tensor(w, p.bn2.gamma);
    write_tensor(w, p.bn2.beta);
    write_tensor(w, p.bn2.running_mean);
    write_tensor(w, p.bn2.running_var);
    if (p.proj) {
        write_tensor(w, p.proj->kernel);
        write_tensor(w, p.proj->bias);
    }
}

ResidualBlockParams read_block(binio::Reader& r, const ResidualBlockSpec& spec) {
    ResidualBlockParams p;
    p.conv1.kernel = read_tensor(r);
    p.conv1.bias = read_tensor(r);
    p.bn1.gamma = read_tensor(r);
    p.bn1.beta = read_tensor(r);
    p.bn1.running_mean = read_tensor(r);
    p.bn1.running_var = read_tensor(r);
    p.conv2.kernel = read_tensor(r);
    p.conv2.bias = read_tensor(r);
    p.bn2.gamma = read_tensor(r);
    p.bn2.beta = read_tensor(r);
    p.bn2.running_mean = read_tensor(r);
    p.bn2.running_var = read_tensor(r);
    if (spec.kind == BlockKind::projection) {
        ConvParams proj;
        proj.kernel = read_tensor(r);
        proj.bias = read_tensor(r);
        p.proj = std::move(proj);
    }
    return p;
}

} // namespace

void Checkpoint::save(const std::filesystem::path& path) const {
    config.validate();
    binio::Writer w;
    w.bytes(kMagic, 4);
    w.u32(kVersion);
    w.u32(static_cast<std::uint32_t>(config.input_h));
    w.u32(static_cast<std::uint32_t>(config.input_w));
    w.u32(static_cast<std::uint32_t>(config.input_c));
    write_stages(w, config.encoder);
    write_stages(w, config.decoder);
    write_stages(w, config.discriminator);

    std::uint32_t sections = 0;
    if (autoencoder) sections |= kSecEncoder | kSecDecoder;
    if (discriminator) sections |= kSecDiscriminator;
    w.u32(sections);

    if (autoencoder) {
        if (autoencoder->encoder.size() != config.encoder.size() ||
            autoencoder->decoder.size() != config.decoder.size())
            throw ValueError("checkpoint: parameter blocks do not match the stage lists");
        for (const auto& b : autoencoder->encoder) write_block(w, b);
        for (const auto& b : autoencoder->decoder) write_block(w, b);
    }
    if (discriminator) {
        if (discriminator->blocks.size() != config.discriminator.size())
            throw ValueError("checkpoint: discriminator blocks do not match the stage list");
        for (const auto& b : discriminator->blocks) write_block(w, b);
        write_tensor(w, discriminator->dense_w);
        write_tensor(w, discriminator->dense_b);
    }
    binio::write_file(path, w.buf);
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
    const auto buf = binio::read_file(path);
    binio::Reader r(buf);

    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw IoError(path.string() + " is not a model checkpoint (bad magic)");
    const std::uint32_t version = r.u32();
    if (version != kVersion)
        throw VersionError("checkpoint version " + std::to_string(version) + " is not supported");

    Checkpoint ck;
    ck.config.input_h = static_cast<int>(r.u32());
    ck.config.input_w = static_cast<int>(r.u32());
    ck.config.input_c = static_cast<int>(r.u32());
    ck.config.encoder = read_stages(r);
    ck.config.decoder = read_stages(r);
    ck.config.discriminator = read_stages(r);
    ck.config.apply_default_activations();
    ck.config.validate();

    const std::uint32_t sections = r.u32();
    if (sections & ~(kSecEncoder | kSecDecoder | kSecDiscriminator))
        throw IoError("checkpoint: unknown section bits");

    if (sections & (kSecEncoder | kSecDecoder)) {
        AutoencoderParams p;
        if (sections & kSecEncoder)
            for (const auto& s : ck.config.encoder) p.encoder.push_back(read_block(r, s));
        if (sections & kSecDecoder)
            for (const auto& s : ck.config.decoder) p.decoder.push_back(read_block(r, s));
        ck.autoencoder = std::move(p);
    }
    if (sections & kSecDiscriminator) {
        DiscriminatorParams p;
        for (const auto& s : ck.config.discriminator) p.blocks.push_back(read_block(r, s));
        p.dense_w = read_tensor(r);
        p.dense_b = read_tensor(r);
        ck.discriminator = std::move(p);
    }

    if (!r.done()) throw TruncationError("checkpoint: trailing bytes after the last section");
    return ck;
}

} // namespace rsim
