#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "rsim/checkpoint.hpp"
#include "rsim/errors.hpp"
#include "rsim/network.hpp"
#include "rsim/rng.hpp"
#include "support/tmpdir.hpp"

using namespace rsim;
using testsupport::TempDir;

namespace {

std::vector<char> slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const std::filesystem::path& p, const std::vector<char>& bytes) {
    std::ofstream out(p, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint make_full(std::uint64_t seed) {
    Checkpoint ck;
    ck.config = NetworkConfig::compact();
    Rng rng(seed);
    ck.autoencoder = init_autoencoder(ck.config, rng);
    ck.discriminator = init_discriminator(ck.config, rng);
    return ck;
}

bool same_tensor(const Tensor& a, const Tensor& b) {
    return a.shape == b.shape && a.data == b.data;
}

} // namespace

TEST_CASE("checkpoint round-trips bit-exactly") {
    TempDir dir;
    const Checkpoint ck = make_full(51);
    const auto p1 = dir.file("a.ckpt");
    const auto p2 = dir.file("b.ckpt");
    ck.save(p1);

    const Checkpoint re = Checkpoint::load(p1);
    REQUIRE(re.autoencoder.has_value());
    REQUIRE(re.discriminator.has_value());
    CHECK(same_tensor(re.autoencoder->encoder[0].conv1.kernel,
                      ck.autoencoder->encoder[0].conv1.kernel));
    CHECK(same_tensor(re.autoencoder->decoder[2].bn2.running_var,
                      ck.autoencoder->decoder[2].bn2.running_var));
    CHECK(same_tensor(re.discriminator->dense_w, ck.discriminator->dense_w));

    re.save(p2);
    CHECK(slurp(p1) == slurp(p2));
}

TEST_CASE("autoencoder-only checkpoints omit the discriminator") {
    TempDir dir;
    Checkpoint ck = make_full(52);
    ck.discriminator.reset();
    const auto p = dir.file("ae.ckpt");
    ck.save(p);
    const Checkpoint re = Checkpoint::load(p);
    CHECK(re.autoencoder.has_value());
    CHECK_FALSE(re.discriminator.has_value());
}

TEST_CASE("loading restores the positional activation convention") {
    TempDir dir;
    Checkpoint ck = make_full(53);
    for (auto& s : ck.config.encoder) s.activation = Activation::sigmoid;
    const auto p = dir.file("scrambled.ckpt");
    ck.save(p);
    const Checkpoint re = Checkpoint::load(p);
    CHECK(re.config.encoder.back().activation == Activation::linear);
    CHECK(re.config.encoder.front().activation == Activation::relu);
    CHECK(re.config.decoder.back().activation == Activation::sigmoid);
}

TEST_CASE("corrupted magic is rejected") {
    TempDir dir;
    const auto p = dir.file("bad_magic.ckpt");
    make_full(54).save(p);
    auto bytes = slurp(p);
    bytes[0] = 'X';
    spit(p, bytes);
    CHECK_THROWS_AS(Checkpoint::load(p), IoError);
}

TEST_CASE("unknown version is rejected") {
    TempDir dir;
    const auto p = dir.file("bad_version.ckpt");
    make_full(55).save(p);
    auto bytes = slurp(p);
    bytes[4] = 99; // version field follows the 4-byte magic, little-endian
    spit(p, bytes);
    CHECK_THROWS_AS(Checkpoint::load(p), VersionError);
}

TEST_CASE("truncated files are rejected") {
    TempDir dir;
    const auto p = dir.file("short.ckpt");
    make_full(56).save(p);
    auto bytes = slurp(p);
    for (const std::size_t keep :
         {bytes.size() / 2, bytes.size() - 1, std::size_t{10}, std::size_t{3}}) {
        std::vector<char> cut(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(keep));
        spit(p, cut);
        CHECK_THROWS_AS(Checkpoint::load(p), IoError); // TruncationError or bad header
    }
}

TEST_CASE("trailing bytes are rejected") {
    TempDir dir;
    const auto p = dir.file("trailing.ckpt");
    make_full(57).save(p);
    auto bytes = slurp(p);
    bytes.push_back('\0');
    spit(p, bytes);
    CHECK_THROWS_AS(Checkpoint::load(p), TruncationError);
}

TEST_CASE("missing file is an io error") {
    TempDir dir;
    CHECK_THROWS_AS(Checkpoint::load(dir.file("nope.ckpt")), IoError);
}

TEST_CASE("implausible stage counts are rejected") {
    TempDir dir;
    const auto p = dir.file("huge.ckpt");
    make_full(58).save(p);
    auto bytes = slurp(p);
    // The encoder stage count sits after magic, version, and the three
    // 4-byte geometry fields.
    const std::size_t off = 4 + 4 + 12;
    bytes[off + 0] = static_cast<char>(0xFF);
    bytes[off + 1] = static_cast<char>(0xFF);
    bytes[off + 2] = static_cast<char>(0xFF);
    bytes[off + 3] = static_cast<char>(0x7F);
    spit(p, bytes);
    CHECK_THROWS_AS(Checkpoint::load(p), IoError);
}
