#include "rsim/feature_store.hpp"

#include <cstring>
#include <limits>

#include <zlib.h>

#include "binio.hpp"
#include "rsim/errors.hpp"

namespace rsim {

namespace {
constexpr char kMagic[4] = {'R', 'S', 'F', 'S'};
constexpr std::uint32_t kVersion = 1;

std::uint32_t crc_of(const std::uint8_t* p, std::size_t n) {
    return static_cast<std::uint32_t>(::crc32(0UL, p, static_cast<uInt>(n)));
}
} // namespace

FeatureStore::FeatureStore(Shape extents) : extents_(std::move(extents)) {
    numel(extents_); // validates positivity
}

std::int64_t FeatureStore::feature_size() const {
    if (extents_.empty()) throw ValueError("feature store has no shape yet");
    return numel(extents_);
}

void FeatureStore::add(std::string id, std::string label, const Tensor& features) {
    if (extents_.empty()) throw ValueError("feature store has no shape yet");
    if (features.shape != extents_)
        throw ShapeError("feature store expects " + shape_str(extents_) + ", got " +
                         shape_str(features.shape));
    if (id.empty()) throw ValueError("feature store: empty id");
    if (id.size() > std::numeric_limits<std::uint16_t>::max() ||
        label.size() > std::numeric_limits<std::uint16_t>::max())
        throw ValueError("feature store: id or label exceeds 65535 bytes");
    if (contains(id)) throw ValueError("feature store: duplicate id " + id);

    FeatureRecord rec;
    rec.id = std::move(id);
    rec.label = std::move(label);
    rec.values.reserve(features.data.size());
    for (double v : features.data) rec.values.push_back(static_cast<float>(v));

    const std::size_t idx = records_.size();
    id_index_.emplace(rec.id, idx);
    label_index_[rec.label].push_back(idx);
    records_.push_back(std::move(rec));
}

std::size_t FeatureStore::index_of(const std::string& id) const {
    const auto it = id_index_.find(id);
    if (it == id_index_.end()) throw UnknownIdError("no record with id " + id);
    return it->second;
}

std::vector<std::size_t> FeatureStore::records_except(const std::string& id) const {
    std::vector<std::size_t> out;
    out.reserve(records_.size());
    const auto it = id_index_.find(id);
    for (std::size_t i = 0; i < records_.size(); ++i)
        if (it == id_index_.end() || i != it->second) out.push_back(i);
    return out;
}

std::vector<std::string> FeatureStore::labels() const {
    std::vector<std::string> out;
    out.reserve(records_.size());
    for (const auto& r : records_) out.push_back(r.label);
    return out;
}

Tensor FeatureStore::features_as_tensor(std::size_t i) const {
    const FeatureRecord& rec = records_.at(i);
    Tensor t(extents_);
    for (std::size_t j = 0; j < rec.values.size(); ++j) t.data[j] = static_cast<double>(rec.values[j]);
    return t;
}

void FeatureStore::save(const std::filesystem::path& path) const {
    if (extents_.empty()) throw ValueError("feature store has no shape yet");
    binio::Writer w;
    w.bytes(kMagic, 4);
    w.u32(kVersion);
    w.u32(static_cast<std::uint32_t>(extents_.size()));
    for (int d : extents_) w.u32(static_cast<std::uint32_t>(d));
    w.u64(records_.size());
    for (const auto& rec : records_) {
        w.u16(static_cast<std::uint16_t>(rec.id.size()));
        w.bytes(rec.id.data(), rec.id.size());
        w.u16(static_cast<std::uint16_t>(rec.label.size()));
        w.bytes(rec.label.data(), rec.label.size());
        for (float v : rec.values) w.f32(v);
    }
    w.u32(crc_of(w.buf.data(), w.buf.size()));
    binio::write_file(path, w.buf);
}

FeatureStore FeatureStore::load(const std::filesystem::path& path) {
    const auto buf = binio::read_file(path);
    if (buf.size() < 4 + 4 + 4) throw TruncationError(path.string() + ": too short for a feature store");
    if (std::memcmp(buf.data(), kMagic, 4) != 0)
        throw IoError(path.string() + " is not a feature store (bad magic)");

    binio::Reader r(buf);
    r.pos = 4;
    const std::uint32_t version = r.u32();
    if (version != kVersion)
        throw VersionError("feature store version " + std::to_string(version) + " is not supported");

    const std::uint32_t rank = r.u32();
    if (rank == 0 || rank > 8) throw IoError("feature store: implausible rank " + std::to_string(rank));
    Shape extents(rank);
    for (auto& d : extents) {
        const std::uint32_t e = r.u32();
        if (e == 0 || e > (1u << 24)) throw IoError("feature store: implausible extent");
        d = static_cast<int>(e);
    }
    FeatureStore store(extents);
    const std::size_t fsize = static_cast<std::size_t>(store.feature_size());

    const std::uint64_t count = r.u64();
    // The CRC32 occupies the last 4 bytes; everything before it is payload.
    if (buf.size() < r.pos + 4) throw TruncationError(path.string() + ": missing checksum");
    const std::size_t payload_end = buf.size() - 4;
    const std::uint32_t stored_crc =
        binio::Reader(buf.data() + payload_end, 4).u32();
    if (crc_of(buf.data(), payload_end) != stored_crc)
        throw ChecksumError(path.string() + ": checksum mismatch, file is corrupt");

    for (std::uint64_t i = 0; i < count; ++i) {
        const std::uint16_t id_len = r.u16();
        if (r.pos + id_len > payload_end) throw TruncationError(path.string() + ": record overruns payload");
        std::string id(id_len, '\0');
        r.bytes(id.data(), id_len);
        const std::uint16_t label_len = r.u16();
        if (r.pos + label_len > payload_end) throw TruncationError(path.string() + ": record overruns payload");
        std::string label(label_len, '\0');
        r.bytes(label.data(), label_len);
        if (r.pos + 4 * fsize > payload_end) throw TruncationError(path.string() + ": record overruns payload");

        FeatureRecord rec;
        rec.id = std::move(id);
        rec.label = std::move(label);
        rec.values.resize(fsize);
        for (auto& v : rec.values) v = r.f32();

        if (store.contains(rec.id)) throw IoError(path.string() + ": duplicate id " + rec.id);
        const std::size_t idx = store.records_.size();
        store.id_index_.emplace(rec.id, idx);
        store.label_index_[rec.label].push_back(idx);
        store.records_.push_back(std::move(rec));
    }
    if (r.pos != payload_end) throw TruncationError(path.string() + ": trailing bytes after records");
    return store;
}

} // namespace rsim
