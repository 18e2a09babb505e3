#pragma once

// Extracted-feature index: one fixed-shape float32 feature volume per image,
// with its id and class label. Features are cast to f32 when added, so a
// freshly built store and one loaded from disk score identically.
//
// File format, little-endian: magic "RSFS", version u32 (currently 1),
// rank u32 + extents u32 each, record count u64, then per record
// id_len u16 + UTF-8 bytes, label_len u16 + UTF-8 bytes, f32 values; the
// file ends with a CRC32 (u32) of every preceding byte. Errors: IoError for
// bad magic, VersionError, TruncationError for short files or trailing
// bytes, ChecksumError when the CRC32 does not match.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "rsim/tensor.hpp"

namespace rsim {

struct FeatureRecord {
    std::string id;
    std::string label;
    std::vector<float> values;
};

class FeatureStore {
public:
    FeatureStore() = default;
    explicit FeatureStore(Shape extents);

    const Shape& extents() const { return extents_; }
    std::int64_t feature_size() const;
    std::size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }

    // Rejects duplicate ids and mismatched feature shapes.
    void add(std::string id, std::string label, const Tensor& features);

    const FeatureRecord& record(std::size_t i) const { return records_.at(i); }
    const std::vector<FeatureRecord>& records() const { return records_; }
    bool contains(const std::string& id) const { return id_index_.count(id) != 0; }
    std::size_t index_of(const std::string& id) const; // UnknownIdError when absent
    const FeatureRecord& by_id(const std::string& id) const { return records_[index_of(id)]; }

    // All record indices except the one with the given id (which need not
    // exist), in stored order.
    std::vector<std::size_t> records_except(const std::string& id) const;

    // Record indices per class label, keys in sorted order.
    const std::map<std::string, std::vector<std::size_t>>& label_index() const { return label_index_; }
    std::vector<std::string> labels() const; // parallel to records()

    // Record's feature volume widened back to f64, shaped extents().
    Tensor features_as_tensor(std::size_t i) const;

    void save(const std::filesystem::path& path) const;
    static FeatureStore load(const std::filesystem::path& path);

private:
    Shape extents_;
    std::vector<FeatureRecord> records_;
    std::map<std::string, std::size_t> id_index_;
    std::map<std::string, std::vector<std::size_t>> label_index_;
};

} // namespace rsim
