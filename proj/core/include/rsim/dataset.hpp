#pragma once

// Image corpus handling: directory scanning (one subdirectory per class),
// image loading at network resolution, and a deterministic synthetic corpus
// generator used for self-contained experiments and tests.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rsim/tensor.hpp"

namespace rsim {

struct DatasetItem {
    std::string id;    // "<class>/<filename>", unique within a dataset
    std::string label; // class directory name
    std::filesystem::path path;
};

struct Dataset {
    std::filesystem::path root;
    std::vector<DatasetItem> items;

    std::vector<std::string> labels() const; // parallel to items
};

// Scans <root>/<class>/<image>.png. Classes and files are visited in
// lexicographic order so the item list is stable across filesystems.
// Files without the PNG signature are skipped with a warning on stderr
// (.json metadata is skipped silently). Throws IoError when root is not a
// directory or no images are found.
Dataset scan_directory(const std::filesystem::path& root);

// Reads the item's PNG and resizes to h x w, values in [0,1].
Tensor load_image(const DatasetItem& item, int h, int w);

// Synthetic corpus: geometric shape classes (disk, square, cross, ring,
// horizontal/vertical stripes, checkerboard, blob) in class-specific hues,
// with per-image jitter of position, scale, rotation, color, and pixel
// noise. Rendering is supersampled 4x and box-filtered down.
struct SyntheticSpec {
    int classes = 8; // first N of the built-in shape set, at most 8
    int images_per_class = 50;
    int image_size = 64;
    double noise = 0.02;  // gaussian pixel noise sigma
    double jitter = 1.0;  // scales all geometric jitter; 0 = perfectly aligned
    std::uint64_t seed = 0;

    void validate() const;
};

// Renders the corpus under root as <root>/<class>/img_NNN.png plus a
// manifest.json describing it, and returns the scanned dataset. Each image
// depends only on (seed, class index, image index), so regeneration is
// reproducible file for file.
Dataset generate_synthetic(const std::filesystem::path& root, const SyntheticSpec& spec);

// Built-in shape class names in generation order.
const std::vector<std::string>& synthetic_class_names();

} // namespace rsim
