#pragma once

#include <filesystem>

#include "rsim/tensor.hpp"

namespace rsim {

// Reads an 8-bit PNG into an H x W x 3 tensor scaled to [0,1]. Grayscale,
// palette, and 16-bit images are converted; alpha is composited away.
// Throws IoError when the file cannot be opened and DecodeError when it is
// not a valid PNG.
Tensor read_png(const std::filesystem::path& path);

// Writes an H x W x 3 tensor as an 8-bit RGB PNG; values are clamped to
// [0,1] before quantization.
void write_png(const std::filesystem::path& path, const Tensor& image);

// True when the file exists and starts with the 8-byte PNG signature.
bool looks_like_png(const std::filesystem::path& path);

// Bilinear resample to out_h x out_w with half-pixel sample centers and
// edge clamping. Any channel count; shrinking 2x2 to 1x1 averages all four.
Tensor resize_bilinear(const Tensor& image, int out_h, int out_w);

} // namespace rsim
