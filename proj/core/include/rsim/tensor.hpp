#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rsim/rng.hpp"

namespace rsim {

/// Tensor extents, outermost first. Row-major layout throughout: images are
/// H x W x C, batches B x H x W x C, the innermost (channel) axis contiguous.
using Shape = std::vector<int>;

std::int64_t numel(const Shape& shape);
bool same_shape(const Shape& a, const Shape& b);
std::string shape_str(const Shape& shape);

/// Dense 64-bit tensor. Gradient storage is lazily allocated and accumulates
/// additively; callers zero it between optimizer steps.
struct Tensor {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad; // empty until the first accumulation

    Tensor() = default;
    explicit Tensor(Shape s);
    Tensor(Shape s, std::vector<double> values);

    int rank() const { return static_cast<int>(shape.size()); }
    std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

    double& operator[](std::int64_t i) { return data[static_cast<std::size_t>(i)]; }
    double operator[](std::int64_t i) const { return data[static_cast<std::size_t>(i)]; }

    // Flat offsets for the canonical layouts.
    std::int64_t index3(int h, int w, int c) const {
        return (static_cast<std::int64_t>(h) * shape[1] + w) * shape[2] + c;
    }
    std::int64_t index4(int b, int h, int w, int c) const {
        return ((static_cast<std::int64_t>(b) * shape[1] + h) * shape[2] + w) * shape[3] + c;
    }
    double& at3(int h, int w, int c) { return data[static_cast<std::size_t>(index3(h, w, c))]; }
    double at3(int h, int w, int c) const { return data[static_cast<std::size_t>(index3(h, w, c))]; }
    double& at4(int b, int h, int w, int c) { return data[static_cast<std::size_t>(index4(b, h, w, c))]; }
    double at4(int b, int h, int w, int c) const { return data[static_cast<std::size_t>(index4(b, h, w, c))]; }

    bool all_finite() const;

    /// Allocate (or keep) a zeroed gradient buffer.
    void ensure_grad();
    void zero_grad();
    void accumulate_grad(const double* g, std::int64_t n);

    static Tensor zeros(Shape s) { return Tensor(std::move(s)); }
    static Tensor full(Shape s, double value);
    static Tensor scalar(double value) { return Tensor({1}, {value}); }
    /// I.i.d. uniform values in [lo, hi).
    static Tensor uniform(Shape s, double lo, double hi, Rng& rng);
};

// Stacks same-shaped tensors into one batch tensor with a leading B axis.
Tensor stack_batch(const std::vector<const Tensor*>& items);

} // namespace rsim
