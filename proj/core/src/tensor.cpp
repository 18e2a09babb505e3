#include "rsim/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "rsim/errors.hpp"

namespace rsim {

std::int64_t numel(const Shape& shape) {
    std::int64_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape));
        n *= d;
    }
    return n;
}

bool same_shape(const Shape& a, const Shape& b) { return a == b; }

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

Tensor::Tensor(Shape s) : shape(std::move(s)) {
    data.assign(static_cast<std::size_t>(numel(shape)), 0.0);
}

Tensor::Tensor(Shape s, std::vector<double> values) : shape(std::move(s)), data(std::move(values)) {
    if (numel(shape) != static_cast<std::int64_t>(data.size())) {
        throw ShapeError("value count " + std::to_string(data.size()) +
                         " does not fill shape " + shape_str(shape));
    }
}

bool Tensor::all_finite() const {
    return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
}

void Tensor::zero_grad() {
    if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
}

void Tensor::accumulate_grad(const double* g, std::int64_t n) {
    if (n != size()) throw ShapeError("gradient length does not match tensor size");
    ensure_grad();
    for (std::int64_t i = 0; i < n; ++i) grad[static_cast<std::size_t>(i)] += g[i];
}

Tensor Tensor::full(Shape s, double value) {
    Tensor t(std::move(s));
    std::fill(t.data.begin(), t.data.end(), value);
    return t;
}

Tensor Tensor::uniform(Shape s, double lo, double hi, Rng& rng) {
    Tensor t(std::move(s));
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

Tensor stack_batch(const std::vector<const Tensor*>& items) {
    if (items.empty()) throw ValueError("stack_batch: nothing to stack");
    const Shape& base = items.front()->shape;
    for (const Tensor* t : items)
        if (t->shape != base)
            throw ShapeError("stack_batch: mixed shapes " + shape_str(base) + " vs " +
                             shape_str(t->shape));
    Shape out_shape;
    out_shape.reserve(base.size() + 1);
    out_shape.push_back(static_cast<int>(items.size()));
    out_shape.insert(out_shape.end(), base.begin(), base.end());
    Tensor out(out_shape);
    const std::int64_t n = items.front()->size();
    for (std::size_t b = 0; b < items.size(); ++b)
        std::copy(items[b]->data.begin(), items[b]->data.end(),
                  out.data.begin() + static_cast<std::int64_t>(b) * n);
    return out;
}

} // namespace rsim
