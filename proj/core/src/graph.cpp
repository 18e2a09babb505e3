#include "rsim/graph.hpp"

#include <cmath>
#include <cstddef>
#include <utility>

#include "kernels.hpp"
#include "rsim/errors.hpp"

namespace rsim {

BatchNormState BatchNormState::create(int channels) {
    if (channels < 1) throw ValueError("batchnorm state needs at least one channel");
    BatchNormState s{Tensor::full({channels}, 1.0), Tensor::zeros({channels}),
                     Tensor::zeros({channels}), Tensor::full({channels}, 1.0)};
    return s;
}

struct Graph::Node {
    Tensor value;
    std::vector<double> grad; // empty until the node receives gradient
    std::function<void()> backward_fn;
    Tensor* bound = nullptr; // param leaf: receives grad on backward()
};

Graph::Graph() = default;
Graph::~Graph() = default;

Graph::Node& Graph::at(Var v) {
    if (!v.valid() || static_cast<std::size_t>(v.id) >= nodes_.size())
        throw ValueError("graph: variable does not belong to this graph");
    return nodes_[static_cast<std::size_t>(v.id)];
}

const Graph::Node& Graph::at(Var v) const {
    if (!v.valid() || static_cast<std::size_t>(v.id) >= nodes_.size())
        throw ValueError("graph: variable does not belong to this graph");
    return nodes_[static_cast<std::size_t>(v.id)];
}

Var Graph::push(Tensor value) {
    Node n;
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

double* Graph::grad_buf(std::int32_t id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.empty()) n.grad.assign(static_cast<std::size_t>(n.value.size()), 0.0);
    return n.grad.data();
}

std::size_t Graph::node_count() const { return nodes_.size(); }

Var Graph::input(Tensor value) { return push(std::move(value)); }

Var Graph::param(Tensor& t) {
    Var v = push(t);
    at(v).bound = &t;
    return v;
}

Var Graph::weight(const Tensor& t) { return push(t); }

const Tensor& Graph::value(Var v) const { return at(v).value; }

const std::vector<double>& Graph::grad(Var v) {
    at(v); // validate before touching the buffer
    grad_buf(v.id);
    return at(v).grad;
}

void Graph::add_grad(Var v, const std::vector<double>& g) {
    Node& n = at(v);
    if (g.size() != static_cast<std::size_t>(n.value.size()))
        throw ShapeError("add_grad: gradient has " + std::to_string(g.size()) + " elements, value has " +
                         std::to_string(n.value.size()));
    double* buf = grad_buf(v.id);
    for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i];
}

Var Graph::conv2d(Var x, Var w, Var b, int stride, int pad) {
    const auto geom =
        kernels::conv2d_geometry(value(x).shape, value(w).shape, value(b).shape, stride, pad);
    Tensor y = kernels::conv2d_forward(value(x), value(w), value(b), geom);
    Var out = push(std::move(y));
    at(out).backward_fn = [this, x, w, b, out, geom]() {
        kernels::conv2d_backward(value(x), value(w), geom, nodes_[out.id].grad.data(),
                                 grad_buf(x.id), grad_buf(w.id), grad_buf(b.id));
    };
    return out;
}

Var Graph::conv2d_transpose(Var x, Var w, Var b, int stride, int pad) {
    const auto geom =
        kernels::conv2d_transpose_geometry(value(x).shape, value(w).shape, value(b).shape, stride, pad);
    Tensor y = kernels::conv2d_transpose_forward(value(x), value(w), value(b), geom);
    Var out = push(std::move(y));
    at(out).backward_fn = [this, x, w, b, out, geom]() {
        kernels::conv2d_transpose_backward(value(x), value(w), geom, nodes_[out.id].grad.data(),
                                           grad_buf(x.id), grad_buf(w.id), grad_buf(b.id));
    };
    return out;
}

Var Graph::maxpool2(Var x) {
    auto argmax = std::make_shared<std::vector<std::int64_t>>();
    Tensor y = kernels::maxpool2_forward(value(x), *argmax);
    Var out = push(std::move(y));
    at(out).backward_fn = [this, x, out, argmax]() {
        const Node& n = nodes_[out.id];
        kernels::maxpool2_backward(*argmax, n.grad.data(), n.value.size(), grad_buf(x.id));
    };
    return out;
}

Var Graph::batchnorm2d(Var x, BatchNormState& state, BnMode mode) {
    Var gv = param(state.gamma);
    Var bv = param(state.beta);
    if (mode == BnMode::train) {
        auto ctx = std::make_shared<kernels::BatchNormContext>();
        Tensor y = kernels::batchnorm_train_forward(value(x), state.gamma, state.beta,
                                                    state.running_mean, state.running_var,
                                                    state.eps, state.momentum, *ctx);
        Var out = push(std::move(y));
        at(out).backward_fn = [this, x, gv, bv, out, ctx]() {
            kernels::batchnorm_train_backward(value(gv), *ctx, nodes_[out.id].grad.data(),
                                              grad_buf(x.id), grad_buf(gv.id), grad_buf(bv.id));
        };
        return out;
    }
    // Eval uses the running statistics as fixed constants; snapshot them so a
    // later in-place update of the state cannot skew this node's backward.
    auto rm = std::make_shared<Tensor>(state.running_mean);
    auto rv = std::make_shared<Tensor>(state.running_var);
    const double eps = state.eps;
    Tensor y = kernels::batchnorm_eval_forward(value(x), state.gamma, state.beta, *rm, *rv, eps);
    Var out = push(std::move(y));
    at(out).backward_fn = [this, x, gv, bv, out, rm, rv, eps]() {
        kernels::batchnorm_eval_backward(value(x), value(gv), *rm, *rv, eps,
                                         nodes_[out.id].grad.data(), grad_buf(x.id),
                                         grad_buf(gv.id), grad_buf(bv.id));
    };
    return out;
}

Var Graph::batchnorm2d(Var x, const BatchNormState& state) {
    Var gv = weight(state.gamma);
    Var bv = weight(state.beta);
    auto rm = std::make_shared<Tensor>(state.running_mean);
    auto rv = std::make_shared<Tensor>(state.running_var);
    const double eps = state.eps;
    Tensor y = kernels::batchnorm_eval_forward(value(x), state.gamma, state.beta, *rm, *rv, eps);
    Var out = push(std::move(y));
    at(out).backward_fn = [this, x, gv, bv, out, rm, rv, eps]() {
        kernels::batchnorm_eval_backward(value(x), value(gv), *rm, *rv, eps,
                                         nodes_[out.id].grad.data(), grad_buf(x.id),
                                         grad_buf(gv.id), grad_buf(bv.id));
    };
    return out;
}

Var Graph::relu(Var x) {
    Tensor y(value(x).shape);
    const auto& xd = value(x).data;
    for (std::size_t i = 0; i < xd.size(); ++i) y.data[i] = xd[i] > 0.0 ? xd[i] : 0.0;
    Var out = push(std::move(y));
    at(out).backward_fn = [this, x, out]() {
        const auto& gout = nodes_[out.id].grad;
        const auto& xd = value(x).data;
        double* gx = grad_buf(x.id);
        for (std::size_t i = 0; i < xd.size(); ++i)
            if (xd[i] > 0.0) gx[i] += gout[i];
    };
    return out;
}

Var Graph::sigmoid(Var x) {
    Tensor y(value(x).shape);
    const auto& xd = value(x).data;
    for (std::size_t i = 0; i < xd.size(); ++i) y.data[i] = 1.0 / (1.0 + std::exp(-xd[i]));
    Var out = push(std::move(y));
    at(out).backward_fn = [this, x, out]() {
        const Node& n = nodes_[out.id];
        double* gx = grad_buf(x.id);
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
            const double yv = n.value.data[i];
            gx[i] += n.grad[i] * yv * (1.0 - yv);
        }
    };
    return out;
}

Var Graph::softmax2(Var x) {
    const Tensor& xt = value(x);
    const bool ok = (xt.rank() == 1 && xt.dim(0) == 2) || (xt.rank() == 2 && xt.dim(1) == 2);
    if (!ok) throw ShapeError("softmax2: expected shape [2] or [B,2], got " + shape_str(xt.shape));
    Tensor y(xt.shape);
    const std::int64_t rows = xt.size() / 2;
    for (std::int64_t r = 0; r < rows; ++r) {
        const double a = xt.data[static_cast<std::size_t>(2 * r)];
        const double b = xt.data[static_cast<std::size_t>(2 * r + 1)];
        const double m = a > b ? a : b;
        const double ea = std::exp(a - m), eb = std::exp(b - m);
        const double s = ea + eb;
        y.data[static_cast<std::size_t>(2 * r)] = ea / s;
        y.data[static_cast<std::size_t>(2 * r + 1)] = eb / s;
    }
    Var out = push(std::move(y));
    at(out).backward_fn = [this, x, out, rows]() {
        const Node& n = nodes_[out.id];
        double* gx = grad_buf(x.id);
        for (std::int64_t r = 0; r < rows; ++r) {
            const auto i0 = static_cast<std::size_t>(2 * r), i1 = i0 + 1;
            const double y0 = n.value.data[i0], y1 = n.value.data[i1];
            const double dot = n.grad[i0] * y0 + n.grad[i1] * y1;
            gx[i0] += y0 * (n.grad[i0] - dot);
            gx[i1] += y1 * (n.grad[i1] - dot);
        }
    };
    return out;
}

Var Graph::dense(Var x, Var w, Var b) {
    Tensor y = kernels::dense_forward(value(x), value(w), value(b));
    Var out = push(std::move(y));
    at(out).backward_fn = [this, x, w, b, out]() {
        kernels::dense_backward(value(x), value(w), nodes_[out.id].grad.data(), grad_buf(x.id),
                                grad_buf(w.id), grad_buf(b.id));
    };
    return out;
}

Var Graph::concat_channels(Var a, Var b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (ta.rank() != tb.rank() || (ta.rank() != 3 && ta.rank() != 4))
        throw ShapeError("concat_channels: inputs must both be rank 3 or rank 4");
    for (int d = 0; d + 1 < ta.rank(); ++d)
        if (ta.dim(d) != tb.dim(d))
            throw ShapeError("concat_channels: leading dims differ, " + shape_str(ta.shape) + " vs " +
                             shape_str(tb.shape));
    const int ca = ta.dim(ta.rank() - 1), cb = tb.dim(tb.rank() - 1);
    Shape out_shape = ta.shape;
    out_shape.back() = ca + cb;
    Tensor y(out_shape);
    const std::int64_t cells = ta.size() / ca;
    for (std::int64_t i = 0; i < cells; ++i) {
        double* dst = y.data.data() + i * (ca + cb);
        const double* pa = ta.data.data() + i * ca;
        const double* pb = tb.data.data() + i * cb;
        for (int c = 0; c < ca; ++c) dst[c] = pa[c];
        for (int c = 0; c < cb; ++c) dst[ca + c] = pb[c];
    }
    Var out = push(std::move(y));
    at(out).backward_fn = [this, a, b, out, cells, ca, cb]() {
        const auto& gout = nodes_[out.id].grad;
        double* ga = grad_buf(a.id);
        double* gb = grad_buf(b.id);
        for (std::int64_t i = 0; i < cells; ++i) {
            const double* src = gout.data() + i * (ca + cb);
            for (int c = 0; c < ca; ++c) ga[i * ca + c] += src[c];
            for (int c = 0; c < cb; ++c) gb[i * cb + c] += src[ca + c];
        }
    };
    return out;
}

Var Graph::flatten(Var x) {
    const Tensor& xt = value(x);
    Shape out_shape;
    if (xt.rank() == 4)
        out_shape = {xt.dim(0), xt.dim(1) * xt.dim(2) * xt.dim(3)};
    else if (xt.rank() == 3)
        out_shape = {xt.dim(0) * xt.dim(1) * xt.dim(2)};
    else
        out_shape = xt.shape; // rank 1/2 pass through
    Tensor y(out_shape, xt.data);
    Var out = push(std::move(y));
    at(out).backward_fn = [this, x, out]() {
        const auto& gout = nodes_[out.id].grad;
        double* gx = grad_buf(x.id);
        for (std::size_t i = 0; i < gout.size(); ++i) gx[i] += gout[i];
    };
    return out;
}

Var Graph::add(Var a, Var b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (ta.shape != tb.shape)
        throw ShapeError("add: shapes differ, " + shape_str(ta.shape) + " vs " + shape_str(tb.shape));
    Tensor y(ta.shape);
    for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] = ta.data[i] + tb.data[i];
    Var out = push(std::move(y));
    at(out).backward_fn = [this, a, b, out]() {
        const auto& gout = nodes_[out.id].grad;
        double* ga = grad_buf(a.id);
        double* gb = grad_buf(b.id);
        for (std::size_t i = 0; i < gout.size(); ++i) {
            ga[i] += gout[i];
            gb[i] += gout[i];
        }
    };
    return out;
}

Var Graph::mul(Var a, Var b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (ta.shape != tb.shape)
        throw ShapeError("mul: shapes differ, " + shape_str(ta.shape) + " vs " + shape_str(tb.shape));
    Tensor y(ta.shape);
    for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] = ta.data[i] * tb.data[i];
    Var out = push(std::move(y));
    at(out).backward_fn = [this, a, b, out]() {
        const auto& gout = nodes_[out.id].grad;
        const auto& va = value(a).data;
        const auto& vb = value(b).data;
        double* ga = grad_buf(a.id);
        double* gb = grad_buf(b.id);
        for (std::size_t i = 0; i < gout.size(); ++i) {
            ga[i] += gout[i] * vb[i];
            gb[i] += gout[i] * va[i];
        }
    };
    return out;
}

Var Graph::scale(Var x, double c) {
    const Tensor& xt = value(x);
    Tensor y(xt.shape);
    for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] = c * xt.data[i];
    Var out = push(std::move(y));
    at(out).backward_fn = [this, x, out, c]() {
        const auto& gout = nodes_[out.id].grad;
        double* gx = grad_buf(x.id);
        for (std::size_t i = 0; i < gout.size(); ++i) gx[i] += c * gout[i];
    };
    return out;
}

Var Graph::sum(Var x) {
    const Tensor& xt = value(x);
    double s = 0.0;
    for (double v : xt.data) s += v;
    Var out = push(Tensor::scalar(s));
    at(out).backward_fn = [this, x, out]() {
        const double g = nodes_[out.id].grad[0];
        double* gx = grad_buf(x.id);
        const std::size_t n = value(x).data.size();
        for (std::size_t i = 0; i < n; ++i) gx[i] += g;
    };
    return out;
}

Var Graph::custom(std::vector<Var> inputs, Tensor value, CustomBackward backward) {
    for (Var v : inputs) at(v); // validate ownership before recording
    Var out = push(std::move(value));
    if (backward) {
        auto ins = std::make_shared<std::vector<Var>>(std::move(inputs));
        auto cb = std::make_shared<CustomBackward>(std::move(backward));
        at(out).backward_fn = [this, out, ins, cb]() { (*cb)(*this, *ins, nodes_[out.id].grad); };
    }
    return out;
}

void Graph::backward(Var loss) {
    Node& ln = at(loss);
    if (ln.value.size() != 1)
        throw ValueError("backward: target must be scalar, got shape " + shape_str(ln.value.shape));
    grad_buf(loss.id)[0] = 1.0;
    for (std::int32_t i = loss.id; i >= 0; --i) {
        Node& n = nodes_[static_cast<std::size_t>(i)];
        if (n.grad.empty()) continue; // never received gradient: dead branch
        if (n.backward_fn) n.backward_fn();
        if (n.bound) n.bound->accumulate_grad(n.grad.data(), static_cast<std::int64_t>(n.grad.size()));
    }
}

} // namespace rsim
