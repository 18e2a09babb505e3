#pragma once

// Define-by-run reverse-mode autodiff. A Graph owns the tape for one forward
// pass: ops execute eagerly, record their inputs, and backward() replays the
// tape in reverse. Graphs are single-use and single-threaded; build a fresh
// one per training step. Gradients accumulate additively, both across fan-out
// within a graph and into bound parameter tensors across backward() calls, so
// callers zero parameter grads between steps.

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "rsim/tensor.hpp"

namespace rsim {

class Graph;

struct Var {
    std::int32_t id = -1;
    bool valid() const { return id >= 0; }
};

enum class BnMode { train, eval };

// Learnable affine plus running statistics for one batchnorm layer.
struct BatchNormState {
    Tensor gamma;
    Tensor beta;
    Tensor running_mean;
    Tensor running_var;
    double eps = 1e-5;
    double momentum = 0.1;

    static BatchNormState create(int channels);
    int channels() const { return gamma.dim(0); }
};

class Graph {
public:
    Graph();
    ~Graph();
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    // Leaves. input/weight do not write gradients anywhere external; param
    // accumulates into t.grad on backward(). The bound tensor must outlive
    // the graph.
    Var input(Tensor value);
    Var param(Tensor& t);
    Var weight(const Tensor& t);

    const Tensor& value(Var v) const;
    // Gradient of the last backward() target w.r.t. v, flat layout matching
    // value(v). Allocated zero on demand.
    const std::vector<double>& grad(Var v);
    // Accumulates into v's gradient buffer; used by custom-op backward
    // callbacks. g must match value(v) in length.
    void add_grad(Var v, const std::vector<double>& g);

    // x: [H,W,Cin] or [B,H,W,Cin]; w: [k,k,Cin,Cout]; b: [Cout].
    Var conv2d(Var x, Var w, Var b, int stride, int pad);
    // x: [H,W,Cin] or [B,H,W,Cin]; w: [k,k,Cout,Cin]; b: [Cout]. Linear
    // adjoint of conv2d with identical stride/padding; output spatial size is
    // (H-1)*stride - 2*pad + k.
    Var conv2d_transpose(Var x, Var w, Var b, int stride, int pad);
    // 2x2 stride-2 max pool; spatial dims must be even.
    Var maxpool2(Var x);
    // Train mode normalizes by batch statistics and updates state's running
    // statistics in place; eval mode uses the stored running statistics.
    Var batchnorm2d(Var x, BatchNormState& state, BnMode mode);
    // Eval-only variant usable with shared immutable state.
    Var batchnorm2d(Var x, const BatchNormState& state);
    Var relu(Var x);
    Var sigmoid(Var x);
    // x: [2] or [B,2]; rows sum to 1, computed max-subtracted.
    Var softmax2(Var x);
    // x: [N] or [B,N]; w: [M,N]; b: [M].
    Var dense(Var x, Var w, Var b);
    // Concatenate along the channel axis; spatial/batch dims must agree.
    Var concat_channels(Var a, Var b);
    // [H,W,C] -> [H*W*C]; [B,H,W,C] -> [B,H*W*C]; rank 1/2 pass through.
    Var flatten(Var x);
    Var add(Var a, Var b);
    Var mul(Var a, Var b); // elementwise
    Var scale(Var x, double c);
    Var sum(Var x); // reduce all elements to shape [1]

    // Extension hook for ops defined outside the core (losses, etc.). The
    // callback receives the upstream gradient of the node and is responsible
    // for routing gradients to the inputs via add_grad().
    using CustomBackward =
        std::function<void(Graph&, const std::vector<Var>& inputs, const std::vector<double>& gout)>;
    Var custom(std::vector<Var> inputs, Tensor value, CustomBackward backward);

    // loss must be scalar (one element). Seeds d(loss)/d(loss) = 1 and runs
    // the tape in reverse; afterwards param-bound tensors hold accumulated
    // gradients in .grad.
    void backward(Var loss);

    std::size_t node_count() const;

private:
    struct Node;
    std::vector<Node> nodes_;

    Node& at(Var v);
    const Node& at(Var v) const;
    Var push(Tensor value);
    double* grad_buf(std::int32_t id);
};

} // namespace rsim
