#pragma once

// Finite-difference gradient verification. A LossBuilder constructs a fresh
// graph from the current contents of a set of tensors (registered via
// g.param) and returns the scalar loss node; the checker compares the
// analytic gradient of every tensor element against central differences.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "rsim/graph.hpp"
#include "rsim/tensor.hpp"

namespace testsupport {

using LossBuilder = std::function<rsim::Var(rsim::Graph&)>;

inline double eval_loss(const LossBuilder& build) {
    rsim::Graph g;
    const rsim::Var loss = build(g);
    const rsim::Tensor& v = g.value(loss);
    if (v.size() != 1) throw std::runtime_error("fd check: loss is not scalar");
    return v.data[0];
}

struct FdReport {
    double max_rel = 0.0;
    std::size_t checked = 0;
};

// Central differences with step h; relative error uses an absolute floor so
// near-zero gradients do not blow up the ratio.
inline FdReport fd_gradient_check(const LossBuilder& build,
                                  const std::vector<rsim::Tensor*>& inputs, double h = 1e-5) {
    for (rsim::Tensor* t : inputs) t->zero_grad();
    {
        rsim::Graph g;
        g.backward(build(g));
    }
    std::vector<std::vector<double>> analytic;
    analytic.reserve(inputs.size());
    for (rsim::Tensor* t : inputs) {
        if (t->grad.empty()) t->ensure_grad();
        analytic.push_back(t->grad);
    }

    FdReport rep;
    for (std::size_t ti = 0; ti < inputs.size(); ++ti) {
        rsim::Tensor& t = *inputs[ti];
        for (std::size_t i = 0; i < t.data.size(); ++i) {
            const double saved = t.data[i];
            t.data[i] = saved + h;
            const double fp = eval_loss(build);
            t.data[i] = saved - h;
            const double fm = eval_loss(build);
            t.data[i] = saved;
            const double fd = (fp - fm) / (2.0 * h);
            const double a = analytic[ti][i];
            const double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-6});
            rep.max_rel = std::max(rep.max_rel, rel);
            ++rep.checked;
        }
    }
    return rep;
}

} // namespace testsupport
