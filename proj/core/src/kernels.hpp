#pragma once

// Forward and backward math for the layer primitives. Everything here is
// plain tensor arithmetic with no autodiff state; graph.cpp wires these into
// tape nodes. Inputs of rank 3 (H x W x C) are treated as a batch of one;
// rank 4 is B x H x W x C. Backward routines accumulate (+=) into the
// provided buffers so fan-out gradients add up; null buffers are skipped.

#include <cstdint>
#include <vector>

#include "rsim/tensor.hpp"

namespace rsim::kernels {

struct ConvGeom {
    bool batched = false;
    int batch = 1;
    int in_h = 0, in_w = 0, in_c = 0;
    int k = 0, out_c = 0;
    int stride = 1, pad = 0;
    int out_h = 0, out_w = 0;
    Shape out_shape() const;
};

// kernel layout [k, k, Cin, Cout]
ConvGeom conv2d_geometry(const Shape& x, const Shape& w, const Shape& b, int stride, int pad);
Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b, const ConvGeom& g);
void conv2d_backward(const Tensor& x, const Tensor& w, const ConvGeom& g, const double* gout,
                     double* gx, double* gw, double* gb);

// kernel layout [k, k, Cout, Cin]; exact linear adjoint of conv2d with the
// same kernel, stride, and padding. Output side is (H-1)*stride - 2*pad + k.
ConvGeom conv2d_transpose_geometry(const Shape& x, const Shape& w, const Shape& b, int stride, int pad);
Tensor conv2d_transpose_forward(const Tensor& x, const Tensor& w, const Tensor& b, const ConvGeom& g);
void conv2d_transpose_backward(const Tensor& x, const Tensor& w, const ConvGeom& g, const double* gout,
                               double* gx, double* gw, double* gb);

// 2x2 stride-2 max pooling. argmax records the flat input index feeding each
// output cell (first-scanned cell wins ties) for the backward routing.
Tensor maxpool2_forward(const Tensor& x, std::vector<std::int64_t>& argmax);
void maxpool2_backward(const std::vector<std::int64_t>& argmax, const double* gout,
                       std::int64_t out_n, double* gx);

struct BatchNormContext {
    std::vector<double> xhat;   // normalized input, saved for backward
    std::vector<double> invstd; // per channel
    std::int64_t per_channel = 0;
};

// Train mode: normalize by batch statistics (biased variance), then update
// the running statistics in place by EMA with the given momentum.
Tensor batchnorm_train_forward(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                               Tensor& running_mean, Tensor& running_var, double eps,
                               double momentum, BatchNormContext& ctx);
void batchnorm_train_backward(const Tensor& gamma, const BatchNormContext& ctx, const double* gout,
                              double* gx, double* ggamma, double* gbeta);

Tensor batchnorm_eval_forward(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                              const Tensor& running_mean, const Tensor& running_var, double eps);
void batchnorm_eval_backward(const Tensor& x, const Tensor& gamma, const Tensor& running_mean,
                             const Tensor& running_var, double eps, const double* gout,
                             double* gx, double* ggamma, double* gbeta);

// weight [M, N]; input [N] or [B, N].
Tensor dense_forward(const Tensor& x, const Tensor& w, const Tensor& b);
void dense_backward(const Tensor& x, const Tensor& w, const double* gout,
                    double* gx, double* gw, double* gb);

} // namespace rsim::kernels
