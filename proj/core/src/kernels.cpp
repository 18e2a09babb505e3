#include "kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rsim/errors.hpp"

namespace rsim::kernels {

namespace {

// Splits a rank-3/4 image tensor into (batched, B, H, W, C).
void image_dims(const Shape& s, const char* what, bool& batched, int& b, int& h, int& w, int& c) {
    if (s.size() == 3) {
        batched = false;
        b = 1;
        h = s[0];
        w = s[1];
        c = s[2];
    } else if (s.size() == 4) {
        batched = true;
        b = s[0];
        h = s[1];
        w = s[2];
        c = s[3];
    } else {
        throw ShapeError(std::string(what) + ": expected rank 3 or 4 input, got " + shape_str(s));
    }
}

} // namespace

Shape ConvGeom::out_shape() const {
    if (batched) return {batch, out_h, out_w, out_c};
    return {out_h, out_w, out_c};
}

ConvGeom conv2d_geometry(const Shape& x, const Shape& w, const Shape& b, int stride, int pad) {
    ConvGeom g;
    image_dims(x, "conv2d", g.batched, g.batch, g.in_h, g.in_w, g.in_c);
    if (w.size() != 4 || w[0] != w[1])
        throw ShapeError("conv2d: kernel must be [k, k, Cin, Cout], got " + shape_str(w));
    if (w[2] != g.in_c)
        throw ShapeError("conv2d: kernel expects " + std::to_string(w[2]) +
                         " input channels, input has " + std::to_string(g.in_c));
    g.k = w[0];
    g.out_c = w[3];
    if (b.size() != 1 || b[0] != g.out_c)
        throw ShapeError("conv2d: bias must be [" + std::to_string(g.out_c) + "], got " + shape_str(b));
    if (stride < 1 || pad < 0)
        throw ValueError("conv2d: stride must be >= 1 and padding >= 0");
    g.stride = stride;
    g.pad = pad;
    const int eh = g.in_h + 2 * pad - g.k;
    const int ew = g.in_w + 2 * pad - g.k;
    if (eh < 0 || ew < 0)
        throw ValueError("conv2d: kernel size " + std::to_string(g.k) + " exceeds padded input " +
                         shape_str(x));
    g.out_h = eh / stride + 1;
    g.out_w = ew / stride + 1;
    return g;
}

Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b, const ConvGeom& g) {
    Tensor y(g.out_shape());
    const double* X = x.data.data();
    const double* W = w.data.data();
    const double* B = b.data.data();
    double* Y = y.data.data();
    const int ih = g.in_h, iw = g.in_w, ic = g.in_c, oc = g.out_c, k = g.k;
    for (int n = 0; n < g.batch; ++n) {
        const double* xb = X + static_cast<std::int64_t>(n) * ih * iw * ic;
        double* yb = Y + static_cast<std::int64_t>(n) * g.out_h * g.out_w * oc;
        for (int oy = 0; oy < g.out_h; ++oy) {
            const int iy0 = oy * g.stride - g.pad;
            const int ky_lo = std::max(0, -iy0);
            const int ky_hi = std::min(k, ih - iy0);
            for (int ox = 0; ox < g.out_w; ++ox) {
                const int ix0 = ox * g.stride - g.pad;
                const int kx_lo = std::max(0, -ix0);
                const int kx_hi = std::min(k, iw - ix0);
                double* ycell = yb + (static_cast<std::int64_t>(oy) * g.out_w + ox) * oc;
                for (int co = 0; co < oc; ++co) ycell[co] = B[co];
                for (int ky = ky_lo; ky < ky_hi; ++ky) {
                    const int iy = iy0 + ky;
                    for (int kx = kx_lo; kx < kx_hi; ++kx) {
                        const int ix = ix0 + kx;
                        const double* xcell = xb + (static_cast<std::int64_t>(iy) * iw + ix) * ic;
                        const double* wtap = W + (static_cast<std::int64_t>(ky) * k + kx) * ic * oc;
                        for (int ci = 0; ci < ic; ++ci) {
                            const double xv = xcell[ci];
                            const double* wrow = wtap + static_cast<std::int64_t>(ci) * oc;
                            for (int co = 0; co < oc; ++co) ycell[co] += xv * wrow[co];
                        }
                    }
                }
            }
        }
    }
    return y;
}

void conv2d_backward(const Tensor& x, const Tensor& w, const ConvGeom& g, const double* gout,
                     double* gx, double* gw, double* gb) {
    const double* X = x.data.data();
    const double* W = w.data.data();
    const int ih = g.in_h, iw = g.in_w, ic = g.in_c, oc = g.out_c, k = g.k;
    for (int n = 0; n < g.batch; ++n) {
        const double* xb = X + static_cast<std::int64_t>(n) * ih * iw * ic;
        double* gxb = gx ? gx + static_cast<std::int64_t>(n) * ih * iw * ic : nullptr;
        const double* goutb = gout + static_cast<std::int64_t>(n) * g.out_h * g.out_w * oc;
        for (int oy = 0; oy < g.out_h; ++oy) {
            const int iy0 = oy * g.stride - g.pad;
            const int ky_lo = std::max(0, -iy0);
            const int ky_hi = std::min(k, ih - iy0);
            for (int ox = 0; ox < g.out_w; ++ox) {
                const int ix0 = ox * g.stride - g.pad;
                const int kx_lo = std::max(0, -ix0);
                const int kx_hi = std::min(k, iw - ix0);
                const double* gcell = goutb + (static_cast<std::int64_t>(oy) * g.out_w + ox) * oc;
                if (gb)
                    for (int co = 0; co < oc; ++co) gb[co] += gcell[co];
                for (int ky = ky_lo; ky < ky_hi; ++ky) {
                    const int iy = iy0 + ky;
                    for (int kx = kx_lo; kx < kx_hi; ++kx) {
                        const int ix = ix0 + kx;
                        const std::int64_t cell = (static_cast<std::int64_t>(iy) * iw + ix) * ic;
                        const std::int64_t tap = (static_cast<std::int64_t>(ky) * k + kx) * ic * oc;
                        for (int ci = 0; ci < ic; ++ci) {
                            const double* wrow = W + tap + static_cast<std::int64_t>(ci) * oc;
                            if (gx) {
                                double acc = 0.0;
                                for (int co = 0; co < oc; ++co) acc += gcell[co] * wrow[co];
                                gxb[cell + ci] += acc;
                            }
                            if (gw) {
                                const double xv = xb[cell + ci];
                                double* gwrow = gw + tap + static_cast<std::int64_t>(ci) * oc;
                                for (int co = 0; co < oc; ++co) gwrow[co] += xv * gcell[co];
                            }
                        }
                    }
                }
            }
        }
    }
}

ConvGeom conv2d_transpose_geometry(const Shape& x, const Shape& w, const Shape& b, int stride, int pad) {
    ConvGeom g;
    image_dims(x, "conv2d_transpose", g.batched, g.batch, g.in_h, g.in_w, g.in_c);
    if (w.size() != 4 || w[0] != w[1])
        throw ShapeError("conv2d_transpose: kernel must be [k, k, Cout, Cin], got " + shape_str(w));
    if (w[3] != g.in_c)
        throw ShapeError("conv2d_transpose: kernel expects " + std::to_string(w[3]) +
                         " input channels, input has " + std::to_string(g.in_c));
    g.k = w[0];
    g.out_c = w[2];
    if (b.size() != 1 || b[0] != g.out_c)
        throw ShapeError("conv2d_transpose: bias must be [" + std::to_string(g.out_c) + "], got " +
                         shape_str(b));
    if (stride < 1 || pad < 0)
        throw ValueError("conv2d_transpose: stride must be >= 1 and padding >= 0");
    g.stride = stride;
    g.pad = pad;
    g.out_h = (g.in_h - 1) * stride - 2 * pad + g.k;
    g.out_w = (g.in_w - 1) * stride - 2 * pad + g.k;
    if (g.out_h < 1 || g.out_w < 1)
        throw ValueError("conv2d_transpose: output would be empty for input " + shape_str(x));
    return g;
}

Tensor conv2d_transpose_forward(const Tensor& x, const Tensor& w, const Tensor& b, const ConvGeom& g) {
    Tensor y(g.out_shape());
    const double* X = x.data.data();
    const double* W = w.data.data();
    const int ih = g.in_h, iw = g.in_w, ic = g.in_c, oc = g.out_c, k = g.k;
    {
        double* Y = y.data.data();
        const std::int64_t cells = y.size() / oc;
        for (std::int64_t i = 0; i < cells; ++i)
            for (int co = 0; co < oc; ++co) Y[i * oc + co] = b.data[co];
    }
    double* Y = y.data.data();
    for (int n = 0; n < g.batch; ++n) {
        const double* xb = X + static_cast<std::int64_t>(n) * ih * iw * ic;
        double* yb = Y + static_cast<std::int64_t>(n) * g.out_h * g.out_w * oc;
        for (int iy = 0; iy < ih; ++iy) {
            for (int ix = 0; ix < iw; ++ix) {
                const double* xcell = xb + (static_cast<std::int64_t>(iy) * iw + ix) * ic;
                for (int ky = 0; ky < k; ++ky) {
                    const int ty = iy * g.stride + ky - g.pad;
                    if (ty < 0 || ty >= g.out_h) continue;
                    for (int kx = 0; kx < k; ++kx) {
                        const int tx = ix * g.stride + kx - g.pad;
                        if (tx < 0 || tx >= g.out_w) continue;
                        double* ycell = yb + (static_cast<std::int64_t>(ty) * g.out_w + tx) * oc;
                        const double* wtap = W + (static_cast<std::int64_t>(ky) * k + kx) * oc * ic;
                        for (int co = 0; co < oc; ++co) {
                            const double* wrow = wtap + static_cast<std::int64_t>(co) * ic;
                            double acc = 0.0;
                            for (int ci = 0; ci < ic; ++ci) acc += xcell[ci] * wrow[ci];
                            ycell[co] += acc;
                        }
                    }
                }
            }
        }
    }
    return y;
}

void conv2d_transpose_backward(const Tensor& x, const Tensor& w, const ConvGeom& g, const double* gout,
                               double* gx, double* gw, double* gb) {
    const double* X = x.data.data();
    const double* W = w.data.data();
    const int ih = g.in_h, iw = g.in_w, ic = g.in_c, oc = g.out_c, k = g.k;
    if (gb) {
        const std::int64_t cells = static_cast<std::int64_t>(g.batch) * g.out_h * g.out_w;
        for (std::int64_t i = 0; i < cells; ++i)
            for (int co = 0; co < oc; ++co) gb[co] += gout[i * oc + co];
    }
    for (int n = 0; n < g.batch; ++n) {
        const double* xb = X + static_cast<std::int64_t>(n) * ih * iw * ic;
        double* gxb = gx ? gx + static_cast<std::int64_t>(n) * ih * iw * ic : nullptr;
        const double* goutb = gout + static_cast<std::int64_t>(n) * g.out_h * g.out_w * oc;
        for (int iy = 0; iy < ih; ++iy) {
            for (int ix = 0; ix < iw; ++ix) {
                const std::int64_t cell = (static_cast<std::int64_t>(iy) * iw + ix) * ic;
                for (int ky = 0; ky < k; ++ky) {
                    const int ty = iy * g.stride + ky - g.pad;
                    if (ty < 0 || ty >= g.out_h) continue;
                    for (int kx = 0; kx < k; ++kx) {
                        const int tx = ix * g.stride + kx - g.pad;
                        if (tx < 0 || tx >= g.out_w) continue;
                        const double* gcell = goutb + (static_cast<std::int64_t>(ty) * g.out_w + tx) * oc;
                        const std::int64_t tap = (static_cast<std::int64_t>(ky) * k + kx) * oc * ic;
                        for (int co = 0; co < oc; ++co) {
                            const double gv = gcell[co];
                            const double* wrow = W + tap + static_cast<std::int64_t>(co) * ic;
                            if (gx)
                                for (int ci = 0; ci < ic; ++ci) gxb[cell + ci] += gv * wrow[ci];
                            if (gw) {
                                double* gwrow = gw + tap + static_cast<std::int64_t>(co) * ic;
                                for (int ci = 0; ci < ic; ++ci) gwrow[ci] += gv * xb[cell + ci];
                            }
                        }
                    }
                }
            }
        }
    }
}

Tensor maxpool2_forward(const Tensor& x, std::vector<std::int64_t>& argmax) {
    bool batched;
    int b, h, w, c;
    image_dims(x.shape, "maxpool2", batched, b, h, w, c);
    if (h % 2 != 0 || w % 2 != 0)
        throw ShapeError("maxpool2: spatial dims must be even, got " + shape_str(x.shape));
    const int oh = h / 2, ow = w / 2;
    Tensor y(batched ? Shape{b, oh, ow, c} : Shape{oh, ow, c});
    argmax.assign(static_cast<std::size_t>(y.size()), 0);
    const double* X = x.data.data();
    double* Y = y.data.data();
    for (int n = 0; n < b; ++n) {
        const std::int64_t xoff = static_cast<std::int64_t>(n) * h * w * c;
        const std::int64_t yoff = static_cast<std::int64_t>(n) * oh * ow * c;
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                const std::int64_t ycell = yoff + (static_cast<std::int64_t>(oy) * ow + ox) * c;
                for (int ch = 0; ch < c; ++ch) {
                    double best = -std::numeric_limits<double>::infinity();
                    std::int64_t best_idx = -1;
                    for (int dy = 0; dy < 2; ++dy) {
                        for (int dx = 0; dx < 2; ++dx) {
                            const std::int64_t idx =
                                xoff + ((static_cast<std::int64_t>(oy * 2 + dy)) * w + (ox * 2 + dx)) * c + ch;
                            if (X[idx] > best) { // ties keep the first-scanned cell
                                best = X[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    Y[ycell + ch] = best;
                    argmax[static_cast<std::size_t>(ycell + ch)] = best_idx;
                }
            }
        }
    }
    return y;
}

void maxpool2_backward(const std::vector<std::int64_t>& argmax, const double* gout,
                       std::int64_t out_n, double* gx) {
    for (std::int64_t i = 0; i < out_n; ++i) gx[argmax[static_cast<std::size_t>(i)]] += gout[i];
}

namespace {

void check_bn_params(int c, const Tensor& gamma, const Tensor& beta, const Tensor& rm, const Tensor& rv) {
    const Shape want{c};
    if (gamma.shape != want || beta.shape != want || rm.shape != want || rv.shape != want)
        throw ShapeError("batchnorm: per-channel parameters must all be [" + std::to_string(c) + "]");
}

} // namespace

Tensor batchnorm_train_forward(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                               Tensor& running_mean, Tensor& running_var, double eps,
                               double momentum, BatchNormContext& ctx) {
    bool batched;
    int b, h, w, c;
    image_dims(x.shape, "batchnorm", batched, b, h, w, c);
    check_bn_params(c, gamma, beta, running_mean, running_var);
    const std::int64_t n = static_cast<std::int64_t>(b) * h * w;
    if (n < 2) throw ValueError("batchnorm: training statistics need at least 2 spatial samples");

    std::vector<double> mean(static_cast<std::size_t>(c), 0.0);
    std::vector<double> var(static_cast<std::size_t>(c), 0.0);
    const double* X = x.data.data();
    for (std::int64_t i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch) mean[static_cast<std::size_t>(ch)] += X[i * c + ch];
    for (int ch = 0; ch < c; ++ch) mean[static_cast<std::size_t>(ch)] /= static_cast<double>(n);
    for (std::int64_t i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch) {
            const double d = X[i * c + ch] - mean[static_cast<std::size_t>(ch)];
            var[static_cast<std::size_t>(ch)] += d * d;
        }
    for (int ch = 0; ch < c; ++ch) var[static_cast<std::size_t>(ch)] /= static_cast<double>(n);

    ctx.per_channel = n;
    ctx.invstd.resize(static_cast<std::size_t>(c));
    for (int ch = 0; ch < c; ++ch)
        ctx.invstd[static_cast<std::size_t>(ch)] = 1.0 / std::sqrt(var[static_cast<std::size_t>(ch)] + eps);

    Tensor y(x.shape);
    ctx.xhat.resize(static_cast<std::size_t>(x.size()));
    double* Y = y.data.data();
    for (std::int64_t i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch) {
            const double xh =
                (X[i * c + ch] - mean[static_cast<std::size_t>(ch)]) * ctx.invstd[static_cast<std::size_t>(ch)];
            ctx.xhat[static_cast<std::size_t>(i * c + ch)] = xh;
            Y[i * c + ch] = gamma.data[static_cast<std::size_t>(ch)] * xh + beta.data[static_cast<std::size_t>(ch)];
        }

    for (int ch = 0; ch < c; ++ch) {
        auto u = static_cast<std::size_t>(ch);
        running_mean.data[u] = (1.0 - momentum) * running_mean.data[u] + momentum * mean[u];
        running_var.data[u] = (1.0 - momentum) * running_var.data[u] + momentum * var[u];
    }
    return y;
}

void batchnorm_train_backward(const Tensor& gamma, const BatchNormContext& ctx, const double* gout,
                              double* gx, double* ggamma, double* gbeta) {
    const int c = gamma.dim(0);
    const std::int64_t n = ctx.per_channel;
    std::vector<double> sum_g(static_cast<std::size_t>(c), 0.0);   // sum of dL/dxhat
    std::vector<double> sum_gx(static_cast<std::size_t>(c), 0.0);  // sum of dL/dxhat * xhat
    for (std::int64_t i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch) {
            const auto u = static_cast<std::size_t>(ch);
            const double go = gout[i * c + ch];
            const double gxh = go * gamma.data[u];
            sum_g[u] += gxh;
            sum_gx[u] += gxh * ctx.xhat[static_cast<std::size_t>(i * c + ch)];
            if (gbeta) gbeta[ch] += go;
            if (ggamma) ggamma[ch] += go * ctx.xhat[static_cast<std::size_t>(i * c + ch)];
        }
    if (!gx) return;
    const double invn = 1.0 / static_cast<double>(n);
    for (std::int64_t i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch) {
            const auto u = static_cast<std::size_t>(ch);
            const double gxh = gout[i * c + ch] * gamma.data[u];
            const double xh = ctx.xhat[static_cast<std::size_t>(i * c + ch)];
            gx[i * c + ch] += ctx.invstd[u] * (gxh - invn * (sum_g[u] + xh * sum_gx[u]));
        }
}

Tensor batchnorm_eval_forward(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                              const Tensor& running_mean, const Tensor& running_var, double eps) {
    bool batched;
    int b, h, w, c;
    image_dims(x.shape, "batchnorm", batched, b, h, w, c);
    check_bn_params(c, gamma, beta, running_mean, running_var);
    const std::int64_t n = static_cast<std::int64_t>(b) * h * w;
    std::vector<double> scale(static_cast<std::size_t>(c));
    std::vector<double> shift(static_cast<std::size_t>(c));
    for (int ch = 0; ch < c; ++ch) {
        const auto u = static_cast<std::size_t>(ch);
        scale[u] = gamma.data[u] / std::sqrt(running_var.data[u] + eps);
        shift[u] = beta.data[u] - scale[u] * running_mean.data[u];
    }
    Tensor y(x.shape);
    const double* X = x.data.data();
    double* Y = y.data.data();
    for (std::int64_t i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch) {
            const auto u = static_cast<std::size_t>(ch);
            Y[i * c + ch] = scale[u] * X[i * c + ch] + shift[u];
        }
    return y;
}

void batchnorm_eval_backward(const Tensor& x, const Tensor& gamma, const Tensor& running_mean,
                             const Tensor& running_var, double eps, const double* gout,
                             double* gx, double* ggamma, double* gbeta) {
    bool batched;
    int b, h, w, c;
    image_dims(x.shape, "batchnorm", batched, b, h, w, c);
    const std::int64_t n = static_cast<std::int64_t>(b) * h * w;
    const double* X = x.data.data();
    for (std::int64_t i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch) {
            const auto u = static_cast<std::size_t>(ch);
            const double invstd = 1.0 / std::sqrt(running_var.data[u] + eps);
            const double go = gout[i * c + ch];
            if (gx) gx[i * c + ch] += go * gamma.data[u] * invstd;
            if (ggamma) ggamma[ch] += go * (X[i * c + ch] - running_mean.data[u]) * invstd;
            if (gbeta) gbeta[ch] += go;
        }
}

Tensor dense_forward(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (w.rank() != 2) throw ShapeError("dense: weight must be rank 2, got " + shape_str(w.shape));
    const int m = w.dim(0), n = w.dim(1);
    if (b.shape != Shape{m})
        throw ShapeError("dense: bias must be [" + std::to_string(m) + "], got " + shape_str(b.shape));
    const bool batched = x.rank() == 2;
    if (!batched && x.rank() != 1)
        throw ShapeError("dense: input must be rank 1 or 2, got " + shape_str(x.shape));
    const int batch = batched ? x.dim(0) : 1;
    const int feat = batched ? x.dim(1) : x.dim(0);
    if (feat != n)
        throw ShapeError("dense: weight expects " + std::to_string(n) + " inputs, got " +
                         std::to_string(feat));
    Tensor y(batched ? Shape{batch, m} : Shape{m});
    for (int bi = 0; bi < batch; ++bi) {
        const double* xr = x.data.data() + static_cast<std::int64_t>(bi) * n;
        double* yr = y.data.data() + static_cast<std::int64_t>(bi) * m;
        for (int i = 0; i < m; ++i) {
            const double* wr = w.data.data() + static_cast<std::int64_t>(i) * n;
            double acc = b.data[static_cast<std::size_t>(i)];
            for (int j = 0; j < n; ++j) acc += wr[j] * xr[j];
            yr[i] = acc;
        }
    }
    return y;
}

void dense_backward(const Tensor& x, const Tensor& w, const double* gout,
                    double* gx, double* gw, double* gb) {
    const int m = w.dim(0), n = w.dim(1);
    const bool batched = x.rank() == 2;
    const int batch = batched ? x.dim(0) : 1;
    for (int bi = 0; bi < batch; ++bi) {
        const double* xr = x.data.data() + static_cast<std::int64_t>(bi) * n;
        const double* gr = gout + static_cast<std::int64_t>(bi) * m;
        double* gxr = gx ? gx + static_cast<std::int64_t>(bi) * n : nullptr;
        for (int i = 0; i < m; ++i) {
            const double gv = gr[i];
            const double* wr = w.data.data() + static_cast<std::int64_t>(i) * n;
            if (gb) gb[i] += gv;
            if (gxr)
                for (int j = 0; j < n; ++j) gxr[j] += gv * wr[j];
            if (gw) {
                double* gwr = gw + static_cast<std::int64_t>(i) * n;
                for (int j = 0; j < n; ++j) gwr[j] += gv * xr[j];
            }
        }
    }
}

} // namespace rsim::kernels
