// Copyright (C) 2026 latsketch contributors
// SPDX-License-Identifier: Apache-2.0

#include "latsketch/nn/layers.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "latsketch/error.hpp"

namespace latsketch::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;
using Index = Eigen::Index;

Index idx(std::size_t v) { return static_cast<Index>(v); }

void require_rank(const Tensor& x, std::size_t rank, const std::string& who) {
    if (x.rank() != rank) {
        throw ShapeError(who + " expects rank " + std::to_string(rank) + ", got " + shape_str(x.shape()));
    }
}

double he_std(std::size_t fan_in) { return std::sqrt(2.0 / static_cast<double>(fan_in)); }

// Interpolation taps along one axis for half-pixel bilinear resampling.
struct AxisTaps {
    std::vector<std::size_t> i0, i1;
    std::vector<double> w1;
};

AxisTaps axis_taps(std::size_t in, std::size_t out) {
    AxisTaps taps;
    taps.i0.resize(out);
    taps.i1.resize(out);
    taps.w1.resize(out);
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t o = 0; o < out; ++o) {
        double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
        src = std::max(src, 0.0);
        auto lo = static_cast<std::size_t>(std::floor(src));
        if (lo >= in - 1) {
            taps.i0[o] = taps.i1[o] = in - 1;
            taps.w1[o] = 0.0;
        } else {
            taps.i0[o] = lo;
            taps.i1[o] = lo + 1;
            taps.w1[o] = src - static_cast<double>(lo);
        }
    }
    return taps;
}

}  // namespace

const char* to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::fully_connected: return "fully-connected";
        case LayerKind::conv2d: return "conv2d";
        case LayerKind::relu: return "relu";
        case LayerKind::batch_norm: return "batch-norm";
        case LayerKind::group_norm: return "group-norm";
        case LayerKind::bilinear_resize: return "bilinear-resize";
        case LayerKind::embedding: return "embedding-lookup";
        case LayerKind::time_embed: return "sinusoidal-time-embed";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------
// Layer

Tensor Layer::forward(const Tensor& x, Mode mode) {
    if (mode == Mode::eval) {
        cached_ = false;
        return infer(x);
    }
    Tensor y = forward_train(x);
    y.check_finite(name_ + " output");
    cached_ = true;
    return y;
}

Tensor Layer::infer(const Tensor& x) const {
    Tensor y = forward_eval(x);
    y.check_finite(name_ + " output");
    return y;
}

Tensor Layer::backward(const Tensor& grad_out) {
    if (!cached_) throw UsageError(name_ + ": backward without a preceding train-mode forward");
    cached_ = false;
    return backward_impl(grad_out);
}

std::vector<const Param*> Layer::params() const {
    auto ps = const_cast<Layer*>(this)->params();
    return {ps.begin(), ps.end()};
}

void zero_grads(const std::vector<Param*>& params) {
    for (Param* p : params) p->zero_grad();
}

// ---------------------------------------------------------------------------
// Linear

Linear::Linear(std::string name, std::size_t in, std::size_t out, Rng& rng, double init_std)
    : Layer(std::move(name)),
      weight(this->name() + ".weight", init_normal({out, in}, init_std > 0 ? init_std : he_std(in), rng)),
      bias(this->name() + ".bias", Tensor({out})) {}

Tensor Linear::forward_eval(const Tensor& x) const {
    require_rank(x, 2, name());
    if (x.dim(1) != in_features()) {
        throw ShapeError(name() + " expects " + std::to_string(in_features()) + " features, got " +
                         shape_str(x.shape()));
    }
    const std::size_t n = x.dim(0), out = out_features();
    Tensor y({n, out});
    MapMat ym(y.raw(), idx(n), idx(out));
    ym.noalias() = ConstMapMat(x.raw(), idx(n), idx(in_features())) *
                   ConstMapMat(weight.value.raw(), idx(out), idx(in_features())).transpose();
    ym.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bias.value.raw(), idx(out));
    return y;
}

Tensor Linear::forward_train(const Tensor& x) {
    Tensor y = forward_eval(x);
    input_ = x;
    return y;
}

Tensor Linear::backward_impl(const Tensor& grad_out) {
    const std::size_t n = input_.dim(0), in = in_features(), out = out_features();
    if (grad_out.shape() != Shape{n, out}) throw ShapeError(name() + " backward got " + shape_str(grad_out.shape()));
    ConstMapMat g(grad_out.raw(), idx(n), idx(out));
    ConstMapMat x(input_.raw(), idx(n), idx(in));
    MapMat(weight.grad.raw(), idx(out), idx(in)).noalias() += g.transpose() * x;
    Eigen::Map<Eigen::RowVectorXd>(bias.grad.raw(), idx(out)) += g.colwise().sum();
    Tensor dx({n, in});
    MapMat(dx.raw(), idx(n), idx(in)).noalias() = g * ConstMapMat(weight.value.raw(), idx(out), idx(in));
    return dx;
}

// ---------------------------------------------------------------------------
// Conv2d

Conv2d::Conv2d(std::string name, std::size_t in_ch, std::size_t out_ch, std::size_t stride, bool with_bias, Rng& rng,
               double init_std)
    : Layer(std::move(name)),
      weight(this->name() + ".weight",
             init_normal({out_ch, in_ch, 3, 3}, init_std > 0 ? init_std : he_std(in_ch * 9), rng)),
      bias(this->name() + ".bias", Tensor({out_ch})),
      stride_(stride),
      has_bias_(with_bias) {
    if (stride != 1 && stride != 2) throw UsageError(this->name() + ": stride must be 1 or 2");
}

std::vector<Param*> Conv2d::params() {
    if (has_bias_) return {&weight, &bias};
    return {&weight};
}

Tensor Conv2d::run(const Tensor& x, AlignedVector* keep_cols) const {
    require_rank(x, 4, name());
    const std::size_t n = x.dim(0), ci = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (ci != in_channels()) {
        throw ShapeError(name() + " expects " + std::to_string(in_channels()) + " channels, got " +
                         shape_str(x.shape()));
    }
    const std::size_t s = stride_;
    const std::size_t ho = (h - 1) / s + 1, wo = (w - 1) / s + 1, hwo = ho * wo;
    const std::size_t rows = ci * 9, ncols = n * hwo, co = out_channels();

    AlignedVector local;
    AlignedVector& cols = keep_cols ? *keep_cols : local;
    cols.assign(rows * ncols, 0.0);
    for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t c = 0; c < ci; ++c) {
            const double* src = x.raw() + (b * ci + c) * h * w;
            for (std::size_t ky = 0; ky < 3; ++ky) {
                for (std::size_t kx = 0; kx < 3; ++kx) {
                    double* dst = cols.data() + (c * 9 + ky * 3 + kx) * ncols + b * hwo;
                    for (std::size_t oy = 0; oy < ho; ++oy) {
                        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * s + ky) - 1;
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                        for (std::size_t ox = 0; ox < wo; ++ox) {
                            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * s + kx) - 1;
                            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                            dst[oy * wo + ox] = src[static_cast<std::size_t>(iy) * w + static_cast<std::size_t>(ix)];
                        }
                    }
                }
            }
        }
    }

    RowMat om = ConstMapMat(weight.value.raw(), idx(co), idx(rows)) * ConstMapMat(cols.data(), idx(rows), idx(ncols));
    Tensor y({n, co, ho, wo});
    for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t c = 0; c < co; ++c) {
            const double add = has_bias_ ? bias.value[c] : 0.0;
            const double* src = om.data() + c * ncols + b * hwo;
            double* dst = y.raw() + (b * co + c) * hwo;
            for (std::size_t p = 0; p < hwo; ++p) dst[p] = src[p] + add;
        }
    }
    return y;
}

Tensor Conv2d::forward_eval(const Tensor& x) const { return run(x, nullptr); }

Tensor Conv2d::forward_train(const Tensor& x) {
    in_shape_ = x.shape();
    return run(x, &cols_);
}

Tensor Conv2d::backward_impl(const Tensor& grad_out) {
    const std::size_t n = in_shape_[0], ci = in_shape_[1], h = in_shape_[2], w = in_shape_[3];
    const std::size_t s = stride_;
    const std::size_t ho = (h - 1) / s + 1, wo = (w - 1) / s + 1, hwo = ho * wo;
    const std::size_t rows = ci * 9, ncols = n * hwo, co = out_channels();
    if (grad_out.shape() != Shape{n, co, ho, wo}) {
        throw ShapeError(name() + " backward got " + shape_str(grad_out.shape()));
    }

    RowMat gm(idx(co), idx(ncols));
    for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t c = 0; c < co; ++c) {
            const double* src = grad_out.raw() + (b * co + c) * hwo;
            std::copy_n(src, hwo, gm.data() + c * ncols + b * hwo);
        }
    }
    ConstMapMat cols(cols_.data(), idx(rows), idx(ncols));
    MapMat(weight.grad.raw(), idx(co), idx(rows)).noalias() += gm * cols.transpose();
    if (has_bias_) {
        Eigen::Map<Eigen::VectorXd>(bias.grad.raw(), idx(co)) += gm.rowwise().sum();
    }
    RowMat dcols = ConstMapMat(weight.value.raw(), idx(co), idx(rows)).transpose() * gm;

    Tensor dx(in_shape_);
    for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t c = 0; c < ci; ++c) {
            double* dst = dx.raw() + (b * ci + c) * h * w;
            for (std::size_t ky = 0; ky < 3; ++ky) {
                for (std::size_t kx = 0; kx < 3; ++kx) {
                    const double* src = dcols.data() + (c * 9 + ky * 3 + kx) * ncols + b * hwo;
                    for (std::size_t oy = 0; oy < ho; ++oy) {
                        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * s + ky) - 1;
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                        for (std::size_t ox = 0; ox < wo; ++ox) {
                            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * s + kx) - 1;
                            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                            dst[static_cast<std::size_t>(iy) * w + static_cast<std::size_t>(ix)] += src[oy * wo + ox];
                        }
                    }
                }
            }
        }
    }
    cols_.clear();
    return dx;
}

// ---------------------------------------------------------------------------
// ReLU

Tensor ReLU::forward_eval(const Tensor& x) const {
    Tensor y = x;
    for (double& v : y.data()) v = v > 0.0 ? v : 0.0;
    return y;
}

Tensor ReLU::forward_train(const Tensor& x) {
    input_ = x;
    return forward_eval(x);
}

Tensor ReLU::backward_impl(const Tensor& grad_out) {
    require_same_shape(grad_out, input_, name() + " backward");
    Tensor dx = grad_out;
    for (std::size_t i = 0; i < dx.size(); ++i) {
        if (!(input_[i] > 0.0)) dx[i] = 0.0;
    }
    return dx;
}

// ---------------------------------------------------------------------------
// BatchNorm

BatchNorm::BatchNorm(std::string name, std::size_t channels)
    : Layer(std::move(name)),
      gamma(this->name() + ".gamma", Tensor({channels}, 1.0)),
      beta(this->name() + ".beta", Tensor({channels})),
      running_mean({channels}),
      running_var({channels}, 1.0) {}

std::vector<Buffer> BatchNorm::buffers() {
    return {{name() + ".running_mean", &running_mean}, {name() + ".running_var", &running_var}};
}

Tensor BatchNorm::forward_eval(const Tensor& x) const {
    require_rank(x, 2, name());
    const std::size_t n = x.dim(0), c = x.dim(1);
    if (c != gamma.value.size()) throw ShapeError(name() + " channel mismatch " + shape_str(x.shape()));
    Tensor y({n, c});
    for (std::size_t j = 0; j < c; ++j) {
        const double inv = 1.0 / std::sqrt(running_var[j] + kEps);
        for (std::size_t i = 0; i < n; ++i) {
            y[i * c + j] = (x[i * c + j] - running_mean[j]) * inv * gamma.value[j] + beta.value[j];
        }
    }
    return y;
}

Tensor BatchNorm::forward_train(const Tensor& x) {
    require_rank(x, 2, name());
    const std::size_t n = x.dim(0), c = x.dim(1);
    if (c != gamma.value.size()) throw ShapeError(name() + " channel mismatch " + shape_str(x.shape()));
    if (n < 2) throw ShapeError(name() + " needs at least 2 rows in train mode");
    std::vector<double> mean(c, 0.0), var(c, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < c; ++j) mean[j] += x[i * c + j];
    for (double& m : mean) m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            const double d = x[i * c + j] - mean[j];
            var[j] += d * d;
        }
    }
    for (double& v : var) v /= static_cast<double>(n);

    inv_std_.resize(c);
    xhat_ = Tensor({n, c});
    Tensor y({n, c});
    const double unbias = static_cast<double>(n) / static_cast<double>(n - 1);
    for (std::size_t j = 0; j < c; ++j) {
        inv_std_[j] = 1.0 / std::sqrt(var[j] + kEps);
        running_mean[j] = kMomentum * running_mean[j] + (1.0 - kMomentum) * mean[j];
        running_var[j] = kMomentum * running_var[j] + (1.0 - kMomentum) * var[j] * unbias;
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            const double xh = (x[i * c + j] - mean[j]) * inv_std_[j];
            xhat_[i * c + j] = xh;
            y[i * c + j] = xh * gamma.value[j] + beta.value[j];
        }
    }
    return y;
}

Tensor BatchNorm::backward_impl(const Tensor& grad_out) {
    require_same_shape(grad_out, xhat_, name() + " backward");
    const std::size_t n = xhat_.dim(0), c = xhat_.dim(1);
    std::vector<double> sum_g(c, 0.0), sum_gx(c, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            sum_g[j] += grad_out[i * c + j];
            sum_gx[j] += grad_out[i * c + j] * xhat_[i * c + j];
        }
    }
    Tensor dx({n, c});
    const double nn = static_cast<double>(n);
    for (std::size_t j = 0; j < c; ++j) {
        gamma.grad[j] += sum_gx[j];
        beta.grad[j] += sum_g[j];
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            dx[i * c + j] = gamma.value[j] * inv_std_[j] / nn *
                            (nn * grad_out[i * c + j] - sum_g[j] - xhat_[i * c + j] * sum_gx[j]);
        }
    }
    return dx;
}

// ---------------------------------------------------------------------------
// GroupNorm

GroupNorm::GroupNorm(std::string name, std::size_t channels, std::size_t groups)
    : Layer(std::move(name)),
      gamma(this->name() + ".gamma", Tensor({channels}, 1.0)),
      beta(this->name() + ".beta", Tensor({channels})),
      groups_(groups) {
    if (groups == 0 || channels % groups != 0) {
        throw UsageError(this->name() + ": channels must be divisible by groups");
    }
}

Tensor GroupNorm::run(const Tensor& x, Tensor* xhat, std::vector<double>* inv_std) const {
    require_rank(x, 4, name());
    const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
    if (c != gamma.value.size()) throw ShapeError(name() + " channel mismatch " + shape_str(x.shape()));
    const std::size_t cpg = c / groups_, m = cpg * hw;
    Tensor y(x.shape());
    if (xhat) *xhat = Tensor(x.shape());
    if (inv_std) inv_std->assign(n * groups_, 0.0);
    for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t g = 0; g < groups_; ++g) {
            const std::size_t base = (b * c + g * cpg) * hw;
            double mean = 0.0;
            for (std::size_t i = 0; i < m; ++i) mean += x[base + i];
            mean /= static_cast<double>(m);
            double var = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                const double d = x[base + i] - mean;
                var += d * d;
            }
            var /= static_cast<double>(m);
            const double inv = 1.0 / std::sqrt(var + kEps);
            if (inv_std) (*inv_std)[b * groups_ + g] = inv;
            for (std::size_t i = 0; i < m; ++i) {
                const std::size_t ch = g * cpg + i / hw;
                const double xh = (x[base + i] - mean) * inv;
                if (xhat) (*xhat)[base + i] = xh;
                y[base + i] = xh * gamma.value[ch] + beta.value[ch];
            }
        }
    }
    return y;
}

Tensor GroupNorm::forward_eval(const Tensor& x) const { return run(x, nullptr, nullptr); }

Tensor GroupNorm::forward_train(const Tensor& x) { return run(x, &xhat_, &inv_std_); }

Tensor GroupNorm::backward_impl(const Tensor& grad_out) {
    require_same_shape(grad_out, xhat_, name() + " backward");
    const std::size_t n = xhat_.dim(0), c = xhat_.dim(1), hw = xhat_.dim(2) * xhat_.dim(3);
    const std::size_t cpg = c / groups_, m = cpg * hw;
    const double mm = static_cast<double>(m);
    Tensor dx(xhat_.shape());
    for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t g = 0; g < groups_; ++g) {
            const std::size_t base = (b * c + g * cpg) * hw;
            double sum_gh = 0.0, sum_ghx = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                const std::size_t ch = g * cpg + i / hw;
                const double go = grad_out[base + i];
                gamma.grad[ch] += go * xhat_[base + i];
                beta.grad[ch] += go;
                const double gh = go * gamma.value[ch];
                sum_gh += gh;
                sum_ghx += gh * xhat_[base + i];
            }
            const double inv = inv_std_[b * groups_ + g];
            for (std::size_t i = 0; i < m; ++i) {
                const std::size_t ch = g * cpg + i / hw;
                const double gh = grad_out[base + i] * gamma.value[ch];
                dx[base + i] = inv / mm * (mm * gh - sum_gh - xhat_[base + i] * sum_ghx);
            }
        }
    }
    return dx;
}

// ---------------------------------------------------------------------------
// BilinearResize

BilinearResize::BilinearResize(std::string name, std::size_t out_h, std::size_t out_w)
    : Layer(std::move(name)), out_h_(out_h), out_w_(out_w) {
    if (out_h == 0 || out_w == 0) throw UsageError(this->name() + ": empty output size");
}

Tensor BilinearResize::forward_eval(const Tensor& x) const {
    require_rank(x, 4, name());
    const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (h == out_h_ && w == out_w_) return x;
    const AxisTaps ty = axis_taps(h, out_h_), tx = axis_taps(w, out_w_);
    Tensor y({n, c, out_h_, out_w_});
    for (std::size_t p = 0; p < n * c; ++p) {
        const double* src = x.raw() + p * h * w;
        double* dst = y.raw() + p * out_h_ * out_w_;
        for (std::size_t oy = 0; oy < out_h_; ++oy) {
            const double wy1 = ty.w1[oy], wy0 = 1.0 - wy1;
            const double* r0 = src + ty.i0[oy] * w;
            const double* r1 = src + ty.i1[oy] * w;
            for (std::size_t ox = 0; ox < out_w_; ++ox) {
                const double wx1 = tx.w1[ox], wx0 = 1.0 - wx1;
                dst[oy * out_w_ + ox] = wy0 * (wx0 * r0[tx.i0[ox]] + wx1 * r0[tx.i1[ox]]) +
                                        wy1 * (wx0 * r1[tx.i0[ox]] + wx1 * r1[tx.i1[ox]]);
            }
        }
    }
    return y;
}

Tensor BilinearResize::forward_train(const Tensor& x) {
    in_shape_ = x.shape();
    return forward_eval(x);
}

Tensor BilinearResize::backward_impl(const Tensor& grad_out) {
    const std::size_t n = in_shape_[0], c = in_shape_[1], h = in_shape_[2], w = in_shape_[3];
    if (grad_out.shape() != Shape{n, c, out_h_, out_w_}) {
        throw ShapeError(name() + " backward got " + shape_str(grad_out.shape()));
    }
    if (h == out_h_ && w == out_w_) return grad_out;
    const AxisTaps ty = axis_taps(h, out_h_), tx = axis_taps(w, out_w_);
    Tensor dx(in_shape_);
    for (std::size_t p = 0; p < n * c; ++p) {
        const double* g = grad_out.raw() + p * out_h_ * out_w_;
        double* dst = dx.raw() + p * h * w;
        for (std::size_t oy = 0; oy < out_h_; ++oy) {
            const double wy1 = ty.w1[oy], wy0 = 1.0 - wy1;
            double* r0 = dst + ty.i0[oy] * w;
            double* r1 = dst + ty.i1[oy] * w;
            for (std::size_t ox = 0; ox < out_w_; ++ox) {
                const double wx1 = tx.w1[ox], wx0 = 1.0 - wx1;
                const double go = g[oy * out_w_ + ox];
                r0[tx.i0[ox]] += wy0 * wx0 * go;
                r0[tx.i1[ox]] += wy0 * wx1 * go;
                r1[tx.i0[ox]] += wy1 * wx0 * go;
                r1[tx.i1[ox]] += wy1 * wx1 * go;
            }
        }
    }
    return dx;
}

// ---------------------------------------------------------------------------
// Embedding

Embedding::Embedding(std::string name, std::size_t rows, std::size_t dim, Rng& rng, double init_std)
    : Layer(std::move(name)), table(this->name() + ".table", init_normal({rows, dim}, init_std, rng)) {}

Tensor Embedding::forward_eval(const Tensor& x) const {
    require_rank(x, 1, name());
    const std::size_t n = x.dim(0), d = dim();
    Tensor y({n, d});
    for (std::size_t i = 0; i < n; ++i) {
        const double v = x[i];
        if (v < 0 || v != std::floor(v) || v >= static_cast<double>(rows())) {
            throw UsageError(name() + ": id " + std::to_string(v) + " out of range [0, " + std::to_string(rows()) +
                             ")");
        }
        std::copy_n(table.value.raw() + static_cast<std::size_t>(v) * d, d, y.raw() + i * d);
    }
    return y;
}

Tensor Embedding::forward_train(const Tensor& x) {
    Tensor y = forward_eval(x);
    ids_.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) ids_[i] = static_cast<std::size_t>(x[i]);
    ids_len_ = x.size();
    return y;
}

Tensor Embedding::backward_impl(const Tensor& grad_out) {
    const std::size_t d = dim();
    if (grad_out.shape() != Shape{ids_len_, d}) throw ShapeError(name() + " backward got " + shape_str(grad_out.shape()));
    for (std::size_t i = 0; i < ids_len_; ++i) {
        double* row = table.grad.raw() + ids_[i] * d;
        for (std::size_t k = 0; k < d; ++k) row[k] += grad_out[i * d + k];
    }
    return Tensor({ids_len_});
}

// ---------------------------------------------------------------------------
// TimeEmbed

TimeEmbed::TimeEmbed(std::string name, std::size_t dim) : Layer(std::move(name)), dim_(dim) {
    if (dim < 2 || dim % 2) throw UsageError(this->name() + ": dim must be even");
}

Tensor TimeEmbed::forward_eval(const Tensor& x) const {
    require_rank(x, 1, name());
    const std::size_t n = x.dim(0), half = dim_ / 2;
    Tensor y({n, dim_});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < half; ++k) {
            const double freq = std::exp(-std::log(10000.0) * static_cast<double>(k) / static_cast<double>(half));
            y[i * dim_ + k] = std::sin(x[i] * freq);
            y[i * dim_ + half + k] = std::cos(x[i] * freq);
        }
    }
    return y;
}

Tensor TimeEmbed::forward_train(const Tensor& x) {
    n_ = x.size();
    return forward_eval(x);
}

Tensor TimeEmbed::backward_impl(const Tensor& grad_out) {
    if (grad_out.shape() != Shape{n_, dim_}) throw ShapeError(name() + " backward got " + shape_str(grad_out.shape()));
    // Timesteps are integers; there is no gradient to pass back.
    return Tensor({n_});
}

}  // namespace latsketch::nn
