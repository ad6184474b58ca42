// Copyright (C) 2026 latsketch contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "latsketch/nn/rng.hpp"
#include "latsketch/nn/tensor.hpp"

namespace latsketch::nn {

enum class Mode { train, eval };

enum class LayerKind {
    fully_connected,
    conv2d,
    relu,
    batch_norm,
    group_norm,
    bilinear_resize,
    embedding,
    time_embed,
};

const char* to_string(LayerKind kind);

struct Param {
    std::string name;
    Tensor value;
    Tensor grad;

    Param() = default;
    Param(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(Tensor::zeros_like(value)) {}
    void zero_grad() { grad.fill(0.0); }
};

/// Non-trainable state that still belongs in a checkpoint (batch-norm statistics).
struct Buffer {
    std::string name;
    Tensor* value;
};

/// A differentiable layer with a hand-written backward pass.
///
/// `forward(x, Mode::train)` caches what `backward` needs; exactly one
/// `backward` call may follow it. `infer` is the eval path: const, cache-free,
/// and safe to call concurrently on a shared layer.
class Layer {
public:
    explicit Layer(std::string name) : name_(std::move(name)) {}
    virtual ~Layer() = default;
    Layer(const Layer&) = delete;
    Layer& operator=(const Layer&) = delete;

    virtual LayerKind kind() const = 0;
    const std::string& name() const noexcept { return name_; }

    Tensor forward(const Tensor& x, Mode mode);
    Tensor infer(const Tensor& x) const;
    /// Returns grad wrt the input and accumulates (adds) parameter grads.
    Tensor backward(const Tensor& grad_out);

    virtual std::vector<Param*> params() { return {}; }
    virtual std::vector<Buffer> buffers() { return {}; }
    std::vector<const Param*> params() const;

protected:
    virtual Tensor forward_train(const Tensor& x) = 0;
    virtual Tensor forward_eval(const Tensor& x) const = 0;
    virtual Tensor backward_impl(const Tensor& grad_out) = 0;

private:
    std::string name_;
    bool cached_ = false;
};

/// y = x W^T + b over rows of a [N, in] input. W is [out, in].
class Linear final : public Layer {
public:
    Linear(std::string name, std::size_t in, std::size_t out, Rng& rng, double init_std = 0.0);
    LayerKind kind() const override { return LayerKind::fully_connected; }
    std::vector<Param*> params() override { return {&weight, &bias}; }

    std::size_t in_features() const { return weight.value.dim(1); }
    std::size_t out_features() const { return weight.value.dim(0); }

    Param weight;
    Param bias;

protected:
    Tensor forward_train(const Tensor& x) override;
    Tensor forward_eval(const Tensor& x) const override;
    Tensor backward_impl(const Tensor& grad_out) override;

private:
    Tensor input_;
};

/// 3x3 convolution, zero padding 1, stride 1 or 2, over NCHW input.
class Conv2d final : public Layer {
public:
    Conv2d(std::string name, std::size_t in_ch, std::size_t out_ch, std::size_t stride, bool with_bias, Rng& rng,
           double init_std = 0.0);
    LayerKind kind() const override { return LayerKind::conv2d; }
    std::vector<Param*> params() override;

    std::size_t in_channels() const { return weight.value.dim(1); }
    std::size_t out_channels() const { return weight.value.dim(0); }
    std::size_t stride() const { return stride_; }
    bool has_bias() const { return has_bias_; }

    Param weight;  // [out, in, 3, 3]
    Param bias;    // [out]; unused when has_bias() is false

protected:
    Tensor forward_train(const Tensor& x) override;
    Tensor forward_eval(const Tensor& x) const override;
    Tensor backward_impl(const Tensor& grad_out) override;

private:
    Tensor run(const Tensor& x, AlignedVector* keep_cols) const;

    std::size_t stride_;
    bool has_bias_;
    Shape in_shape_;
    AlignedVector cols_;
};

/// max(x, 0); the subgradient at 0 is 0.
class ReLU final : public Layer {
public:
    explicit ReLU(std::string name = "relu") : Layer(std::move(name)) {}
    LayerKind kind() const override { return LayerKind::relu; }

protected:
    Tensor forward_train(const Tensor& x) override;
    Tensor forward_eval(const Tensor& x) const override;
    Tensor backward_impl(const Tensor& grad_out) override;

private:
    Tensor input_;
};

/// Batch normalization over the rows of a [N, C] input.
///
/// Train mode normalizes with batch statistics and folds them into the
/// running estimates with momentum 0.9; eval mode uses the running estimates.
class BatchNorm final : public Layer {
public:
    static constexpr double kMomentum = 0.9;
    static constexpr double kEps = 1e-5;

    BatchNorm(std::string name, std::size_t channels);
    LayerKind kind() const override { return LayerKind::batch_norm; }
    std::vector<Param*> params() override { return {&gamma, &beta}; }
    std::vector<Buffer> buffers() override;

    Param gamma;
    Param beta;
    Tensor running_mean;
    Tensor running_var;

protected:
    Tensor forward_train(const Tensor& x) override;
    Tensor forward_eval(const Tensor& x) const override;
    Tensor backward_impl(const Tensor& grad_out) override;

private:
    Tensor xhat_;
    std::vector<double> inv_std_;
};

/// Group normalization over NCHW input with a per-channel affine.
class GroupNorm final : public Layer {
public:
    static constexpr double kEps = 1e-5;

    GroupNorm(std::string name, std::size_t channels, std::size_t groups);
    LayerKind kind() const override { return LayerKind::group_norm; }
    std::vector<Param*> params() override { return {&gamma, &beta}; }
    std::size_t groups() const { return groups_; }

    Param gamma;
    Param beta;

protected:
    Tensor forward_train(const Tensor& x) override;
    Tensor forward_eval(const Tensor& x) const override;
    Tensor backward_impl(const Tensor& grad_out) override;

private:
    Tensor run(const Tensor& x, Tensor* xhat, std::vector<double>* inv_std) const;

    std::size_t groups_;
    Tensor xhat_;
    std::vector<double> inv_std_;
};

/// Bilinear resampling of NCHW input to a fixed output size (half-pixel
/// centers, edge clamping). Rows of the interpolation matrix sum to one, so
/// constant inputs stay constant.
class BilinearResize final : public Layer {
public:
    BilinearResize(std::string name, std::size_t out_h, std::size_t out_w);
    LayerKind kind() const override { return LayerKind::bilinear_resize; }

protected:
    Tensor forward_train(const Tensor& x) override;
    Tensor forward_eval(const Tensor& x) const override;
    Tensor backward_impl(const Tensor& grad_out) override;

private:
    std::size_t out_h_, out_w_;
    Shape in_shape_;
};

/// Table lookup. Input is a [N] tensor of integral row ids; output [N, dim].
class Embedding final : public Layer {
public:
    Embedding(std::string name, std::size_t rows, std::size_t dim, Rng& rng, double init_std = 0.02);
    LayerKind kind() const override { return LayerKind::embedding; }
    std::vector<Param*> params() override { return {&table}; }
    std::size_t rows() const { return table.value.dim(0); }
    std::size_t dim() const { return table.value.dim(1); }

    Param table;

protected:
    Tensor forward_train(const Tensor& x) override;
    Tensor forward_eval(const Tensor& x) const override;
    Tensor backward_impl(const Tensor& grad_out) override;

private:
    std::vector<std::size_t> ids_;
    std::size_t ids_len_ = 0;
};

/// Fixed sinusoidal embedding of integer timesteps: [N] -> [N, dim], with
/// sin features in the first half and cos features in the second.
class TimeEmbed final : public Layer {
public:
    TimeEmbed(std::string name, std::size_t dim);
    LayerKind kind() const override { return LayerKind::time_embed; }
    std::size_t dim() const { return dim_; }

protected:
    Tensor forward_train(const Tensor& x) override;
    Tensor forward_eval(const Tensor& x) const override;
    Tensor backward_impl(const Tensor& grad_out) override;

private:
    std::size_t dim_;
    std::size_t n_ = 0;
};

void zero_grads(const std::vector<Param*>& params);

}  // namespace latsketch::nn
