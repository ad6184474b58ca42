// Copyright (C) 2026 latsketch contributors
// SPDX-License-Identifier: Apache-2.0

#include "latsketch/nn/tensor.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numeric>

#include "latsketch/error.hpp"

namespace latsketch::nn {

std::size_t shape_numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(data.begin(), data.end()) {
    if (shape_numel(shape_) != data_.size()) {
        throw ShapeError("tensor of shape " + shape_str(shape_) + " given " + std::to_string(data_.size()) +
                         " elements");
    }
}

double& Tensor::at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    assert(shape_.size() == 4);
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
}

double Tensor::at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    assert(shape_.size() == 4);
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
}

Tensor Tensor::reshaped(Shape shape) const {
    if (shape_numel(shape) != data_.size()) {
        throw ShapeError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
    }
    Tensor out = *this;
    out.shape_ = std::move(shape);
    return out;
}

Tensor Tensor::slice(std::size_t begin, std::size_t count) const {
    if (shape_.empty() || begin + count > shape_[0]) {
        throw ShapeError("slice out of range for " + shape_str(shape_));
    }
    const std::size_t stride = data_.size() / shape_[0];
    Shape s = shape_;
    s[0] = count;
    Tensor out(std::move(s));
    std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(begin * stride), count * stride, out.data_.begin());
    return out;
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void Tensor::check_finite(std::string_view what) const {
    for (double v : data_) {
        if (!std::isfinite(v)) {
            throw NumericError("non-finite value in " + std::string(what));
        }
    }
}

Tensor& Tensor::operator+=(const Tensor& other) {
    require_same_shape(*this, other, "tensor +=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

Tensor& Tensor::operator-=(const Tensor& other) {
    require_same_shape(*this, other, "tensor -=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
    return *this;
}

Tensor& Tensor::operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
}

double Tensor::sum() const { return std::accumulate(data_.begin(), data_.end(), 0.0); }

double Tensor::sum_squares() const {
    double s = 0.0;
    for (double v : data_) s += v * v;
    return s;
}

double Tensor::max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
}

Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
Tensor operator-(Tensor a, const Tensor& b) { return a -= b; }
Tensor operator*(Tensor a, double s) { return a *= s; }

Tensor stack(std::span<const Tensor> items) {
    if (items.empty()) throw ShapeError("stack of zero tensors");
    Shape shape = items.front().shape();
    shape.insert(shape.begin(), items.size());
    Tensor out(std::move(shape));
    double* dst = out.raw();
    for (const Tensor& t : items) {
        require_same_shape(t, items.front(), "stack");
        dst = std::copy(t.storage().begin(), t.storage().end(), dst);
    }
    return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    if (a.rank() != 4 || b.rank() != 4 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3)) {
        throw ShapeError("concat_channels " + shape_str(a.shape()) + " with " + shape_str(b.shape()));
    }
    const std::size_t n = a.dim(0), ca = a.dim(1), cb = b.dim(1), hw = a.dim(2) * a.dim(3);
    Tensor out({n, ca + cb, a.dim(2), a.dim(3)});
    for (std::size_t i = 0; i < n; ++i) {
        std::copy_n(a.raw() + i * ca * hw, ca * hw, out.raw() + i * (ca + cb) * hw);
        std::copy_n(b.raw() + i * cb * hw, cb * hw, out.raw() + i * (ca + cb) * hw + ca * hw);
    }
    return out;
}

void split_channels(const Tensor& ab, std::size_t channels_a, Tensor& a, Tensor& b) {
    if (ab.rank() != 4 || channels_a > ab.dim(1)) throw ShapeError("split_channels " + shape_str(ab.shape()));
    const std::size_t n = ab.dim(0), c = ab.dim(1), cb = c - channels_a, hw = ab.dim(2) * ab.dim(3);
    a = Tensor({n, channels_a, ab.dim(2), ab.dim(3)});
    b = Tensor({n, cb, ab.dim(2), ab.dim(3)});
    for (std::size_t i = 0; i < n; ++i) {
        std::copy_n(ab.raw() + i * c * hw, channels_a * hw, a.raw() + i * channels_a * hw);
        std::copy_n(ab.raw() + i * c * hw + channels_a * hw, cb * hw, b.raw() + i * cb * hw);
    }
}

double mean_squared_error(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mean_squared_error");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return a.empty() ? 0.0 : s / static_cast<double>(a.size());
}

void require_same_shape(const Tensor& a, const Tensor& b, std::string_view what) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(what) + ": " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
}

}  // namespace latsketch::nn
