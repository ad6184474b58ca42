// Copyright (C) 2026 latsketch contributors
// SPDX-License-Identifier: Apache-2.0

#include "latsketch/nn/sequential.hpp"

namespace latsketch::nn {

Tensor Sequential::forward(const Tensor& x, Mode mode) {
    Tensor h = x;
    for (auto& layer : layers_) h = layer->forward(h, mode);
    return h;
}

Tensor Sequential::infer(const Tensor& x) const {
    Tensor h = x;
    for (const auto& layer : layers_) h = layer->infer(h);
    return h;
}

Tensor Sequential::backward(const Tensor& grad_out) {
    Tensor g = grad_out;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
    return g;
}

std::vector<Param*> Sequential::params() {
    std::vector<Param*> out;
    for (auto& layer : layers_) {
        auto ps = layer->params();
        out.insert(out.end(), ps.begin(), ps.end());
    }
    return out;
}

std::vector<const Param*> Sequential::params() const {
    auto ps = const_cast<Sequential*>(this)->params();
    return {ps.begin(), ps.end()};
}

std::vector<Buffer> Sequential::buffers() {
    std::vector<Buffer> out;
    for (auto& layer : layers_) {
        auto bs = layer->buffers();
        out.insert(out.end(), bs.begin(), bs.end());
    }
    return out;
}

}  // namespace latsketch::nn
