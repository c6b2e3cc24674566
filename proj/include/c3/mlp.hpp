#pragma once

#include "c3/kernel.hpp"
#include "c3/rng.hpp"

#include <cmath>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace c3 {

template <typename Scalar>
struct DenseLayer {
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> weight;  // out x in
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> bias;                 // out
};

/// Parameters of the embedding network: affine layers with Softplus
/// between them and an identity output.
template <typename Scalar>
struct MlpParams {
    std::vector<DenseLayer<Scalar>> layers;

    Eigen::Index input_dim() const { return layers.empty() ? 0 : layers.front().weight.cols(); }
    Eigen::Index output_dim() const { return layers.empty() ? 0 : layers.back().weight.rows(); }

    std::vector<Eigen::Index> layer_sizes() const {
        std::vector<Eigen::Index> sizes;
        if (layers.empty()) return sizes;
        sizes.push_back(input_dim());
        for (const auto& l : layers) sizes.push_back(l.weight.rows());
        return sizes;
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers) n += std::size_t(l.weight.size() + l.bias.size());
        return n;
    }

    void validate() const {
        if (layers.empty()) throw std::invalid_argument("MlpParams: no layers");
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const auto& l = layers[i];
            if (l.bias.size() != l.weight.rows())
                throw std::invalid_argument("MlpParams: bias/weight row mismatch in layer " + std::to_string(i));
            if (i > 0 && l.weight.cols() != layers[i - 1].weight.rows())
                throw std::invalid_argument("MlpParams: layer " + std::to_string(i) + " does not chain");
            if (!l.weight.allFinite() || !l.bias.allFinite())
                throw std::invalid_argument("MlpParams: non-finite parameter in layer " + std::to_string(i));
        }
    }

    /// Same shapes, all zeros.
    MlpParams zeros_like() const {
        MlpParams z;
        for (const auto& l : layers)
            z.layers.push_back({decltype(l.weight)::Zero(l.weight.rows(), l.weight.cols()),
                                decltype(l.bias)::Zero(l.bias.size())});
        return z;
    }

    // Flat views, weights (column-major) then bias, layer by layer.
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> flatten() const {
        Eigen::Matrix<Scalar, Eigen::Dynamic, 1> flat(static_cast<Eigen::Index>(parameter_count()));
        Eigen::Index at = 0;
        for (const auto& l : layers) {
            flat.segment(at, l.weight.size()) = l.weight.reshaped();
            at += l.weight.size();
            flat.segment(at, l.bias.size()) = l.bias;
            at += l.bias.size();
        }
        return flat;
    }

    template <typename Derived>
    void unflatten(const Eigen::MatrixBase<Derived>& flat) {
        if (std::size_t(flat.size()) != parameter_count())
            throw std::invalid_argument("MlpParams::unflatten: size mismatch");
        Eigen::Index at = 0;
        for (auto& l : layers) {
            l.weight.reshaped() = flat.segment(at, l.weight.size());
            at += l.weight.size();
            l.bias = flat.segment(at, l.bias.size());
            at += l.bias.size();
        }
    }
};

using MlpParamsd = MlpParams<double>;

/// log(1 + exp(x)) without overflow.
template <typename Scalar>
Scalar softplus(Scalar x) {
    return x > Scalar(0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

template <typename Scalar>
Scalar sigmoid(Scalar x) {
    if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-x));
    const Scalar e = std::exp(x);
    return e / (Scalar(1) + e);
}

/// Kaiming-style N(0, 2 / fan_in) weights, zero biases.
template <typename Scalar = double>
MlpParams<Scalar> init_mlp(std::span<const Eigen::Index> sizes, Rng& rng) {
    if (sizes.size() < 2) throw std::invalid_argument("init_mlp: need at least input and output sizes");
    MlpParams<Scalar> p;
    for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
        if (sizes[i] <= 0 || sizes[i + 1] <= 0) throw std::invalid_argument("init_mlp: layer sizes must be positive");
        std::normal_distribution<Scalar> normal(Scalar(0), std::sqrt(Scalar(2) / Scalar(sizes[i])));
        DenseLayer<Scalar> l;
        l.weight.resize(sizes[i + 1], sizes[i]);
        for (Eigen::Index c = 0; c < l.weight.cols(); ++c)
            for (Eigen::Index r = 0; r < l.weight.rows(); ++r) l.weight(r, c) = normal(rng);
        l.bias = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(sizes[i + 1]);
        p.layers.push_back(std::move(l));
    }
    return p;
}

/// Embeds each column of `inputs` (in x N). Returns d x N.
template <typename Scalar, typename Derived>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> mlp_forward_batch(const MlpParams<Scalar>& params,
                                                                        const Eigen::MatrixBase<Derived>& inputs) {
    if (params.layers.empty()) throw std::invalid_argument("mlp_forward: empty network");
    check_same_dim(inputs.rows(), params.input_dim(), "mlp_forward");
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> a = inputs;
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
        const auto& l = params.layers[i];
        Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> z = (l.weight * a).colwise() + l.bias;
        if (i + 1 < params.layers.size()) z = z.unaryExpr([](Scalar x) { return softplus(x); });
        a = std::move(z);
    }
    return a;
}

template <typename Scalar, typename Derived>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> mlp_forward(const MlpParams<Scalar>& params,
                                                     const Eigen::MatrixBase<Derived>& input) {
    if (input.cols() != 1) throw std::invalid_argument("mlp_forward: expected a column vector");
    return mlp_forward_batch(params, input).col(0);
}

}  // namespace c3
