#pragma once

#include "c3/kernel_regression.hpp"
#include "c3/rng.hpp"

#include <cmath>
#include <random>

namespace c3 {

inline constexpr double kEpsClamp = 1e-6;
inline constexpr double kEtaMin = 1e-8;

template <typename Scalar>
struct BetaParams {
    Scalar alpha = Scalar(1);
    Scalar beta = Scalar(1);
    /// Kernel mass behind the parameters; 0 for the uniform-prior fallback.
    Scalar eta = Scalar(0);

    Scalar mean() const { return alpha / (alpha + beta); }
    Scalar variance() const {
        const Scalar s = alpha + beta;
        return alpha * beta / (s * s * (s + Scalar(1)));
    }
};

using BetaParamsd = BetaParams<double>;

template <typename Scalar>
Scalar kernel_mass_from_kernel(const KernelVector<Scalar>& kvec) {
    return kvec.sum();
}

template <typename Derived>
typename Derived::Scalar kernel_mass(const Eigen::MatrixBase<Derived>& query,
                                     const ReferenceStore<typename Derived::Scalar>& store) {
    return kernel_vector(query, store).sum();
}

template <typename Derived>
typename Derived::Scalar kernel_mass(const Eigen::MatrixBase<Derived>& query,
                                     const ReferenceStore<typename Derived::Scalar>& store,
                                     std::span<const std::size_t> indices) {
    return kernel_vector(query, store, indices).sum();
}

/// Unclamped parameters alpha = eta * mean, beta = eta * (1 - mean), or
/// nullopt when there is no usable kernel mass.
template <typename Scalar>
std::optional<BetaParams<Scalar>> raw_beta_params(Scalar eta, std::optional<Scalar> mean) {
    if (!(eta >= Scalar(kEtaMin)) || !mean) return std::nullopt;
    return BetaParams<Scalar>{eta * *mean, eta * (Scalar(1) - *mean), eta};
}

/// Clamps both shape parameters to at least kEpsClamp; falls back to the
/// uniform prior Beta(1, 1) when the kernel mass is below kEtaMin.
template <typename Scalar>
BetaParams<Scalar> clamp_beta_params(const std::optional<BetaParams<Scalar>>& raw) {
    if (!raw) return BetaParams<Scalar>{};
    return {std::max(raw->alpha, Scalar(kEpsClamp)), std::max(raw->beta, Scalar(kEpsClamp)), raw->eta};
}

template <typename Scalar>
BetaParams<Scalar> beta_params_from_kernel(const KernelVector<Scalar>& kvec, const ReferenceStore<Scalar>& store,
                                           bool importance_weighted = true) {
    const Scalar eta = kvec.sum();
    const auto mean = importance_weighted ? iwkr_from_kernel(kvec, store) : nwkr_from_kernel(kvec, store);
    return clamp_beta_params(raw_beta_params(eta, mean));
}

template <typename Derived>
BetaParams<typename Derived::Scalar> beta_params(const Eigen::MatrixBase<Derived>& query,
                                                 const ReferenceStore<typename Derived::Scalar>& store) {
    return beta_params_from_kernel(kernel_vector(query, store), store);
}

template <typename Derived>
BetaParams<typename Derived::Scalar> beta_params(const Eigen::MatrixBase<Derived>& query,
                                                 const ReferenceStore<typename Derived::Scalar>& store,
                                                 std::span<const std::size_t> indices) {
    const auto kvec = kernel_vector(query, store, indices);
    return clamp_beta_params(raw_beta_params(kvec.sum(), iwkr_from_kernel(kvec, store, indices)));
}

/// log of a Gamma(shape, 1) variate. Marsaglia-Tsang for shape >= 1; for
/// shape < 1 the boost G(a) = G(a + 1) U^(1/a) is taken in log space so tiny
/// shapes do not underflow.
template <typename Scalar>
Scalar log_gamma_variate(Scalar shape, Rng& rng) {
    if (shape < Scalar(1)) {
        const Scalar u = uniform01<Scalar>(rng);
        const Scalar lg = log_gamma_variate(shape + Scalar(1), rng);
        return lg + std::log(u) / shape;
    }
    std::normal_distribution<Scalar> normal;
    const Scalar d = shape - Scalar(1) / Scalar(3);
    const Scalar c = Scalar(1) / std::sqrt(Scalar(9) * d);
    for (;;) {
        const Scalar x = normal(rng);
        Scalar v = Scalar(1) + c * x;
        if (v <= Scalar(0)) continue;
        v = v * v * v;
        const Scalar u = uniform01<Scalar>(rng);
        if (std::log(u) < Scalar(0.5) * x * x + d - d * v + d * std::log(v)) return std::log(d * v);
    }
}

/// One Thompson draw from Beta(alpha, beta) as X / (X + Y) of two Gamma
/// variates, evaluated as a logistic of the log-ratio.
template <typename Scalar>
Scalar thompson_draw(const BetaParams<Scalar>& params, Rng& rng) {
    const Scalar lx = log_gamma_variate(params.alpha, rng);
    const Scalar ly = log_gamma_variate(params.beta, rng);
    const Scalar diff = ly - lx;
    if (std::isnan(diff)) return params.mean();
    return Scalar(1) / (Scalar(1) + std::exp(diff));
}

}  // namespace c3
