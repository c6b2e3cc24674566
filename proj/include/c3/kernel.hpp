#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

namespace c3 {

/// Gaussian RBF bandwidth and optional compact-support cutoff.
///
/// The kernel is exp(-||s - s'||^2 / (2 sigma^2)), squared norm throughout.
template <typename Scalar>
struct KernelConfig {
    Scalar sigma = Scalar(1);
    std::optional<Scalar> truncation_radius;

    void validate() const {
        if (!(sigma > Scalar(0)) || !std::isfinite(double(sigma)))
            throw std::invalid_argument("kernel bandwidth sigma must be positive and finite");
        if (truncation_radius && !(*truncation_radius > Scalar(0)))
            throw std::invalid_argument("kernel truncation radius must be positive");
    }

    Scalar inv_two_sigma_sq() const { return Scalar(1) / (Scalar(2) * sigma * sigma); }
};

using KernelConfigd = KernelConfig<double>;

inline void check_same_dim(Eigen::Index a, Eigen::Index b, const char* what) {
    if (a != b)
        throw std::invalid_argument(std::string(what) + ": dimension mismatch (" + std::to_string(a) +
                                    " vs " + std::to_string(b) + ")");
}

/// Kernel value from a squared distance.
template <typename Scalar>
Scalar rbf_from_sq_dist(Scalar sq_dist, const KernelConfig<Scalar>& config) {
    if (config.truncation_radius && sq_dist > *config.truncation_radius * *config.truncation_radius)
        return Scalar(0);
    return std::exp(-sq_dist * config.inv_two_sigma_sq());
}

template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar rbf(const Eigen::MatrixBase<DerivedA>& s, const Eigen::MatrixBase<DerivedB>& s_prime,
                              const KernelConfig<typename DerivedA::Scalar>& config) {
    check_same_dim(s.size(), s_prime.size(), "rbf");
    return rbf_from_sq_dist((s - s_prime).squaredNorm(), config);
}

/// Applies the kernel element-wise to an array of squared distances, in place.
template <typename Derived>
void rbf_in_place(Eigen::ArrayBase<Derived>& sq_dists,
                  const KernelConfig<typename Derived::Scalar>& config) {
    using Scalar = typename Derived::Scalar;
    if (config.truncation_radius) {
        const Scalar cutoff = *config.truncation_radius * *config.truncation_radius;
        sq_dists = (sq_dists > cutoff).select(Scalar(0), (-sq_dists * config.inv_two_sigma_sq()).exp());
    } else {
        sq_dists = (-sq_dists * config.inv_two_sigma_sq()).exp();
    }
}

}  // namespace c3
