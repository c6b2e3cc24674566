#pragma once

#include "c3/reference_store.hpp"

#include <optional>
#include <span>

namespace c3 {

template <typename Scalar>
using KernelVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// k_i = rbf(query, s_i) for every stored sample.
template <typename Derived>
KernelVector<typename Derived::Scalar> kernel_vector(const Eigen::MatrixBase<Derived>& query,
                                                     const ReferenceStore<typename Derived::Scalar>& store) {
    using Scalar = typename Derived::Scalar;
    check_same_dim(query.size(), store.dim(), "kernel_vector");
    if (store.empty()) return KernelVector<Scalar>(0);
    Eigen::Array<Scalar, Eigen::Dynamic, 1> k =
        (store.embeddings().colwise() - query.derived()).colwise().squaredNorm().transpose().array();
    rbf_in_place(k, store.kernel_config());
    return k.matrix();
}

/// Kernel values against the subset `indices`, in that order.
template <typename Derived>
KernelVector<typename Derived::Scalar> kernel_vector(const Eigen::MatrixBase<Derived>& query,
                                                     const ReferenceStore<typename Derived::Scalar>& store,
                                                     std::span<const std::size_t> indices) {
    using Scalar = typename Derived::Scalar;
    check_same_dim(query.size(), store.dim(), "kernel_vector");
    const auto E = store.embeddings();
    Eigen::Array<Scalar, Eigen::Dynamic, 1> k(Eigen::Index(indices.size()));
    for (std::size_t t = 0; t < indices.size(); ++t) {
        if (indices[t] >= store.size()) throw std::out_of_range("kernel_vector: mask index out of range");
        k(Eigen::Index(t)) = (E.col(Eigen::Index(indices[t])) - query).squaredNorm();
    }
    rbf_in_place(k, store.kernel_config());
    return k.matrix();
}

namespace detail {

template <typename Scalar, typename WeightFn>
std::optional<Scalar> weighted_mean(const KernelVector<Scalar>& kvec, const ReferenceStore<Scalar>& store,
                                    std::span<const std::size_t> indices, bool masked, WeightFn weight) {
    const auto rewards = store.rewards();
    Scalar num(0), den(0);
    const std::size_t count = masked ? indices.size() : store.size();
    if (std::size_t(kvec.size()) != count) throw std::invalid_argument("kernel vector length mismatch");
    for (std::size_t t = 0; t < count; ++t) {
        const std::size_t i = masked ? indices[t] : t;
        const Scalar a = kvec(Eigen::Index(t)) * weight(i);
        num += a * Scalar(rewards[i]);
        den += a;
    }
    if (!(den > Scalar(0))) return std::nullopt;
    return std::clamp(num / den, Scalar(0), Scalar(1));
}

}  // namespace detail

// The *_from_kernel variants take a kernel vector aligned with the store
// (or with `indices` when masked) so callers can reuse it.

template <typename Scalar>
std::optional<Scalar> nwkr_from_kernel(const KernelVector<Scalar>& kvec, const ReferenceStore<Scalar>& store) {
    return detail::weighted_mean(kvec, store, {}, false, [](std::size_t) { return Scalar(1); });
}

template <typename Scalar>
std::optional<Scalar> nwkr_from_kernel(const KernelVector<Scalar>& kvec, const ReferenceStore<Scalar>& store,
                                       std::span<const std::size_t> indices) {
    return detail::weighted_mean(kvec, store, indices, true, [](std::size_t) { return Scalar(1); });
}

template <typename Scalar>
std::optional<Scalar> iwkr_from_kernel(const KernelVector<Scalar>& kvec, const ReferenceStore<Scalar>& store) {
    const auto g = store.accumulators();
    return detail::weighted_mean(kvec, store, {}, false, [&](std::size_t i) { return Scalar(1) / g[i]; });
}

template <typename Scalar>
std::optional<Scalar> iwkr_from_kernel(const KernelVector<Scalar>& kvec, const ReferenceStore<Scalar>& store,
                                       std::span<const std::size_t> indices) {
    const auto g = store.accumulators();
    return detail::weighted_mean(kvec, store, indices, true, [&](std::size_t i) { return Scalar(1) / g[i]; });
}

/// Nadaraya-Watson estimate sum(k r) / sum(k). nullopt means no kernel
/// support (empty store, or every sample truncated away).
template <typename Derived>
std::optional<typename Derived::Scalar> nwkr_estimate(const Eigen::MatrixBase<Derived>& query,
                                                      const ReferenceStore<typename Derived::Scalar>& store) {
    return nwkr_from_kernel(kernel_vector(query, store), store);
}

template <typename Derived>
std::optional<typename Derived::Scalar> nwkr_estimate(const Eigen::MatrixBase<Derived>& query,
                                                      const ReferenceStore<typename Derived::Scalar>& store,
                                                      std::span<const std::size_t> indices) {
    return nwkr_from_kernel(kernel_vector(query, store, indices), store, indices);
}

/// Importance-weighted estimate sum(k w r) / sum(k w) with w_i = 1 / g_i.
/// Queries are treated as external points: a query coinciding with a stored
/// sample does not exclude that sample.
template <typename Derived>
std::optional<typename Derived::Scalar> iwkr_estimate(const Eigen::MatrixBase<Derived>& query,
                                                      const ReferenceStore<typename Derived::Scalar>& store) {
    return iwkr_from_kernel(kernel_vector(query, store), store);
}

template <typename Derived>
std::optional<typename Derived::Scalar> iwkr_estimate(const Eigen::MatrixBase<Derived>& query,
                                                      const ReferenceStore<typename Derived::Scalar>& store,
                                                      std::span<const std::size_t> indices) {
    return iwkr_from_kernel(kernel_vector(query, store, indices), store, indices);
}

}  // namespace c3
