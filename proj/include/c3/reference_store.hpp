#pragma once

#include "c3/kernel.hpp"

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace c3 {

/// The agent's memory: embedded samples, binary rewards and per-sample
/// kernel sums g_i = sum_j k(s_i, s_j) (self term included), so the
/// importance weight w_i = 1 / g_i lies in (0, 1].
///
/// Embeddings are stored sample-major in one buffer and exposed as a
/// d x n column-major Eigen map. Accumulators are maintained incrementally:
/// O(n) per append, O(n k) per removal of k samples, with a full O(n^2)
/// recomputation every `checkpoint_interval` mutations.
///
/// Single writer, many readers: const members never mutate.
template <typename Scalar>
class ReferenceStore {
public:
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using ConstEmbeddings = Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>>;

    static constexpr std::size_t kDefaultCheckpointInterval = 10000;

    ReferenceStore() = default;
    ReferenceStore(Eigen::Index dim, KernelConfig<Scalar> config,
                   std::size_t checkpoint_interval = kDefaultCheckpointInterval)
        : dim_(dim), config_(config), checkpoint_interval_(checkpoint_interval) {
        if (dim < 0) throw std::invalid_argument("ReferenceStore: negative dimension");
        config_.validate();
    }

    /// Builds a store from columns of `embeddings` and computes all
    /// accumulators from scratch.
    template <typename Derived>
    static ReferenceStore from_samples(const Eigen::MatrixBase<Derived>& embeddings, std::span<const int> rewards,
                                       KernelConfig<Scalar> config, std::span<const int> intervals = {}) {
        if (std::size_t(embeddings.cols()) != rewards.size())
            throw std::invalid_argument("ReferenceStore: embeddings/rewards count mismatch");
        if (!intervals.empty() && intervals.size() != rewards.size())
            throw std::invalid_argument("ReferenceStore: intervals/rewards count mismatch");
        ReferenceStore store(embeddings.rows(), config);
        const auto n = std::size_t(embeddings.cols());
        store.coords_.resize(n * std::size_t(store.dim_));
        Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>>(store.coords_.data(), store.dim_,
                                                                          Eigen::Index(n)) = embeddings;
        for (int r : rewards) store.rewards_.push_back(checked_reward(r));
        store.intervals_.assign(intervals.begin(), intervals.end());
        store.recompute_weights();
        return store;
    }

    Eigen::Index dim() const { return dim_; }
    std::size_t size() const { return rewards_.size(); }
    bool empty() const { return rewards_.empty(); }
    const KernelConfig<Scalar>& kernel_config() const { return config_; }
    std::size_t checkpoint_interval() const { return checkpoint_interval_; }
    void set_checkpoint_interval(std::size_t k) { checkpoint_interval_ = k; }
    std::size_t mutations_since_checkpoint() const { return mutations_; }

    ConstEmbeddings embeddings() const { return {coords_.data(), dim_, Eigen::Index(size())}; }
    auto embedding(std::size_t i) const { return embeddings().col(Eigen::Index(i)); }
    std::span<const std::uint8_t> rewards() const { return rewards_; }
    std::span<const Scalar> accumulators() const { return accum_; }
    bool has_intervals() const { return !intervals_.empty(); }
    std::span<const int> intervals() const { return intervals_; }

    Scalar weight(std::size_t i) const { return Scalar(1) / accum_[i]; }

    /// Adds one sample. `kvec` must be the kernel vector of `embedding`
    /// against the store before the append.
    template <typename Derived>
    void append(const Eigen::MatrixBase<Derived>& embedding, int reward, std::span<const Scalar> kvec,
                std::optional<int> interval = std::nullopt) {
        check_same_dim(embedding.size(), dim_, "ReferenceStore::append");
        if (kvec.size() != size())
            throw std::invalid_argument("ReferenceStore::append: kernel vector length " +
                                        std::to_string(kvec.size()) + " != store size " +
                                        std::to_string(size()));
        if (has_intervals() != interval.has_value() && !empty())
            throw std::invalid_argument("ReferenceStore::append: interval labels must be all or none");
        const auto r = checked_reward(reward);

        Scalar total(1);
        for (std::size_t i = 0; i < kvec.size(); ++i) {
            accum_[i] += kvec[i];
            total += kvec[i];
        }
        accum_.push_back(total);
        rewards_.push_back(r);
        for (Eigen::Index k = 0; k < dim_; ++k) coords_.push_back(embedding(k));
        if (interval) intervals_.push_back(*interval);
        note_mutation();
    }

    /// Removes the samples at `indices` (distinct, in range) and subtracts
    /// their kernel contributions from the survivors.
    void remove(std::span<const std::size_t> indices) {
        if (indices.empty()) return;
        std::vector<std::size_t> sorted(indices.begin(), indices.end());
        std::sort(sorted.begin(), sorted.end());
        if (sorted.back() >= size())
            throw std::out_of_range("ReferenceStore::remove: index " + std::to_string(sorted.back()) +
                                    " out of range for size " + std::to_string(size()));
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            throw std::invalid_argument("ReferenceStore::remove: duplicate index");

        std::vector<bool> removed(size(), false);
        for (auto i : sorted) removed[i] = true;

        const auto E = embeddings();
        for (auto j : sorted) {
            Eigen::Array<Scalar, 1, Eigen::Dynamic> k = (E.colwise() - E.col(Eigen::Index(j))).colwise().squaredNorm().array();
            rbf_in_place(k, config_);
            for (std::size_t i = 0; i < size(); ++i)
                if (!removed[i]) accum_[i] -= k(Eigen::Index(i));
        }

        std::size_t out = 0;
        for (std::size_t i = 0; i < size(); ++i) {
            if (removed[i]) continue;
            if (out != i) {
                std::copy_n(coords_.begin() + std::ptrdiff_t(i * std::size_t(dim_)), dim_,
                            coords_.begin() + std::ptrdiff_t(out * std::size_t(dim_)));
                rewards_[out] = rewards_[i];
                if (has_intervals()) intervals_[out] = intervals_[i];
            }
            // Exact value is >= 1 (self term); only rounding can push it below.
            accum_[out] = std::max(accum_[i], Scalar(1));
            ++out;
        }
        coords_.resize(out * std::size_t(dim_));
        rewards_.resize(out);
        accum_.resize(out);
        if (has_intervals()) intervals_.resize(out);
        note_mutation();
    }

    /// Full O(n^2) recomputation of every accumulator.
    void recompute_weights() {
        const auto n = size();
        accum_.assign(n, Scalar(1));
        const auto E = embeddings();
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const auto rest = Eigen::Index(n - i - 1);
            Eigen::Array<Scalar, 1, Eigen::Dynamic> k =
                (E.rightCols(rest).colwise() - E.col(Eigen::Index(i))).colwise().squaredNorm().array();
            rbf_in_place(k, config_);
            accum_[i] += k.sum();
            for (Eigen::Index t = 0; t < rest; ++t) accum_[i + 1 + std::size_t(t)] += k(t);
        }
        mutations_ = 0;
    }

    void clear() {
        coords_.clear();
        rewards_.clear();
        accum_.clear();
        intervals_.clear();
        mutations_ = 0;
    }

private:
    static std::uint8_t checked_reward(int r) {
        if (r != 0 && r != 1) throw std::invalid_argument("ReferenceStore: reward must be 0 or 1");
        return std::uint8_t(r);
    }

    void note_mutation() {
        ++mutations_;
        if (checkpoint_interval_ > 0 && mutations_ >= checkpoint_interval_) recompute_weights();
    }

    Eigen::Index dim_ = 0;
    KernelConfig<Scalar> config_{};
    std::size_t checkpoint_interval_ = kDefaultCheckpointInterval;
    std::size_t mutations_ = 0;

    std::vector<Scalar> coords_;
    std::vector<std::uint8_t> rewards_;
    std::vector<Scalar> accum_;
    std::vector<int> intervals_;

    template <typename S>
    friend struct StoreAccess;
};

using ReferenceStored = ReferenceStore<double>;

/// Raw member access for serialization.
template <typename Scalar>
struct StoreAccess {
    static std::vector<Scalar>& coords(ReferenceStore<Scalar>& s) { return s.coords_; }
    static std::vector<std::uint8_t>& rewards(ReferenceStore<Scalar>& s) { return s.rewards_; }
    static std::vector<Scalar>& accumulators(ReferenceStore<Scalar>& s) { return s.accum_; }
    static std::vector<int>& intervals(ReferenceStore<Scalar>& s) { return s.intervals_; }
};

}  // namespace c3
