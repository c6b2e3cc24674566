#pragma once

#include "c3/beta_posterior.hpp"
#include "c3/mlp.hpp"
#include "c3/training.hpp"

#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace c3 {

/// Common interface of every bandit policy. `select` picks one of the valid
/// arms for a context; `observe` reports the reward of that pick.
class Agent {
public:
    virtual ~Agent() = default;
    virtual std::string name() const = 0;

    /// Logged interactions every agent receives before the online phase.
    virtual void warm_start(std::span<const LoggedSample> data) { (void)data; }

    virtual std::size_t select(const Eigen::VectorXd& context, std::span<const Eigen::VectorXd> arms) = 0;
    virtual void observe(int reward) = 0;

    /// True expected rewards of the current valid arms. Only the oracle
    /// agent listens.
    virtual void reveal(std::span<const double> means) { (void)means; }
};

/// Lowest-index argmax.
std::size_t argmax_first(std::span<const double> values);

struct EvictionPolicy {
    int period = 0;           // steps between evictions; 0 disables
    double fraction = 0.0;    // in [0, 1)
    bool exact_count = false; // remove round(fraction * n) instead of Bernoulli per sample

    void validate() const;
};

struct C3Config {
    KernelConfigd kernel;
    EvictionPolicy eviction;
    bool use_importance_weights = true;  // false: NWKR ablation
    std::size_t checkpoint_interval = ReferenceStored::kDefaultCheckpointInterval;
    std::uint64_t seed = 0;
};

struct C3Selection {
    std::size_t index = 0;
    std::vector<double> draws;
    std::vector<Eigen::VectorXd> embeddings;
};

/// Thompson sampling on Beta posteriors built from kernel regression in the
/// embedding space of a trained network. The reference store is updated in
/// O(n) per observation and periodically thinned by eviction.
class C3Agent : public Agent {
public:
    C3Agent(MlpParamsd phi, C3Config config);

    std::string name() const override { return config_.use_importance_weights ? "c3" : "c3_nwkr"; }

    /// Embeds the logged samples into the reference store. The network is
    /// expected to be trained already (see train()).
    void warm_start(std::span<const LoggedSample> data) override;

    std::size_t select(const Eigen::VectorXd& context, std::span<const Eigen::VectorXd> arms) override {
        return select_detailed(context, arms).index;
    }
    C3Selection select_detailed(const Eigen::VectorXd& context, std::span<const Eigen::VectorXd> arms);

    void observe(int reward) override;

    /// Appends an embedded observation using a kernel vector computed
    /// against the current store.
    void observe_embedding(const Eigen::VectorXd& embedding, int reward);

    const ReferenceStored& store() const { return store_; }
    ReferenceStored& mutable_store() { return store_; }
    const MlpParamsd& phi() const { return phi_; }
    std::size_t step_counter() const { return steps_; }

private:
    void maybe_evict();

    MlpParamsd phi_;
    C3Config config_;
    ReferenceStored store_;
    Rng rng_;
    std::size_t steps_ = 0;

    bool pending_ = false;
    Eigen::VectorXd pending_embedding_;
    KernelVector<double> pending_kvec_;
};

/// Ridge-regression statistics A = lambda I + sum x x^T, b = sum r x.
struct LinearModel {
    Eigen::MatrixXd A;
    Eigen::VectorXd b;

    explicit LinearModel(Eigen::Index dim, double ridge = 1.0);
    void update(const Eigen::VectorXd& x, double reward);
    Eigen::VectorXd mean() const;
};

enum class LinearFeatures {
    Concat,   // one shared model on [context; arm]
    PerArm,   // one model per arm identity on [context; 1]
};

/// Keys arms by their exact feature values.
class ArmIndexer {
public:
    std::size_t id(const Eigen::VectorXd& arm);
    std::size_t size() const { return ids_.size(); }

private:
    std::map<std::vector<double>, std::size_t> ids_;
};

class LinearAgentBase : public Agent {
public:
    LinearAgentBase(LinearFeatures features, double ridge) : features_(features), ridge_(ridge) {}
    void warm_start(std::span<const LoggedSample> data) override;
    void observe(int reward) override;

    const LinearModel& model_for(const Eigen::VectorXd& context, const Eigen::VectorXd& arm) {
        return model(context, arm);
    }

protected:
    Eigen::VectorXd features(const Eigen::VectorXd& context, const Eigen::VectorXd& arm) const;
    LinearModel& model(const Eigen::VectorXd& context, const Eigen::VectorXd& arm);

    LinearFeatures features_;
    double ridge_;
    std::vector<LinearModel> models_;
    ArmIndexer arm_ids_;

    bool pending_ = false;
    Eigen::VectorXd pending_x_;
    Eigen::VectorXd pending_arm_;
};

class LinUcbAgent : public LinearAgentBase {
public:
    explicit LinUcbAgent(double alpha = 1.96, LinearFeatures features = LinearFeatures::Concat, double ridge = 1.0)
        : LinearAgentBase(features, ridge), alpha_(alpha) {}
    std::string name() const override { return "linucb"; }
    std::size_t select(const Eigen::VectorXd& context, std::span<const Eigen::VectorXd> arms) override;

    /// theta^T x + alpha sqrt(x^T A^-1 x) for each arm.
    std::vector<double> scores(const Eigen::VectorXd& context, std::span<const Eigen::VectorXd> arms);

private:
    double alpha_;
};

/// Posterior-scale default v = R sqrt(24 / eps * d * ln(1 / delta)).
double lints_default_scale(Eigen::Index dim, double r = 0.01, double epsilon = 0.5, double delta = 0.5);

class LinTsAgent : public LinearAgentBase {
public:
    /// scale <= 0 selects lints_default_scale for the feature dimension.
    LinTsAgent(double scale, std::uint64_t seed, LinearFeatures features = LinearFeatures::Concat,
               double ridge = 1.0)
        : LinearAgentBase(features, ridge), scale_(scale), rng_(make_rng(seed, "agent:lints")) {}
    std::string name() const override { return "lints"; }
    std::size_t select(const Eigen::VectorXd& context, std::span<const Eigen::VectorXd> arms) override;

private:
    double scale_;
    Rng rng_;
};

/// Epsilon-greedy on running per-arm mean rewards (context ignored).
/// Arms never pulled are tried first.
class EpsilonGreedyAgent : public Agent {
public:
    EpsilonGreedyAgent(double epsilon, std::uint64_t seed) : epsilon_(epsilon), rng_(make_rng(seed, "agent:eps")) {}
    std::string name() const override { return "eps_greedy"; }
    void warm_start(std::span<const LoggedSample> data) override;
    std::size_t select(const Eigen::VectorXd& context, std::span<const Eigen::VectorXd> arms) override;
    void observe(int reward) override;
    double mean_of(const Eigen::VectorXd& arm);

private:
    struct Stat {
        double count = 0;
        double sum = 0;
    };
    Stat& stat(const Eigen::VectorXd& arm);

    double epsilon_;
    Rng rng_;
    ArmIndexer arm_ids_;
    std::vector<Stat> stats_;
    bool pending_ = false;
    std::size_t pending_id_ = 0;
};

class UniformAgent : public Agent {
public:
    explicit UniformAgent(std::uint64_t seed) : rng_(make_rng(seed, "agent:uniform")) {}
    std::string name() const override { return "uniform"; }
    std::size_t select(const Eigen::VectorXd& context, std::span<const Eigen::VectorXd> arms) override;
    void observe(int) override {}

private:
    Rng rng_;
};

/// Plays the arm with the highest true mean. Zero regret by construction.
class OracleAgent : public Agent {
public:
    std::string name() const override { return "oracle"; }
    void reveal(std::span<const double> means) override { means_.assign(means.begin(), means.end()); }
    std::size_t select(const Eigen::VectorXd& context, std::span<const Eigen::VectorXd> arms) override;
    void observe(int) override {}

private:
    std::vector<double> means_;
};

}  // namespace c3
