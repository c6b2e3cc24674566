#include "c3/agents.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace c3 {

std::size_t argmax_first(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("argmax over an empty set");
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] > values[best]) best = i;
    return best;
}

namespace {

void require_arms(std::span<const Eigen::VectorXd> arms) {
    if (arms.empty()) throw std::invalid_argument("select: no valid arms");
}

}  // namespace

void EvictionPolicy::validate() const {
    if (period < 0) throw std::invalid_argument("eviction period must be >= 0");
    if (!(fraction >= 0.0 && fraction < 1.0)) throw std::invalid_argument("eviction fraction must be in [0,1)");
}

// ---------------------------------------------------------------- C3

C3Agent::C3Agent(MlpParamsd phi, C3Config config)
    : phi_(std::move(phi)), config_(config), rng_(make_rng(config.seed, "agent:c3")) {
    phi_.validate();
    config_.kernel.validate();
    config_.eviction.validate();
    store_ = ReferenceStored(phi_.output_dim(), config_.kernel, config_.checkpoint_interval);
}

void C3Agent::warm_start(std::span<const LoggedSample> data) {
    if (data.empty()) return;
    Eigen::MatrixXd inputs(data.front().input().size(), Eigen::Index(data.size()));
    std::vector<int> rewards;
    for (std::size_t i = 0; i < data.size(); ++i) {
        inputs.col(Eigen::Index(i)) = data[i].input();
        rewards.push_back(data[i].reward);
    }
    const Eigen::MatrixXd emb = mlp_forward_batch(phi_, inputs);
    if (store_.empty()) {
        store_ = ReferenceStored::from_samples(emb, rewards, config_.kernel);
        store_.set_checkpoint_interval(config_.checkpoint_interval);
        return;
    }
    for (Eigen::Index i = 0; i < emb.cols(); ++i) observe_embedding(emb.col(i), rewards[std::size_t(i)]);
}

C3Selection C3Agent::select_detailed(const Eigen::VectorXd& context, std::span<const Eigen::VectorXd> arms) {
    require_arms(arms);
    Eigen::MatrixXd inputs(context.size() + arms.front().size(), Eigen::Index(arms.size()));
    for (std::size_t i = 0; i < arms.size(); ++i) inputs.col(Eigen::Index(i)) = concat_input(context, arms[i]);
    const Eigen::MatrixXd emb = mlp_forward_batch(phi_, inputs);

    C3Selection sel;
    KernelVector<double> best_kvec;
    for (std::size_t i = 0; i < arms.size(); ++i) {
        sel.embeddings.push_back(emb.col(Eigen::Index(i)));
        auto kvec = kernel_vector(sel.embeddings.back(), store_);
        const auto params = beta_params_from_kernel(kvec, store_, config_.use_importance_weights);
        sel.draws.push_back(thompson_draw(params, rng_));
        if (i == 0 || sel.draws[i] > sel.draws[sel.index]) {
            sel.index = i;
            best_kvec = std::move(kvec);
        }
    }
    pending_ = true;
    pending_embedding_ = sel.embeddings[sel.index];
    pending_kvec_ = std::move(best_kvec);
    return sel;
}

void C3Agent::observe(int reward) {
    if (!pending_) throw std::logic_error("C3Agent::observe without a preceding select");
    pending_ = false;
    store_.append(pending_embedding_, reward,
                  std::span<const double>(pending_kvec_.data(), std::size_t(pending_kvec_.size())));
    ++steps_;
    maybe_evict();
}

void C3Agent::observe_embedding(const Eigen::VectorXd& embedding, int reward) {
    const auto kvec = kernel_vector(embedding, store_);
    store_.append(embedding, reward, std::span<const double>(kvec.data(), std::size_t(kvec.size())));
}

void C3Agent::maybe_evict() {
    const auto& ev = config_.eviction;
    if (ev.period <= 0 || ev.fraction <= 0.0 || steps_ % std::size_t(ev.period) != 0) return;
    std::vector<std::size_t> victims;
    const auto n = store_.size();
    if (ev.exact_count) {
        std::vector<std::size_t> all(n);
        std::iota(all.begin(), all.end(), 0);
        const auto k = std::size_t(std::llround(ev.fraction * double(n)));
        for (std::size_t i = 0; i < k; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, n - 1);
            std::swap(all[i], all[pick(rng_)]);
        }
        victims.assign(all.begin(), all.begin() + std::ptrdiff_t(k));
    } else {
        std::bernoulli_distribution drop(ev.fraction);
        for (std::size_t i = 0; i < n; ++i)
            if (drop(rng_)) victims.push_back(i);
    }
    store_.remove(victims);
}

// ---------------------------------------------------------------- linear

LinearModel::LinearModel(Eigen::Index dim, double ridge)
    : A(ridge * Eigen::MatrixXd::Identity(dim, dim)), b(Eigen::VectorXd::Zero(dim)) {}

void LinearModel::update(const Eigen::VectorXd& x, double reward) {
    A.selfadjointView<Eigen::Lower>().rankUpdate(x);
    A.triangularView<Eigen::StrictlyUpper>() = A.transpose();
    b += reward * x;
}

Eigen::VectorXd LinearModel::mean() const { return A.llt().solve(b); }

std::size_t ArmIndexer::id(const Eigen::VectorXd& arm) {
    std::vector<double> key(arm.data(), arm.data() + arm.size());
    const auto [it, inserted] = ids_.try_emplace(std::move(key), ids_.size());
    return it->second;
}

Eigen::VectorXd LinearAgentBase::features(const Eigen::VectorXd& context, const Eigen::VectorXd& arm) const {
    if (features_ == LinearFeatures::Concat) return concat_input(context, arm);
    Eigen::VectorXd x(context.size() + 1);
    x << context, 1.0;
    return x;
}

LinearModel& LinearAgentBase::model(const Eigen::VectorXd& context, const Eigen::VectorXd& arm) {
    const auto dim = features(context, arm).size();
    const std::size_t id = features_ == LinearFeatures::Concat ? 0 : arm_ids_.id(arm);
    while (models_.size() <= id) models_.emplace_back(dim, ridge_);
    return models_[id];
}

void LinearAgentBase::warm_start(std::span<const LoggedSample> data) {
    for (const auto& s : data) model(s.context, s.arm).update(features(s.context, s.arm), s.reward);
}

void LinearAgentBase::observe(int reward) {
    if (!pending_) throw std::logic_error("observe without a preceding select");
    pending_ = false;
    // pending_x_ already holds the feature vector; the context is not needed
    // to locate the model.
    const std::size_t id = features_ == LinearFeatures::Concat ? 0 : arm_ids_.id(pending_arm_);
    models_[id].update(pending_x_, reward);
}

std::vector<double> LinUcbAgent::scores(const Eigen::VectorXd& context, std::span<const Eigen::VectorXd> arms) {
    std::vector<double> out;
    for (const auto& arm : arms) {
        const auto& m = model(context, arm);
        const Eigen::LLT<Eigen::MatrixXd> llt(m.A);
        const Eigen::VectorXd x = features(context, arm);
        const Eigen::VectorXd theta = llt.solve(m.b);
        const double width = std::sqrt(std::max(0.0, x.dot(llt.solve(x))));
        out.push_back(theta.dot(x) + alpha_ * width);
    }
    return out;
}

std::size_t LinUcbAgent::select(const Eigen::VectorXd& context, std::span<const Eigen::VectorXd> arms) {
    require_arms(arms);
    const auto s = scores(context, arms);
    const auto best = argmax_first(s);
    pending_ = true;
    pending_x_ = features(context, arms[best]);
    pending_arm_ = arms[best];
    return best;
}

double lints_default_scale(Eigen::Index dim, double r, double epsilon, double delta) {
    return r * std::sqrt(24.0 / epsilon * double(dim) * std::log(1.0 / delta));
}

std::size_t LinTsAgent::select(const Eigen::VectorXd& context, std::span<const Eigen::VectorXd> arms) {
    require_arms(arms);
    std::normal_distribution<double> normal;
    std::vector<double> s;
    // Concat mode shares one posterior draw across arms.
    Eigen::VectorXd shared_theta;
    for (std::size_t i = 0; i < arms.size(); ++i) {
        const auto& m = model(context, arms[i]);
        const Eigen::VectorXd x = features(context, arms[i]);
        if (features_ == LinearFeatures::PerArm || i == 0) {
            const double v = scale_ > 0 ? scale_ : lints_default_scale(x.size());
            const Eigen::LLT<Eigen::MatrixXd> llt(m.A);
            Eigen::VectorXd z(x.size());
            for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = normal(rng_);
            // A = L L^T, so L^-T z has covariance A^-1.
            shared_theta = llt.solve(m.b) + v * llt.matrixU().solve(z);
        }
        s.push_back(shared_theta.dot(x));
    }
    const auto best = argmax_first(s);
    pending_ = true;
    pending_x_ = features(context, arms[best]);
    pending_arm_ = arms[best];
    return best;
}

// ---------------------------------------------------------------- simple baselines

EpsilonGreedyAgent::Stat& EpsilonGreedyAgent::stat(const Eigen::VectorXd& arm) {
    const auto id = arm_ids_.id(arm);
    if (stats_.size() <= id) stats_.resize(id + 1);
    return stats_[id];
}

double EpsilonGreedyAgent::mean_of(const Eigen::VectorXd& arm) {
    const auto& s = stat(arm);
    return s.count > 0 ? s.sum / s.count : 0.0;
}

void EpsilonGreedyAgent::warm_start(std::span<const LoggedSample> data) {
    for (const auto& s : data) {
        auto& st = stat(s.arm);
        st.count += 1;
        st.sum += s.reward;
    }
}

std::size_t EpsilonGreedyAgent::select(const Eigen::VectorXd&, std::span<const Eigen::VectorXd> arms) {
    require_arms(arms);
    std::size_t choice = 0;
    if (uniform01(rng_) < epsilon_) {
        choice = std::uniform_int_distribution<std::size_t>(0, arms.size() - 1)(rng_);
    } else {
        std::vector<double> means;
        bool untried = false;
        for (std::size_t i = 0; i < arms.size() && !untried; ++i) {
            if (stat(arms[i]).count == 0) {
                choice = i;
                untried = true;
            }
            means.push_back(mean_of(arms[i]));
        }
        if (!untried) choice = argmax_first(means);
    }
    pending_ = true;
    pending_id_ = arm_ids_.id(arms[choice]);
    return choice;
}

void EpsilonGreedyAgent::observe(int reward) {
    if (!pending_) throw std::logic_error("observe without a preceding select");
    pending_ = false;
    stats_[pending_id_].count += 1;
    stats_[pending_id_].sum += reward;
}

std::size_t UniformAgent::select(const Eigen::VectorXd&, std::span<const Eigen::VectorXd> arms) {
    require_arms(arms);
    return std::uniform_int_distribution<std::size_t>(0, arms.size() - 1)(rng_);
}

std::size_t OracleAgent::select(const Eigen::VectorXd&, std::span<const Eigen::VectorXd> arms) {
    require_arms(arms);
    if (means_.size() != arms.size()) throw std::logic_error("OracleAgent: true means not revealed for this step");
    return argmax_first(means_);
}

}  // namespace c3
