#pragma once

#include "c3/rng.hpp"
#include "c3/training.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace c3 {

/// One decision point: the context, the valid arms and their true expected
/// rewards at this time. Regret is only accumulated on `evaluate` steps and
/// agents only learn from `update` steps.
struct BanditStep {
    Eigen::VectorXd context;
    std::vector<Eigen::VectorXd> arms;
    std::vector<double> means;
    bool evaluate = true;
    bool update = true;
};

class Environment {
public:
    virtual ~Environment() = default;
    virtual std::string kind() const = 0;
    /// Logged interactions handed to every agent before the online phase.
    virtual std::vector<LoggedSample> warm_start_data() = 0;
    /// Advances to the next step; nullopt when the stream is exhausted.
    virtual std::optional<BanditStep> next() = 0;
    /// Samples the reward of `arm` in the current step.
    virtual int pull(std::size_t arm) = 0;
};

Eigen::VectorXd one_hot(Eigen::Index size, Eigen::Index hot);

// ------------------------------------------------------------ coupled arms

struct CoupledArmSpec {
    std::vector<double> correlations{-1.0, -0.6, -0.2, 0.2, 0.6, 1.0};
    double concentration = 50.0;
    int episodes = 200;
    int samples_per_episode = 100;

    void validate() const;
    std::size_t arm_count() const { return correlations.size() + 1; }
};

/// Mean of a non-anchor arm: Beta(2c(rho(mu0 - 0.5) + 0.5), 2c(rho(0.5 - mu0) + 0.5)),
/// whose mean is rho(mu0 - 0.5) + 0.5. The result lies strictly inside (0, 1).
double sample_correlated_mu(double mu0, double rho, double concentration, Rng& rng);

/// Shape parameters used by sample_correlated_mu.
std::pair<double, double> correlated_beta_shape(double mu0, double rho, double concentration);

struct CoupledDataset {
    std::vector<LoggedSample> samples;  // context empty, arm one-hot, interval = episode
    Eigen::MatrixXd means;              // episodes x arms, column 0 is the anchor
};

/// Each episode draws mu0 ~ U(0, 1) and the coupled means, then pulls arms
/// uniformly with Bernoulli rewards.
CoupledDataset coupled_episodes(const CoupledArmSpec& spec, Rng& rng);

class CoupledArmEnvironment : public Environment {
public:
    CoupledArmEnvironment(CoupledArmSpec spec, std::uint64_t seed);
    std::string kind() const override { return "coupled"; }
    std::vector<LoggedSample> warm_start_data() override;
    std::optional<BanditStep> next() override;
    int pull(std::size_t arm) override;

private:
    void new_episode();

    CoupledArmSpec spec_;
    Rng rng_;
    Rng reward_rng_;
    Rng warm_rng_;
    std::vector<double> mus_;
    long step_ = 0;
};

// ------------------------------------------------------------ tabular

struct TabularDataset {
    std::vector<Eigen::VectorXd> features;
    std::vector<int> labels;
    int num_classes = 0;
};

/// Header row, then float feature columns and a trailing integer label.
/// Ragged rows, non-numeric cells and negative labels are rejected.
TabularDataset load_csv_dataset(const std::filesystem::path& path);

/// Four well separated 2-D discs at the corners of a square, sampled with
/// class probabilities `class_weights`. Every class is linearly separable
/// from the rest. Features are not standardized.
TabularDataset make_separable_blobs(std::size_t n, std::span<const double> class_weights, Rng& rng,
                                    double separation = 4.0, double offset = 2.0);

struct TabularBanditTask {
    TabularDataset data;
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;

    Eigen::VectorXd arm(int cls) const { return one_hot(data.num_classes, cls); }
};

/// Shuffles and splits into disjoint train/test index sets.
TabularBanditTask make_tabular_task(TabularDataset data, std::size_t train_size, std::size_t test_size, Rng& rng);

struct TabularCursor {
    std::size_t step = 0;
    std::size_t train_pos = 0;
    std::size_t test_pos = 0;
};

struct TabularStepView {
    std::size_t sample = 0;  // row index into the dataset
    bool evaluate = false;
};

/// 4 training steps, then 1 evaluation step, repeated. Advances the cursor;
/// nullopt once either split is exhausted.
std::optional<TabularStepView> tabular_step(const TabularBanditTask& task, TabularCursor& cursor);

int tabular_reward(const TabularBanditTask& task, std::size_t sample, std::size_t arm);

class TabularEnvironment : public Environment {
public:
    TabularEnvironment(TabularBanditTask task, std::uint64_t seed);
    std::string kind() const override { return "tabular"; }
    /// The training split with one uniformly random logged arm per context.
    std::vector<LoggedSample> warm_start_data() override;
    std::optional<BanditStep> next() override;
    int pull(std::size_t arm) override;

    const TabularBanditTask& task() const { return task_; }

private:
    TabularBanditTask task_;
    Rng warm_rng_;
    TabularCursor cursor_;
    std::size_t current_ = 0;
};

// ------------------------------------------------------------ drift

struct DriftPhase {
    long begin = 0;  // inclusive
    long end = 0;    // exclusive
    int boosted_category = 0;
    double boost = 0.0;     // P(0 -> 1) for the boosted category
    double diminish = 0.0;  // P(1 -> 0) for every other category
};

struct DriftSchedule {
    std::vector<DriftPhase> phases;

    void validate() const;
    const DriftPhase* at(long step) const;

    /// Splits [0, horizon) into equal consecutive phases, one per entry of
    /// `probabilities`, each used for both boost and diminish.
    static DriftSchedule daily(long horizon, std::span<const double> probabilities, int boosted_category);
};

/// Default boost/diminish probabilities by day.
inline constexpr double kDailyDriftProbabilities[] = {0.00, 0.00, 0.10, 0.15, 0.20, 0.25, 0.30};

/// Expected reward after drift at `step`.
double drifted_mean(double base_mean, int category, const DriftSchedule& schedule, long step);

/// Applies the scheduled flip to an already drawn base reward.
int drift_step(int base_reward, int category, const DriftSchedule& schedule, long step, Rng& rng);

struct DriftEnvironmentSpec {
    int categories = 6;
    int boosted_category = 0;
    int articles_per_category = 8;
    int latent_dims = 2;
    int valid_arms = 8;
    double boosted_base_rate = 0.15;
    double other_base_rate = 0.35;
    double affinity_gain = 0.3;
    double quality_spread = 0.05;
    int warm_start_samples = 2000;
    int warm_start_intervals = 3;
    long horizon = 1500;
    std::vector<double> daily_probabilities{std::begin(kDailyDriftProbabilities),
                                            std::end(kDailyDriftProbabilities)};

    void validate() const;
};

/// Synthetic news-recommendation stream. Contexts are per-category affinity
/// vectors, arms are articles (category one-hot plus latent features), and
/// the boosted category's click rate rises while the others fall.
class DriftEnvironment : public Environment {
public:
    DriftEnvironment(DriftEnvironmentSpec spec, std::uint64_t seed);
    std::string kind() const override { return "drift"; }
    std::vector<LoggedSample> warm_start_data() override;
    std::optional<BanditStep> next() override;
    int pull(std::size_t arm) override;

    double base_mean(const Eigen::VectorXd& context, std::size_t article) const;
    const DriftSchedule& schedule() const { return schedule_; }
    std::size_t article_count() const { return article_features_.size(); }

private:
    Eigen::VectorXd sample_context(Rng& rng);

    DriftEnvironmentSpec spec_;
    DriftSchedule schedule_;
    std::vector<Eigen::VectorXd> article_features_;
    std::vector<int> article_category_;
    std::vector<double> article_quality_;
    Rng rng_;
    Rng reward_rng_;
    Rng warm_rng_;
    long step_ = -1;
    Eigen::VectorXd context_;
    std::vector<std::size_t> valid_;
};

// ------------------------------------------------------------ constant means

/// Non-contextual Bernoulli arms with fixed means, one-hot arm features.
class ConstantEnvironment : public Environment {
public:
    ConstantEnvironment(std::vector<double> means, long horizon, std::uint64_t seed);
    std::string kind() const override { return "constant"; }
    std::vector<LoggedSample> warm_start_data() override { return {}; }
    std::optional<BanditStep> next() override;
    int pull(std::size_t arm) override;

private:
    std::vector<double> means_;
    long horizon_;
    long step_ = 0;
    Rng reward_rng_;
};

// ------------------------------------------------------------ coupling metric

/// Jensen-Shannon divergence of Bernoulli(p) and Bernoulli(q), base 2.
double js_divergence_bernoulli(double p, double q);

/// 1 - mean_t JS(Bernoulli(p_t), Bernoulli(q_t)); 1 means perfectly coupled.
double coupling_rho(std::span<const double> p, std::span<const double> q);

/// Add-one smoothed Bernoulli mean (k + 1) / (n + 2).
inline double smoothed_rate(double successes, double trials) { return (successes + 1.0) / (trials + 2.0); }

}  // namespace c3
