#include "c3/environments.hpp"

#include "c3/beta_posterior.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace c3 {

Eigen::VectorXd one_hot(Eigen::Index size, Eigen::Index hot) {
    if (hot < 0 || hot >= size) throw std::out_of_range("one_hot: index out of range");
    Eigen::VectorXd v = Eigen::VectorXd::Zero(size);
    v(hot) = 1.0;
    return v;
}

// ------------------------------------------------------------ coupled arms

void CoupledArmSpec::validate() const {
    for (double r : correlations)
        if (!(r >= -1.0 && r <= 1.0)) throw std::invalid_argument("coupled: correlations must lie in [-1, 1]");
    if (!(concentration >= 1.0)) throw std::invalid_argument("coupled: concentration must be >= 1");
    if (episodes < 1 || samples_per_episode < 1)
        throw std::invalid_argument("coupled: episodes and samples_per_episode must be >= 1");
}

std::pair<double, double> correlated_beta_shape(double mu0, double rho, double concentration) {
    const double centered = rho * (mu0 - 0.5);
    return {2.0 * concentration * (centered + 0.5), 2.0 * concentration * (0.5 - centered)};
}

double sample_correlated_mu(double mu0, double rho, double concentration, Rng& rng) {
    if (!(mu0 > 0.0 && mu0 < 1.0)) throw std::invalid_argument("sample_correlated_mu: mu0 must be in (0,1)");
    if (!(rho >= -1.0 && rho <= 1.0)) throw std::invalid_argument("sample_correlated_mu: rho must be in [-1,1]");
    if (!(concentration >= 1.0)) throw std::invalid_argument("sample_correlated_mu: concentration must be >= 1");
    const auto [a, b] = correlated_beta_shape(mu0, rho, concentration);
    const double mu = thompson_draw(BetaParamsd{a, b, a + b}, rng);
    return std::clamp(mu, std::nextafter(0.0, 1.0), std::nextafter(1.0, 0.0));
}

CoupledDataset coupled_episodes(const CoupledArmSpec& spec, Rng& rng) {
    spec.validate();
    const auto k = Eigen::Index(spec.arm_count());
    CoupledDataset ds;
    ds.means.resize(spec.episodes, k);
    ds.samples.reserve(std::size_t(spec.episodes) * std::size_t(spec.samples_per_episode));
    std::uniform_int_distribution<Eigen::Index> pick(0, k - 1);
    for (int t = 0; t < spec.episodes; ++t) {
        double mu0 = 0.0;
        while (!(mu0 > 0.0)) mu0 = uniform01(rng);
        ds.means(t, 0) = mu0;
        for (Eigen::Index i = 1; i < k; ++i)
            ds.means(t, i) = sample_correlated_mu(mu0, spec.correlations[std::size_t(i - 1)], spec.concentration, rng);
        for (int s = 0; s < spec.samples_per_episode; ++s) {
            const auto arm = pick(rng);
            const int r = uniform01(rng) < ds.means(t, arm) ? 1 : 0;
            ds.samples.push_back({Eigen::VectorXd(0), one_hot(k, arm), r, t});
        }
    }
    return ds;
}

CoupledArmEnvironment::CoupledArmEnvironment(CoupledArmSpec spec, std::uint64_t seed)
    : spec_(std::move(spec)),
      rng_(make_rng(seed, "env")),
      reward_rng_(make_rng(seed, "env:reward")),
      warm_rng_(make_rng(seed, "env:warm")) {
    spec_.validate();
}

std::vector<LoggedSample> CoupledArmEnvironment::warm_start_data() { return coupled_episodes(spec_, warm_rng_).samples; }

void CoupledArmEnvironment::new_episode() {
    double mu0 = 0.0;
    while (!(mu0 > 0.0)) mu0 = uniform01(rng_);
    mus_.assign(1, mu0);
    for (double rho : spec_.correlations) mus_.push_back(sample_correlated_mu(mu0, rho, spec_.concentration, rng_));
}

std::optional<BanditStep> CoupledArmEnvironment::next() {
    if (step_ % spec_.samples_per_episode == 0) new_episode();
    ++step_;
    BanditStep s;
    s.context = Eigen::VectorXd(0);
    const auto k = Eigen::Index(spec_.arm_count());
    for (Eigen::Index i = 0; i < k; ++i) s.arms.push_back(one_hot(k, i));
    s.means = mus_;
    return s;
}

int CoupledArmEnvironment::pull(std::size_t arm) { return uniform01(reward_rng_) < mus_.at(arm) ? 1 : 0; }

// ------------------------------------------------------------ tabular

TabularDataset load_csv_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset " + path.string());
    TabularDataset ds;
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("dataset " + path.string() + " is empty");
    const auto header_cols = std::count(line.begin(), line.end(), ',') + 1;
    if (header_cols < 2) throw std::runtime_error("dataset header needs at least one feature and a label");
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        if (std::ptrdiff_t(cells.size()) != header_cols)
            throw std::runtime_error("dataset row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                                     " columns, expected " + std::to_string(header_cols));
        Eigen::VectorXd x(header_cols - 1);
        for (Eigen::Index c = 0; c + 1 < header_cols; ++c) {
            std::size_t used = 0;
            try {
                x(c) = std::stod(cells[std::size_t(c)], &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used == 0) throw std::runtime_error("dataset row " + std::to_string(row) + ": bad number '" +
                                                    cells[std::size_t(c)] + "'");
        }
        std::size_t used = 0;
        int label = -1;
        try {
            label = std::stoi(cells.back(), &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != cells.back().size() || label < 0)
            throw std::runtime_error("dataset row " + std::to_string(row) + ": bad label '" + cells.back() + "'");
        ds.features.push_back(std::move(x));
        ds.labels.push_back(label);
        ds.num_classes = std::max(ds.num_classes, label + 1);
    }
    if (ds.labels.empty()) throw std::runtime_error("dataset " + path.string() + " has no rows");
    return ds;
}

TabularDataset make_separable_blobs(std::size_t n, std::span<const double> class_weights, Rng& rng,
                                    double separation, double offset) {
    if (class_weights.size() != 4) throw std::invalid_argument("make_separable_blobs: expects four class weights");
    std::discrete_distribution<int> cls(class_weights.begin(), class_weights.end());
    // Disc radius below separation / (2 sqrt 2) keeps every corner disc on its
    // own side of the diagonal lines through the square's edge midpoints.
    const double radius = 0.3 * separation;
    TabularDataset ds;
    ds.num_classes = 4;
    for (std::size_t i = 0; i < n; ++i) {
        const int c = cls(rng);
        const double r = radius * std::sqrt(uniform01(rng));
        const double theta = 2.0 * M_PI * uniform01(rng);
        Eigen::VectorXd x(2);
        x << offset + separation * double(c % 2) + r * std::cos(theta),
            offset + separation * double(c / 2) + r * std::sin(theta);
        ds.features.push_back(std::move(x));
        ds.labels.push_back(c);
    }
    return ds;
}

TabularBanditTask make_tabular_task(TabularDataset data, std::size_t train_size, std::size_t test_size, Rng& rng) {
    if (train_size + test_size > data.labels.size())
        throw std::invalid_argument("tabular task: dataset has " + std::to_string(data.labels.size()) +
                                    " rows, need " + std::to_string(train_size + test_size));
    for (int l : data.labels)
        if (l < 0 || l >= data.num_classes) throw std::invalid_argument("tabular task: label out of range");
    std::vector<std::size_t> order(data.labels.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    TabularBanditTask task;
    task.test.assign(order.begin(), order.begin() + std::ptrdiff_t(test_size));
    task.train.assign(order.begin() + std::ptrdiff_t(test_size),
                      order.begin() + std::ptrdiff_t(test_size + train_size));
    task.data = std::move(data);
    return task;
}

std::optional<TabularStepView> tabular_step(const TabularBanditTask& task, TabularCursor& cursor) {
    const bool evaluate = cursor.step % 5 == 4;
    TabularStepView view;
    view.evaluate = evaluate;
    if (evaluate) {
        if (cursor.test_pos >= task.test.size()) return std::nullopt;
        view.sample = task.test[cursor.test_pos++];
    } else {
        if (cursor.train_pos >= task.train.size() || cursor.test_pos >= task.test.size()) return std::nullopt;
        view.sample = task.train[cursor.train_pos++];
    }
    ++cursor.step;
    return view;
}

int tabular_reward(const TabularBanditTask& task, std::size_t sample, std::size_t arm) {
    return task.data.labels.at(sample) == int(arm) ? 1 : 0;
}

TabularEnvironment::TabularEnvironment(TabularBanditTask task, std::uint64_t seed)
    : task_(std::move(task)), warm_rng_(make_rng(seed, "env:warm")) {}

std::vector<LoggedSample> TabularEnvironment::warm_start_data() {
    std::vector<LoggedSample> out;
    std::uniform_int_distribution<int> pick(0, task_.data.num_classes - 1);
    for (auto i : task_.train) {
        const int a = pick(warm_rng_);
        out.push_back({task_.data.features[i], task_.arm(a), tabular_reward(task_, i, std::size_t(a)), 0});
    }
    return out;
}

std::optional<BanditStep> TabularEnvironment::next() {
    const auto view = tabular_step(task_, cursor_);
    if (!view) return std::nullopt;
    current_ = view->sample;
    BanditStep s;
    s.context = task_.data.features[current_];
    for (int c = 0; c < task_.data.num_classes; ++c) {
        s.arms.push_back(task_.arm(c));
        s.means.push_back(double(tabular_reward(task_, current_, std::size_t(c))));
    }
    s.evaluate = view->evaluate;
    s.update = !view->evaluate;
    return s;
}

int TabularEnvironment::pull(std::size_t arm) { return tabular_reward(task_, current_, arm); }

// ------------------------------------------------------------ drift

void DriftSchedule::validate() const {
    for (std::size_t i = 0; i < phases.size(); ++i) {
        const auto& p = phases[i];
        if (p.end <= p.begin) throw std::invalid_argument("drift schedule: empty phase");
        if (!(p.boost >= 0 && p.boost <= 1 && p.diminish >= 0 && p.diminish <= 1))
            throw std::invalid_argument("drift schedule: probabilities must lie in [0,1]");
        if (i > 0 && phases[i - 1].end != p.begin)
            throw std::invalid_argument("drift schedule: phases must be contiguous and ordered");
    }
}

const DriftPhase* DriftSchedule::at(long step) const {
    for (const auto& p : phases)
        if (step >= p.begin && step < p.end) return &p;
    return nullptr;
}

DriftSchedule DriftSchedule::daily(long horizon, std::span<const double> probabilities, int boosted_category) {
    DriftSchedule s;
    const auto days = long(probabilities.size());
    if (days == 0 || horizon < days) throw std::invalid_argument("drift schedule: horizon shorter than day count");
    for (long d = 0; d < days; ++d) {
        const double p = probabilities[std::size_t(d)];
        s.phases.push_back({horizon * d / days, horizon * (d + 1) / days, boosted_category, p, p});
    }
    s.validate();
    return s;
}

double drifted_mean(double base_mean, int category, const DriftSchedule& schedule, long step) {
    const auto* phase = schedule.at(step);
    if (!phase) return base_mean;
    if (category == phase->boosted_category) return base_mean + (1.0 - base_mean) * phase->boost;
    return base_mean * (1.0 - phase->diminish);
}

int drift_step(int base_reward, int category, const DriftSchedule& schedule, long step, Rng& rng) {
    const auto* phase = schedule.at(step);
    if (!phase) return base_reward;
    if (category == phase->boosted_category) {
        if (base_reward == 0 && phase->boost > 0.0 && uniform01(rng) < phase->boost) return 1;
    } else if (base_reward == 1 && phase->diminish > 0.0 && uniform01(rng) < phase->diminish) {
        return 0;
    }
    return base_reward;
}

void DriftEnvironmentSpec::validate() const {
    if (categories < 2) throw std::invalid_argument("drift: need at least two categories");
    if (boosted_category < 0 || boosted_category >= categories)
        throw std::invalid_argument("drift: boosted_category out of range");
    if (articles_per_category < 1 || latent_dims < 0) throw std::invalid_argument("drift: bad article layout");
    if (valid_arms < 1 || valid_arms > categories * articles_per_category)
        throw std::invalid_argument("drift: valid_arms must be in [1, article count]");
    if (warm_start_samples < 0 || warm_start_intervals < 1) throw std::invalid_argument("drift: bad warm start");
    if (horizon < 1) throw std::invalid_argument("drift: horizon must be >= 1");
}

DriftEnvironment::DriftEnvironment(DriftEnvironmentSpec spec, std::uint64_t seed)
    : spec_(std::move(spec)),
      rng_(make_rng(seed, "env")),
      reward_rng_(make_rng(seed, "env:reward")),
      warm_rng_(make_rng(seed, "env:warm")) {
    spec_.validate();
    schedule_ = DriftSchedule::daily(spec_.horizon, spec_.daily_probabilities, spec_.boosted_category);
    Rng layout = make_rng(seed, "env:layout");
    std::normal_distribution<double> latent(0.0, 0.5);
    for (int c = 0; c < spec_.categories; ++c) {
        for (int a = 0; a < spec_.articles_per_category; ++a) {
            Eigen::VectorXd f = Eigen::VectorXd::Zero(spec_.categories + spec_.latent_dims);
            f(c) = 1.0;
            for (int l = 0; l < spec_.latent_dims; ++l) f(spec_.categories + l) = latent(layout);
            article_features_.push_back(std::move(f));
            article_category_.push_back(c);
            article_quality_.push_back(spec_.quality_spread * (2.0 * uniform01(layout) - 1.0));
        }
    }
}

Eigen::VectorXd DriftEnvironment::sample_context(Rng& rng) {
    // Normalized Exp(1) draws: a flat Dirichlet over category affinities.
    std::exponential_distribution<double> e(1.0);
    Eigen::VectorXd c(spec_.categories);
    for (int i = 0; i < spec_.categories; ++i) c(i) = e(rng);
    return c / c.sum();
}

double DriftEnvironment::base_mean(const Eigen::VectorXd& context, std::size_t article) const {
    const int cat = article_category_.at(article);
    const double base = cat == spec_.boosted_category ? spec_.boosted_base_rate : spec_.other_base_rate;
    return std::clamp(base + spec_.affinity_gain * context(cat) + article_quality_[article], 0.01, 0.99);
}

std::vector<LoggedSample> DriftEnvironment::warm_start_data() {
    std::vector<LoggedSample> out;
    std::uniform_int_distribution<std::size_t> pick(0, article_features_.size() - 1);
    for (int i = 0; i < spec_.warm_start_samples; ++i) {
        const auto ctx = sample_context(warm_rng_);
        const auto a = pick(warm_rng_);
        const int r = uniform01(warm_rng_) < base_mean(ctx, a) ? 1 : 0;
        const int interval = int(long(i) * spec_.warm_start_intervals / spec_.warm_start_samples);
        out.push_back({ctx, article_features_[a], r, interval});
    }
    return out;
}

std::optional<BanditStep> DriftEnvironment::next() {
    if (step_ + 1 >= spec_.horizon) return std::nullopt;
    ++step_;
    context_ = sample_context(rng_);
    std::vector<std::size_t> all(article_features_.size());
    std::iota(all.begin(), all.end(), 0);
    for (int i = 0; i < spec_.valid_arms; ++i) {
        std::uniform_int_distribution<std::size_t> pick(std::size_t(i), all.size() - 1);
        std::swap(all[std::size_t(i)], all[pick(rng_)]);
    }
    valid_.assign(all.begin(), all.begin() + spec_.valid_arms);
    BanditStep s;
    s.context = context_;
    for (auto a : valid_) {
        s.arms.push_back(article_features_[a]);
        s.means.push_back(drifted_mean(base_mean(context_, a), article_category_[a], schedule_, step_));
    }
    return s;
}

int DriftEnvironment::pull(std::size_t arm) {
    const auto a = valid_.at(arm);
    const int base = uniform01(reward_rng_) < base_mean(context_, a) ? 1 : 0;
    return drift_step(base, article_category_[a], schedule_, step_, reward_rng_);
}

// ------------------------------------------------------------ constant means

ConstantEnvironment::ConstantEnvironment(std::vector<double> means, long horizon, std::uint64_t seed)
    : means_(std::move(means)), horizon_(horizon), reward_rng_(make_rng(seed, "env:reward")) {
    if (means_.empty()) throw std::invalid_argument("constant environment: no arms");
    for (double m : means_)
        if (!(m >= 0 && m <= 1)) throw std::invalid_argument("constant environment: means must lie in [0,1]");
}

std::optional<BanditStep> ConstantEnvironment::next() {
    if (step_ >= horizon_) return std::nullopt;
    ++step_;
    BanditStep s;
    s.context = Eigen::VectorXd(0);
    const auto k = Eigen::Index(means_.size());
    for (Eigen::Index i = 0; i < k; ++i) s.arms.push_back(one_hot(k, i));
    s.means = means_;
    return s;
}

int ConstantEnvironment::pull(std::size_t arm) { return uniform01(reward_rng_) < means_.at(arm) ? 1 : 0; }

// ------------------------------------------------------------ coupling metric

namespace {

double kl_term(double a, double b) { return a > 0.0 ? a * std::log2(a / b) : 0.0; }

}  // namespace

double js_divergence_bernoulli(double p, double q) {
    if (!(p >= 0 && p <= 1 && q >= 0 && q <= 1)) throw std::invalid_argument("js_divergence: probabilities in [0,1]");
    const double m1 = 0.5 * (p + q), m0 = 1.0 - m1;
    const double kl_p = kl_term(p, m1) + kl_term(1.0 - p, m0);
    const double kl_q = kl_term(q, m1) + kl_term(1.0 - q, m0);
    return std::clamp(0.5 * (kl_p + kl_q), 0.0, 1.0);
}

double coupling_rho(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw std::invalid_argument("coupling_rho: sequences differ in length");
    if (p.empty()) throw std::invalid_argument("coupling_rho: need at least one interval");
    double total = 0.0;
    for (std::size_t t = 0; t < p.size(); ++t) total += js_divergence_bernoulli(p[t], q[t]);
    return 1.0 - total / double(p.size());
}

}  // namespace c3
