#include "c3/experiment.hpp"

#include "c3/persistence.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <numeric>

namespace c3 {

std::unique_ptr<Environment> make_environment(const EnvironmentConfig& config, std::uint64_t seed) {
    if (config.kind == "tabular") {
        const auto& t = config.tabular;
        TabularDataset data;
        if (t.dataset) {
            data = load_csv_dataset(*t.dataset);
        } else {
            Rng data_rng = make_rng(seed, "env:data");
            data = make_separable_blobs(t.synthetic.samples, t.synthetic.class_weights, data_rng, t.synthetic.separation,
                                        t.synthetic.offset);
        }
        Rng split_rng = make_rng(seed, "env:split");
        return std::make_unique<TabularEnvironment>(make_tabular_task(std::move(data), t.train_size, t.test_size, split_rng),
                                                    seed);
    }
    if (config.kind == "drift") return std::make_unique<DriftEnvironment>(config.drift, seed);
    if (config.kind == "coupled") return std::make_unique<CoupledArmEnvironment>(config.coupled, seed);
    if (config.kind == "constant")
        return std::make_unique<ConstantEnvironment>(config.constant.means, std::numeric_limits<long>::max(), seed);
    throw ConfigError("unknown environment kind '" + config.kind + "'");
}

std::unique_ptr<Agent> make_agent(const AgentConfig& a, const TrainingConfig& training,
                                  std::span<const LoggedSample> warm, std::uint64_t seed) {
    const auto agent_seed = derive_seed(seed, "agent:" + a.display_name());
    std::unique_ptr<Agent> agent;
    if (a.kind == "c3") {
        if (warm.empty()) throw ConfigError("c3 agent needs warm-start data to size its embedding network");
        std::vector<Eigen::Index> sizes{warm.front().input().size()};
        for (int h : a.hidden) sizes.push_back(h);
        sizes.push_back(a.embedding_dim);
        Rng init_rng = make_rng(seed, "training:init");
        auto phi = init_mlp<double>(sizes, init_rng);
        if (a.train_embedding && training.epochs > 0 && warm.size() >= 2) {
            TrainingConfig t = training;
            t.sigma = a.sigma;
            t.truncation_radius = a.truncation_radius;
            t.seed = derive_seed(seed, "training");
            phi = train(warm, t, std::move(phi)).params;
        }
        C3Config c;
        c.kernel = {a.sigma, a.truncation_radius};
        c.eviction = a.eviction;
        c.use_importance_weights = a.importance_weights;
        c.seed = agent_seed;
        agent = std::make_unique<C3Agent>(std::move(phi), c);
    } else if (a.kind == "linucb") {
        agent = std::make_unique<LinUcbAgent>(a.alpha, a.per_arm ? LinearFeatures::PerArm : LinearFeatures::Concat,
                                              a.ridge);
    } else if (a.kind == "lints") {
        agent = std::make_unique<LinTsAgent>(a.scale, agent_seed,
                                             a.per_arm ? LinearFeatures::PerArm : LinearFeatures::Concat, a.ridge);
    } else if (a.kind == "eps_greedy") {
        agent = std::make_unique<EpsilonGreedyAgent>(a.epsilon, agent_seed);
    } else if (a.kind == "uniform") {
        agent = std::make_unique<UniformAgent>(agent_seed);
    } else if (a.kind == "oracle") {
        agent = std::make_unique<OracleAgent>();
    } else {
        throw ConfigError("unknown agent kind '" + a.kind + "'");
    }
    agent->warm_start(warm);
    return agent;
}

std::vector<RegretRow> run_episode(Environment& env, Agent& agent, std::uint64_t seed, long horizon) {
    std::vector<RegretRow> rows;
    double cum = 0.0;
    long evaluated = 0;
    for (long t = 0; t < horizon; ++t) {
        auto step = env.next();
        if (!step) break;
        agent.reveal(step->means);
        const auto arm = agent.select(step->context, step->arms);
        const int reward = env.pull(arm);
        if (step->update) agent.observe(reward);
        if (!step->evaluate) continue;
        RegretRow row;
        row.step = ++evaluated;
        row.seed = seed;
        row.arm = arm;
        row.reward = reward;
        row.mu_chosen = step->means.at(arm);
        row.mu_best = *std::max_element(step->means.begin(), step->means.end());
        cum += row.mu_best - row.mu_chosen;
        row.cum_regret = cum;
        rows.push_back(row);
    }
    return rows;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
    config.validate();
    ExperimentResult result;
    for (const auto& a : config.agents) result.logs.push_back({a.display_name(), {}});

    const auto artifacts = config.output_dir / "artifacts";
    if (options.write_outputs) {
        std::filesystem::create_directories(config.output_dir);
        if (config.save_artifacts) std::filesystem::create_directories(artifacts);
        std::ofstream(config.output_dir / "config.resolved.json") << to_json(config).dump(2) << '\n';
    }

    for (std::size_t i = 0; i < config.agents.size(); ++i) {
        const auto& spec = config.agents[i];
        for (auto seed : config.seeds) {
            auto env = make_environment(config.environment, seed);
            const auto warm = env->warm_start_data();
            std::unique_ptr<Agent> agent;
            try {
                agent = make_agent(spec, config.training, warm, seed);
            } catch (const TrainingDiverged& e) {
                result.failures.push_back({spec.display_name(), seed, e.what()});
                continue;
            }
            auto rows = run_episode(*env, *agent, seed, config.horizon);
            auto& log = result.logs[i].rows;
            log.insert(log.end(), rows.begin(), rows.end());

            if (options.write_outputs && config.save_artifacts) {
                if (const auto* c3 = dynamic_cast<const C3Agent*>(agent.get())) {
                    const auto stem = spec.display_name() + "_seed" + std::to_string(seed);
                    persist_model(c3->phi(), artifacts / (stem + "_model.bin"));
                    persist_store(c3->store(), artifacts / (stem + "_store.bin"));
                }
            }
        }
    }
    if (options.write_outputs) emit_metrics(result.logs, config.output_dir, {config.relative_regret});
    return result;
}

}  // namespace c3

namespace c3 {

std::vector<SigmaRow> ablate_sigma(const ExperimentConfig& config, std::span<const double> sigmas,
                                   const RunOptions& options) {
    if (sigmas.empty()) throw ConfigError("ablate-sigma: no sigma values");
    bool any_c3 = false;
    for (const auto& a : config.agents) any_c3 = any_c3 || a.kind == "c3";
    if (!any_c3) throw ConfigError("ablate-sigma: the config has no c3 agent");
    std::vector<SigmaRow> rows;
    for (double sigma : sigmas) {
        auto cfg = config;
        for (auto& a : cfg.agents)
            if (a.kind == "c3") a.sigma = sigma;
        cfg.output_dir = config.output_dir / ("sigma_" + format_number(sigma));
        const auto result = run_experiment(cfg, options);
        for (const auto& log : result.logs) rows.push_back({sigma, log.agent, summarize(log.final_regrets())});
    }
    return rows;
}

void write_sigma_summary(std::span<const SigmaRow> rows, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "sigma,agent,seeds,mean_final_regret,sd,half_width\n";
    for (const auto& r : rows)
        out << format_number(r.sigma) << ',' << r.agent << ',' << r.final_regret.n << ','
            << format_number(r.final_regret.mean) << ',' << format_number(r.final_regret.sd) << ','
            << format_number(r.final_regret.half_width) << '\n';
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double r = 0.5 * double(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("spearman: need two equal-length series");
    const auto rx = average_ranks(x), ry = average_ranks(y);
    const auto n = Eigen::Index(x.size());
    const Eigen::Map<const Eigen::ArrayXd> a(rx.data(), n), b(ry.data(), n);
    const Eigen::ArrayXd da = a - a.mean(), db = b - b.mean();
    const double denom = std::sqrt((da * da).sum() * (db * db).sum());
    return denom > 0.0 ? (da * db).sum() / denom : 0.0;
}

CoupleStudyResult run_couple_study(const CoupleStudyConfig& config, std::uint64_t seed) {
    config.spec.validate();
    Rng data_rng = make_rng(seed, "env:data");
    const auto data = coupled_episodes(config.spec, data_rng);

    const auto k = Eigen::Index(config.spec.arm_count());
    std::vector<Eigen::Index> sizes{k};
    for (int h : config.hidden) sizes.push_back(h);
    sizes.push_back(config.embedding_dim);
    Rng init_rng = make_rng(seed, "training:init");
    auto t = config.training;
    t.seed = derive_seed(seed, "training");
    t.time_intervals = config.spec.episodes;
    auto trained = train(data.samples, t, init_mlp<double>(sizes, init_rng));

    CoupleStudyResult result;
    result.epoch_losses = trained.epoch_losses;
    const Eigen::MatrixXd emb = mlp_forward_batch(trained.params, Eigen::MatrixXd::Identity(k, k));

    // Per-episode smoothed reward rates for the empirical coupling metric.
    const auto episodes = std::size_t(config.spec.episodes);
    Eigen::MatrixXd hits = Eigen::MatrixXd::Zero(Eigen::Index(episodes), k);
    Eigen::MatrixXd pulls = Eigen::MatrixXd::Zero(Eigen::Index(episodes), k);
    for (const auto& s : data.samples) {
        Eigen::Index arm;
        s.arm.maxCoeff(&arm);
        hits(s.interval, arm) += s.reward;
        pulls(s.interval, arm) += 1.0;
    }
    auto rates = [&](Eigen::Index arm) {
        std::vector<double> r(episodes);
        for (std::size_t e = 0; e < episodes; ++e)
            r[e] = smoothed_rate(hits(Eigen::Index(e), arm), pulls(Eigen::Index(e), arm));
        return r;
    };
    const auto anchor = rates(0);
    std::vector<double> rho, dist;
    for (Eigen::Index i = 1; i < k; ++i) {
        CoupleArmRow row;
        row.arm = std::size_t(i);
        row.rho = config.spec.correlations[std::size_t(i - 1)];
        row.rho_empirical = coupling_rho(anchor, rates(i));
        row.distance = (emb.col(i) - emb.col(0)).norm();
        rho.push_back(row.rho);
        dist.push_back(row.distance);
        result.arms.push_back(row);
    }
    result.spearman = spearman(rho, dist);
    return result;
}

void write_couple_csv(const CoupleStudyResult& result, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "arm,rho,rho_empirical,distance_to_anchor\n";
    for (const auto& r : result.arms)
        out << r.arm << ',' << format_number(r.rho) << ',' << format_number(r.rho_empirical) << ','
            << format_number(r.distance) << '\n';
    out << "# spearman," << format_number(result.spearman) << '\n';
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace c3
