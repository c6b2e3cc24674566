// c3: command line front end for training, experiments and the ablations.
//
//   c3 train        --config FILE [--seed N] [--out DIR]
//   c3 run          --config FILE [--seed N] [--out DIR]
//   c3 ablate-sigma --config FILE [--sigmas 0.33,0.5,1,2,3] [--seed N] [--out DIR]
//   c3 couple       [--config FILE] [--seed N] [--out DIR]
//
// Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.

#include "c3/config.hpp"
#include "c3/experiment.hpp"
#include "c3/persistence.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

struct CommonArgs {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required) {
    auto* opt = cmd->add_option("--config", args.config, "JSON configuration file");
    if (config_required) opt->required();
    cmd->add_option("--seed", args.seed, "Run only this seed");
    cmd->add_option("--out", args.out, "Output directory (overrides output_dir)");
}

c3::ExperimentConfig experiment_config(const CommonArgs& args) {
    auto cfg = c3::load_config(args.config);
    if (args.seed) cfg.seeds = {*args.seed};
    if (!args.out.empty()) cfg.output_dir = args.out;
    cfg.validate();
    return cfg;
}

int report_failures(const c3::ExperimentResult& result) {
    for (const auto& f : result.failures)
        std::cerr << "run failed: agent " << f.agent << ", seed " << f.seed << ": " << f.message << '\n';
    return result.failures.empty() ? kExitOk : kExitRuntime;
}

int cmd_train(const CommonArgs& args) {
    const auto cfg = experiment_config(args);
    const c3::AgentConfig* spec = nullptr;
    for (const auto& a : cfg.agents)
        if (a.kind == "c3" && !spec) spec = &a;
    if (!spec) throw c3::ConfigError("train: the config has no c3 agent to take the network shape from");

    std::filesystem::create_directories(cfg.output_dir);
    for (auto seed : cfg.seeds) {
        auto env = c3::make_environment(cfg.environment, seed);
        const auto warm = env->warm_start_data();
        if (warm.size() < 2) throw c3::ConfigError("train: the environment provides no warm-start data");
        std::vector<Eigen::Index> sizes{warm.front().input().size()};
        for (int h : spec->hidden) sizes.push_back(h);
        sizes.push_back(spec->embedding_dim);
        auto init_rng = c3::make_rng(seed, "training:init");
        auto t = cfg.training;
        t.sigma = spec->sigma;
        t.truncation_radius = spec->truncation_radius;
        t.seed = c3::derive_seed(seed, "training");
        const auto result = c3::train(warm, t, c3::init_mlp<double>(sizes, init_rng));

        const auto stem = "seed" + std::to_string(seed);
        c3::persist_model(result.params, cfg.output_dir / (stem + "_model.bin"));
        std::ofstream trace(cfg.output_dir / (stem + "_losses.csv"));
        trace << "epoch,train_loss,validation_loss\n";
        for (std::size_t e = 0; e < result.epoch_losses.size(); ++e) {
            trace << e << ',' << c3::format_number(result.epoch_losses[e]) << ',';
            if (e < result.validation_losses.size()) trace << c3::format_number(result.validation_losses[e]);
            trace << '\n';
        }
        std::cout << "seed " << seed << ": final epoch loss "
                  << (result.epoch_losses.empty() ? std::string("n/a")
                                                  : c3::format_number(result.epoch_losses.back()))
                  << ", selected epoch " << result.selected_epoch << '\n';
    }
    return kExitOk;
}

int cmd_run(const CommonArgs& args) {
    const auto cfg = experiment_config(args);
    const auto result = c3::run_experiment(cfg);
    for (const auto& log : result.logs) {
        const auto s = c3::summarize(log.final_regrets());
        std::cout << log.agent << ": mean final regret " << c3::format_number(s.mean) << " +/- "
                  << c3::format_number(s.half_width) << " over " << s.n << " seeds\n";
    }
    std::cout << "metrics written to " << cfg.output_dir.string() << '\n';
    return report_failures(result);
}

int cmd_ablate(const CommonArgs& args, const std::vector<double>& sigmas) {
    const auto cfg = experiment_config(args);
    const auto rows = c3::ablate_sigma(cfg, sigmas);
    c3::write_sigma_summary(rows, cfg.output_dir / "sigma_summary.csv");
    for (const auto& r : rows)
        std::cout << "sigma " << c3::format_number(r.sigma) << " " << r.agent << ": mean final regret "
                  << c3::format_number(r.final_regret.mean) << " +/- " << c3::format_number(r.final_regret.half_width)
                  << '\n';
    return kExitOk;
}

int cmd_couple(const CommonArgs& args) {
    const auto cfg = args.config.empty() ? c3::CoupleStudyConfig{} : c3::load_couple_config(args.config);
    const auto seed = args.seed.value_or(0);
    const std::filesystem::path out = args.out.empty() ? std::filesystem::path("out") : std::filesystem::path(args.out);
    std::filesystem::create_directories(out);
    const auto result = c3::run_couple_study(cfg, seed);
    const auto path = out / ("couple_seed" + std::to_string(seed) + ".csv");
    c3::write_couple_csv(result, path);
    std::cout << "spearman(rho, distance) = " << c3::format_number(result.spearman) << "; wrote " << path.string()
              << '\n';
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Contextual bandits with coupled-arm kernel regression"};
    app.require_subcommand(1);

    CommonArgs train_args, run_args, ablate_args, couple_args;
    std::vector<double> sigmas{0.33, 0.5, 1.0, 2.0, 3.0};

    auto* train = app.add_subcommand("train", "Train the embedding network on warm-start data");
    add_common(train, train_args, true);
    auto* run = app.add_subcommand("run", "Run an experiment configuration");
    add_common(run, run_args, true);
    auto* ablate = app.add_subcommand("ablate-sigma", "Sweep the kernel bandwidth of C3 agents");
    add_common(ablate, ablate_args, true);
    ablate->add_option("--sigmas", sigmas, "Bandwidths to sweep")->delimiter(',');
    auto* couple = app.add_subcommand("couple", "Embedding distance versus arm coupling study");
    add_common(couple, couple_args, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitValidation;
    }

    try {
        if (*train) return cmd_train(train_args);
        if (*run) return cmd_run(run_args);
        if (*ablate) return cmd_ablate(ablate_args, sigmas);
        if (*couple) return cmd_couple(couple_args);
    } catch (const c3::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid argument: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitValidation;
}
