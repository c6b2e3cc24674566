#pragma once

#include "c3/agents.hpp"
#include "c3/config.hpp"
#include "c3/environments.hpp"
#include "c3/metrics.hpp"

#include <memory>
#include <string>
#include <vector>

namespace c3 {

/// Builds the environment for one seed. Every agent gets its own instance
/// built from the same seed.
std::unique_ptr<Environment> make_environment(const EnvironmentConfig& config, std::uint64_t seed);

/// Builds an agent for one seed. A C3 agent first trains its embedding
/// network on `warm` (unless disabled) and then stores the embedded samples;
/// every other agent receives `warm` through its warm-start hook.
std::unique_ptr<Agent> make_agent(const AgentConfig& agent, const TrainingConfig& training,
                                  std::span<const LoggedSample> warm, std::uint64_t seed);

/// Runs `agent` through `env` for at most `horizon` steps and returns one
/// row per evaluation step.
std::vector<RegretRow> run_episode(Environment& env, Agent& agent, std::uint64_t seed, long horizon);

struct RunFailure {
    std::string agent;
    std::uint64_t seed = 0;
    std::string message;
};

struct ExperimentResult {
    std::vector<RegretLog> logs;  // one per agent, in config order
    std::vector<RunFailure> failures;
};

struct RunOptions {
    bool write_outputs = true;  // metrics CSVs, resolved config and checkpoints
};

ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

struct SigmaRow {
    double sigma = 1.0;
    std::string agent;
    SummaryStats final_regret;
};

/// Reruns the experiment once per bandwidth, overriding sigma of every C3
/// agent. Outputs of each run go to <output_dir>/sigma_<value>.
std::vector<SigmaRow> ablate_sigma(const ExperimentConfig& config, std::span<const double> sigmas,
                                   const RunOptions& options = {});

void write_sigma_summary(std::span<const SigmaRow> rows, const std::filesystem::path& path);

// ------------------------------------------------------------ coupled-arm study

struct CoupleArmRow {
    std::size_t arm = 0;
    double rho = 0.0;            // generator correlation with the anchor
    double rho_empirical = 0.0;  // coupling metric from smoothed per-episode rates
    double distance = 0.0;       // embedding distance to the anchor arm
};

struct CoupleStudyResult {
    std::vector<CoupleArmRow> arms;  // non-anchor arms
    double spearman = 0.0;           // rank correlation of rho and distance
    std::vector<double> epoch_losses;
};

/// Generates the coupled dataset, trains the embedding on it and measures
/// each arm's embedding distance to the anchor.
CoupleStudyResult run_couple_study(const CoupleStudyConfig& config, std::uint64_t seed);

void write_couple_csv(const CoupleStudyResult& result, const std::filesystem::path& path);

/// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace c3
