#pragma once

#include "c3/agents.hpp"
#include "c3/environments.hpp"
#include "c3/training.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace c3 {

/// Bad or inconsistent configuration. The CLI maps it to exit code 1.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SyntheticTabularSpec {
    std::size_t samples = 6000;
    std::vector<double> class_weights{0.4, 0.3, 0.2, 0.1};
    double separation = 4.0;
    double offset = 2.0;
};

struct TabularSpec {
    std::optional<std::filesystem::path> dataset;  // CSV; synthetic blobs when absent
    SyntheticTabularSpec synthetic;
    std::size_t train_size = 4000;
    std::size_t test_size = 1000;
};

struct ConstantSpec {
    std::vector<double> means{0.9, 0.1};
};

struct EnvironmentConfig {
    std::string kind = "tabular";  // tabular | drift | coupled | constant
    TabularSpec tabular;
    DriftEnvironmentSpec drift;
    CoupledArmSpec coupled;
    ConstantSpec constant;
};

struct AgentConfig {
    std::string kind = "c3";  // c3 | linucb | lints | eps_greedy | uniform | oracle
    std::string label;        // output name; defaults to the agent's own name

    // c3
    std::vector<int> hidden{64};
    int embedding_dim = 2;
    double sigma = 1.0;
    std::optional<double> truncation_radius;
    EvictionPolicy eviction;
    bool importance_weights = true;
    bool train_embedding = true;

    // linear baselines
    double alpha = 1.96;
    double scale = 0.0;  // LinTS posterior scale; <= 0 uses the default formula
    double ridge = 1.0;
    bool per_arm = false;

    // eps-greedy
    double epsilon = 0.1;

    std::string display_name() const;
};

struct ExperimentConfig {
    EnvironmentConfig environment;
    std::vector<AgentConfig> agents;
    TrainingConfig training;
    std::vector<std::uint64_t> seeds{0};
    long horizon = 1000000;
    std::filesystem::path output_dir = "out";
    bool relative_regret = false;
    bool save_artifacts = true;

    void validate() const;
};

struct CoupleStudyConfig {
    CoupledArmSpec spec;
    std::vector<int> hidden{256};
    int embedding_dim = 2;
    TrainingConfig training = default_training();

    static TrainingConfig default_training();
};

/// Unknown keys anywhere in the document are errors.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);

nlohmann::json to_json(const ExperimentConfig& config);

/// Keys: "coupled", "hidden", "embedding_dim", "training"; all optional.
CoupleStudyConfig parse_couple_config(const nlohmann::json& doc);
CoupleStudyConfig load_couple_config(const std::filesystem::path& path);

}  // namespace c3
