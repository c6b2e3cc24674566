#include "c3/config.hpp"

#include <fstream>
#include <set>

namespace c3 {

using nlohmann::json;

namespace {

// Reads fields of one JSON object and rejects anything it was not asked for.
class ObjectReader {
public:
    ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
    }

    template <typename T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(where_ + "." + key + ": " + e.what());
        }
    }

    template <typename T>
    void get(const char* key, std::optional<T>& out) {
        seen_.insert(key);
        if (!j_.contains(key) || j_.at(key).is_null()) return;
        T v{};
        get(key, v);
        out = v;
    }

    const json* child(const char* key) {
        seen_.insert(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }

    std::string path(const char* key) const { return where_ + "." + key; }

    void finish() const {
        for (const auto& [k, v] : j_.items())
            if (!seen_.count(k)) throw ConfigError(where_ + ": unknown key '" + k + "'");
    }

private:
    const json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

void read_tabular(const json& j, TabularSpec& t) {
    ObjectReader r(j, "environment.tabular");
    std::optional<std::string> dataset;
    r.get("dataset", dataset);
    if (dataset) t.dataset = *dataset;
    if (const auto* s = r.child("synthetic")) {
        ObjectReader rs(*s, r.path("synthetic"));
        rs.get("samples", t.synthetic.samples);
        rs.get("class_weights", t.synthetic.class_weights);
        rs.get("separation", t.synthetic.separation);
        rs.get("offset", t.synthetic.offset);
        rs.finish();
    }
    r.get("train_size", t.train_size);
    r.get("test_size", t.test_size);
    r.finish();
}

void read_drift(const json& j, DriftEnvironmentSpec& d) {
    ObjectReader r(j, "environment.drift");
    r.get("categories", d.categories);
    r.get("boosted_category", d.boosted_category);
    r.get("articles_per_category", d.articles_per_category);
    r.get("latent_dims", d.latent_dims);
    r.get("valid_arms", d.valid_arms);
    r.get("boosted_base_rate", d.boosted_base_rate);
    r.get("other_base_rate", d.other_base_rate);
    r.get("affinity_gain", d.affinity_gain);
    r.get("quality_spread", d.quality_spread);
    r.get("warm_start_samples", d.warm_start_samples);
    r.get("warm_start_intervals", d.warm_start_intervals);
    r.get("horizon", d.horizon);
    r.get("daily_probabilities", d.daily_probabilities);
    r.finish();
}

void read_coupled(const json& j, CoupledArmSpec& c) {
    ObjectReader r(j, "environment.coupled");
    r.get("correlations", c.correlations);
    r.get("concentration", c.concentration);
    r.get("episodes", c.episodes);
    r.get("samples_per_episode", c.samples_per_episode);
    r.finish();
}

EnvironmentConfig read_environment(const json& j) {
    EnvironmentConfig env;
    ObjectReader r(j, "environment");
    r.get("kind", env.kind);
    if (const auto* t = r.child("tabular")) read_tabular(*t, env.tabular);
    if (const auto* d = r.child("drift")) read_drift(*d, env.drift);
    if (const auto* c = r.child("coupled")) read_coupled(*c, env.coupled);
    if (const auto* c = r.child("constant")) {
        ObjectReader rc(*c, "environment.constant");
        rc.get("means", env.constant.means);
        rc.finish();
    }
    r.finish();
    return env;
}

AgentConfig read_agent(const json& j, std::size_t index) {
    AgentConfig a;
    ObjectReader r(j, "agents[" + std::to_string(index) + "]");
    r.get("kind", a.kind);
    r.get("label", a.label);
    r.get("hidden", a.hidden);
    r.get("embedding_dim", a.embedding_dim);
    r.get("sigma", a.sigma);
    r.get("truncation_radius", a.truncation_radius);
    r.get("eviction_period", a.eviction.period);
    r.get("eviction_fraction", a.eviction.fraction);
    r.get("eviction_exact_count", a.eviction.exact_count);
    r.get("importance_weights", a.importance_weights);
    r.get("train_embedding", a.train_embedding);
    r.get("alpha", a.alpha);
    r.get("scale", a.scale);
    r.get("ridge", a.ridge);
    r.get("per_arm", a.per_arm);
    r.get("epsilon", a.epsilon);
    r.finish();
    return a;
}

TrainingConfig read_training(const json& j) {
    TrainingConfig t;
    ObjectReader r(j, "training");
    r.get("epochs", t.epochs);
    r.get("batch_size", t.batch_size);
    r.get("learning_rate", t.learning_rate);
    r.get("lr_decay", t.lr_decay);
    r.get("lambda_ece", t.lambda_ece);
    r.get("ece_bins", t.ece_bins);
    r.get("ref_fraction", t.ref_fraction);
    r.get("sample_fraction", t.sample_fraction);
    r.get("time_intervals", t.time_intervals);
    r.get("differentiate_weights", t.differentiate_weights);
    r.get("validation_fraction", t.validation_fraction);
    r.finish();
    return t;
}

}  // namespace

std::string AgentConfig::display_name() const {
    if (!label.empty()) return label;
    if (kind == "c3" && !importance_weights) return "c3_nwkr";
    return kind;
}

void ExperimentConfig::validate() const {
    static const std::set<std::string> env_kinds{"tabular", "drift", "coupled", "constant"};
    static const std::set<std::string> agent_kinds{"c3", "linucb", "lints", "eps_greedy", "uniform", "oracle"};
    if (!env_kinds.count(environment.kind)) throw ConfigError("environment.kind: unknown '" + environment.kind + "'");
    if (agents.empty()) throw ConfigError("agents: at least one agent is required");
    if (seeds.empty()) throw ConfigError("seeds: at least one seed is required");
    if (horizon < 1) throw ConfigError("horizon must be >= 1");
    std::set<std::string> names;
    for (const auto& a : agents) {
        if (!agent_kinds.count(a.kind)) throw ConfigError("agents: unknown kind '" + a.kind + "'");
        if (!names.insert(a.display_name()).second)
            throw ConfigError("agents: duplicate name '" + a.display_name() + "'; set distinct labels");
        if (a.display_name().find_first_of("/\\,") != std::string::npos)
            throw ConfigError("agents: label '" + a.display_name() + "' contains a path separator or comma");
        if (a.kind == "c3") {
            if (a.embedding_dim < 1) throw ConfigError("agents: embedding_dim must be >= 1");
            for (int h : a.hidden)
                if (h < 1) throw ConfigError("agents: hidden sizes must be >= 1");
            try {
                KernelConfigd{a.sigma, a.truncation_radius}.validate();
                a.eviction.validate();
            } catch (const std::invalid_argument& e) {
                throw ConfigError(std::string("agents: ") + e.what());
            }
        }
        if (a.kind == "eps_greedy" && !(a.epsilon >= 0.0 && a.epsilon <= 1.0))
            throw ConfigError("agents: epsilon must be in [0, 1]");
        if ((a.kind == "linucb" || a.kind == "lints") && !(a.ridge > 0.0))
            throw ConfigError("agents: ridge must be > 0");
    }
    try {
        training.validate();
        if (environment.kind == "drift") environment.drift.validate();
        if (environment.kind == "coupled") environment.coupled.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (environment.kind == "tabular" && environment.tabular.dataset &&
        !std::filesystem::exists(*environment.tabular.dataset))
        throw ConfigError("environment.tabular.dataset: file not found: " + environment.tabular.dataset->string());
}

ExperimentConfig parse_config(const json& doc) {
    ExperimentConfig cfg;
    ObjectReader r(doc, "config");
    if (const auto* e = r.child("environment")) cfg.environment = read_environment(*e);
    if (const auto* a = r.child("agents")) {
        if (!a->is_array()) throw ConfigError("agents: expected an array");
        for (std::size_t i = 0; i < a->size(); ++i) cfg.agents.push_back(read_agent(a->at(i), i));
    }
    if (const auto* t = r.child("training")) cfg.training = read_training(*t);
    r.get("seeds", cfg.seeds);
    r.get("horizon", cfg.horizon);
    std::string out = cfg.output_dir.string();
    r.get("output_dir", out);
    cfg.output_dir = out;
    r.get("relative_regret", cfg.relative_regret);
    r.get("save_artifacts", cfg.save_artifacts);
    r.finish();
    cfg.validate();
    return cfg;
}

namespace {

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

}  // namespace

ExperimentConfig load_config(const std::filesystem::path& path) {
    auto cfg = parse_config(read_json_file(path));
    // Relative dataset paths are resolved against the config file.
    auto& ds = cfg.environment.tabular.dataset;
    if (ds && ds->is_relative()) {
        ds = path.parent_path() / *ds;
        if (!std::filesystem::exists(*ds)) throw ConfigError("environment.tabular.dataset: file not found: " + ds->string());
    }
    return cfg;
}

CoupleStudyConfig parse_couple_config(const json& doc) {
    CoupleStudyConfig cfg;
    ObjectReader r(doc, "config");
    if (const auto* c = r.child("coupled")) read_coupled(*c, cfg.spec);
    r.get("hidden", cfg.hidden);
    r.get("embedding_dim", cfg.embedding_dim);
    if (const auto* t = r.child("training")) {
        // Unset training keys keep the study defaults rather than the generic ones.
        ObjectReader rt(*t, "training");
        auto& tr = cfg.training;
        rt.get("epochs", tr.epochs);
        rt.get("batch_size", tr.batch_size);
        rt.get("learning_rate", tr.learning_rate);
        rt.get("lr_decay", tr.lr_decay);
        rt.get("lambda_ece", tr.lambda_ece);
        rt.get("ece_bins", tr.ece_bins);
        rt.get("ref_fraction", tr.ref_fraction);
        rt.get("sample_fraction", tr.sample_fraction);
        rt.get("sigma", tr.sigma);
        rt.get("differentiate_weights", tr.differentiate_weights);
        rt.finish();
    }
    r.finish();
    try {
        cfg.spec.validate();
        cfg.training.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (cfg.embedding_dim < 1) throw ConfigError("embedding_dim must be >= 1");
    for (int h : cfg.hidden)
        if (h < 1) throw ConfigError("hidden sizes must be >= 1");
    return cfg;
}

CoupleStudyConfig load_couple_config(const std::filesystem::path& path) {
    return parse_couple_config(read_json_file(path));
}

TrainingConfig CoupleStudyConfig::default_training() {
    TrainingConfig t;
    t.epochs = 4;
    t.sigma = 1.0;
    t.lambda_ece = 5.0;
    t.ece_bins = 5;
    t.sample_fraction = 0.5;
    t.ref_fraction = 0.2;
    return t;
}

json to_json(const ExperimentConfig& c) {
    json env{{"kind", c.environment.kind}};
    const auto& t = c.environment.tabular;
    env["tabular"] = {{"train_size", t.train_size},
                      {"test_size", t.test_size},
                      {"synthetic",
                       {{"samples", t.synthetic.samples},
                        {"class_weights", t.synthetic.class_weights},
                        {"separation", t.synthetic.separation},
                        {"offset", t.synthetic.offset}}}};
    if (t.dataset) env["tabular"]["dataset"] = t.dataset->string();
    const auto& d = c.environment.drift;
    env["drift"] = {{"categories", d.categories},
                    {"boosted_category", d.boosted_category},
                    {"articles_per_category", d.articles_per_category},
                    {"latent_dims", d.latent_dims},
                    {"valid_arms", d.valid_arms},
                    {"boosted_base_rate", d.boosted_base_rate},
                    {"other_base_rate", d.other_base_rate},
                    {"affinity_gain", d.affinity_gain},
                    {"quality_spread", d.quality_spread},
                    {"warm_start_samples", d.warm_start_samples},
                    {"warm_start_intervals", d.warm_start_intervals},
                    {"horizon", d.horizon},
                    {"daily_probabilities", d.daily_probabilities}};
    const auto& cp = c.environment.coupled;
    env["coupled"] = {{"correlations", cp.correlations},
                      {"concentration", cp.concentration},
                      {"episodes", cp.episodes},
                      {"samples_per_episode", cp.samples_per_episode}};
    env["constant"] = {{"means", c.environment.constant.means}};

    json agents = json::array();
    for (const auto& a : c.agents) {
        json j{{"kind", a.kind},
               {"hidden", a.hidden},
               {"embedding_dim", a.embedding_dim},
               {"sigma", a.sigma},
               {"eviction_period", a.eviction.period},
               {"eviction_fraction", a.eviction.fraction},
               {"eviction_exact_count", a.eviction.exact_count},
               {"importance_weights", a.importance_weights},
               {"train_embedding", a.train_embedding},
               {"alpha", a.alpha},
               {"scale", a.scale},
               {"ridge", a.ridge},
               {"per_arm", a.per_arm},
               {"epsilon", a.epsilon}};
        if (!a.label.empty()) j["label"] = a.label;
        if (a.truncation_radius) j["truncation_radius"] = *a.truncation_radius;
        agents.push_back(std::move(j));
    }
    const auto& tr = c.training;
    json training{{"epochs", tr.epochs},
                  {"batch_size", tr.batch_size},
                  {"learning_rate", tr.learning_rate},
                  {"lr_decay", tr.lr_decay},
                  {"lambda_ece", tr.lambda_ece},
                  {"ece_bins", tr.ece_bins},
                  {"ref_fraction", tr.ref_fraction},
                  {"sample_fraction", tr.sample_fraction},
                  {"time_intervals", tr.time_intervals},
                  {"differentiate_weights", tr.differentiate_weights},
                  {"validation_fraction", tr.validation_fraction}};
    return {{"environment", env},
            {"agents", agents},
            {"training", training},
            {"seeds", c.seeds},
            {"horizon", c.horizon},
            {"output_dir", c.output_dir.string()},
            {"relative_regret", c.relative_regret},
            {"save_artifacts", c.save_artifacts}};
}

}  // namespace c3
