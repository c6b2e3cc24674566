#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "c3/config.hpp"
#include "c3/experiment.hpp"
#include "c3/persistence.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace c3;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("c3_harness_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> csv_lines(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::string> out;
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

ExperimentConfig constant_config(std::vector<std::string> agents, long horizon) {
    ExperimentConfig cfg;
    cfg.environment.kind = "constant";
    cfg.environment.constant.means = {0.9, 0.1};
    for (const auto& a : agents) {
        AgentConfig ac;
        ac.kind = a;
        cfg.agents.push_back(ac);
    }
    cfg.horizon = horizon;
    return cfg;
}

ExperimentConfig small_tabular_config() {
    const auto doc = nlohmann::json::parse(R"({
        "environment": {"kind": "tabular",
                        "tabular": {"synthetic": {"samples": 400}, "train_size": 250, "test_size": 100}},
        "agents": [{"kind": "c3", "hidden": [8], "sigma": 1.0},
                   {"kind": "linucb"}, {"kind": "eps_greedy"}, {"kind": "uniform"}],
        "training": {"epochs": 2},
        "seeds": [0, 1],
        "relative_regret": true
    })");
    return parse_config(doc);
}

int run_cli(const std::string& args, const fs::path& log) {
    const auto cmd = std::string(C3_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("cumulative regret") {
    const std::vector<double> gaps{0.0, 0.5, 0.25, 0.0, 1.0};
    CHECK(cumulative_regret(gaps) == std::vector<double>{0.0, 0.5, 0.75, 0.75, 1.75});
    std::vector<RegretRow> rows;
    for (int s = 0; s < 2; ++s)
        for (int t = 0; t < 3; ++t) rows.push_back({t, std::uint64_t(s), 0, 0, 0.5, 0.75, 0.0});
    const auto cr = cumulative_regret(rows);
    CHECK(cr == std::vector<double>{0.25, 0.5, 0.75, 0.25, 0.5, 0.75});
}

TEST_CASE("summary statistics") {
    const std::vector<double> v{1, 2, 3, 4};
    const auto s = summarize(v);
    CHECK(s.n == 4);
    CHECK(s.mean == doctest::Approx(2.5));
    CHECK(s.sd == doctest::Approx(std::sqrt(5.0 / 3.0)));
    CHECK(s.half_width == doctest::Approx(1.96 * std::sqrt(5.0 / 3.0) / 2.0));
    const auto one = summarize(std::vector<double>{7.0});
    CHECK(one.mean == 7.0);
    CHECK(one.sd == 0.0);
}

TEST_CASE("format_number round trips") {
    for (double x : {0.1, 1.0 / 3.0, 400.0, -2.5e-17, 0.0}) CHECK(std::stod(format_number(x)) == x);
    CHECK(format_number(400.0) == "400");
}

TEST_CASE("persistence round trips are bit exact") {
    const auto dir = scratch("persist");
    Rng rng = make_rng(1, "t");
    Eigen::MatrixXd E = Eigen::MatrixXd::Random(3, 40);
    std::vector<int> r, iv;
    for (int i = 0; i < 40; ++i) r.push_back(i % 3 == 0), iv.push_back(i / 10);
    auto store = ReferenceStored::from_samples(E, r, KernelConfigd{0.7, 2.5}, iv);
    const Eigen::Vector3d extra(0.1, 0.2, 0.3);
    const auto kvec = kernel_vector(extra, store);
    store.append(extra, 1, std::span<const double>(kvec.data(), std::size_t(kvec.size())), 3);
    persist_store(store, dir / "store.bin");
    const auto back = load_store(dir / "store.bin");
    CHECK(back.size() == store.size());
    CHECK(back.dim() == store.dim());
    CHECK(back.kernel_config().sigma == store.kernel_config().sigma);
    CHECK(back.kernel_config().truncation_radius == store.kernel_config().truncation_radius);
    CHECK(back.embeddings() == store.embeddings());
    CHECK(std::equal(back.rewards().begin(), back.rewards().end(), store.rewards().begin()));
    CHECK(std::equal(back.accumulators().begin(), back.accumulators().end(), store.accumulators().begin()));
    CHECK(std::equal(back.intervals().begin(), back.intervals().end(), store.intervals().begin()));

    const auto net = init_mlp<double>(std::vector<Eigen::Index>{4, 7, 5, 2}, rng);
    persist_model(net, dir / "model.bin");
    const auto m = load_model(dir / "model.bin");
    CHECK(m.flatten() == net.flatten());
    CHECK(m.layers.size() == 3);

    SUBCASE("errors") {
        const auto bytes = slurp(dir / "model.bin");
        auto write = [&](const std::string& name, const std::string& body) {
            std::ofstream(dir / name, std::ios::binary) << body;
            return dir / name;
        };
        CHECK_THROWS_AS(load_model(write("short.bin", bytes.substr(0, bytes.size() / 2))), TruncatedFile);
        auto flipped = bytes;
        flipped[flipped.size() / 2] ^= 0x10;
        CHECK_THROWS_AS(load_model(write("flip.bin", flipped)), ChecksumMismatch);
        auto version = bytes;
        version[4] = 99;
        CHECK_THROWS_AS(load_model(write("version.bin", version)), VersionMismatch);
        CHECK_THROWS_AS(load_store(dir / "model.bin"), VersionMismatch);
        CHECK_THROWS_AS(load_model(dir / "missing.bin"), PersistenceError);
    }
}

TEST_CASE("oracle has zero regret and uniform pays half the gap") {
    auto cfg = constant_config({"oracle", "uniform"}, 1000);
    cfg.seeds = {0, 1, 2, 3, 4};
    const auto res = run_experiment(cfg, {false});
    REQUIRE(res.failures.empty());
    REQUIRE(res.logs.size() == 2);
    for (double r : res.logs[0].final_regrets()) CHECK(r == 0.0);
    for (double r : res.logs[1].final_regrets()) CHECK(std::abs(r - 400.0) < 50.0);
    CHECK(res.logs[1].rows.size() == 5000);
}

TEST_CASE("metrics files") {
    auto cfg = constant_config({"uniform", "oracle"}, 50);
    cfg.seeds = {3, 4};
    cfg.relative_regret = true;
    cfg.output_dir = scratch("metrics");
    const auto res = run_experiment(cfg);
    const auto steps = csv_lines(cfg.output_dir / "uniform_steps.csv");
    CHECK(steps.front() == "step,seed,arm,reward,mu_chosen,mu_best,cum_regret");
    CHECK(steps.size() == 101);
    const auto summary = csv_lines(cfg.output_dir / "summary.csv");
    CHECK(summary.front() == "agent,seed,final_regret,mean_final_regret,half_width");
    CHECK(summary.size() == 5);
    const auto s = summarize(res.logs[0].final_regrets());
    const auto expect_prefix = "uniform,3," + format_number(res.logs[0].final_regrets()[0]) + "," +
                               format_number(s.mean) + "," + format_number(s.half_width);
    CHECK(summary[1] == expect_prefix);
    const auto rel = csv_lines(cfg.output_dir / "relative_regret.csv");
    CHECK(rel.front() == "agent,seed,step,relative_regret");
    CHECK(fs::exists(cfg.output_dir / "config.resolved.json"));
}

TEST_CASE("identical config and seed give byte-identical outputs") {
    auto cfg = small_tabular_config();
    cfg.output_dir = scratch("det_a");
    run_experiment(cfg);
    auto again = cfg;
    again.output_dir = scratch("det_b");
    run_experiment(again);
    int compared = 0;
    for (const auto& e : fs::recursive_directory_iterator(cfg.output_dir)) {
        if (!e.is_regular_file() || e.path().filename() == "config.resolved.json") continue;
        const auto rel = fs::relative(e.path(), cfg.output_dir);
        CAPTURE(rel.string());
        CHECK(slurp(e.path()) == slurp(again.output_dir / rel));
        ++compared;
    }
    CHECK(compared >= 8);
    CHECK(fs::exists(cfg.output_dir / "artifacts" / "c3_seed0_model.bin"));
}

TEST_CASE("config parsing") {
    SUBCASE("round trip through json") {
        const auto cfg = small_tabular_config();
        const auto back = parse_config(to_json(cfg));
        CHECK(to_json(back) == to_json(cfg));
        CHECK(back.agents.size() == 4);
        CHECK(back.agents[0].hidden == std::vector<int>{8});
    }
    SUBCASE("unknown keys are rejected") {
        CHECK_THROWS_AS(parse_config(nlohmann::json::parse(R"({"horizn": 5})")), ConfigError);
        CHECK_THROWS_AS(parse_config(nlohmann::json::parse(R"({"agents": [{"kind": "c3", "sigmaa": 1}]})")),
                        ConfigError);
        CHECK_THROWS_AS(parse_config(nlohmann::json::parse(R"({"training": {"epoch": 1}})")), ConfigError);
    }
    SUBCASE("bad values") {
        CHECK_THROWS_AS(parse_config(nlohmann::json::parse(R"({"agents": [{"kind": "c4"}]})")).validate(),
                        ConfigError);
        CHECK_THROWS_AS(parse_config(nlohmann::json::parse(R"({"seeds": "zero"})")), ConfigError);
        CHECK_THROWS_AS(
            parse_config(nlohmann::json::parse(R"({"agents": [{"kind": "uniform"}, {"kind": "uniform"}]})"))
                .validate(),
            ConfigError);
    }
    SUBCASE("missing file") { CHECK_THROWS_AS(load_config("/nonexistent/cfg.json"), ConfigError); }
}

TEST_CASE("spearman") {
    const std::vector<double> x{1, 2, 3, 4}, y{10, 20, 30, 40}, z{4, 3, 2, 1};
    CHECK(spearman(x, y) == doctest::Approx(1.0));
    CHECK(spearman(x, z) == doctest::Approx(-1.0));
    const std::vector<double> ties{1, 1, 2, 3};
    // Average ranks 1.5, 1.5, 3, 4 against 1..4.
    CHECK(spearman(ties, x) == doctest::Approx(0.9486832980505138));
}

TEST_CASE("cli") {
    const auto dir = scratch("cli");
    SUBCASE("missing config names the path") {
        CHECK(run_cli("run --config " + (dir / "missing.json").string(), dir / "log") == 1);
        CHECK(slurp(dir / "log").find("missing.json") != std::string::npos);
    }
    SUBCASE("usage errors") {
        CHECK(run_cli("", dir / "log") == 1);
        CHECK(run_cli("run", dir / "log") == 1);
        CHECK(run_cli("--help", dir / "log") == 0);
    }
    SUBCASE("invalid config") {
        std::ofstream(dir / "bad.json") << R"({"agents": [{"kind": "c3", "bogus": 1}]})";
        CHECK(run_cli("run --config " + (dir / "bad.json").string(), dir / "log") == 1);
    }
    SUBCASE("run and ablate") {
        std::ofstream(dir / "cfg.json") << to_json(small_tabular_config()).dump(2);
        CHECK(run_cli("run --config " + (dir / "cfg.json").string() + " --seed 5 --out " + (dir / "o").string(),
                      dir / "log") == 0);
        CHECK(fs::exists(dir / "o" / "summary.csv"));
        CHECK(run_cli("ablate-sigma --sigmas 0.5,2 --config " + (dir / "cfg.json").string() + " --out " +
                          (dir / "ab").string(),
                      dir / "log") == 0);
        const auto rows = csv_lines(dir / "ab" / "sigma_summary.csv");
        CHECK(rows.front() == "sigma,agent,seeds,mean_final_regret,sd,half_width");
        CHECK(rows.size() == 1 + 2 * 4);
    }
    SUBCASE("couple is deterministic") {
        std::ofstream(dir / "couple.json") << R"({"coupled": {"episodes": 20, "samples_per_episode": 30},
                                                  "hidden": [16], "training": {"epochs": 1}})";
        const auto args = "couple --config " + (dir / "couple.json").string() + " --seed 2 --out ";
        CHECK(run_cli(args + (dir / "c1").string(), dir / "log") == 0);
        CHECK(run_cli(args + (dir / "c2").string(), dir / "log") == 0);
        const auto a = slurp(dir / "c1" / "couple_seed2.csv");
        CHECK(!a.empty());
        CHECK(a == slurp(dir / "c2" / "couple_seed2.csv"));
    }
}
