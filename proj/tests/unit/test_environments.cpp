#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "c3/environments.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <vector>

using namespace c3;

namespace {

double beta_var(double a, double b) { return a * b / ((a + b) * (a + b) * (a + b + 1)); }

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = double(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
    mx /= n, my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

std::filesystem::path write_temp(const std::string& name, const std::string& body) {
    const auto p = std::filesystem::temp_directory_path() / ("c3_env_test_" + name);
    std::ofstream(p) << body;
    return p;
}

}  // namespace

TEST_CASE("one_hot") {
    CHECK(one_hot(3, 1) == Eigen::Vector3d(0, 1, 0));
    CHECK_THROWS_AS(one_hot(3, 3), std::out_of_range);
}

TEST_CASE("correlated mean generator") {
    SUBCASE("shape parameters have the target mean and concentration") {
        for (double rho : {-1.0, -0.6, 0.0, 0.6, 1.0})
            for (double mu0 : {0.1, 0.5, 0.93}) {
                const auto [a, b] = correlated_beta_shape(mu0, rho, 50);
                CHECK(a + b == doctest::Approx(100.0));
                CHECK(a / (a + b) == doctest::Approx(rho * (mu0 - 0.5) + 0.5));
            }
    }
    SUBCASE("empirical moments") {
        Rng rng = make_rng(1, "t");
        const int n = 10000;
        for (double rho : {-1.0, -0.2, 0.6, 1.0}) {
            const double mu0 = 0.8;
            const auto [a, b] = correlated_beta_shape(mu0, rho, 50);
            double s = 0, s2 = 0;
            for (int i = 0; i < n; ++i) {
                const double x = sample_correlated_mu(mu0, rho, 50, rng);
                REQUIRE(x > 0.0);
                REQUIRE(x < 1.0);
                s += x, s2 += x * x;
            }
            const double mean = s / n, var = s2 / n - mean * mean;
            CHECK(std::abs(mean - (rho * (mu0 - 0.5) + 0.5)) < 3 * std::sqrt(beta_var(a, b) / n));
            CHECK(var == doctest::Approx(beta_var(a, b)).epsilon(0.1));
        }
    }
    SUBCASE("rho zero gives Beta(c, c) regardless of mu0") {
        Rng rng = make_rng(2, "t");
        for (double mu0 : {0.05, 0.95}) {
            double s = 0, s2 = 0;
            const int n = 10000;
            for (int i = 0; i < n; ++i) {
                const double x = sample_correlated_mu(mu0, 0.0, 50, rng);
                s += x, s2 += x * x;
            }
            const double mean = s / n;
            CHECK(std::abs(mean - 0.5) < 0.005);
            CHECK(s2 / n - mean * mean == doctest::Approx(beta_var(50, 50)).epsilon(0.1));
        }
    }
    SUBCASE("extreme anchors stay inside the unit interval") {
        Rng rng = make_rng(3, "t");
        for (double mu0 : {1e-9, 1 - 1e-9})
            for (int i = 0; i < 200; ++i) {
                const double x = sample_correlated_mu(mu0, 1.0, 1000, rng);
                CHECK(x > 0.0);
                CHECK(x < 1.0);
            }
    }
    SUBCASE("validation") {
        Rng rng = make_rng(4, "t");
        CHECK_THROWS_AS(sample_correlated_mu(0.0, 0.5, 50, rng), std::invalid_argument);
        CHECK_THROWS_AS(sample_correlated_mu(0.5, 1.5, 50, rng), std::invalid_argument);
        CHECK_THROWS_AS(sample_correlated_mu(0.5, 0.5, 0.5, rng), std::invalid_argument);
    }
}

TEST_CASE("coupled episodes") {
    CoupledArmSpec spec;
    spec.episodes = 300;
    spec.samples_per_episode = 20;
    Rng rng = make_rng(5, "t");
    const auto ds = coupled_episodes(spec, rng);
    REQUIRE(ds.samples.size() == 6000);
    REQUIRE(ds.means.rows() == 300);
    REQUIRE(ds.means.cols() == 7);
    std::vector<int> pulls(7, 0);
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        const auto& s = ds.samples[i];
        CHECK(s.context.size() == 0);
        CHECK(s.interval == int(i / 20));
        Eigen::Index arm;
        CHECK(s.arm.maxCoeff(&arm) == 1.0);
        CHECK(s.arm.sum() == 1.0);
        ++pulls[std::size_t(arm)];
    }
    for (int p : pulls) CHECK(std::abs(p - 6000.0 / 7) < 5 * std::sqrt(6000.0 / 7));

    std::vector<double> anchor(300), plus(300), minus(300);
    for (int e = 0; e < 300; ++e) {
        anchor[std::size_t(e)] = ds.means(e, 0);
        minus[std::size_t(e)] = ds.means(e, 1);  // rho = -1
        plus[std::size_t(e)] = ds.means(e, 6);   // rho = 1
    }
    CHECK(pearson(anchor, plus) > 0.9);
    CHECK(pearson(anchor, minus) < -0.9);
}

TEST_CASE("coupled environment steps") {
    CoupledArmSpec spec;
    spec.episodes = 2;
    spec.samples_per_episode = 5;
    CoupledArmEnvironment env(spec, 3);
    CHECK(env.warm_start_data().size() == 10);
    std::vector<std::vector<double>> means;
    for (int t = 0; t < 10; ++t) {
        auto step = env.next();
        REQUIRE(step);
        CHECK(step->arms.size() == 7);
        means.push_back(step->means);
        const int r = env.pull(0);
        CHECK((r == 0 || r == 1));
    }
    CHECK(means[0] == means[4]);
    CHECK(means[4] != means[5]);
}

TEST_CASE("separable blobs") {
    Rng rng = make_rng(6, "t");
    const std::vector<double> w{0.4, 0.3, 0.2, 0.1};
    const auto ds = make_separable_blobs(20000, w, rng);
    CHECK(ds.num_classes == 4);
    std::vector<int> counts(4, 0);
    for (std::size_t i = 0; i < ds.labels.size(); ++i) {
        const int c = ds.labels[i];
        ++counts[std::size_t(c)];
        const Eigen::Vector2d centre(2.0 + 4.0 * (c % 2), 2.0 + 4.0 * (c / 2));
        CHECK((ds.features[i] - centre).norm() <= 1.2 + 1e-12);
        // Linear separability: the sign pattern around the square's centre
        // identifies the class.
        const Eigen::Vector2d f = ds.features[i];
        CHECK(int(f(0) > 4.0) + 2 * int(f(1) > 4.0) == c);
    }
    for (int c = 0; c < 4; ++c) {
        const double p = w[std::size_t(c)];
        CHECK(std::abs(counts[std::size_t(c)] - 20000 * p) < 4 * std::sqrt(20000 * p * (1 - p)));
    }
    CHECK_THROWS_AS(make_separable_blobs(10, std::vector<double>{0.5, 0.5}, rng), std::invalid_argument);
}

TEST_CASE("tabular task and schedule") {
    Rng rng = make_rng(7, "t");
    const std::vector<double> w{0.25, 0.25, 0.25, 0.25};
    auto task = make_tabular_task(make_separable_blobs(6000, w, rng), 4000, 1000, rng);
    CHECK(task.train.size() == 4000);
    CHECK(task.test.size() == 1000);
    std::set<std::size_t> train(task.train.begin(), task.train.end()), test(task.test.begin(), task.test.end());
    CHECK(train.size() == 4000);
    CHECK(test.size() == 1000);
    for (auto i : test) CHECK(train.count(i) == 0);

    TabularCursor cursor;
    int evals = 0, trains = 0;
    std::vector<bool> pattern;
    while (auto v = tabular_step(task, cursor)) {
        if (pattern.size() < 10) pattern.push_back(v->evaluate);
        (v->evaluate ? evals : trains)++;
    }
    CHECK(evals == 1000);
    CHECK(trains == 4000);
    CHECK(pattern == std::vector<bool>{false, false, false, false, true, false, false, false, false, true});

    TabularEnvironment env(task, 1);
    const auto warm = env.warm_start_data();
    CHECK(warm.size() == 4000);
    for (const auto& s : warm) CHECK((s.reward == 0 || s.reward == 1));
    int steps = 0, eval_steps = 0;
    while (auto step = env.next()) {
        ++steps;
        CHECK(step->arms.size() == 4);
        CHECK(step->update == !step->evaluate);
        double total = 0;
        for (double m : step->means) total += m;
        CHECK(total == 1.0);
        const auto best = std::size_t(std::max_element(step->means.begin(), step->means.end()) - step->means.begin());
        CHECK(env.pull(best) == 1);
        eval_steps += step->evaluate;
    }
    CHECK(steps == 5000);
    CHECK(eval_steps == 1000);
    CHECK_THROWS_AS(make_tabular_task(make_separable_blobs(100, w, rng), 90, 20, rng), std::invalid_argument);
}

TEST_CASE("csv loader") {
    const auto good = write_temp("good.csv", "x1,x2,label\n0.5,1.5,0\n-2,3e-1,2\n");
    const auto ds = load_csv_dataset(good);
    CHECK(ds.labels == std::vector<int>{0, 2});
    CHECK(ds.num_classes == 3);
    CHECK(ds.features[1] == Eigen::Vector2d(-2, 0.3));

    CHECK_THROWS_AS(load_csv_dataset(write_temp("ragged.csv", "a,b,label\n1,2,0\n1,0\n")), std::runtime_error);
    CHECK_THROWS_AS(load_csv_dataset(write_temp("nan.csv", "a,label\nfoo,0\n")), std::runtime_error);
    CHECK_THROWS_AS(load_csv_dataset(write_temp("neg.csv", "a,label\n1,-1\n")), std::runtime_error);
    CHECK_THROWS_AS(load_csv_dataset(write_temp("empty.csv", "")), std::runtime_error);
    CHECK_THROWS_AS(load_csv_dataset(write_temp("header.csv", "label\n")), std::runtime_error);
    CHECK_THROWS_AS(load_csv_dataset("/nonexistent/data.csv"), std::runtime_error);
}

TEST_CASE("drift schedule") {
    const auto s = DriftSchedule::daily(700, kDailyDriftProbabilities, 0);
    REQUIRE(s.phases.size() == 7);
    CHECK(s.at(0)->boost == 0.0);
    CHECK(s.at(699)->boost == 0.30);
    CHECK(s.at(250)->boost == 0.10);
    CHECK(s.at(700) == nullptr);
    CHECK(drifted_mean(0.2, 0, s, 650) == doctest::Approx(0.2 + 0.8 * 0.3));
    CHECK(drifted_mean(0.2, 1, s, 650) == doctest::Approx(0.2 * 0.7));
    CHECK(drifted_mean(0.2, 1, s, 10) == 0.2);

    SUBCASE("flips follow the phase probabilities") {
        Rng rng = make_rng(8, "t");
        const int n = 20000;
        int up = 0, down = 0;
        for (int i = 0; i < n; ++i) {
            up += drift_step(0, 0, s, 650, rng);
            down += 1 - drift_step(1, 1, s, 650, rng);
            CHECK(drift_step(1, 0, s, 650, rng) == 1);
            CHECK(drift_step(0, 1, s, 650, rng) == 0);
        }
        const double se = std::sqrt(0.3 * 0.7 / n);
        CHECK(std::abs(up / double(n) - 0.3) < 4 * se);
        CHECK(std::abs(down / double(n) - 0.3) < 4 * se);
    }
    SUBCASE("the reward mixture matches drifted_mean") {
        Rng rng = make_rng(9, "t");
        const int n = 40000;
        int hits = 0;
        for (int i = 0; i < n; ++i) hits += drift_step(uniform01(rng) < 0.4 ? 1 : 0, 0, s, 450, rng);
        CHECK(std::abs(hits / double(n) - drifted_mean(0.4, 0, s, 450)) < 4 * std::sqrt(0.25 / n));
    }
    SUBCASE("validation") {
        DriftSchedule bad;
        bad.phases = {{0, 10, 0, 0.1, 0.1}, {5, 20, 0, 0.1, 0.1}};
        CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
        bad.phases = {{0, 10, 0, 1.5, 0.1}};
        CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    }
}

TEST_CASE("drift environment") {
    DriftEnvironmentSpec spec;
    DriftEnvironment env(spec, 4);
    CHECK(env.article_count() == 48);
    const auto warm = env.warm_start_data();
    CHECK(warm.size() == 2000);
    CHECK(warm.front().interval == 0);
    CHECK(warm.back().interval == 2);
    long steps = 0;
    double boosted_late = 0, other_late = 0;
    int nb = 0, no = 0;
    while (auto step = env.next()) {
        CHECK(step->arms.size() == 8);
        CHECK(step->context.sum() == doctest::Approx(1.0));
        for (std::size_t a = 0; a < step->arms.size(); ++a) {
            CHECK(step->means[a] >= 0.0);
            CHECK(step->means[a] <= 1.0);
            if (steps >= 1300) {
                if (step->arms[a](0) == 1.0) boosted_late += step->means[a], ++nb;
                else other_late += step->means[a], ++no;
            }
        }
        env.pull(0);
        ++steps;
    }
    CHECK(steps == 1500);
    // By the last day the boosted category pays more than the rest.
    CHECK(boosted_late / nb > other_late / no);

    DriftEnvironment a(spec, 11), b(spec, 11);
    for (int t = 0; t < 20; ++t) {
        const auto sa = a.next(), sb = b.next();
        CHECK(sa->context == sb->context);
        CHECK(sa->means == sb->means);
        CHECK(a.pull(1) == b.pull(1));
    }
}

TEST_CASE("constant environment") {
    ConstantEnvironment env({0.9, 0.1}, 10, 1);
    int n = 0;
    while (auto s = env.next()) {
        CHECK(s->means == std::vector<double>{0.9, 0.1});
        ++n;
    }
    CHECK(n == 10);
    CHECK_THROWS_AS(ConstantEnvironment({}, 10, 1), std::invalid_argument);
    CHECK_THROWS_AS(ConstantEnvironment({1.2}, 10, 1), std::invalid_argument);
}

TEST_CASE("jensen-shannon and coupling") {
    CHECK(js_divergence_bernoulli(0.3, 0.3) == doctest::Approx(0.0));
    CHECK(js_divergence_bernoulli(0.0, 1.0) == doctest::Approx(1.0));
    CHECK(js_divergence_bernoulli(0.2, 0.7) == doctest::Approx(js_divergence_bernoulli(0.7, 0.2)));
    // Direct evaluation for p = 0.5, q = 0: midpoint 0.25.
    const double direct = 0.5 * (0.5 * std::log2(0.5 / 0.25) + 0.5 * std::log2(0.5 / 0.75)) +
                          0.5 * (1.0 * std::log2(1.0 / 0.75));
    CHECK(js_divergence_bernoulli(0.5, 0.0) == doctest::Approx(direct));
    const std::vector<double> p{0.2, 0.8}, q{0.2, 0.8}, r{0.8, 0.2};
    CHECK(coupling_rho(p, q) == doctest::Approx(1.0));
    CHECK(coupling_rho(p, r) < coupling_rho(p, q));
    CHECK(coupling_rho(std::vector<double>{0.0}, std::vector<double>{1.0}) == doctest::Approx(0.0));
    CHECK_THROWS_AS(coupling_rho(p, std::vector<double>{0.1}), std::invalid_argument);
    CHECK(smoothed_rate(0, 0) == 0.5);
}
