#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "c3/beta_posterior.hpp"

#include <cmath>
#include <vector>

using namespace c3;

namespace {

struct Moments {
    double mean = 0, var = 0;
};

Moments sample_moments(const BetaParamsd& p, int n, std::uint64_t seed) {
    Rng rng = make_rng(seed, "mc");
    double s = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
        const double x = thompson_draw(p, rng);
        s += x;
        s2 += x * x;
    }
    Moments m;
    m.mean = s / n;
    m.var = s2 / n - m.mean * m.mean;
    return m;
}

double closed_mean(double a, double b) { return a / (a + b); }
double closed_var(double a, double b) { return a * b / ((a + b) * (a + b) * (a + b + 1)); }

}  // namespace

TEST_CASE("kernel mass") {
    ReferenceStored empty(2, {});
    CHECK(kernel_mass(Eigen::Vector2d(0, 0), empty) == 0.0);

    Eigen::MatrixXd E = Eigen::MatrixXd::Zero(2, 3);
    std::vector<int> r{1, 1, 0};
    const auto s = ReferenceStored::from_samples(E, r, {});
    CHECK(kernel_mass(Eigen::Vector2d(0, 0), s) == doctest::Approx(3.0));

    Rng rng = make_rng(1, "t");
    Eigen::MatrixXd R(2, 25);
    for (Eigen::Index j = 0; j < 25; ++j) R.col(j) << uniform01(rng), uniform01(rng);
    std::vector<int> rr(25, 1);
    const auto sr = ReferenceStored::from_samples(R, rr, KernelConfigd{0.3, std::nullopt});
    Eigen::Vector2d q(0.4, 0.6);
    double direct = 0;
    for (Eigen::Index j = 0; j < 25; ++j) direct += std::exp(-(R.col(j) - q).squaredNorm() / (2 * 0.09));
    CHECK(kernel_mass(q, sr) == doctest::Approx(direct).epsilon(1e-13));
}

TEST_CASE("beta params on hand-checkable stores") {
    Eigen::MatrixXd E = Eigen::MatrixXd::Zero(1, 3);
    std::vector<int> r{1, 1, 0};
    const auto s = ReferenceStored::from_samples(E, r, {});
    const auto p = beta_params(Eigen::VectorXd::Zero(1), s);
    CHECK(p.eta == doctest::Approx(3.0));
    CHECK(p.alpha == doctest::Approx(2.0));
    CHECK(p.beta == doctest::Approx(1.0));

    ReferenceStored empty(1, {});
    const auto u = beta_params(Eigen::VectorXd::Zero(1), empty);
    CHECK(u.alpha == 1.0);
    CHECK(u.beta == 1.0);
    CHECK(u.eta == 0.0);

    std::vector<int> ones{1, 1, 1};
    const auto all = ReferenceStored::from_samples(E, ones, {});
    const auto c = beta_params(Eigen::VectorXd::Zero(1), all);
    CHECK(c.alpha == doctest::Approx(3.0));
    CHECK(c.beta == kEpsClamp);

    // Mass below the threshold falls back to the prior.
    Eigen::MatrixXd far(1, 1);
    far << 100.0;
    std::vector<int> one{1};
    const auto f = beta_params(Eigen::VectorXd::Zero(1), ReferenceStored::from_samples(far, one, {}));
    CHECK(f.alpha == 1.0);
    CHECK(f.beta == 1.0);
}

TEST_CASE("raw params satisfy the mean and mass identities") {
    Rng rng = make_rng(2, "t");
    int checked = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const Eigen::Index n = 1 + Eigen::Index(uniform01(rng) * 30);
        Eigen::MatrixXd E(2, n);
        std::vector<int> r;
        for (Eigen::Index j = 0; j < n; ++j) {
            E.col(j) << uniform01(rng), uniform01(rng);
            r.push_back(uniform01(rng) < 0.4);
        }
        const auto s = ReferenceStored::from_samples(E, r, KernelConfigd{0.2, std::nullopt});
        Eigen::Vector2d q(uniform01(rng) * 2 - 0.5, uniform01(rng) * 2 - 0.5);
        const auto k = kernel_vector(q, s);
        const double eta = k.sum();
        const auto raw = raw_beta_params(eta, iwkr_from_kernel(k, s));
        if (eta < kEtaMin) {
            CHECK_FALSE(raw.has_value());
            continue;
        }
        REQUIRE(raw.has_value());
        ++checked;
        CHECK(std::abs(raw->mean() - *iwkr_estimate(q, s)) < 1e-9);
        CHECK(std::abs(raw->alpha + raw->beta - eta) < 1e-9);
        const auto clamped = clamp_beta_params(raw);
        CHECK(clamped.alpha >= kEpsClamp);
        CHECK(clamped.beta >= kEpsClamp);
        CHECK(std::abs(clamped.mean() - raw->mean()) <= kEpsClamp / eta + 1e-12);
    }
    CHECK(checked > 100);
}

TEST_CASE("more kernel mass means a more peaked posterior") {
    for (double p : {0.1, 0.5, 0.8}) {
        const BetaParamsd lo{2.0 * p, 2.0 * (1 - p), 2.0}, hi{20.0 * p, 20.0 * (1 - p), 20.0};
        CHECK(hi.variance() < lo.variance());
        CHECK(lo.variance() == doctest::Approx(p * (1 - p) / 3.0));
    }
}

TEST_CASE("thompson draws match Beta moments") {
    const int n = 100000;
    SUBCASE("uniform") {
        const auto m = sample_moments({1, 1, 0}, n, 1);
        CHECK(std::abs(m.mean - 0.5) < 0.005);
        CHECK(std::abs(m.var - 1.0 / 12.0) < 0.002);
    }
    for (auto [a, b] : std::vector<std::pair<double, double>>{{2, 1}, {0.3, 0.7}, {50, 5}, {1e-3, 2}}) {
        CAPTURE(a);
        CAPTURE(b);
        const auto m = sample_moments({a, b, a + b}, n, 7);
        const double se = std::sqrt(closed_var(a, b) / n);
        CHECK(std::abs(m.mean - closed_mean(a, b)) < 3 * se + 1e-12);
        CHECK(m.var == doctest::Approx(closed_var(a, b)).epsilon(0.05));
    }
}

TEST_CASE("degenerate clamped posterior draws near one") {
    Rng rng = make_rng(3, "t");
    int high = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) high += thompson_draw(BetaParamsd{5.0, kEpsClamp, 5.0}, rng) >= 0.999;
    CHECK(double(high) / n > 0.99);
}

TEST_CASE("draws are reproducible and stay in [0, 1]") {
    Rng a = make_rng(9, "t"), b = make_rng(9, "t");
    for (int i = 0; i < 1000; ++i) {
        const BetaParamsd p{0.01 + i * 0.1, 1e-6 + i * 0.05, 0};
        const double x = thompson_draw(p, a), y = thompson_draw(p, b);
        CHECK(x == y);
        CHECK(x >= 0.0);
        CHECK(x <= 1.0);
    }
}

TEST_CASE("log gamma variates have the Gamma mean") {
    Rng rng = make_rng(4, "t");
    for (double shape : {0.5, 1.0, 3.0}) {
        double s = 0;
        const int n = 50000;
        for (int i = 0; i < n; ++i) s += std::exp(log_gamma_variate(shape, rng));
        CHECK(s / n == doctest::Approx(shape).epsilon(0.03));
    }
}
