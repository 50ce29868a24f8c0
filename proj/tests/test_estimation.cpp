#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "stenoflow/errors.hpp"
#include "stenoflow/estimation.hpp"
#include "stenoflow/vkoga.hpp"

using namespace stenoflow;

namespace {

/// Smooth synthetic surrogate over [0,1] with q = 40 outputs. A touch of
/// regularization keeps the coefficients small so evaluation noise stays at
/// machine level (ill-conditioned lambda = 0 fits drown finite differences).
InterpolantModel toy_model(double eps = 4.0, double lambda = 1e-9) {
    const int n = 30, q = 40;
    std::vector<double> x(n);
    Eigen::MatrixXd f(n, q);
    for (int i = 0; i < n; ++i) {
        x[static_cast<std::size_t>(i)] = static_cast<double>(i) / (n - 1);
        for (int j = 0; j < q; ++j)
            f(i, j) = 2.0 + 1.5 * std::sin(2.0 * x[static_cast<std::size_t>(i)] + 0.2 * j) -
                      2.0 * x[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
    }
    return vkoga_fit(x, f, {KernelFamily::gaussian, eps, lambda}, {1e-12, 1000, 1e-13});
}

std::vector<double> curve_at(const InterpolantModel& m, double rs) {
    const Eigen::VectorXd v = m.evaluate(rs);
    return {v.data(), v.data() + v.size()};
}

} // namespace

TEST_CASE("synthetic measurements reproduce y = f + sigma v exactly") {
    const std::vector<double> ref = {1.0, 2.0, 3.0};
    const Measurement a = synth_measurement(ref, 0.4, 0.25, 99);
    const Measurement b = synth_measurement(ref, 0.4, 0.25, 99);
    CHECK(a.values == b.values);
    Rng rng(99);
    for (std::size_t j = 0; j < ref.size(); ++j) {
        const double v = rng.uniform01();
        CHECK(a.values[j] == ref[j] + 0.25 * v);
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }
    CHECK(synth_measurement(ref, 0.4, 0.25, 100).values != a.values);
}

TEST_CASE("cost") {
    const InterpolantModel m = toy_model();
    const std::vector<double> y = curve_at(m, 0.6);

    SUBCASE("zero at an exact match") {
        CHECK(cost(0.6, y, m) == doctest::Approx(0.0).scale(1.0));
    }
    SUBCASE("doubled measurement gives exactly 1/8") {
        std::vector<double> y2 = y;
        for (double& v : y2) v *= 2.0;
        CHECK(cost(0.6, y2, m) == doctest::Approx(0.125).epsilon(1e-12));
    }
    SUBCASE("dense scan of a noise-free measurement brackets the truth") {
        const auto profile = cost_profile(y, m, 1001);
        double best_x = -1, best_j = 1e30;
        for (const auto& [x, j] : profile)
            if (j < best_j) {
                best_j = j;
                best_x = x;
            }
        CHECK(std::abs(best_x - 0.6) <= 1.0 / 1000 + 1e-12);
    }
    SUBCASE("zero measurement is rejected") {
        const std::vector<double> zero(40, 0.0);
        CHECK_THROWS_AS(cost(0.5, zero, m), ConfigError);
    }
    SUBCASE("length mismatch is rejected") {
        CHECK_THROWS_AS(cost(0.5, {1.0, 2.0}, m), ConfigError);
    }
}

TEST_CASE("cost gradient") {
    const InterpolantModel m = toy_model();
    const std::vector<double> y = curve_at(m, 0.45);

    SUBCASE("stationary at an interior exact minimum") {
        CHECK(std::abs(cost_gradient(0.45, y, m)) < 1e-8);
    }
    SUBCASE("matches central differences at 100 random points") {
        Rng rng(61);
        for (int trial = 0; trial < 100; ++trial) {
            const double rs = 0.02 + 0.96 * rng.uniform01();
            const double h = 1e-6;
            const double fd = (cost(rs + h, y, m) - cost(rs - h, y, m)) / (2.0 * h);
            const double an = cost_gradient(rs, y, m);
            CHECK(an == doctest::Approx(fd).epsilon(1e-5).scale(std::abs(fd) + 1e-9));
        }
    }
    SUBCASE("constant surrogate has zero gradient everywhere") {
        Eigen::MatrixXd f(1, 5);
        f << 2.0, 2.0, 2.0, 2.0, 2.0;
        const InterpolantModel flat = fit_interpolant({0.5}, f, {KernelFamily::gaussian, 2.0, 0.0});
        // measurement equal to the surrogate at the center: J has a flat direction from
        // the kernel shape only; the derivative must follow the analytic chain rule
        const std::vector<double> y0(5, 2.0);
        CHECK(std::abs(cost_gradient(0.5, y0, flat)) < 1e-12);
    }
}

TEST_CASE("estimate") {
    const InterpolantModel m = toy_model();

    SUBCASE("noise-free recovery to 1e-6 for 20 random targets") {
        Rng rng(67);
        for (int trial = 0; trial < 20; ++trial) {
            const double truth = 0.02 + 0.96 * rng.uniform01();
            const std::vector<double> y = curve_at(m, truth);
            const EstimationResult r = estimate(y, m);
            CHECK(r.degree == doctest::Approx(truth).epsilon(1e-6));
            CHECK(r.degree >= 0.0);
            CHECK(r.degree <= 1.0);
            CHECK(r.converged);
        }
    }
    SUBCASE("estimates stay inside the box for arbitrary measurements") {
        Rng rng(71);
        for (int trial = 0; trial < 10; ++trial) {
            std::vector<double> y(40);
            for (double& v : y) v = 20.0 * rng.uniform01() - 10.0;
            const EstimationResult r = estimate(y, m);
            CHECK(r.degree >= 0.0);
            CHECK(r.degree <= 1.0);
        }
    }
    SUBCASE("scan cross-check is consistent with the profile minimum") {
        const std::vector<double> y = curve_at(m, 0.8);
        const EstimationResult r = estimate(y, m, {}, /*with_scan=*/true, 1001);
        REQUIRE(!r.profile.empty());
        double scan_min = 1e30;
        for (const auto& [x, j] : r.profile) scan_min = std::min(scan_min, j);
        CHECK(r.cost_value <= scan_min + 1e-10);
    }
}

TEST_CASE("cost profile shape") {
    const InterpolantModel m = toy_model();
    const std::vector<double> y = curve_at(m, 0.9);
    const auto profile = cost_profile(y, m, 101);
    REQUIRE(profile.size() == 101);
    CHECK(profile.front().first == 0.0);
    CHECK(profile.back().first == 1.0);
    CHECK_THROWS_AS(cost_profile(y, m, 1), ConfigError);
}
