#include <doctest.h>

#include <atomic>
#include <cmath>
#include <numbers>

#include "faultrom/error.hpp"
#include "faultrom/rng.hpp"
#include "faultrom/uq.hpp"

using namespace faultrom;
using namespace faultrom::uq;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

snap::ParameterSpace box(int dim, double lo, double hi) {
    snap::ParameterSpace s;
    for (int i = 0; i < dim; ++i) s.axes.push_back({"x" + std::to_string(i), lo, hi, snap::Scale::Linear});
    return s;
}

BatchQoi rows(std::function<double(const VectorXd&)> f) { return pointwise(std::move(f)); }

std::vector<double> normal_samples(std::size_t m, std::uint64_t seed) {
    std::vector<double> out;
    for (std::size_t i = 0; i < m; ++i) {
        const double u1 = 1.0 - rng::uniform01(seed, 0, i), u2 = rng::uniform01(seed, 1, i);
        out.push_back(std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2));
    }
    return out;
}

}  // namespace

TEST_CASE("relative error report") {
    MatrixXd U(2, 3);
    U << 3, 1, 2, 4, 1, 0;
    CHECK(errors(U, U).e_max == 0.0);
    CHECK(errors(U, U).e_ave == 0.0);
    const auto twice = errors(U, 2.0 * U);
    CHECK(twice.e_min == doctest::Approx(1.0));
    CHECK(twice.e_max == doctest::Approx(1.0));
    CHECK(twice.e_ave == doctest::Approx(1.0));
    MatrixXd A = U;
    A(1, 0) = 0.0;  // error 4 on a norm of 5
    A(0, 2) = 3.0;  // error 1 on a norm of 2
    const auto r = errors(U, A);
    REQUIRE(r.per_sample.size() == 3);
    CHECK(r.per_sample[0] == doctest::Approx(0.8));
    CHECK(r.per_sample[1] == 0.0);
    CHECK(r.per_sample[2] == doctest::Approx(0.5));
    CHECK(r.e_max == doctest::Approx(0.8));
    CHECK(r.e_min == 0.0);
    CHECK(r.e_ave == doctest::Approx(1.3 / 3.0));
    const auto one = errors(U.leftCols(1), A.leftCols(1));
    CHECK(one.e_min == one.e_max);
    CHECK(one.e_ave == one.e_max);
    MatrixXd Z = U;
    Z.col(1).setZero();
    CHECK_THROWS_AS(errors(Z, U), NumericalError);
    CHECK_THROWS_AS(errors(U, A.leftCols(2)), ConfigError);
}

TEST_CASE("Sobol indices of analytic functions") {
    SUBCASE("single active axis") {
        const auto r = sobol_first_order(rows([](const VectorXd& x) { return x[0]; }), box(2, 0, 1), 10000, 3);
        CHECK(r.first_order[0] == doctest::Approx(1.0).epsilon(0.05));
        CHECK(std::abs(r.first_order[1]) <= 0.05);
        CHECK(r.mean == doctest::Approx(0.5).epsilon(0.01));
        CHECK(r.std == doctest::Approx(1.0 / std::sqrt(12.0)).epsilon(0.02));
        CHECK(r.evaluations == 10000 * 4);
        CHECK(r.warning.empty());
    }
    SUBCASE("additive linear function") {
        // Var(c_i x_i) = c_i^2 / 12 on [0,1]; S_i = c_i^2 / sum c^2.
        const std::array<double, 3> c{1.0, 2.0, 3.0};
        const auto r = sobol_first_order(rows([&](const VectorXd& x) { return c[0] * x[0] + c[1] * x[1] + c[2] * x[2]; }),
                                         box(3, 0, 1), 10000, 9);
        for (int i = 0; i < 3; ++i) CHECK(std::abs(r.first_order[i] - c[i] * c[i] / 14.0) <= 0.05);
        CHECK(r.first_order.sum() <= 1.1);
    }
    SUBCASE("Ishigami function") {
        // a = 7, b = 0.1 on [-pi, pi]^3.
        const double a = 7.0, b = 0.1, pi = std::numbers::pi;
        const double V = a * a / 8.0 + b * std::pow(pi, 4) / 5.0 + b * b * std::pow(pi, 8) / 18.0 + 0.5;
        const double S1 = (b * std::pow(pi, 4) / 5.0 + b * b * std::pow(pi, 8) / 50.0 + 0.5) / V;
        const double S2 = a * a / 8.0 / V;
        const auto r = sobol_first_order(rows([&](const VectorXd& x) {
                                             return std::sin(x[0]) + a * std::sin(x[1]) * std::sin(x[1]) +
                                                    b * std::pow(x[2], 4) * std::sin(x[0]);
                                         }),
                                         box(3, -pi, pi), 10000, 21);
        CHECK(std::abs(r.first_order[0] - S1) <= 0.05);
        CHECK(std::abs(r.first_order[1] - S2) <= 0.05);
        CHECK(std::abs(r.first_order[2]) <= 0.05);
    }
    SUBCASE("constant QoI") {
        const auto r = sobol_first_order(rows([](const VectorXd&) { return 4.2; }), box(2, 0, 1), 50, 1);
        CHECK(r.std == 0.0);
        CHECK(r.mean == doctest::Approx(4.2));
        CHECK(r.first_order.isZero());
        CHECK_FALSE(r.warning.empty());
    }
    CHECK_THROWS_AS(sobol_first_order(rows([](const VectorXd&) { return 0.0; }), box(2, 0, 1), 1, 1), ConfigError);
    CHECK_THROWS_AS(sobol_first_order(rows([](const VectorXd&) { return NAN; }), box(2, 0, 1), 10, 1), NumericalError);
}

TEST_CASE("convergence study nests its samples") {
    const auto f = rows([](const VectorXd& x) { return x[0] * x[0] + 0.5 * x[1]; });
    const auto space = box(2, 0, 1);
    const auto study = convergence_study(f, space, {100, 400, 1600}, 4);
    REQUIRE(study.size() == 3);
    const auto direct = sobol_first_order(f, space, 400, 4);
    CHECK(study[1].mean == direct.mean);
    CHECK(study[1].first_order == direct.first_order);
    CHECK_THROWS_AS(convergence_study(f, space, {100, 100}, 4), ConfigError);

    const auto flat = convergence_study(rows([](const VectorXd&) { return 1.0; }), space, {10, 20, 40}, 2);
    for (const auto& s : flat) {
        CHECK(s.mean == doctest::Approx(1.0));
        CHECK(s.std == 0.0);
    }

    // f = x0 on [2, 4]: the mean error shrinks with the sample count, on average over seeds.
    const auto lin = rows([](const VectorXd& x) { return x[0]; });
    const std::vector<std::size_t> counts{10, 100, 1000, 10000};
    std::vector<double> err(counts.size(), 0.0);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto s = convergence_study(lin, box(2, 2, 4), counts, seed);
        for (std::size_t k = 0; k < counts.size(); ++k) err[k] += std::abs(s[k].mean - 3.0) / 20.0;
    }
    for (std::size_t k = 1; k < counts.size(); ++k) CHECK(err[k] < err[k - 1]);
}

TEST_CASE("Gaussian kernel density") {
    const auto x = normal_samples(10000, 5);
    std::vector<double> grid;
    const double lo = -6.0, hi = 6.0;
    const int m = 1201;
    for (int i = 0; i < m; ++i) grid.push_back(lo + (hi - lo) * i / (m - 1));
    const auto d = kde(x, grid);
    double worst = 0.0, mass = 0.0;
    for (int i = 0; i < m; ++i) {
        const double pdf = std::exp(-0.5 * grid[i] * grid[i]) / std::sqrt(2.0 * std::numbers::pi);
        worst = std::max(worst, std::abs(d[i] - pdf));
        if (i > 0) mass += 0.5 * (d[i] + d[i - 1]) * (grid[i] - grid[i - 1]);
    }
    CHECK(worst <= 0.05);
    CHECK(mass >= 0.995);
    CHECK(mass <= 1.005);

    // Scott's rule against a hand computation: sample std of {0, 2} is sqrt(2).
    CHECK(scott_bandwidth({0.0, 2.0}) == doctest::Approx(std::sqrt(2.0) * std::pow(2.0, -0.2)));
    CHECK_THROWS_AS(kde({1.0}, grid), ConfigError);
    CHECK_THROWS_AS(kde({1.0, 1.0}, grid), NumericalError);
}

TEST_CASE("differential evolution") {
    DeConfig cfg;
    cfg.bounds = {{"a", -1, 2}, {"b", 0, 5}, {"c", -3, 3}};
    cfg.seed = 17;
    const VectorXd c = (VectorXd(3) << 0.3, 4.1, -2.2).finished();

    SUBCASE("convex bowl") {
        // The default stopping rule is relative to the population spread; a tight
        // tolerance lets the bowl test resolve the minimizer to 1e-6.
        cfg.tol = 1e-12;
        cfg.atol = 1e-20;
        const auto r = differential_evolution(rows([&](const VectorXd& x) { return (x - c).squaredNorm(); }), cfg);
        CHECK(r.converged);
        CHECK((r.x - c).cwiseAbs().maxCoeff() <= 1e-6);
        CHECK(r.evaluations == static_cast<std::size_t>(45 * (r.iterations + 1)));
    }
    SUBCASE("bowl with the default tolerances") {
        const auto r = differential_evolution(rows([&](const VectorXd& x) { return (x - c).squaredNorm(); }), cfg);
        CHECK(r.converged);
        CHECK(r.fun <= 1e-6);
    }
    SUBCASE("constant objective stops at once") {
        const auto r = differential_evolution(rows([](const VectorXd&) { return 2.0; }), cfg);
        CHECK(r.converged);
        CHECK(r.iterations == 0);
    }
    SUBCASE("Rosenbrock valley") {
        DeConfig rc;
        rc.bounds = {{"x", -2, 2}, {"y", -2, 2}};
        rc.seed = 3;
        rc.tol = 1e-10;
        rc.atol = 1e-16;
        const auto r = differential_evolution(
            rows([](const VectorXd& x) { return 100 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1 - x[0], 2); }), rc);
        CHECK(std::abs(r.x[0] - 1.0) <= 1e-3);
        CHECK(std::abs(r.x[1] - 1.0) <= 1e-3);
    }
    SUBCASE("permuting the axes permutes the result") {
        auto f = [&](const VectorXd& x) { return std::pow(x[0] - c[0], 2) + 2 * std::abs(x[1] - c[1]) + std::cos(x[2]); };
        const auto r = differential_evolution(rows(f), cfg);
        DeConfig p = cfg;
        p.bounds = {cfg.bounds[2], cfg.bounds[0], cfg.bounds[1]};
        const auto rp = differential_evolution(rows([&](const VectorXd& y) {
                                                   return f((VectorXd(3) << y[1], y[2], y[0]).finished());
                                               }),
                                               p);
        CHECK(rp.x[0] == r.x[2]);
        CHECK(rp.x[1] == r.x[0]);
        CHECK(rp.x[2] == r.x[1]);
        CHECK(rp.fun == r.fun);
        CHECK(rp.iterations == r.iterations);
    }
    SUBCASE("deterministic per seed and independent of the worker count") {
        auto f = [&](const VectorXd& x) { return std::sin(3 * x[0]) + (x - c).squaredNorm(); };
        const auto r1 = differential_evolution(pointwise(f, 1), cfg);
        const auto r3 = differential_evolution(pointwise(f, 3), cfg);
        CHECK(r1.x == r3.x);
        cfg.seed = 18;
        const auto other = differential_evolution(pointwise(f, 1), cfg);
        CHECK(other.evaluations != r1.evaluations);
    }
    SUBCASE("iteration cap") {
        cfg.max_iterations = 2;
        cfg.tol = 1e-15;
        const auto r = differential_evolution(rows([&](const VectorXd& x) { return (x - c).squaredNorm(); }), cfg);
        CHECK_FALSE(r.converged);
        CHECK(r.iterations == 2);
    }
    SUBCASE("invalid settings") {
        auto bad = cfg;
        bad.bounds[1].hi = bad.bounds[1].lo;
        CHECK_THROWS_AS(differential_evolution(rows([](const VectorXd&) { return 0.0; }), bad), ConfigError);
        bad = cfg;
        bad.tol = 0.0;
        CHECK_THROWS_AS(differential_evolution(rows([](const VectorXd&) { return 0.0; }), bad), ConfigError);
        bad = cfg;
        bad.bounds[2].name = "a";
        CHECK_THROWS_AS(differential_evolution(rows([](const VectorXd&) { return 0.0; }), bad), ConfigError);
    }
}

TEST_CASE("pressure-difference inversion") {
    DeConfig cfg;
    cfg.bounds = {{"k", 0, 1}, {"h", 0, 1}};
    cfg.seed = 2;
    std::atomic<int> verified{0};
    const auto dp = rows([](const VectorXd& x) { return 0.1 + 0.2 * x[0] + 0.05 * x[1] * x[1]; });
    const auto r = invert_delta_p(dp, 0.188, cfg, [&](const VectorXd& mu) {
        ++verified;
        return 0.1 + 0.2 * mu[0] + 0.05 * mu[1] * mu[1];
    });
    CHECK(verified == 1);
    CHECK(r.de.fun <= 1e-6);
    CHECK(std::abs(r.delta_p_rom - 0.188) <= 1e-3);
    REQUIRE(r.delta_p_fom.has_value());
    CHECK(*r.delta_p_fom == doctest::Approx(r.delta_p_rom));
}
