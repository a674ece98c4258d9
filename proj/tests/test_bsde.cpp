#include <doctest.h>

#include <cmath>

#include "gharm/bsde.hpp"

using namespace gharm;

namespace {

std::vector<double> terminal_of(const PathBundle& b, const ScalarField& f) {
    std::vector<double> t(b.num_paths);
    for (std::size_t m = 0; m < b.num_paths; ++m) t[m] = f.f(b.state(b.num_steps, m));
    return t;
}

}  // namespace

TEST_CASE("zero driver reduces to the plain Monte Carlo mean") {
    DiffusionSpec d = make_diffusion("brownian", 1);
    Driver zero = make_driver("zero");
    ScalarField sq = make_field("quadratic", 1);
    Vec x{0.3};
    PathBundle b = simulate(d, x, 1.0, 50, 20000, 11);
    auto term = terminal_of(b, sq);
    BsdeSolution sol = backward_solve(b, zero, term);
    double mc = 0.0;
    for (double v : term) mc += v;
    mc /= term.size();
    CHECK(std::fabs(sol.y0 - mc) < 1e-12);
    // terminal condition is kept exactly
    for (std::size_t m = 0; m < b.num_paths; m += 997)
        CHECK(sol.y_at(b.num_steps, m) == term[m]);
}

TEST_CASE("constant terminal is a fixed point for an (H1) driver") {
    DiffusionSpec d = make_diffusion("brownian", 1);
    Driver mu_abs = make_driver("abs_z", {{"mu", 0.5}});
    Vec x{0.0};
    PathBundle b = simulate(d, x, 1.0, 20, 5000, 13);
    std::vector<double> term(b.num_paths, 1.0);  // dyadic constant: sums stay exact
    BsdeSolution sol = backward_solve(b, mu_abs, term);
    for (std::size_t k = 0; k <= 20; ++k)
        for (std::size_t m = 0; m < b.num_paths; m += 509) CHECK(sol.y_at(k, m) == 1.0);
    CHECK(sol.y0 == 1.0);
}

TEST_CASE("closed form: g = mu|z|, terminal X_T gives x + mu T") {
    DiffusionSpec d = make_diffusion("brownian", 1);
    Driver mu_abs = make_driver("abs_z", {{"mu", 0.5}});
    ScalarField lin = make_field("linear", 1);
    Vec x{0.25};
    Numerics num;
    num.paths = 50000;
    num.steps = 100;
    num.seed = 17;
    auto r = g_expectation(d, mu_abs, lin, x, 1.0, num);
    CHECK(std::fabs(r.estimate.value - (0.25 + 0.5)) < 3.0 * r.estimate.std_error + 2e-3);
    CHECK(r.estimate.std_error < 0.01);
}

TEST_CASE("closed form: g = alpha z, terminal x^2 gives (x+alpha T)^2 + T") {
    DiffusionSpec d = make_diffusion("brownian", 1);
    Driver lin_z = make_driver("linear_z", {{"alpha", 0.5}});
    ScalarField sq = make_field("quadratic", 1);
    Vec x{0.5};
    Numerics num;
    num.paths = 100000;
    num.steps = 100;
    num.seed = 23;
    auto r = g_expectation(d, lin_z, sq, x, 1.0, num);
    double exact = (0.5 + 0.5 * 1.0) * (0.5 + 0.5 * 1.0) + 1.0;
    CHECK(std::fabs(r.estimate.value - exact) < 3.0 * r.estimate.std_error + 0.03);
}

TEST_CASE("g_expectation of a constant is exact") {
    DiffusionSpec d = make_diffusion("brownian", 1);
    Driver mu_abs = make_driver("abs_z", {{"mu", 0.5}});
    ScalarField c = make_field("constant", 1, {{"c", 2.0}});
    Vec x{0.0};
    Numerics num;
    num.paths = 2000;
    num.steps = 20;
    auto r = g_expectation(d, mu_abs, c, x, 1.0, num);
    CHECK(r.estimate.value == 2.0);
}

TEST_CASE("step-halving consistency on a catalog problem") {
    DiffusionSpec d = make_diffusion("brownian", 1);
    Driver lin_z = make_driver("linear_z", {{"alpha", 1.0}});
    ScalarField sq = make_field("quadratic", 1);
    Vec x{0.0};
    auto run = [&](std::size_t steps) {
        Numerics num;
        num.paths = 200000;
        num.steps = steps;
        num.seed = 29;
        return g_expectation(d, lin_z, sq, x, 1.0, num).estimate.value;
    };
    double y5 = run(5), y10 = run(10), y20 = run(20);
    double d1 = std::fabs(y5 - y10), d2 = std::fabs(y10 - y20);
    CHECK(d1 >= 1.5 * d2);
}

TEST_CASE("random horizon: symmetric exit of a martingale is centered") {
    DiffusionSpec d = make_diffusion("brownian", 1);
    Driver zero = make_driver("zero");
    ScalarField lin = make_field("linear", 1);
    Vec x{0.0};
    Numerics num;
    num.paths = 30000;
    num.steps = 300;
    num.seed = 37;
    auto r = g_expectation_at_exit(d, zero, lin, x, x, 0.5, 3.0, num);
    CHECK(r.truncation_fraction < 1e-3);
    CHECK(std::fabs(r.estimate.value) < 3.0 * r.estimate.std_error);

    // concave terminal: supermartingale at the exit
    ScalarField neg_sq = make_field("quadratic", 1, {{"q", -1.0}});
    auto rc = g_expectation_at_exit(d, zero, neg_sq, x, x, 0.5, 3.0, num);
    CHECK(rc.estimate.value <= 0.0 + 3.0 * rc.estimate.std_error);
}

TEST_CASE("random horizon: g-harmonic exp profile satisfies the mean value property") {
    DiffusionSpec d = make_diffusion("brownian", 1);
    Driver mu_abs = make_driver("abs_z", {{"mu", 0.5}});
    ScalarField prof = make_field("exp_profile", 1, {{"mu", 0.5}});
    Vec x{0.0};
    Numerics num;
    num.paths = 30000;
    num.steps = 400;
    num.seed = 41;
    auto r = g_expectation_at_exit(d, mu_abs, prof, x, x, 0.5, 4.0, num);
    CHECK(std::fabs(r.estimate.value - prof.f(x)) < 3.0 * r.estimate.std_error + 2e-3);
}

TEST_CASE("truncation beyond 10% raises") {
    DiffusionSpec still = make_diffusion("constant", 1, {{"b", 0.0}, {"sigma", 0.0}});
    Driver zero = make_driver("zero");
    ScalarField lin = make_field("linear", 1);
    Vec x{0.0};
    Numerics num;
    num.paths = 100;
    num.steps = 10;
    CHECK_THROWS_AS(g_expectation_at_exit(still, zero, lin, x, x, 0.5, 1.0, num),
                    ExitTruncationError);
}

TEST_CASE("comparison theorem on matched samples") {
    DiffusionSpec d = make_diffusion("brownian", 1);
    ScalarField lin = make_field("linear", 1);
    Vec x{0.0};
    PathBundle b = simulate(d, x, 1.0, 100, 30000, 43);
    auto term = terminal_of(b, lin);

    Driver zero = make_driver("zero");
    Driver plus = make_driver("abs_z", {{"mu", 0.5}});
    Driver minus = make_driver("abs_z", {{"mu", -0.5}});

    auto rep = comparison_check(b, zero, plus, term);
    CHECK(rep.ordered);
    CHECK(rep.lower.value < rep.upper.value);

    auto rep2 = comparison_check(b, minus, plus, term);
    CHECK(rep2.ordered);
    CHECK(std::fabs(rep2.lower.value - (-0.5)) < 3.0 * rep2.lower.std_error + 2e-3);
    CHECK(std::fabs(rep2.upper.value - (+0.5)) < 3.0 * rep2.upper.std_error + 2e-3);

    // identical drivers agree bit-exactly on the same samples
    auto rep3 = comparison_check(b, plus, plus, term);
    CHECK(rep3.lower.value == rep3.upper.value);

    // violated precondition g1 <= g2
    CHECK_THROWS_AS(comparison_check(b, plus, zero, term), ConfigError);
}

TEST_CASE("preconditions and failure modes") {
    DiffusionSpec d = make_diffusion("brownian", 1);
    Vec x{0.0};
    PathBundle b = simulate(d, x, 1.0, 4, 200, 1);
    std::vector<double> term(200, 0.0);

    Driver stiff = make_driver("abs_z", {{"mu", 0.5}});
    stiff.lipschitz_estimate = 100.0;  // dt * L >= 1
    CHECK_THROWS_AS(backward_solve(b, stiff, term), ConfigError);

    Driver runaway;
    runaway.name = "runaway";
    runaway.g = [](double y, std::span<const double>) { return 50.0 * y + 1.0; };
    CHECK_THROWS_AS(backward_solve(b, runaway, term), SolverError);

    std::vector<double> bad(200, std::numeric_limits<double>::quiet_NaN());
    Driver zero = make_driver("zero");
    CHECK_THROWS_AS(backward_solve(b, zero, bad), ConfigError);
}

TEST_CASE("solver determinism is bit-exact") {
    DiffusionSpec d = make_diffusion("brownian", 1);
    Driver mu_abs = make_driver("abs_z", {{"mu", 0.5}});
    ScalarField lin = make_field("linear", 1);
    Vec x{0.0};
    Numerics num;
    num.paths = 5000;
    num.steps = 50;
    num.seed = 47;
    auto a = g_expectation(d, mu_abs, lin, x, 1.0, num);
    auto b = g_expectation(d, mu_abs, lin, x, 1.0, num);
    CHECK(a.estimate.value == b.estimate.value);
    CHECK(a.estimate.std_error == b.estimate.std_error);
}
