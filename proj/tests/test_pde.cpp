#include <doctest.h>

#include <cmath>

#include "gharm/pde.hpp"

using namespace gharm;

namespace {

const double kPi = 3.14159265358979323846;

}  // namespace

TEST_CASE("heat equation decays sine modes at rate exp(-t/2)") {
    DiffusionSpec d = make_diffusion("brownian", 1);
    Driver zero = make_driver("zero");
    ScalarField init;
    init.name = "sine";
    init.f = [](std::span<const double> x) { return std::sin(x[0]); };

    Box box{{-kPi}, {kPi}};
    double h = 0.02, T = 0.5;
    GridField grid = parabolic_solve(d, zero, init, box, T, h, 0.5 * h * h);

    // sin vanishes on the boundary, so the frozen Dirichlet data is consistent
    // and u(t,x) = exp(-t/2) sin x is the exact solution.
    double worst = 0.0;
    for (std::size_t i = 0; i < grid.axes[0].size(); ++i) {
        double exact = std::exp(-0.5 * T) * std::sin(grid.axes[0][i]);
        worst = std::max(worst, std::fabs(grid.value(grid.time_layers - 1, i) - exact));
    }
    CHECK(worst < 5e-4);
}

TEST_CASE("stationary profile: -exp(-2 mu x) under g = mu|z| does not move") {
    double mu = 0.5;
    DiffusionSpec d = make_diffusion("brownian", 1);
    Driver mu_abs = make_driver("abs_z", {{"mu", mu}});
    ScalarField prof = make_field("exp_profile", 1, {{"mu", mu}});

    Box box{{-2.0}, {2.0}};
    double h = 0.02, T = 1.0;
    GridField grid = parabolic_solve(d, mu_abs, prof, box, T, h, 0.25 * h * h);

    double worst = 0.0;
    for (std::size_t i = 0; i < grid.axes[0].size(); ++i) {
        Vec x{grid.axes[0][i]};
        worst = std::max(worst, std::fabs(grid.value(grid.time_layers - 1, i) - prof.f(x)));
    }
    CHECK(worst < 2e-4);
}

TEST_CASE("constant initial data is a bit-exact fixed point for (H1) drivers") {
    DiffusionSpec d = make_diffusion("brownian", 1);
    Driver mu_abs = make_driver("abs_z", {{"mu", 0.5}});
    ScalarField c = make_field("constant", 1, {{"c", 1.0}});
    Box box{{-1.0}, {1.0}};
    GridField grid = parabolic_solve(d, mu_abs, c, box, 0.1, 0.1, 0.004);
    for (double v : grid.values) CHECK(v == 1.0);
}

TEST_CASE("CFL certificate rejects too-large time steps") {
    DiffusionSpec d = make_diffusion("brownian", 1);
    Driver zero = make_driver("zero");
    ScalarField c = make_field("constant", 1);
    Box box{{-1.0}, {1.0}};
    // h = 0.1 gives bound h^2 / max a = 0.01
    CHECK_THROWS_AS(parabolic_solve(d, zero, c, box, 1.0, 0.1, 0.02), ConfigError);
    CHECK_NOTHROW(parabolic_solve(d, zero, c, box, 0.1, 0.1, 0.009));
}

TEST_CASE("blow-up in the driver surfaces as SolverError") {
    DiffusionSpec d = make_diffusion("brownian", 1);
    Driver quad = make_driver_expr("y*y", 1);
    ScalarField big = make_field("constant", 1, {{"c", 1e5}});
    Box box{{-1.0}, {1.0}};
    CHECK_THROWS_AS(parabolic_solve(d, quad, big, box, 0.05, 0.1, 1e-3), SolverError);
}

TEST_CASE("interpolation of the final layer is exact on linear data") {
    DiffusionSpec still = make_diffusion("constant", 1, {{"b", 0.0}, {"sigma", 0.0}});
    Driver zero = make_driver("zero");
    ScalarField lin = make_field("linear", 1, {{"a", 2.0}, {"c", -1.0}});
    Box box{{-1.0}, {1.0}};
    GridField grid = parabolic_solve(still, zero, lin, box, 0.5, 0.25, 0.1);
    CHECK(std::fabs(grid.interpolate_last(0.37) - (2.0 * 0.37 - 1.0)) < 1e-12);
    CHECK(grid.interpolate_last(5.0) == grid.value(grid.time_layers - 1, grid.nodes() - 1));
}

TEST_CASE("two-dimensional solve reproduces the product heat kernel decay") {
    DiffusionSpec d = make_diffusion("brownian", 2);
    Driver zero = make_driver("zero");
    ScalarField init;
    init.name = "sine2";
    init.f = [](std::span<const double> x) { return std::sin(x[0]) * std::sin(x[1]); };
    Box box{{-kPi, -kPi}, {kPi, kPi}};
    double h = 0.1, T = 0.25;
    GridField grid = parabolic_solve(d, zero, init, box, T, h, 0.2 * h * h);

    // u(t,x,y) = exp(-t) sin x sin y (two modes, each decaying at 1/2)
    std::size_t ic = grid.axes[0].size() / 2 + 3, jc = grid.axes[1].size() / 2 + 5;
    double exact = std::exp(-T) * std::sin(grid.axes[0][ic]) * std::sin(grid.axes[1][jc]);
    double got = grid.value(grid.time_layers - 1, grid.node_index(ic, jc));
    CHECK(std::fabs(got - exact) < 5e-3);
}

TEST_CASE("elliptic residual: exact zeros and known values") {
    DiffusionSpec d = make_diffusion("brownian", 1);
    Driver mu_abs = make_driver("abs_z", {{"mu", 0.5}});
    ScalarField prof = make_field("exp_profile", 1, {{"mu", 0.5}});
    std::vector<Vec> probes{{-1.0}, {0.0}, {0.7}, {2.0}};

    // (1/2) f'' + mu |f'| = 0 identically for the profile
    for (double r : elliptic_residual(prof, d, mu_abs, probes)) CHECK(std::fabs(r) < 1e-7);

    // f = x^2 under the zero driver: residual = (1/2) f'' = 1 everywhere
    ScalarField sq = make_field("quadratic", 1);
    Driver zero = make_driver("zero");
    for (double r : elliptic_residual(sq, d, zero, probes)) CHECK(std::fabs(r - 1.0) < 1e-7);
}

TEST_CASE("discrete comparison principle under a nonlinear driver") {
    DiffusionSpec d = make_diffusion("brownian", 1);
    Driver mu_abs = make_driver("abs_z", {{"mu", 0.5}});
    ScalarField upper = make_field("constant", 1, {{"c", 2.0}});
    ScalarField lower;
    lower.name = "sine";
    lower.f = [](std::span<const double> x) { return std::sin(3.0 * x[0]); };
    Box box{{-2.0}, {2.0}};

    auto rep = comparison_principle_check(upper, lower, d, mu_abs, box, 0.5, 0.05, 5e-4);
    CHECK(rep.holds);
    CHECK(rep.worst_gap >= -1e-10);

    // initial ordering violated
    ScalarField low_c = make_field("constant", 1, {{"c", 0.0}});
    ScalarField high_c = make_field("constant", 1, {{"c", 1.0}});
    CHECK_THROWS_AS(comparison_principle_check(low_c, high_c, d, mu_abs, box, 0.5, 0.05, 5e-4),
                    ConfigError);
}
