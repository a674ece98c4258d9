#include <doctest.h>

#include <cmath>

#include "gharm/generator.hpp"

using namespace gharm;

TEST_CASE("analytic generator on closed forms") {
    DiffusionSpec d = make_diffusion("brownian", 1);
    Driver zero = make_driver("zero");
    Driver mu_abs = make_driver("abs_z", {{"mu", 0.5}});
    ScalarField sq = make_field("quadratic", 1);
    ScalarField prof = make_field("exp_profile", 1, {{"mu", 0.5}});

    // f = x^2, zero driver: A f = (1/2) f'' = 1
    Vec x{0.4};
    CHECK(std::fabs(analytic_generator(sq, d, zero, x) - 1.0) < 1e-7);

    // f = x^2, g = mu|z|: A f = 1 + mu |2x|
    CHECK(std::fabs(analytic_generator(sq, d, mu_abs, x) - (1.0 + 0.5 * 0.8)) < 1e-7);

    // the g-harmonic profile: A f = 0 at every point
    for (double p : {-1.5, -0.2, 0.0, 0.9, 2.0}) {
        Vec xp{p};
        CHECK(std::fabs(analytic_generator(prof, d, mu_abs, xp)) < 1e-6);
    }

    // OU drift contributes b f': f = x^2 at x, b = theta(mean - x)
    DiffusionSpec ou = make_diffusion("ou", 1, {{"theta", 2.0}, {"mean", 1.0}});
    double expect = 2.0 * (1.0 - 0.4) * (2.0 * 0.4) + 1.0;
    CHECK(std::fabs(analytic_generator(sq, ou, zero, x) - expect) < 1e-6);

    Vec wrong{0.0, 0.0};
    CHECK_THROWS_AS(analytic_generator(sq, d, zero, wrong), ConfigError);
}

TEST_CASE("probabilistic difference quotients extrapolate to the analytic value") {
    DiffusionSpec d = make_diffusion("brownian", 1);
    Driver mu_abs = make_driver("abs_z", {{"mu", 0.5}});
    ScalarField sq = make_field("quadratic", 1);
    Vec x{0.5};
    Numerics num;
    num.paths = 100000;
    num.steps = 40;
    num.seed = 101;
    std::vector<double> ts{0.2, 0.1, 0.05};

    auto est = probabilistic_generator(sq, d, mu_abs, x, ts, num);
    CHECK(est.probabilistic_values.size() == 3);
    // analytic value 1 + mu*|2x| = 1.5
    CHECK(std::fabs(est.analytic_value - 1.5) < 1e-6);
    CHECK(est.discrepancy < 3.0 * est.extrapolated_std_error + 0.05);

    // quotients themselves approach the generator monotonically in t
    for (const auto& q : est.probabilistic_values) {
        CHECK(q.std_error > 0.0);
        CHECK(std::fabs(q.estimate - est.analytic_value) < 0.25);
    }
}

TEST_CASE("zero generator for the harmonic profile, probabilistically") {
    DiffusionSpec d = make_diffusion("brownian", 1);
    Driver mu_abs = make_driver("abs_z", {{"mu", 0.5}});
    ScalarField prof = make_field("exp_profile", 1, {{"mu", 0.5}});
    Vec x{0.0};
    Numerics num;
    num.paths = 100000;
    num.steps = 40;
    num.seed = 103;
    auto est = probabilistic_generator(prof, d, mu_abs, x, {0.2, 0.1, 0.05}, num);
    CHECK(std::fabs(est.analytic_value) < 1e-6);
    CHECK(std::fabs(est.extrapolated_value) < 3.0 * est.extrapolated_std_error + 0.02);
}

TEST_CASE("input validation") {
    DiffusionSpec d = make_diffusion("brownian", 1);
    Driver zero = make_driver("zero");
    ScalarField sq = make_field("quadratic", 1);
    Vec x{0.0};
    Numerics num;
    num.paths = 1000;
    num.steps = 10;
    CHECK_THROWS_AS(probabilistic_generator(sq, d, zero, x, {0.1, 0.2, 0.3}, num), ConfigError);
    CHECK_THROWS_AS(probabilistic_generator(sq, d, zero, x, {0.2, 0.1}, num), ConfigError);
}

TEST_CASE("precision guard trips when paths are far too few") {
    DiffusionSpec d = make_diffusion("brownian", 1);
    Driver zero = make_driver("zero");
    // steep field with a zero generator: the quotient is pure noise, and at
    // tiny path counts and t the noise dwarfs the unit scale
    ScalarField steep = make_field("linear", 1, {{"a", 100.0}});
    Vec x{0.0};
    Numerics num;
    num.paths = 20;
    num.steps = 5;
    num.seed = 107;
    CHECK_THROWS_AS(probabilistic_generator(steep, d, zero, x, {0.02, 0.01, 0.005}, num),
                    PrecisionError);
}
