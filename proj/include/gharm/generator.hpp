#ifndef GHARM_GENERATOR_HPP
#define GHARM_GENERATOR_HPP

#include <cmath>
#include <string>
#include <vector>

#include "gharm/bsde.hpp"
#include "gharm/common.hpp"
#include "gharm/fd.hpp"
#include "gharm/model.hpp"

namespace gharm {

struct QuotientSample {
    double t = 0.0;
    double estimate = 0.0;
    double std_error = 0.0;
};

struct GeneratorEstimate {
    Vec point;
    double analytic_value = 0.0;
    std::vector<QuotientSample> probabilistic_values;
    double extrapolated_value = 0.0;
    double extrapolated_std_error = 0.0;
    double discrepancy = 0.0;
};

// A^X_g f(x) = Lf(x) + g(f(x), f_x(x) sigma(x)) evaluated by central
// differences with one Richardson level.
inline double analytic_generator(const ScalarField& field, const DiffusionSpec& diffusion,
                                 const Driver& driver, std::span<const double> x,
                                 double fd_step_scale = 1e-4) {
    if (diffusion.dim != static_cast<int>(x.size()))
        throw ConfigError("analytic_generator: dimension mismatch");
    double h = fd_step_scale * (1.0 + norm2(x));
    return fd::elliptic_operator(field.f, diffusion, driver.g, x, h);
}

// Difference quotients (E^g_{0,t}[f(X^x_t)] - f(x))/t over a decreasing t
// sequence, extrapolated linearly in t to t=0 by weighted least squares.
inline GeneratorEstimate probabilistic_generator(const ScalarField& field,
                                                 const DiffusionSpec& diffusion,
                                                 const Driver& driver, std::span<const double> x,
                                                 const std::vector<double>& t_sequence,
                                                 const Numerics& numerics) {
    if (t_sequence.size() < 3)
        throw ConfigError("probabilistic_generator: need at least 3 t values");
    for (std::size_t i = 1; i < t_sequence.size(); ++i)
        if (t_sequence[i] >= t_sequence[i - 1])
            throw ConfigError("probabilistic_generator: t sequence must be decreasing");

    GeneratorEstimate est;
    est.point.assign(x.begin(), x.end());
    est.analytic_value = analytic_generator(field, diffusion, driver, x);
    double fx = field.f(x);

    for (std::size_t i = 0; i < t_sequence.size(); ++i) {
        double t = t_sequence[i];
        Numerics num = numerics;
        num.seed = numerics.seed + 1000 * i;
        auto r = g_expectation(diffusion, driver, field, x, t, num);
        QuotientSample q;
        q.t = t;
        q.estimate = (r.estimate.value - fx) / t;
        q.std_error = r.estimate.std_error / t;
        est.probabilistic_values.push_back(q);
    }

    // Weighted linear fit q(t) = a + b t; extrapolated value is the intercept.
    double sw = 0, swt = 0, swtt = 0, swq = 0, swtq = 0;
    for (const auto& q : est.probabilistic_values) {
        double w = q.std_error > 0 ? 1.0 / (q.std_error * q.std_error) : 1.0;
        sw += w;
        swt += w * q.t;
        swtt += w * q.t * q.t;
        swq += w * q.estimate;
        swtq += w * q.t * q.estimate;
    }
    double det = sw * swtt - swt * swt;
    if (std::fabs(det) < 1e-300)
        throw SolverError("probabilistic_generator: degenerate extrapolation fit");
    est.extrapolated_value = (swtt * swq - swt * swtq) / det;
    est.extrapolated_std_error = std::sqrt(std::max(0.0, swtt / det));
    est.discrepancy = std::fabs(est.extrapolated_value - est.analytic_value);

    // Precision guard: each quotient's noise should be well under the scale
    // of what is being resolved.
    double scale = std::max(1.0, std::fabs(est.analytic_value));
    for (const auto& q : est.probabilistic_values)
        if (q.std_error > 0.5 * scale)
            throw PrecisionError("probabilistic_generator: standard error " +
                                 std::to_string(q.std_error) + " too large at t=" +
                                 std::to_string(q.t) + "; increase paths");
    return est;
}

}  // namespace gharm

#endif
