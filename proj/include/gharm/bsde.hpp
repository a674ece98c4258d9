#ifndef GHARM_BSDE_HPP
#define GHARM_BSDE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "gharm/common.hpp"
#include "gharm/model.hpp"
#include "gharm/paths.hpp"
#include "gharm/regression.hpp"

namespace gharm {

struct Numerics {
    std::size_t paths = 100000;
    std::size_t steps = 200;
    std::uint64_t seed = 12345;
    RegressionConfig regression;
};

struct BsdeSolution {
    std::size_t num_paths = 0;
    std::size_t num_steps = 0;
    int dim = 1;

    std::vector<double> y;  // (N+1) * M
    std::vector<double> z;  // N * M * n
    double y0 = 0.0;
    double y0_std_error = 0.0;
    std::vector<int> picard_iterations_used;  // per backward step, max over paths
    std::size_t regression_fallbacks = 0;

    double y_at(std::size_t k, std::size_t m) const { return y[k * num_paths + m]; }
    std::span<const double> z_at(std::size_t k, std::size_t m) const {
        return {z.data() + (k * num_paths + m) * dim, static_cast<std::size_t>(dim)};
    }
};

namespace detail {

constexpr double kPicardTol = 1e-12;
constexpr int kPicardMaxIter = 50;
constexpr std::size_t kBootstrapBlocks = 20;

inline double picard_fixed_point(double cond, double dt, const DriverFn& g,
                                 std::span<const double> z, int* iters_out) {
    double yv = cond;
    for (int it = 0; it < kPicardMaxIter; ++it) {
        double yn = cond + dt * g(yv, z);
        if (std::fabs(yn - yv) <= kPicardTol) {
            if (iters_out) *iters_out = it + 1;
            return yn;
        }
        yv = yn;
    }
    if (iters_out) *iters_out = kPicardMaxIter;
    return std::numeric_limits<double>::quiet_NaN();
}

// Backward recursion over a subset of paths with its own regressions.
// Returns the mean of y at step 0 over the subset; when `full` is non-null
// (the all-paths pass) the per-path y, z and Picard diagnostics are stored.
inline double solve_core(const PathBundle& bundle, const Driver& driver,
                         const std::vector<double>& terminal, const RegressionConfig& regression,
                         const std::vector<std::uint32_t>& subset, BsdeSolution* full) {
    const std::size_t S = subset.size();
    const std::size_t N = bundle.num_steps;
    const int n = bundle.dim;

    std::vector<double> ycur(S), ynext(S);
    for (std::size_t i = 0; i < S; ++i) ynext[i] = terminal[subset[i]];
    if (full) std::copy(ynext.begin(), ynext.end(), full->y.begin() + N * S);

    std::vector<std::uint32_t> active;
    std::vector<double> xs, ytarg, ztarg;
    active.reserve(S);

    for (std::size_t k = N; k-- > 0;) {
        active.clear();
        for (std::size_t i = 0; i < S; ++i) {
            if (bundle.frozen_at(k, subset[i]))
                ycur[i] = ynext[i];  // z stays 0, driver killed after exit
            else
                active.push_back(static_cast<std::uint32_t>(i));
        }
        if (!active.empty()) {
            const std::size_t A = active.size();
            xs.resize(A * n);
            ytarg.resize(A);
            for (std::size_t a = 0; a < A; ++a) {
                auto st = bundle.state(k, subset[active[a]]);
                for (int d = 0; d < n; ++d) xs[a * n + d] = st[d];
                ytarg[a] = ynext[active[a]];
            }

            LayerRegression reg(xs, n, regression);
            std::vector<double> cond = reg.fit(ytarg);

            std::vector<std::vector<double>> zfit(n);
            for (int d = 0; d < n; ++d) {
                ztarg.resize(A);
                for (std::size_t a = 0; a < A; ++a)
                    ztarg[a] = (ytarg[a] - cond[a]) *
                               bundle.increment(k, subset[active[a]])[d] / bundle.dt;
                zfit[d] = reg.fit(ztarg);
            }
            if (full) full->regression_fallbacks += reg.empty_cell_fallbacks();

            int max_iters = 0;
            Vec zrow(n);
            for (std::size_t a = 0; a < A; ++a) {
                const std::size_t i = active[a];
                for (int d = 0; d < n; ++d) zrow[d] = zfit[d][a];
                int iters = 0;
                double yv = picard_fixed_point(cond[a], bundle.dt, driver.g, zrow, &iters);
                if (!std::isfinite(yv))
                    throw SolverError("backward_solve: Picard iteration did not converge at step " +
                                      std::to_string(k));
                max_iters = std::max(max_iters, iters);
                ycur[i] = yv;
                if (full)
                    for (int d = 0; d < n; ++d) full->z[(k * S + i) * n + d] = zrow[d];
            }
            if (full) full->picard_iterations_used[k] = max_iters;
        }
        if (full) std::copy(ycur.begin(), ycur.end(), full->y.begin() + k * S);
        std::swap(ycur, ynext);
    }

    double mean0 = 0.0;
    for (double v : ynext) mean0 += v;
    return mean0 / static_cast<double>(S);
}

}  // namespace detail

// Backward Euler in time, implicit in y via Picard iteration; z from the
// centered Brownian-increment regression z_k = E[(y_{k+1}-E[y_{k+1}|X_k]) dB_k | X_k]/dt.
// Paths frozen after their exit mark carry y forward with z = 0, which solves
// the equation exactly because (H1) gives g(y, 0) = 0.
//
// The standard error comes from 20 fully independent per-block backward
// solves: the regression fits are shared across all paths, so resampling the
// final y column alone would miss most of the run-to-run variation.
inline BsdeSolution backward_solve(const PathBundle& bundle, const Driver& driver,
                                   const std::vector<double>& terminal,
                                   const RegressionConfig& regression = {}) {
    const std::size_t M = bundle.num_paths;
    const std::size_t N = bundle.num_steps;
    const int n = bundle.dim;
    if (terminal.size() != M) throw ConfigError("backward_solve: terminal size mismatch");
    for (double v : terminal)
        if (!std::isfinite(v)) throw ConfigError("backward_solve: non-finite terminal value");
    if (bundle.dt * driver.lipschitz_estimate >= 1.0)
        throw ConfigError("backward_solve: dt * driver Lipschitz estimate must be < 1");

    BsdeSolution sol;
    sol.num_paths = M;
    sol.num_steps = N;
    sol.dim = n;
    sol.y.resize((N + 1) * M);
    sol.z.assign(N * M * n, 0.0);
    sol.picard_iterations_used.assign(N, 0);

    std::vector<std::uint32_t> all(M);
    std::iota(all.begin(), all.end(), 0u);
    sol.y0 = detail::solve_core(bundle, driver, terminal, regression, all, &sol);

    const std::size_t B = std::min<std::size_t>(detail::kBootstrapBlocks, M);
    std::vector<double> block_values(B);
    std::vector<std::uint32_t> subset;
    for (std::size_t b = 0; b < B; ++b) {
        std::size_t lo = b * M / B, hi = (b + 1) * M / B;
        subset.assign(all.begin() + lo, all.begin() + hi);
        block_values[b] = detail::solve_core(bundle, driver, terminal, regression, subset, nullptr);
    }
    double bm = 0.0, bv = 0.0;
    for (double v : block_values) bm += v;
    bm /= static_cast<double>(B);
    for (double v : block_values) bv += (v - bm) * (v - bm);
    bv /= static_cast<double>(B > 1 ? B - 1 : 1);
    sol.y0_std_error = std::sqrt(bv / static_cast<double>(B));
    return sol;
}

struct GExpectationResult {
    Estimate estimate;
    double truncation_fraction = 0.0;
    BsdeSolution solution;
};

// E^g_{0,t}[f(X^x_t)] by simulate + backward regression solve.
inline GExpectationResult g_expectation(const DiffusionSpec& diffusion, const Driver& driver,
                                        const ScalarField& field, std::span<const double> x,
                                        double t, const Numerics& numerics) {
    PathBundle bundle = simulate(diffusion, x, t, numerics.steps, numerics.paths, numerics.seed);
    std::vector<double> terminal(bundle.num_paths);
    for (std::size_t m = 0; m < bundle.num_paths; ++m)
        terminal[m] = field.f(bundle.state(bundle.num_steps, m));
    GExpectationResult res;
    res.solution = backward_solve(bundle, driver, terminal, numerics.regression);
    res.estimate = {res.solution.y0, res.solution.y0_std_error};
    return res;
}

// E^g_{0,tau}[f(X^x_tau)] for tau the exit time from the ball around `center`.
// Paths still inside at T_max are truncated there; the fraction is always
// reported and > 10% is an error.
inline GExpectationResult g_expectation_at_exit(const DiffusionSpec& diffusion,
                                                const Driver& driver, const ScalarField& field,
                                                std::span<const double> x,
                                                std::span<const double> center, double radius,
                                                double t_max, const Numerics& numerics) {
    if (radius <= 0.0 || t_max <= 0.0)
        throw ConfigError("g_expectation_at_exit: radius and T_max must be positive");
    PathBundle bundle =
        simulate(diffusion, x, t_max, numerics.steps, numerics.paths, numerics.seed);
    mark_exit(bundle, center, radius);
    double trunc = bundle.truncation_fraction();
    if (trunc > 0.10)
        throw ExitTruncationError("exit truncation fraction " + std::to_string(trunc) +
                                  " exceeds 10%; increase T_max");
    std::vector<double> terminal(bundle.num_paths);
    for (std::size_t m = 0; m < bundle.num_paths; ++m)
        terminal[m] = field.f(bundle.state(bundle.num_steps, m));
    GExpectationResult res;
    res.solution = backward_solve(bundle, driver, terminal, numerics.regression);
    res.estimate = {res.solution.y0, res.solution.y0_std_error};
    res.truncation_fraction = trunc;
    return res;
}

struct ComparisonReport {
    Estimate lower;  // y0 under g1
    Estimate upper;  // y0 under g2
    bool ordered = false;
};

// Comparison theorem check: g1 <= g2 pointwise should give y0(g1) <= y0(g2)
// on the same samples.
inline ComparisonReport comparison_check(const PathBundle& bundle, const Driver& g1,
                                         const Driver& g2, const std::vector<double>& terminal,
                                         const RegressionConfig& regression = {}) {
    // spot-check the driver ordering precondition
    for (int i = 0; i < 64; ++i) {
        double y = 3.0 * normal_draw(0xC0FFEE, i, 0);
        Vec z(bundle.dim);
        for (int d = 0; d < bundle.dim; ++d) z[d] = 3.0 * normal_draw(0xC0FFEE, i, 1 + d);
        if (g1.g(y, z) > g2.g(y, z) + 1e-12)
            throw ConfigError("comparison_check: g1 > g2 at a validation sample");
    }
    auto s1 = backward_solve(bundle, g1, terminal, regression);
    auto s2 = backward_solve(bundle, g2, terminal, regression);
    ComparisonReport rep;
    rep.lower = {s1.y0, s1.y0_std_error};
    rep.upper = {s2.y0, s2.y0_std_error};
    double gate = 3.0 * std::sqrt(s1.y0_std_error * s1.y0_std_error +
                                  s2.y0_std_error * s2.y0_std_error);
    rep.ordered = s1.y0 <= s2.y0 + gate;
    if (!rep.ordered)
        throw ComparisonViolation("comparison check failed: y0(g1)=" + std::to_string(s1.y0) +
                                  " > y0(g2)=" + std::to_string(s2.y0));
    return rep;
}

inline void dump_csv(const BsdeSolution& sol, const PathBundle& bundle, const std::string& path,
                     std::size_t max_paths = 100) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open '" + path + "' for writing");
    out << "path,step,time,y";
    for (int d = 1; d <= sol.dim; ++d) out << ",z" << d;
    out << "\n";
    out.precision(17);
    const std::size_t limit = std::min<std::size_t>(sol.num_paths, max_paths);
    for (std::size_t m = 0; m < limit; ++m)
        for (std::size_t k = 0; k < sol.num_steps; ++k) {
            out << m << "," << k << "," << bundle.time_at(k) << "," << sol.y_at(k, m);
            for (double zv : sol.z_at(k, m)) out << "," << zv;
            out << "\n";
        }
}

}  // namespace gharm

#endif
