#ifndef GHARM_HARNESS_HPP
#define GHARM_HARNESS_HPP

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "gharm/bsde.hpp"
#include "gharm/common.hpp"
#include "gharm/generator.hpp"
#include "gharm/model.hpp"
#include "gharm/paths.hpp"
#include "gharm/pde.hpp"

namespace gharm {

// ---------------------------------------------------------------------------
// g-martingale probing via the Markov reduction: classify the sign of
// Delta(x,t) = E^g_{0,t}[f(X^x_t)] - f(x) at 3 standard errors.
// ---------------------------------------------------------------------------

enum class MartingaleClass { Consistent, Super, Sub, Indeterminate };

inline const char* to_string(MartingaleClass c) {
    switch (c) {
        case MartingaleClass::Consistent: return "martingale-consistent";
        case MartingaleClass::Super: return "super";
        case MartingaleClass::Sub: return "sub";
        case MartingaleClass::Indeterminate: return "indeterminate";
    }
    return "?";
}

struct MartingaleProbe {
    Vec x;
    double t = 0.0;
    double delta = 0.0;
    double std_error = 0.0;
    MartingaleClass cls = MartingaleClass::Consistent;
};

struct MartingaleVerdict {
    std::vector<MartingaleProbe> probes;
    MartingaleClass overall = MartingaleClass::Consistent;
};

inline MartingaleVerdict check_g_martingale(const ScalarField& field,
                                            const DiffusionSpec& diffusion, const Driver& driver,
                                            const std::vector<Vec>& probe_xs,
                                            const std::vector<double>& probe_ts,
                                            const Numerics& numerics) {
    if (probe_xs.empty() || probe_ts.empty())
        throw ConfigError("check_g_martingale: probe sets must be nonempty");
    MartingaleVerdict verdict;
    bool any_super = false, any_sub = false;
    std::size_t idx = 0;
    for (const auto& x : probe_xs)
        for (double t : probe_ts) {
            Numerics num = numerics;
            num.seed = numerics.seed + 7919 * (++idx);
            auto r = g_expectation(diffusion, driver, field, x, t, num);
            MartingaleProbe p;
            p.x = x;
            p.t = t;
            p.delta = r.estimate.value - field.f(x);
            p.std_error = r.estimate.std_error;
            if (p.delta < -3.0 * p.std_error) {
                p.cls = MartingaleClass::Super;
                any_super = true;
            } else if (p.delta > 3.0 * p.std_error) {
                p.cls = MartingaleClass::Sub;
                any_sub = true;
            } else {
                p.cls = MartingaleClass::Consistent;
            }
            verdict.probes.push_back(std::move(p));
        }
    if (any_super && any_sub)
        verdict.overall = MartingaleClass::Indeterminate;
    else if (any_super)
        verdict.overall = MartingaleClass::Super;
    else if (any_sub)
        verdict.overall = MartingaleClass::Sub;
    else
        verdict.overall = MartingaleClass::Consistent;
    return verdict;
}

// ---------------------------------------------------------------------------
// Feynman-Kac cross-validation: the finite-difference parabolic solution and
// the BSDE estimate of u(T, x) must agree on the report grid.
// ---------------------------------------------------------------------------

struct FkPoint {
    double x = 0.0;
    double pde_value = 0.0;
    Estimate bsde_value;
    double discrepancy = 0.0;
};

struct FkReport {
    std::vector<FkPoint> points;
    double max_discrepancy = 0.0;
    double mean_discrepancy = 0.0;
    double gate = 0.0;
    bool pass = false;
};

struct FkConfig {
    std::vector<double> report_points;  // 1-d report grid
    double pad = 4.0;                   // box padding beyond the report window
    double h = 0.02;
    double dt = 0.0;  // 0 = derive from the CFL certificate with a safety factor
};

inline FkReport feynman_kac_crosscheck(const ScalarField& field, const DiffusionSpec& diffusion,
                                       const Driver& driver, double horizon, const FkConfig& cfg,
                                       const Numerics& numerics) {
    if (diffusion.dim != 1)
        throw ConfigError("feynman_kac_crosscheck: report grid comparison is 1-d");
    if (cfg.report_points.empty()) throw ConfigError("feynman_kac_crosscheck: empty report grid");

    double lo = *std::min_element(cfg.report_points.begin(), cfg.report_points.end()) - cfg.pad;
    double hi = *std::max_element(cfg.report_points.begin(), cfg.report_points.end()) + cfg.pad;
    Box box{{lo}, {hi}};

    double dt = cfg.dt;
    if (dt <= 0.0) {
        // probe the certificate on a throwaway coarse solve bound
        Vec x0{0.5 * (lo + hi)};
        Vec sig(diffusion.dim * diffusion.dim);
        diffusion.sigma(x0, sig);
        double max_a = 0.0;
        for (double v : sig) max_a = std::max(max_a, v * v);
        Vec b(diffusion.dim);
        diffusion.drift(x0, b);
        double denom = max_a + cfg.h * std::fabs(b[0]) +
                       cfg.h * cfg.h * driver.lipschitz_estimate;
        dt = 0.4 * cfg.h * cfg.h / std::max(denom, 1e-12);
    }
    GridField grid = parabolic_solve(diffusion, driver, field, box, horizon, cfg.h, dt);

    FkReport rep;
    double max_se = 0.0;
    std::size_t idx = 0;
    for (double x : cfg.report_points) {
        Numerics num = numerics;
        num.seed = numerics.seed + 104729 * (++idx);
        Vec xv{x};
        auto r = g_expectation(diffusion, driver, field, xv, horizon, num);
        FkPoint p;
        p.x = x;
        p.pde_value = grid.interpolate_last(x);
        p.bsde_value = r.estimate;
        p.discrepancy = std::fabs(p.pde_value - r.estimate.value);
        max_se = std::max(max_se, r.estimate.std_error);
        rep.max_discrepancy = std::max(rep.max_discrepancy, p.discrepancy);
        rep.mean_discrepancy += p.discrepancy;
        rep.points.push_back(std::move(p));
    }
    rep.mean_discrepancy /= static_cast<double>(rep.points.size());
    rep.gate = std::max(2e-2, 3.0 * max_se);
    rep.pass = rep.max_discrepancy <= rep.gate;
    return rep;
}

// ---------------------------------------------------------------------------
// Mean value property at a ball exit.
// ---------------------------------------------------------------------------

struct MvpReport {
    Estimate at_exit;
    double f_at_start = 0.0;
    double deviation = 0.0;
    double truncation_fraction = 0.0;
    bool consistent = false;  // |deviation| <= 3 se
};

inline MvpReport check_mvp(const ScalarField& field, const DiffusionSpec& diffusion,
                           const Driver& driver, std::span<const double> x, double radius,
                           double t_max, const Numerics& numerics) {
    auto r = g_expectation_at_exit(diffusion, driver, field, x, x, radius, t_max, numerics);
    MvpReport rep;
    rep.at_exit = r.estimate;
    rep.f_at_start = field.f(x);
    rep.deviation = r.estimate.value - rep.f_at_start;
    rep.truncation_fraction = r.truncation_fraction;
    rep.consistent = std::fabs(rep.deviation) <= 3.0 * r.estimate.std_error;
    return rep;
}

// ---------------------------------------------------------------------------
// Iterated stopping times (the strict converse of the mean value property):
// successive ball exits driven by a radius function, with fresh seed streams
// per stage and a tower check of the composed g-expectation.
// ---------------------------------------------------------------------------

struct CascadeStage {
    Estimate value;              // E^g_{0,tau_k}[f(X_{tau_k})] via nested solves
    double tower_deviation = 0.0;
    double combined_std_error = 0.0;
    double truncation_fraction = 0.0;
    double boundary_proximity = 0.0;  // fraction of paths within eps of the U boundary
    double min_radius = 0.0;
    double max_radius = 0.0;
    double mean_tau = 0.0;
};

struct StoppingCascade {
    std::vector<CascadeStage> stages;
    Estimate direct_exit_value;   // exit from U in one shot
    double f_at_start = 0.0;
    bool aborted = false;         // a stage truncated more than 10% of paths
    std::string abort_reason;
};

struct CascadeConfig {
    std::size_t stages = 6;
    double stage_horizon = 2.0;
    double direct_horizon = 8.0;
    double proximity_eps_factor = 0.05;  // eps = factor * diam(U)
};

inline void mark_exit_outside_box(PathBundle& b, const Box& box) {
    const int n = b.dim;
    for (std::size_t m = 0; m < b.num_paths; ++m) {
        b.exit_index[m] = -1;
        for (std::size_t k = 0; k <= b.num_steps; ++k) {
            auto st = b.state(k, m);
            bool outside = false;
            for (int d = 0; d < n; ++d)
                if (st[d] <= box.lo[d] || st[d] >= box.hi[d]) outside = true;
            if (outside) {
                b.exit_index[m] = static_cast<std::int64_t>(k);
                for (std::size_t j = k + 1; j <= b.num_steps; ++j) {
                    std::span<double> dst = b.state(j, m);
                    for (int d = 0; d < n; ++d) dst[d] = st[d];
                }
                break;
            }
        }
    }
    b.exit_marked = true;
}

inline StoppingCascade iterated_stopping(const ScalarField& field, const DiffusionSpec& diffusion,
                                         const Driver& driver, std::span<const double> start,
                                         const Box& domain, const FieldFn& radius_fn,
                                         const CascadeConfig& cfg, const Numerics& numerics) {
    const int n = diffusion.dim;
    const std::size_t M = numerics.paths;
    if (!domain.contains(start))
        throw ConfigError("iterated_stopping: start point must be interior to U");

    StoppingCascade cascade;
    cascade.f_at_start = field.f(start);
    const double eps = cfg.proximity_eps_factor * domain.diameter();

    std::vector<PathBundle> bundles;
    std::vector<double> cur(M * n);
    for (std::size_t m = 0; m < M; ++m)
        for (int d = 0; d < n; ++d) cur[m * n + d] = start[d];
    std::vector<double> tau(M, 0.0);

    Estimate prev_value{cascade.f_at_start, 0.0};

    for (std::size_t stage = 1; stage <= cfg.stages; ++stage) {
        // radius condition (16): 0 <= r(y) <= dist(y, boundary of U); and the
        // (17) spot-check that r stays positive away from the boundary.
        std::vector<double> radii(M);
        double rmin = std::numeric_limits<double>::infinity(), rmax = 0.0;
        for (std::size_t m = 0; m < M; ++m) {
            std::span<const double> y(cur.data() + m * n, n);
            double r = radius_fn(y);
            double dist = std::max(0.0, domain.dist_to_boundary(y));
            if (r < 0.0 || r > dist + 1e-12)
                throw RadiusConditionError(
                    "radius condition (16) violated at a visited state: r=" + std::to_string(r) +
                    ", dist=" + std::to_string(dist));
            if (r <= 0.0 && dist > 1e-9)
                throw RadiusConditionError(
                    "radius condition (17) violated: r(y)=0 at an interior visited state");
            radii[m] = std::max(r, 1e-12);
            rmin = std::min(rmin, radii[m]);
            rmax = std::max(rmax, radii[m]);
        }

        std::uint64_t stage_seed = numerics.seed + 0x9E3779B97F4A7C15ull * stage;
        PathBundle b = restart(diffusion, cur, cfg.stage_horizon, numerics.steps, stage_seed);
        mark_exit_per_path(b, cur, radii);

        CascadeStage st;
        st.truncation_fraction = b.truncation_fraction();
        st.min_radius = rmin;
        st.max_radius = rmax;
        if (st.truncation_fraction > 0.10) {
            cascade.aborted = true;
            cascade.abort_reason = "stage " + std::to_string(stage) + " truncated " +
                                   std::to_string(st.truncation_fraction * 100.0) + "% of paths";
            cascade.stages.push_back(std::move(st));
            return cascade;
        }

        for (std::size_t m = 0; m < M; ++m) {
            std::int64_t e = b.exit_index[m];
            tau[m] += b.dt * static_cast<double>(e >= 0 ? e : static_cast<std::int64_t>(b.num_steps));
            auto last = b.state(b.num_steps, m);
            for (int d = 0; d < n; ++d) cur[m * n + d] = last[d];
        }
        double tsum = 0.0;
        std::size_t near = 0;
        for (std::size_t m = 0; m < M; ++m) {
            tsum += tau[m];
            std::span<const double> y(cur.data() + m * n, n);
            if (std::fabs(domain.dist_to_boundary(y)) <= eps) ++near;
        }
        st.mean_tau = tsum / static_cast<double>(M);
        st.boundary_proximity = static_cast<double>(near) / static_cast<double>(M);

        bundles.push_back(std::move(b));

        // Nested valuation: terminal f at this stage's end states, composed
        // backward through all earlier stages (strong Markov by construction).
        std::vector<double> values(M);
        for (std::size_t m = 0; m < M; ++m)
            values[m] = field.f(std::span<const double>(cur.data() + m * n, n));
        Estimate est{};
        for (std::size_t j = bundles.size(); j-- > 0;) {
            BsdeSolution sol = backward_solve(bundles[j], driver, values, numerics.regression);
            if (j == 0) {
                est = {sol.y0, sol.y0_std_error};
            } else {
                for (std::size_t m = 0; m < M; ++m) values[m] = sol.y_at(0, m);
            }
        }
        st.value = est;
        st.tower_deviation = est.value - prev_value.value;
        st.combined_std_error = std::sqrt(est.std_error * est.std_error +
                                          prev_value.std_error * prev_value.std_error);
        prev_value = est;
        cascade.stages.push_back(std::move(st));
    }

    // Direct exit from U with its own fresh stream.
    {
        PathBundle b = simulate(diffusion, start, cfg.direct_horizon, numerics.steps, M,
                                numerics.seed + 0xD1B54A32D192ED03ull);
        mark_exit_outside_box(b, domain);
        std::vector<double> terminal(M);
        for (std::size_t m = 0; m < M; ++m)
            terminal[m] = field.f(b.state(b.num_steps, m));
        BsdeSolution sol = backward_solve(b, driver, terminal, numerics.regression);
        cascade.direct_exit_value = {sol.y0, sol.y0_std_error};
    }
    return cascade;
}

}  // namespace gharm

#endif
