#ifndef GHARM_MODEL_HPP
#define GHARM_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gharm/common.hpp"
#include "gharm/expr.hpp"
#include "gharm/rng.hpp"

namespace gharm {

struct DiffusionSpec {
    int dim = 1;
    DriftFn drift;
    SigmaFn sigma;
    double lipschitz_bound = 0.0;  // estimated, advisory
    std::string name = "custom";

    Vec drift_at(std::span<const double> x) const {
        Vec out(dim);
        drift(x, out);
        return out;
    }
    Vec sigma_at(std::span<const double> x) const {
        Vec out(dim * dim);
        sigma(x, out);
        return out;
    }
};

struct Driver {
    DriverFn g;
    bool satisfies_h1 = false;
    double lipschitz_estimate = 0.0;
    std::map<std::string, double> params;
    std::string name = "custom";
};

struct ScalarField {
    FieldFn f;
    int growth_degree = 0;
    std::string name = "custom";
};

// ---------------------------------------------------------------------------
// Hypothesis spot-checks. The hypotheses are global statements; here we can
// only sample a configured box and report worst cases.
// ---------------------------------------------------------------------------

inline ValidationReport validate_h1(Driver& driver, const std::vector<double>& y_grid,
                                    std::uint64_t seed = 7) {
    if (y_grid.empty()) throw ConfigError("validate_h1: y_grid must be nonempty");
    ValidationReport rep;
    rep.subject = "driver:" + driver.name;

    Vec z0(8, 0.0);
    double max_g_y0 = 0.0;
    for (double y : y_grid) {
        double v = driver.g(y, std::span<const double>(z0.data(), 1));
        if (!std::isfinite(v))
            throw EvaluationError("validate_h1: g(y,0) non-finite at y=" + std::to_string(y));
        max_g_y0 = std::max(max_g_y0, std::fabs(v));
    }

    // Sampled Lipschitz quotient over random (y,z) pairs, z one-dimensional
    // probes are enough for the catalog families.
    double lip = 0.0;
    const int samples = 512;
    for (int i = 0; i < samples; ++i) {
        double y1 = 4.0 * normal_draw(seed, i, 0);
        double y2 = 4.0 * normal_draw(seed, i, 1);
        Vec z1{4.0 * normal_draw(seed, i, 2)};
        Vec z2{4.0 * normal_draw(seed, i, 3)};
        double g1 = driver.g(y1, z1);
        double g2 = driver.g(y2, z2);
        if (!std::isfinite(g1) || !std::isfinite(g2))
            throw EvaluationError("validate_h1: non-finite g on sample pair");
        double denom = std::fabs(y1 - y2) + std::fabs(z1[0] - z2[0]);
        if (denom > 1e-12) lip = std::max(lip, std::fabs(g1 - g2) / denom);
    }

    driver.lipschitz_estimate = lip;
    driver.satisfies_h1 = max_g_y0 <= 1e-12;
    rep.metrics["max_abs_g_y0"] = max_g_y0;
    rep.metrics["lipschitz_estimate"] = lip;
    rep.verdict = driver.satisfies_h1 ? Verdict::Pass : Verdict::Fail;
    if (!driver.satisfies_h1) rep.notes.push_back("g(y,0) != 0 on the validation grid");
    return rep;
}

// Sample box for (x, u, p); bounds of F(u,p)=g(u, p sigma(x)) and its
// finite-difference partials at two box scales. A derivative whose max grows
// markedly from the half box to the full box is flagged as unbounded.
inline ValidationReport validate_h2(const Driver& driver, const DiffusionSpec& diffusion,
                                    const Box& x_box, double u_range, double p_range,
                                    std::uint64_t seed = 11) {
    ValidationReport rep;
    rep.subject = "driver:" + driver.name + "+diffusion:" + diffusion.name;
    const int n = diffusion.dim;
    if (u_range <= 0 || p_range <= 0 || x_box.dim() != static_cast<std::size_t>(n))
        throw ConfigError("validate_h2: sample box must have positive volume");

    auto sample_scale = [&](double scale, double& max_ratio, double& max_du, double& max_dp) {
        const int samples = 256;
        max_ratio = max_du = max_dp = 0.0;
        Vec x(n), p(n), sig(n * n), z(n);
        for (int i = 0; i < samples; ++i) {
            for (int d = 0; d < n; ++d) {
                double u01 = uniform_draw(seed, i, d);
                double mid = 0.5 * (x_box.lo[d] + x_box.hi[d]);
                double half = 0.5 * (x_box.hi[d] - x_box.lo[d]) * scale;
                x[d] = mid + (2.0 * u01 - 1.0) * half;
            }
            double u = (2.0 * uniform_draw(seed, i, n) - 1.0) * u_range * scale;
            for (int d = 0; d < n; ++d)
                p[d] = (2.0 * uniform_draw(seed, i, n + 1 + d) - 1.0) * p_range * scale;
            diffusion.sigma(x, sig);
            auto F = [&](double uu, std::span<const double> pp) {
                for (int a = 0; a < n; ++a) {
                    double s = 0.0;
                    for (int b = 0; b < n; ++b) s += pp[b] * sig[b * n + a];
                    z[a] = s;
                }
                double v = driver.g(uu, z);
                if (!std::isfinite(v)) throw EvaluationError("validate_h2: non-finite F(u,p)");
                return v;
            };
            double f0 = F(u, p);
            double pn = norm2(p);
            max_ratio = std::max(max_ratio, std::fabs(f0) / (1.0 + std::fabs(u) + pn));
            const double h = 1e-5 * (1.0 + std::fabs(u) + pn);
            max_du = std::max(max_du, std::fabs(F(u + h, p) - F(u - h, p)) / (2 * h));
            Vec pp(p);
            for (int d = 0; d < n; ++d) {
                pp[d] = p[d] + h;
                double fp = F(u, pp);
                pp[d] = p[d] - h;
                double fm = F(u, pp);
                pp[d] = p[d];
                max_dp = std::max(max_dp, std::fabs(fp - fm) / (2 * h));
            }
        }
    };

    double ratio_half, du_half, dp_half, ratio_full, du_full, dp_full;
    sample_scale(0.5, ratio_half, du_half, dp_half);
    sample_scale(1.0, ratio_full, du_full, dp_full);

    rep.metrics["max_F_over_1_u_p"] = ratio_full;
    rep.metrics["max_DuF"] = du_full;
    rep.metrics["max_DpF"] = dp_full;

    auto grows = [](double half, double full) { return full > 1.5 * half + 1e-12; };
    bool violation = grows(du_half, du_full) || grows(dp_half, dp_full);
    rep.verdict = violation ? Verdict::Fail : Verdict::Pass;
    if (violation)
        rep.notes.push_back("finite-difference derivative bound grows with the sample box");
    return rep;
}

inline ValidationReport validate_h3(const ScalarField& field, const Box& domain_box,
                                    int growth_degree, std::uint64_t seed = 13) {
    ValidationReport rep;
    rep.subject = "field:" + field.name;
    const int n = static_cast<int>(domain_box.dim());

    auto fit_k = [&](double scale) {
        const int samples = 512;
        double k = 0.0;
        Vec x(n);
        for (int i = 0; i < samples; ++i) {
            for (int d = 0; d < n; ++d) {
                double u01 = uniform_draw(seed, i, d);
                double mid = 0.5 * (domain_box.lo[d] + domain_box.hi[d]);
                double half = 0.5 * (domain_box.hi[d] - domain_box.lo[d]) * scale;
                x[d] = mid + (2.0 * u01 - 1.0) * half;
            }
            double v = field.f(x);
            if (!std::isfinite(v)) throw EvaluationError("validate_h3: non-finite f(x)");
            k = std::max(k, std::fabs(v) / (1.0 + std::pow(norm2(x), growth_degree)));
        }
        return k;
    };

    double k_half = fit_k(0.5);
    double k_full = fit_k(1.0);
    rep.metrics["K"] = k_full;
    rep.verdict = (k_full > 2.0 * k_half + 1e-12) ? Verdict::Warn : Verdict::Pass;
    if (rep.verdict == Verdict::Warn)
        rep.notes.push_back("fitted growth constant K keeps increasing with the box; "
                            "growth may exceed the stated polynomial degree");
    return rep;
}

// ---------------------------------------------------------------------------
// Catalog: closed-form drivers, diffusions and fields addressed by name.
// ---------------------------------------------------------------------------

using Params = std::map<std::string, double>;

inline double param(const Params& p, const std::string& key, double fallback) {
    auto it = p.find(key);
    return it == p.end() ? fallback : it->second;
}

inline Driver make_driver(const std::string& name, const Params& params = {}) {
    Driver d;
    d.name = name;
    d.params = params;
    if (name == "zero") {
        d.g = [](double, std::span<const double>) { return 0.0; };
        d.satisfies_h1 = true;
        d.lipschitz_estimate = 0.0;
    } else if (name == "abs_z") {  // g(y,z) = mu*|z|
        double mu = param(params, "mu", 0.5);
        d.g = [mu](double, std::span<const double> z) { return mu * norm2(z); };
        d.satisfies_h1 = true;
        d.lipschitz_estimate = std::fabs(mu);
    } else if (name == "linear_z") {  // g(y,z) = alpha * z_1
        double alpha = param(params, "alpha", 1.0);
        d.g = [alpha](double, std::span<const double> z) { return alpha * z[0]; };
        d.satisfies_h1 = true;
        d.lipschitz_estimate = std::fabs(alpha);
    } else {
        throw ConfigError("unknown catalog driver '" + name + "'");
    }
    return d;
}

inline Driver make_driver_expr(const std::string& source, int dim, const Params& params = {}) {
    auto parsed = expr::parse(source);
    std::vector<std::string> slots = {"y"};
    for (int i = 1; i <= dim; ++i) slots.push_back("z" + std::to_string(i));
    auto compiled = std::make_shared<expr::Compiled>(parsed, slots, params);
    Driver d;
    d.name = "expr:" + source;
    d.params = params;
    d.g = [compiled, dim](double y, std::span<const double> z) {
        Vec sv(1 + dim);
        sv[0] = y;
        for (int i = 0; i < dim; ++i) sv[1 + i] = z[i];
        return (*compiled)(sv);
    };
    return d;
}

inline DiffusionSpec make_diffusion(const std::string& name, int dim, const Params& params = {}) {
    DiffusionSpec spec;
    spec.dim = dim;
    spec.name = name;
    if (name == "brownian") {
        double scale = param(params, "scale", 1.0);
        spec.drift = [dim](std::span<const double>, std::span<double> out) {
            std::fill(out.begin(), out.begin() + dim, 0.0);
        };
        spec.sigma = [dim, scale](std::span<const double>, std::span<double> out) {
            std::fill(out.begin(), out.begin() + dim * dim, 0.0);
            for (int i = 0; i < dim; ++i) out[i * dim + i] = scale;
        };
        spec.lipschitz_bound = 0.0;
    } else if (name == "constant") {
        double b0 = param(params, "b", 0.0);
        double s0 = param(params, "sigma", 1.0);
        spec.drift = [dim, b0](std::span<const double>, std::span<double> out) {
            std::fill(out.begin(), out.begin() + dim, b0);
        };
        spec.sigma = [dim, s0](std::span<const double>, std::span<double> out) {
            std::fill(out.begin(), out.begin() + dim * dim, 0.0);
            for (int i = 0; i < dim; ++i) out[i * dim + i] = s0;
        };
        spec.lipschitz_bound = 0.0;
    } else if (name == "ou") {  // affine drift b(x) = theta*(mean - x), constant sigma
        double theta = param(params, "theta", 1.0);
        double mean = param(params, "mean", 0.0);
        double s0 = param(params, "sigma", 1.0);
        spec.drift = [dim, theta, mean](std::span<const double> x, std::span<double> out) {
            for (int i = 0; i < dim; ++i) out[i] = theta * (mean - x[i]);
        };
        spec.sigma = [dim, s0](std::span<const double>, std::span<double> out) {
            std::fill(out.begin(), out.begin() + dim * dim, 0.0);
            for (int i = 0; i < dim; ++i) out[i * dim + i] = s0;
        };
        spec.lipschitz_bound = std::fabs(theta);
    } else {
        throw ConfigError("unknown catalog diffusion '" + name + "'");
    }
    return spec;
}

inline DiffusionSpec make_diffusion_expr(const std::vector<std::string>& drift_exprs,
                                         const std::vector<std::string>& sigma_exprs, int dim,
                                         const Params& params = {}) {
    if (static_cast<int>(drift_exprs.size()) != dim ||
        static_cast<int>(sigma_exprs.size()) != dim * dim)
        throw ConfigError("expression diffusion needs n drift and n*n sigma entries");
    std::vector<std::string> slots;
    for (int i = 1; i <= dim; ++i) slots.push_back("x" + std::to_string(i));
    auto compile_all = [&](const std::vector<std::string>& sources) {
        auto out = std::make_shared<std::vector<expr::Compiled>>();
        for (const auto& s : sources) out->emplace_back(expr::parse(s), slots, params);
        return out;
    };
    auto bs = compile_all(drift_exprs);
    auto ss = compile_all(sigma_exprs);
    DiffusionSpec spec;
    spec.dim = dim;
    spec.name = "expr";
    spec.drift = [bs](std::span<const double> x, std::span<double> out) {
        for (std::size_t i = 0; i < bs->size(); ++i) out[i] = (*bs)[i](x);
    };
    spec.sigma = [ss](std::span<const double> x, std::span<double> out) {
        for (std::size_t i = 0; i < ss->size(); ++i) out[i] = (*ss)[i](x);
    };
    return spec;
}

inline ScalarField make_field(const std::string& name, int dim, const Params& params = {}) {
    ScalarField f;
    f.name = name;
    if (name == "linear") {  // a*x_1 + ... (same coefficient per axis) + c
        double a = param(params, "a", 1.0);
        double c = param(params, "c", 0.0);
        f.f = [a, c](std::span<const double> x) {
            double s = c;
            for (double xi : x) s += a * xi;
            return s;
        };
        f.growth_degree = 1;
    } else if (name == "quadratic") {  // q*|x|^2 + a*sum x_i + c
        double q = param(params, "q", 1.0);
        double a = param(params, "a", 0.0);
        double c = param(params, "c", 0.0);
        f.f = [q, a, c](std::span<const double> x) {
            double s = c;
            for (double xi : x) s += q * xi * xi + a * xi;
            return s;
        };
        f.growth_degree = 2;
    } else if (name == "exp_profile") {  // -exp(-2*mu*x_1): g-harmonic for g = mu*|z|, 1-d Brownian
        double mu = param(params, "mu", 0.5);
        f.f = [mu](std::span<const double> x) { return -std::exp(-2.0 * mu * x[0]); };
        f.growth_degree = 0;  // advisory; bounded above, exponential below — validate_h3 warns
    } else if (name == "constant") {
        double c = param(params, "c", 0.0);
        f.f = [c](std::span<const double>) { return c; };
        f.growth_degree = 0;
    } else {
        throw ConfigError("unknown catalog field '" + name + "'");
    }
    (void)dim;
    return f;
}

inline ScalarField make_field_expr(const std::string& source, int dim, const Params& params = {}) {
    auto parsed = expr::parse(source);
    std::vector<std::string> slots;
    for (int i = 1; i <= dim; ++i) slots.push_back("x" + std::to_string(i));
    auto compiled = std::make_shared<expr::Compiled>(parsed, slots, params);
    ScalarField f;
    f.name = "expr:" + source;
    f.growth_degree = 4;
    f.f = [compiled](std::span<const double> x) { return (*compiled)(x); };
    return f;
}

}  // namespace gharm

#endif
