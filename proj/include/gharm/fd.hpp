#ifndef GHARM_FD_HPP
#define GHARM_FD_HPP

#include <cmath>
#include <vector>

#include "gharm/common.hpp"
#include "gharm/model.hpp"

namespace gharm::fd {

// Central differences with one Richardson level (h, h/2): leading O(h^2)
// error cancels, leaving O(h^4).

inline double richardson(double coarse, double fine) { return (4.0 * fine - coarse) / 3.0; }

inline double partial(const FieldFn& f, std::span<const double> x, int d, double h) {
    Vec p(x.begin(), x.end());
    auto d1 = [&](double step) {
        p[d] = x[d] + step;
        double fp = f(p);
        p[d] = x[d] - step;
        double fm = f(p);
        p[d] = x[d];
        return (fp - fm) / (2.0 * step);
    };
    return richardson(d1(h), d1(h / 2.0));
}

inline double partial2(const FieldFn& f, std::span<const double> x, int d, double h) {
    Vec p(x.begin(), x.end());
    double f0 = f(p);
    auto d2 = [&](double step) {
        p[d] = x[d] + step;
        double fp = f(p);
        p[d] = x[d] - step;
        double fm = f(p);
        p[d] = x[d];
        return (fp - 2.0 * f0 + fm) / (step * step);
    };
    return richardson(d2(h), d2(h / 2.0));
}

inline double partial_cross(const FieldFn& f, std::span<const double> x, int d, int e, double h) {
    Vec p(x.begin(), x.end());
    auto dde = [&](double step) {
        double s = 0.0;
        for (int sd : {+1, -1})
            for (int se : {+1, -1}) {
                p[d] = x[d] + sd * step;
                p[e] = x[e] + se * step;
                s += sd * se * f(p);
            }
        p[d] = x[d];
        p[e] = x[e];
        return s / (4.0 * step * step);
    };
    return richardson(dde(h), dde(h / 2.0));
}

inline Vec gradient(const FieldFn& f, std::span<const double> x, double h) {
    Vec g(x.size());
    for (std::size_t d = 0; d < x.size(); ++d) g[d] = partial(f, x, static_cast<int>(d), h);
    return g;
}

// Lf(x) + g(f(x), f_x(x) sigma(x)) for a smooth candidate f; the elliptic
// operator applied by finite differences.
inline double elliptic_operator(const FieldFn& f, const DiffusionSpec& diffusion,
                                const DriverFn& g, std::span<const double> x, double h) {
    const int n = diffusion.dim;
    Vec drift(n), sig(n * n);
    diffusion.drift(x, drift);
    diffusion.sigma(x, sig);

    double f0 = f(x);
    if (!std::isfinite(f0)) throw EvaluationError("elliptic_operator: non-finite f at probe");
    Vec grad = gradient(f, x, h);

    double lf = 0.0;
    for (int i = 0; i < n; ++i) lf += drift[i] * grad[i];
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double a = 0.0;  // (sigma sigma^T)_{ij}
            for (int k = 0; k < n; ++k) a += sig[i * n + k] * sig[j * n + k];
            if (a == 0.0) continue;
            double second = (i == j) ? partial2(f, x, i, h) : partial_cross(f, x, i, j, h);
            lf += 0.5 * a * second;
        }

    Vec zz(n);
    for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += grad[i] * sig[i * n + j];
        zz[j] = s;
    }
    double r = lf + g(f0, zz);
    if (!std::isfinite(r)) throw EvaluationError("elliptic_operator: non-finite residual");
    return r;
}

}  // namespace gharm::fd

#endif
