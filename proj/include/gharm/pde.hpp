#ifndef GHARM_PDE_HPP
#define GHARM_PDE_HPP

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "gharm/common.hpp"
#include "gharm/fd.hpp"
#include "gharm/model.hpp"

namespace gharm {

// Rectangular grid (1-d or 2-d space, optional time axis) with node values
// and the CFL certificate that makes the explicit scheme monotone.
struct GridField {
    int dim = 1;
    std::vector<Vec> axes;       // node coordinates per spatial axis
    Vec spacing;                 // h per axis
    double dt = 0.0;
    std::size_t time_layers = 1; // 1 for a static field
    std::vector<double> values;  // time_layers * nodes, node index row-major over axes
    double cfl_bound = 0.0;      // certified upper bound on dt

    std::size_t nodes() const {
        std::size_t n = 1;
        for (const auto& a : axes) n *= a.size();
        return n;
    }
    std::size_t node_index(std::size_t i, std::size_t j = 0) const {
        return dim == 1 ? i : i * axes[1].size() + j;
    }
    double value(std::size_t layer, std::size_t node) const {
        return values[layer * nodes() + node];
    }
    std::span<const double> layer(std::size_t t) const {
        return {values.data() + t * nodes(), nodes()};
    }
    double time_at(std::size_t layer) const { return dt * static_cast<double>(layer); }

    // Linear interpolation of the last layer at a point (1-d only).
    double interpolate_last(double x) const {
        const Vec& ax = axes[0];
        if (x <= ax.front()) return value(time_layers - 1, 0);
        if (x >= ax.back()) return value(time_layers - 1, ax.size() - 1);
        auto it = std::upper_bound(ax.begin(), ax.end(), x);
        std::size_t i = static_cast<std::size_t>(it - ax.begin()) - 1;
        double w = (x - ax[i]) / (ax[i + 1] - ax[i]);
        return (1.0 - w) * value(time_layers - 1, i) + w * value(time_layers - 1, i + 1);
    }
};

namespace pde_detail {

struct Coefficients {
    Vec drift;      // nodes * n
    Vec a;          // nodes * n * n, (sigma sigma^T)
    Vec sig;        // nodes * n * n
};

inline Coefficients evaluate_coefficients(const DiffusionSpec& diffusion, const GridField& grid) {
    const int n = diffusion.dim;
    const std::size_t nodes = grid.nodes();
    Coefficients c;
    c.drift.resize(nodes * n);
    c.a.resize(nodes * n * n);
    c.sig.resize(nodes * n * n);
    Vec x(n), sig(n * n);
    const std::size_t nx = grid.axes[0].size();
    const std::size_t ny = grid.dim == 2 ? grid.axes[1].size() : 1;
    for (std::size_t i = 0; i < nx; ++i)
        for (std::size_t j = 0; j < ny; ++j) {
            std::size_t node = grid.dim == 1 ? i : i * ny + j;
            x[0] = grid.axes[0][i];
            if (grid.dim == 2) x[1] = grid.axes[1][j];
            diffusion.drift(x, std::span<double>(c.drift.data() + node * n, n));
            diffusion.sigma(x, sig);
            for (int p = 0; p < n; ++p)
                for (int q = 0; q < n; ++q) {
                    c.sig[node * n * n + p * n + q] = sig[p * n + q];
                    double s = 0.0;
                    for (int r = 0; r < n; ++r) s += sig[p * n + r] * sig[q * n + r];
                    c.a[node * n * n + p * n + q] = s;
                }
        }
    return c;
}

// One explicit step: upwind drift, central second differences, driver with
// the central gradient; Dirichlet boundary rows are copied through.
inline void step(const GridField& grid, const Coefficients& co, const DriverFn& g,
                 std::span<const double> prev, std::span<double> next) {
    const int n = grid.dim;
    const double dt = grid.dt;
    if (n == 1) {
        const std::size_t nx = grid.axes[0].size();
        const double h = grid.spacing[0];
        next[0] = prev[0];
        next[nx - 1] = prev[nx - 1];
        Vec z(1);
        for (std::size_t i = 1; i + 1 < nx; ++i) {
            double b = co.drift[i];
            double a = co.a[i];
            double up = b >= 0.0 ? b * (prev[i + 1] - prev[i]) / h
                                 : b * (prev[i] - prev[i - 1]) / h;
            double diff = 0.5 * a * (prev[i + 1] - 2.0 * prev[i] + prev[i - 1]) / (h * h);
            double du = (prev[i + 1] - prev[i - 1]) / (2.0 * h);
            z[0] = du * co.sig[i];
            double v = prev[i] + dt * (up + diff + g(prev[i], z));
            if (!std::isfinite(v))
                throw SolverError("parabolic_solve: overflow at node " + std::to_string(i));
            next[i] = v;
        }
        return;
    }

    const std::size_t nx = grid.axes[0].size();
    const std::size_t ny = grid.axes[1].size();
    const double hx = grid.spacing[0];
    const double hy = grid.spacing[1];
    auto at = [&](std::size_t i, std::size_t j) { return prev[i * ny + j]; };
    Vec z(2), gradu(2);
    for (std::size_t i = 0; i < nx; ++i)
        for (std::size_t j = 0; j < ny; ++j) {
            std::size_t node = i * ny + j;
            if (i == 0 || j == 0 || i == nx - 1 || j == ny - 1) {
                next[node] = prev[node];
                continue;
            }
            const double* b = co.drift.data() + node * 2;
            const double* a = co.a.data() + node * 4;
            const double* s = co.sig.data() + node * 4;
            double up = (b[0] >= 0.0 ? b[0] * (at(i + 1, j) - at(i, j)) / hx
                                     : b[0] * (at(i, j) - at(i - 1, j)) / hx) +
                        (b[1] >= 0.0 ? b[1] * (at(i, j + 1) - at(i, j)) / hy
                                     : b[1] * (at(i, j) - at(i, j - 1)) / hy);
            double diff =
                0.5 * a[0] * (at(i + 1, j) - 2.0 * at(i, j) + at(i - 1, j)) / (hx * hx) +
                0.5 * a[3] * (at(i, j + 1) - 2.0 * at(i, j) + at(i, j - 1)) / (hy * hy) +
                a[1] * (at(i + 1, j + 1) - at(i + 1, j - 1) - at(i - 1, j + 1) +
                        at(i - 1, j - 1)) /
                    (4.0 * hx * hy);
            gradu[0] = (at(i + 1, j) - at(i - 1, j)) / (2.0 * hx);
            gradu[1] = (at(i, j + 1) - at(i, j - 1)) / (2.0 * hy);
            z[0] = gradu[0] * s[0] + gradu[1] * s[2];
            z[1] = gradu[0] * s[1] + gradu[1] * s[3];
            double v = prev[node] + dt * (up + diff + g(prev[node], z));
            if (!std::isfinite(v))
                throw SolverError("parabolic_solve: overflow at node " + std::to_string(node));
            next[node] = v;
        }
}

}  // namespace pde_detail

// Explicit monotone scheme for  u_t = L u + g(u, u_x sigma),  u(0,.) = f,
// Dirichlet boundary frozen at f. Returns every time layer.
inline GridField parabolic_solve(const DiffusionSpec& diffusion, const Driver& driver,
                                 const ScalarField& initial, const Box& box, double horizon,
                                 double h, double dt) {
    const int n = diffusion.dim;
    if (n != static_cast<int>(box.dim()) || (n != 1 && n != 2))
        throw ConfigError("parabolic_solve: spatial dimension must be 1 or 2 and match the box");
    if (h <= 0.0 || dt <= 0.0 || horizon <= 0.0)
        throw ConfigError("parabolic_solve: h, dt and horizon must be positive");

    GridField grid;
    grid.dim = n;
    grid.axes.resize(n);
    grid.spacing.resize(n);
    for (int d = 0; d < n; ++d) {
        std::size_t cells =
            std::max<std::size_t>(2, static_cast<std::size_t>(std::round((box.hi[d] - box.lo[d]) / h)));
        double hd = (box.hi[d] - box.lo[d]) / static_cast<double>(cells);
        grid.spacing[d] = hd;
        grid.axes[d].resize(cells + 1);
        for (std::size_t i = 0; i <= cells; ++i) grid.axes[d][i] = box.lo[d] + hd * i;
    }
    std::size_t layers = std::max<std::size_t>(1, static_cast<std::size_t>(std::round(horizon / dt)));
    grid.dt = horizon / static_cast<double>(layers);
    grid.time_layers = layers + 1;

    auto co = pde_detail::evaluate_coefficients(diffusion, grid);

    // CFL certificate: dt <= h^2 / (max||sigma sigma^T|| + h max|b| + h^2 C_g)
    double max_a = 0.0, max_b = 0.0;
    for (double v : co.a) max_a = std::max(max_a, std::fabs(v));
    for (double v : co.drift) max_b = std::max(max_b, std::fabs(v));
    double hmin = *std::min_element(grid.spacing.begin(), grid.spacing.end());
    double denom = max_a + hmin * max_b + hmin * hmin * driver.lipschitz_estimate;
    grid.cfl_bound = denom > 0.0 ? hmin * hmin / denom : std::numeric_limits<double>::infinity();
    if (grid.dt > grid.cfl_bound * (1.0 + 1e-12))
        throw ConfigError("parabolic_solve: CFL violated, dt=" + std::to_string(grid.dt) +
                          " > bound=" + std::to_string(grid.cfl_bound));

    const std::size_t nodes = grid.nodes();
    grid.values.resize(grid.time_layers * nodes);
    {
        Vec x(n);
        const std::size_t nx = grid.axes[0].size();
        const std::size_t ny = n == 2 ? grid.axes[1].size() : 1;
        for (std::size_t i = 0; i < nx; ++i)
            for (std::size_t j = 0; j < ny; ++j) {
                x[0] = grid.axes[0][i];
                if (n == 2) x[1] = grid.axes[1][j];
                double v = initial.f(x);
                if (!std::isfinite(v))
                    throw EvaluationError("parabolic_solve: non-finite initial data");
                grid.values[n == 1 ? i : i * ny + j] = v;
            }
    }
    for (std::size_t t = 0; t < layers; ++t) {
        std::span<const double> prev(grid.values.data() + t * nodes, nodes);
        std::span<double> next(grid.values.data() + (t + 1) * nodes, nodes);
        pde_detail::step(grid, co, driver.g, prev, next);
    }
    return grid;
}

// Residual Lf + g(f, f_x sigma) of a smooth candidate at each probe point;
// the smooth-sense harmonicity test.
inline std::vector<double> elliptic_residual(const ScalarField& field,
                                             const DiffusionSpec& diffusion, const Driver& driver,
                                             const std::vector<Vec>& probes,
                                             double fd_step_scale = 1e-3) {
    std::vector<double> res;
    res.reserve(probes.size());
    for (const auto& x : probes) {
        double h = fd_step_scale * (1.0 + norm2(x));
        res.push_back(fd::elliptic_operator(field.f, diffusion, driver.g, x, h));
    }
    return res;
}

struct ComparisonPrincipleReport {
    bool holds = true;
    double worst_gap = 0.0;  // most negative (super - sub); >= -1e-10 passes
    std::size_t first_bad_layer = 0;
    std::size_t first_bad_node = 0;
};

// Evolve a super- and a sub-solution candidate under the same monotone scheme
// and require node-wise ordering for all times.
inline ComparisonPrincipleReport comparison_principle_check(
    const ScalarField& super_field, const ScalarField& sub_field, const DiffusionSpec& diffusion,
    const Driver& driver, const Box& box, double horizon, double h, double dt) {
    GridField upper = parabolic_solve(diffusion, driver, super_field, box, horizon, h, dt);
    GridField lower = parabolic_solve(diffusion, driver, sub_field, box, horizon, h, dt);
    const std::size_t nodes = upper.nodes();
    for (std::size_t node = 0; node < nodes; ++node)
        if (lower.values[node] > upper.values[node])
            throw ConfigError("comparison_principle_check: ordering violated on the initial layer");

    ComparisonPrincipleReport rep;
    for (std::size_t t = 0; t < upper.time_layers; ++t)
        for (std::size_t node = 0; node < nodes; ++node) {
            double gap = upper.value(t, node) - lower.value(t, node);
            if (gap < rep.worst_gap) {
                rep.worst_gap = gap;
                rep.first_bad_layer = t;
                rep.first_bad_node = node;
            }
        }
    rep.holds = rep.worst_gap >= -1e-10;
    if (!rep.holds)
        throw ComparisonViolation("discrete comparison principle violated at layer " +
                                  std::to_string(rep.first_bad_layer) + ", node " +
                                  std::to_string(rep.first_bad_node) + ", gap " +
                                  std::to_string(rep.worst_gap));
    return rep;
}

inline void dump_csv(const GridField& grid, const std::string& path, std::size_t layer) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open '" + path + "' for writing");
    out.precision(17);
    if (grid.dim == 1) {
        out << "x,value\n";
        for (std::size_t i = 0; i < grid.axes[0].size(); ++i)
            out << grid.axes[0][i] << "," << grid.value(layer, i) << "\n";
    } else {
        out << "x,y,value\n";
        for (std::size_t i = 0; i < grid.axes[0].size(); ++i)
            for (std::size_t j = 0; j < grid.axes[1].size(); ++j)
                out << grid.axes[0][i] << "," << grid.axes[1][j] << ","
                    << grid.value(layer, grid.node_index(i, j)) << "\n";
    }
}

}  // namespace gharm

#endif
