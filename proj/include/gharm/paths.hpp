#ifndef GHARM_PATHS_HPP
#define GHARM_PATHS_HPP

#include <cstdint>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "gharm/common.hpp"
#include "gharm/model.hpp"
#include "gharm/rng.hpp"

namespace gharm {

// Seeded ensemble of Euler-Maruyama paths. Layout is step-major:
// states[(k*M + m)*n + d], so a regression at step k reads one contiguous
// block. Draws are keyed by (seed, path, step), never by call order.
struct PathBundle {
    int dim = 1;
    std::size_t num_paths = 0;
    std::size_t num_steps = 0;  // N; states hold N+1 layers
    double horizon = 0.0;
    double dt = 0.0;
    std::uint64_t seed = 0;

    std::vector<double> states;      // (N+1) * M * n
    std::vector<double> increments;  // N * M * n
    std::vector<std::int64_t> exit_index;  // per path; -1 = no exit marked
    bool exit_marked = false;

    std::span<const double> state(std::size_t k, std::size_t m) const {
        return {states.data() + (k * num_paths + m) * dim, static_cast<std::size_t>(dim)};
    }
    std::span<double> state(std::size_t k, std::size_t m) {
        return {states.data() + (k * num_paths + m) * dim, static_cast<std::size_t>(dim)};
    }
    std::span<const double> increment(std::size_t k, std::size_t m) const {
        return {increments.data() + (k * num_paths + m) * dim, static_cast<std::size_t>(dim)};
    }

    double time_at(std::size_t k) const { return dt * static_cast<double>(k); }

    // True if the path is frozen at step k (its exit happened at or before k).
    bool frozen_at(std::size_t k, std::size_t m) const {
        return exit_marked && exit_index[m] >= 0 &&
               static_cast<std::size_t>(exit_index[m]) <= k;
    }

    std::size_t truncated_count() const {
        std::size_t c = 0;
        for (auto e : exit_index)
            if (e < 0) ++c;
        return c;
    }
    double truncation_fraction() const {
        return num_paths ? static_cast<double>(truncated_count()) / num_paths : 0.0;
    }
};

namespace detail {

inline void fill_increments(PathBundle& b) {
    const int n = b.dim;
    const double sq = std::sqrt(b.dt);
    for (std::size_t k = 0; k < b.num_steps; ++k) {
        for (std::size_t m = 0; m < b.num_paths; ++m) {
            double* dst = b.increments.data() + (k * b.num_paths + m) * n;
            for (int d = 0; d < n; d += 2) {
                auto pair = normal_pair(b.seed, m, k, static_cast<std::uint32_t>(d / 2));
                dst[d] = sq * pair.first;
                if (d + 1 < n) dst[d + 1] = sq * pair.second;
            }
        }
    }
}

inline void advance(PathBundle& b, const DiffusionSpec& diffusion) {
    const int n = b.dim;
    const std::size_t M = b.num_paths;
    Vec drift(n), sig(n * n);
    for (std::size_t m = 0; m < M; ++m) {
        for (std::size_t k = 0; k < b.num_steps; ++k) {
            std::span<const double> cur = b.state(k, m);
            diffusion.drift(cur, drift);
            diffusion.sigma(cur, sig);
            const double* dw = b.increments.data() + (k * M + m) * n;
            std::span<double> nxt = b.state(k + 1, m);
            for (int i = 0; i < n; ++i) {
                double v = cur[i] + drift[i] * b.dt;
                for (int j = 0; j < n; ++j) v += sig[i * n + j] * dw[j];
                nxt[i] = v;
                if (!std::isfinite(v))
                    throw SimulationError("non-finite state at path " + std::to_string(m) +
                                          ", step " + std::to_string(k + 1));
            }
        }
    }
}

}  // namespace detail

inline PathBundle simulate(const DiffusionSpec& diffusion, std::span<const double> x,
                           double horizon, std::size_t steps, std::size_t paths,
                           std::uint64_t seed) {
    if (horizon <= 0.0 || steps < 1 || paths < 1)
        throw ConfigError("simulate: need horizon > 0, steps >= 1, paths >= 1");
    PathBundle b;
    b.dim = diffusion.dim;
    b.num_paths = paths;
    b.num_steps = steps;
    b.horizon = horizon;
    b.dt = horizon / static_cast<double>(steps);
    b.seed = seed;
    b.states.resize((steps + 1) * paths * b.dim);
    b.increments.resize(steps * paths * b.dim);
    b.exit_index.assign(paths, -1);
    for (std::size_t m = 0; m < paths; ++m) {
        std::span<double> s0 = b.state(0, m);
        for (int d = 0; d < b.dim; ++d) s0[d] = x[d];
    }
    detail::fill_increments(b);
    detail::advance(b, diffusion);
    return b;
}

// Restart each path from its own state with a fresh seed stream; this is the
// strong-Markov composition primitive for the stopping cascade.
inline PathBundle restart(const DiffusionSpec& diffusion, const std::vector<double>& from_states,
                          double horizon, std::size_t steps, std::uint64_t seed) {
    const int n = diffusion.dim;
    if (from_states.size() % n != 0)
        throw ConfigError("restart: state array size is not a multiple of the dimension");
    const std::size_t paths = from_states.size() / n;
    if (horizon <= 0.0 || steps < 1 || paths < 1)
        throw ConfigError("restart: need horizon > 0, steps >= 1, paths >= 1");
    PathBundle b;
    b.dim = n;
    b.num_paths = paths;
    b.num_steps = steps;
    b.horizon = horizon;
    b.dt = horizon / static_cast<double>(steps);
    b.seed = seed;
    b.states.resize((steps + 1) * paths * n);
    b.increments.resize(steps * paths * n);
    b.exit_index.assign(paths, -1);
    std::copy(from_states.begin(), from_states.end(), b.states.begin());
    detail::fill_increments(b);
    detail::advance(b, diffusion);
    return b;
}

// Drive the scheme with a caller-supplied increment stream (e.g. a slice of
// another bundle's increments) instead of the counter RNG.
inline PathBundle simulate_with_increments(const DiffusionSpec& diffusion,
                                           const std::vector<double>& from_states,
                                           double horizon, std::size_t steps,
                                           std::vector<double> increments) {
    const int n = diffusion.dim;
    const std::size_t paths = from_states.size() / n;
    if (increments.size() != steps * paths * static_cast<std::size_t>(n))
        throw ConfigError("simulate_with_increments: increment array size mismatch");
    PathBundle b;
    b.dim = n;
    b.num_paths = paths;
    b.num_steps = steps;
    b.horizon = horizon;
    b.dt = horizon / static_cast<double>(steps);
    b.seed = 0;
    b.states.resize((steps + 1) * paths * n);
    b.increments = std::move(increments);
    b.exit_index.assign(paths, -1);
    std::copy(from_states.begin(), from_states.end(), b.states.begin());
    detail::advance(b, diffusion);
    return b;
}

// Mark the first grid index at which each path leaves the ball around its
// own center, then freeze the path at that exit state.
inline void mark_exit_per_path(PathBundle& b, const std::vector<double>& centers,
                               const std::vector<double>& radii) {
    const int n = b.dim;
    const std::size_t M = b.num_paths;
    if (centers.size() != M * static_cast<std::size_t>(n) || radii.size() != M)
        throw ConfigError("mark_exit: centers/radii size mismatch");
    for (std::size_t m = 0; m < M; ++m) {
        if (radii[m] <= 0.0) throw ConfigError("mark_exit: radius must be positive");
        std::span<const double> c(centers.data() + m * n, n);
        b.exit_index[m] = -1;
        for (std::size_t k = 0; k <= b.num_steps; ++k) {
            if (dist2(b.state(k, m), c) >= radii[m]) {
                b.exit_index[m] = static_cast<std::int64_t>(k);
                for (std::size_t j = k + 1; j <= b.num_steps; ++j) {
                    std::span<double> dst = b.state(j, m);
                    std::span<const double> src = b.state(k, m);
                    for (int d = 0; d < n; ++d) dst[d] = src[d];
                }
                break;
            }
        }
    }
    b.exit_marked = true;
}

inline void mark_exit(PathBundle& b, std::span<const double> center, double radius) {
    std::vector<double> centers(b.num_paths * b.dim);
    for (std::size_t m = 0; m < b.num_paths; ++m)
        for (int d = 0; d < b.dim; ++d) centers[m * b.dim + d] = center[d];
    mark_exit_per_path(b, centers, std::vector<double>(b.num_paths, radius));
}

inline void dump_csv(const PathBundle& b, const std::string& path, std::size_t max_paths = 100) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open '" + path + "' for writing");
    out << "path,step,time";
    for (int d = 1; d <= b.dim; ++d) out << ",x" << d;
    out << "\n";
    out.precision(17);
    const std::size_t limit = std::min<std::size_t>(b.num_paths, max_paths);
    for (std::size_t m = 0; m < limit; ++m) {
        for (std::size_t k = 0; k <= b.num_steps; ++k) {
            out << m << "," << k << "," << b.time_at(k);
            for (double v : b.state(k, m)) out << "," << v;
            out << "\n";
        }
    }
}

}  // namespace gharm

#endif
