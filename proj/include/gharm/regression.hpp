#ifndef GHARM_REGRESSION_HPP
#define GHARM_REGRESSION_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "gharm/common.hpp"

namespace gharm {

enum class BasisKind { Binned, Polynomial };

struct RegressionConfig {
    BasisKind kind = BasisKind::Binned;
    std::size_t bins = 50;          // target bin count (per dimension for n=2)
    std::size_t min_bin_count = 10; // bins smaller than this merge with neighbors
    int degree = 4;                 // polynomial total degree
};

// Conditional-expectation estimator for one time layer: fit targets against
// the state cross-section, return fitted values per sample. Partitioning (or
// the basis Gram factor) is computed once and reused across several targets.
class LayerRegression {
public:
    // xs: row-major [sample][dim] over the active samples only.
    LayerRegression(const std::vector<double>& xs, int dim, const RegressionConfig& cfg)
        : dim_(dim), cfg_(cfg), count_(dim ? xs.size() / dim : 0) {
        if (count_ == 0) return;
        if (cfg.kind == BasisKind::Binned) {
            xs_ = xs;
            build_bins(xs);
            build_cell_stats();
        } else {
            build_poly(xs);
        }
    }

    std::size_t empty_cell_fallbacks() const { return fallbacks_; }

    // Fitted conditional mean per sample, same order as xs.
    std::vector<double> fit(const std::vector<double>& targets) const {
        if (cfg_.kind == BasisKind::Binned) return fit_binned(targets);
        return fit_poly(targets);
    }

private:
    void build_bins(const std::vector<double>& xs) {
        // Degenerate spread (all states equal, e.g. the common start at k=0)
        // collapses to a single global-mean bin.
        bool degenerate = true;
        for (int d = 0; d < dim_ && degenerate; ++d) {
            double lo = xs[d], hi = xs[d];
            for (std::size_t i = 1; i < count_; ++i) {
                lo = std::min(lo, xs[i * dim_ + d]);
                hi = std::max(hi, xs[i * dim_ + d]);
            }
            if (hi - lo > 1e-14 * (1.0 + std::fabs(hi) + std::fabs(lo))) degenerate = false;
        }
        if (degenerate) {
            cell_of_.assign(count_, 0);
            num_cells_ = 1;
            return;
        }

        if (dim_ == 1) {
            std::size_t bins = std::max<std::size_t>(
                1, std::min(cfg_.bins, count_ / std::max<std::size_t>(1, cfg_.min_bin_count)));
            std::vector<std::uint32_t> order(count_);
            std::iota(order.begin(), order.end(), 0u);
            std::sort(order.begin(), order.end(),
                      [&](std::uint32_t a, std::uint32_t b) { return xs[a] < xs[b]; });
            cell_of_.resize(count_);
            for (std::size_t i = 0; i < count_; ++i)
                cell_of_[order[i]] = static_cast<std::uint32_t>(i * bins / count_);
            num_cells_ = bins;
            return;
        }

        // n == 2: independent per-axis quantile edges, hypercube cells.
        std::size_t per_axis = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::sqrt(static_cast<double>(cfg_.bins))));
        std::vector<std::vector<double>> edges(dim_);
        std::vector<double> axis(count_);
        for (int d = 0; d < dim_; ++d) {
            for (std::size_t i = 0; i < count_; ++i) axis[i] = xs[i * dim_ + d];
            std::sort(axis.begin(), axis.end());
            for (std::size_t e = 1; e < per_axis; ++e)
                edges[d].push_back(axis[e * count_ / per_axis]);
        }
        cell_of_.resize(count_);
        for (std::size_t i = 0; i < count_; ++i) {
            std::uint32_t cell = 0;
            for (int d = 0; d < dim_; ++d) {
                const auto& ed = edges[d];
                std::uint32_t idx = static_cast<std::uint32_t>(
                    std::upper_bound(ed.begin(), ed.end(), xs[i * dim_ + d]) - ed.begin());
                cell = cell * static_cast<std::uint32_t>(per_axis) + idx;
            }
            cell_of_[i] = cell;
        }
        num_cells_ = per_axis;
        for (int d = 1; d < dim_; ++d) num_cells_ *= per_axis;
    }

    // Per-cell second-moment statistics for the local-linear fit. A constant
    // per-cell fit flattens the target in the wide tail bins and visibly
    // attenuates the regression slope there, so each cell carries a least-
    // squares line (plane) through its own samples instead.
    void build_cell_stats() {
        cell_cnt_.assign(num_cells_, 0);
        cell_xmean_.assign(num_cells_ * dim_, 0.0);
        cell_sxx_.assign(num_cells_ * dim_ * dim_, 0.0);
        for (std::size_t i = 0; i < count_; ++i) {
            std::uint32_t c = cell_of_[i];
            cell_cnt_[c] += 1;
            for (int d = 0; d < dim_; ++d) cell_xmean_[c * dim_ + d] += xs_[i * dim_ + d];
        }
        for (std::size_t c = 0; c < num_cells_; ++c)
            if (cell_cnt_[c] > 0)
                for (int d = 0; d < dim_; ++d)
                    cell_xmean_[c * dim_ + d] /= static_cast<double>(cell_cnt_[c]);
        for (std::size_t i = 0; i < count_; ++i) {
            std::uint32_t c = cell_of_[i];
            for (int a = 0; a < dim_; ++a)
                for (int b = 0; b < dim_; ++b)
                    cell_sxx_[(c * dim_ + a) * dim_ + b] +=
                        (xs_[i * dim_ + a] - cell_xmean_[c * dim_ + a]) *
                        (xs_[i * dim_ + b] - cell_xmean_[c * dim_ + b]);
        }
    }

    std::vector<double> fit_binned(const std::vector<double>& targets) const {
        std::vector<double> ysum(num_cells_, 0.0);
        std::vector<double> sxy(num_cells_ * dim_, 0.0);
        double gsum = 0.0;
        for (std::size_t i = 0; i < count_; ++i) {
            ysum[cell_of_[i]] += targets[i];
            gsum += targets[i];
        }
        double gmean = gsum / static_cast<double>(count_);
        std::vector<double> ymean(num_cells_, gmean);
        for (std::size_t c = 0; c < num_cells_; ++c)
            if (cell_cnt_[c] > 0) ymean[c] = ysum[c] / static_cast<double>(cell_cnt_[c]);
        for (std::size_t i = 0; i < count_; ++i) {
            std::uint32_t c = cell_of_[i];
            for (int d = 0; d < dim_; ++d)
                sxy[c * dim_ + d] +=
                    (xs_[i * dim_ + d] - cell_xmean_[c * dim_ + d]) * (targets[i] - ymean[c]);
        }

        std::vector<double> slope(num_cells_ * dim_, 0.0);
        std::vector<double> mean(num_cells_);
        for (std::size_t c = 0; c < num_cells_; ++c) {
            const std::size_t cnt = cell_cnt_[c];
            if (cnt >= cfg_.min_bin_count || (dim_ == 1 && cnt > 0)) {
                mean[c] = ymean[c];
                solve_slope(c, sxy.data() + c * dim_, slope.data() + c * dim_);
            } else if (cnt > 0 && dim_ > 1) {
                // sparse hypercube cell: fall back to the global mean
                mean[c] = gmean;
                ++fallbacks_;
            } else {
                mean[c] = gmean;
                if (num_cells_ > 1) ++fallbacks_;
            }
        }
        std::vector<double> fitted(count_);
        for (std::size_t i = 0; i < count_; ++i) {
            std::uint32_t c = cell_of_[i];
            double v = mean[c];
            for (int d = 0; d < dim_; ++d)
                v += slope[c * dim_ + d] * (xs_[i * dim_ + d] - cell_xmean_[c * dim_ + d]);
            fitted[i] = v;
        }
        return fitted;
    }

    // Slope of the per-cell least-squares line; degenerate spread keeps the
    // slope at zero, which reduces to the constant-per-cell estimator.
    void solve_slope(std::size_t c, const double* sxy, double* slope) const {
        const double* sxx = cell_sxx_.data() + c * dim_ * dim_;
        double scale = 0.0;
        for (int d = 0; d < dim_; ++d) {
            double xm = cell_xmean_[c * dim_ + d];
            scale = std::max(scale, 1.0 + xm * xm);
        }
        const double tiny = 1e-20 * static_cast<double>(cell_cnt_[c]) * scale;
        if (dim_ == 1) {
            if (sxx[0] > tiny) slope[0] = sxy[0] / sxx[0];
            return;
        }
        double det = sxx[0] * sxx[3] - sxx[1] * sxx[2];
        if (det > 1e-9 * sxx[0] * sxx[3] && sxx[0] > tiny && sxx[3] > tiny) {
            slope[0] = (sxx[3] * sxy[0] - sxx[1] * sxy[1]) / det;
            slope[1] = (sxx[0] * sxy[1] - sxx[2] * sxy[0]) / det;
        } else {
            for (int d = 0; d < dim_; ++d)
                if (sxx[d * dim_ + d] > tiny) slope[d] = sxy[d] / sxx[d * dim_ + d];
        }
    }

    void build_poly(const std::vector<double>& xs) {
        // Monomial exponent tuples with total degree <= cfg_.degree.
        powers_.clear();
        std::vector<int> p(dim_, 0);
        build_powers(p, 0, cfg_.degree);
        const std::size_t nb = powers_.size();
        basis_.assign(count_ * nb, 0.0);
        for (std::size_t i = 0; i < count_; ++i)
            for (std::size_t j = 0; j < nb; ++j) {
                double v = 1.0;
                for (int d = 0; d < dim_; ++d)
                    for (int e = 0; e < powers_[j][d]; ++e) v *= xs[i * dim_ + d];
                basis_[i * nb + j] = v;
            }
        // Gram matrix with a tiny ridge, Cholesky-factored once.
        gram_.assign(nb * nb, 0.0);
        for (std::size_t i = 0; i < count_; ++i)
            for (std::size_t a = 0; a < nb; ++a)
                for (std::size_t b = a; b < nb; ++b)
                    gram_[a * nb + b] += basis_[i * nb + a] * basis_[i * nb + b];
        for (std::size_t a = 0; a < nb; ++a) {
            gram_[a * nb + a] += 1e-10 * (1.0 + gram_[a * nb + a]);
            for (std::size_t b = 0; b < a; ++b) gram_[a * nb + b] = gram_[b * nb + a];
        }
        chol_ = gram_;
        cholesky(chol_, nb);
    }

    void build_powers(std::vector<int>& p, int d, int remaining) {
        if (d == dim_) {
            powers_.push_back(p);
            return;
        }
        for (int e = 0; e <= remaining; ++e) {
            p[d] = e;
            build_powers(p, d + 1, remaining - e);
        }
        p[d] = 0;
    }

    static void cholesky(std::vector<double>& a, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j <= i; ++j) {
                double s = a[i * n + j];
                for (std::size_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
                if (i == j) {
                    if (s <= 0.0) throw SolverError("regression basis Gram matrix not SPD");
                    a[i * n + i] = std::sqrt(s);
                } else {
                    a[i * n + j] = s / a[j * n + j];
                }
            }
        }
    }

    std::vector<double> fit_poly(const std::vector<double>& targets) const {
        const std::size_t nb = powers_.size();
        std::vector<double> rhs(nb, 0.0);
        for (std::size_t i = 0; i < count_; ++i)
            for (std::size_t j = 0; j < nb; ++j) rhs[j] += basis_[i * nb + j] * targets[i];
        // Solve L L^T beta = rhs.
        std::vector<double> beta(nb);
        for (std::size_t i = 0; i < nb; ++i) {
            double s = rhs[i];
            for (std::size_t k = 0; k < i; ++k) s -= chol_[i * nb + k] * beta[k];
            beta[i] = s / chol_[i * nb + i];
        }
        for (std::size_t i = nb; i-- > 0;) {
            double s = beta[i];
            for (std::size_t k = i + 1; k < nb; ++k) s -= chol_[k * nb + i] * beta[k];
            beta[i] = s / chol_[i * nb + i];
        }
        std::vector<double> fitted(count_, 0.0);
        for (std::size_t i = 0; i < count_; ++i) {
            double v = 0.0;
            for (std::size_t j = 0; j < nb; ++j) v += basis_[i * nb + j] * beta[j];
            fitted[i] = v;
        }
        return fitted;
    }

    int dim_;
    RegressionConfig cfg_;
    std::size_t count_;

    // binned state
    std::vector<double> xs_;
    std::vector<std::uint32_t> cell_of_;
    std::size_t num_cells_ = 0;
    std::vector<std::size_t> cell_cnt_;
    std::vector<double> cell_xmean_;
    std::vector<double> cell_sxx_;
    mutable std::size_t fallbacks_ = 0;

    // polynomial state
    std::vector<std::vector<int>> powers_;
    std::vector<double> basis_;
    std::vector<double> gram_;
    std::vector<double> chol_;
};

}  // namespace gharm

#endif
