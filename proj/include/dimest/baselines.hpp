#pragma once

// Reference estimators: Gaussian/CCA mutual information, the circle-embedding
// lower bound for a separable critic, and two nearest-neighbour intrinsic
// dimension estimators (Levina-Bickel, Two-NN).

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "dimest/critics.hpp"
#include "dimest/error.hpp"
#include "dimest/ndmath.hpp"

namespace dimest {

// ---------------------------------------------------------------------------
// CCA
// ---------------------------------------------------------------------------

struct CcaResult {
    Vector rho;                  ///< canonical correlations, descending, clipped to [0, kCcaRhoCap]
    Vector mi_bits_cumulative;   ///< MI from the top-k pairs, k = 1..r
    Eigen::Index usable_rank = 0;
    bool divergent = false;      ///< some rho was clipped at 1
};

inline constexpr double kCcaRidge = 1e-8;
/// Correlations above this count as deterministic (about 9.6 bits per pair).
inline constexpr double kCcaRhoCap = 1.0 - 1e-6;

namespace detail {

inline Eigen::Index numeric_rank(const Matrix& sym) {
    const Vector ev = symmetric_psd_eigen(sym).first;
    if (ev.size() == 0 || !(ev(0) > 0.0)) return 0;
    return (ev.array() > 1e-10 * ev(0)).count();
}

inline Matrix ridge(const Matrix& s, double rel) {
    Matrix out = s;
    const double add = rel * s.trace() / static_cast<double>(s.rows());
    out.diagonal().array() += add;
    return out;
}

}  // namespace detail

/// Canonical correlations of covariance blocks, with each auto-covariance
/// regularised by ridge * trace / dim on the diagonal.
inline CcaResult cca_from_blocks(const GaussianBlocks& b, double ridge = kCcaRidge) {
    detail::require(b.sxx.rows() == b.sxy.rows() && b.syy.rows() == b.sxy.cols(), "cca: inconsistent block shapes");
    detail::require(all_finite(b.sxx) && all_finite(b.sxy) && all_finite(b.syy), "cca: non-finite covariance");
    CcaResult r;
    r.usable_rank = std::min(detail::numeric_rank(b.sxx), detail::numeric_rank(b.syy));
    const Matrix wx = spd_power(detail::ridge(b.sxx, ridge), -0.5);
    const Matrix wy = spd_power(detail::ridge(b.syy, ridge), -0.5);
    r.rho = singular_values(wx * b.sxy * wy);
    for (Eigen::Index i = 0; i < r.rho.size(); ++i) {
        if (r.rho(i) > kCcaRhoCap) {
            r.rho(i) = kCcaRhoCap;
            r.divergent = true;
        }
        r.rho(i) = std::max(r.rho(i), 0.0);
    }
    r.mi_bits_cumulative.resize(r.rho.size());
    double acc = 0.0;
    for (Eigen::Index i = 0; i < r.rho.size(); ++i) {
        acc += -0.5 * std::log2(1.0 - r.rho(i) * r.rho(i));
        r.mi_bits_cumulative(i) = acc;
    }
    return r;
}

/// CCA on samples (rows). top_k <= 0 keeps every pair.
inline CcaResult cca_mi(const Matrix& x, const Matrix& y, Eigen::Index top_k = 0, double ridge = kCcaRidge) {
    detail::require(x.rows() == y.rows(), "cca_mi: row counts differ");
    detail::require(x.rows() > std::max(x.cols(), y.cols()), "cca_mi: need more samples than features");
    detail::require(all_finite(x) && all_finite(y), "cca_mi: non-finite data");
    GaussianBlocks b{cross_cov(x, x), cross_cov(x, y), cross_cov(y, y)};
    auto r = cca_from_blocks(b, ridge);
    if (top_k > 0 && top_k < r.rho.size()) {
        r.rho.conservativeResize(top_k);
        r.mi_bits_cumulative.conservativeResize(top_k);
    }
    return r;
}

// ---------------------------------------------------------------------------
// Circle-embedding bound
// ---------------------------------------------------------------------------

struct CircleBound {
    Vector rho;
    Vector bound_bits;
    Vector true_bits;
    Vector kappa_star;
    Vector lambda_star;  ///< 0 when the trivial critic T = 0 wins

    [[nodiscard]] Vector gap_bits() const { return true_bits - bound_bits; }
};

struct CircleGrids {
    Vector rho;
    Vector kappa;
    Vector lambda;
    int quad_n = 64;
    double series_tol = 1e-14;
    int max_terms = 4000;
};

inline Vector log_grid(double lo, double hi, int n) {
    detail::require(lo > 0.0 && hi >= lo && n >= 1, "log_grid: invalid range");
    Vector g(n);
    for (int i = 0; i < n; ++i)
        g(i) = n == 1 ? lo : std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * i / (n - 1));
    return g;
}

inline Vector lin_grid(double lo, double hi, int n) {
    detail::require(n >= 1, "lin_grid: empty grid");
    Vector g(n);
    for (int i = 0; i < n; ++i) g(i) = n == 1 ? lo : lo + (hi - lo) * i / (n - 1);
    return g;
}

/// kappa: 60 log-spaced on [0.05, 5]; lambda: 60 log-spaced on [0.05, 200];
/// rho: 0, 0.01, ..., 0.99.
inline CircleGrids default_circle_grids() {
    return {lin_grid(0.0, 0.99, 100), log_grid(0.05, 5.0, 60), log_grid(0.05, 200.0, 60)};
}

namespace detail {

/// e^{-lambda} I_n(lambda) e^{-n^2 kappa^2 / 2} for n = 0, 1, ... until the
/// term falls below tol relative to the n = 0 term (both factors decrease in n).
inline std::vector<double> scaled_bessel_series(double lambda, double kappa, double tol, int max_terms) {
    std::vector<double> out{bessel_i_scaled(0, lambda)};
    for (int n = 1;; ++n) {
        if (n > max_terms) throw NumericalError("circle_bound: Bessel series did not converge within the term budget");
        const double in = bessel_i_scaled(static_cast<unsigned>(n), lambda);
        const double damp = std::exp(-0.5 * n * n * kappa * kappa);
        out.push_back(in * damp);
        if (in * damp < tol * out.front()) break;
    }
    return out;
}

/// E_Z[log(e^{-lambda}(I_0 + 2 sum_n I_n cos(n kappa Z) e^{-n^2 kappa^2 / 2}))].
/// The bracket equals E_Y[e^{lambda cos(.) - lambda}], which is at least e^{-2 lambda};
/// truncation and quadrature noise are clamped at that floor.
inline double circle_log_partition(double kappa, double lambda, const Quadrature& q, double tol, int max_terms) {
    const auto terms = scaled_bessel_series(lambda, kappa, tol, max_terms);
    const double floor = std::exp(-2.0 * lambda);
    return gaussian_expectation(q, [&](double z) {
        double s = terms[0];
        const double c1 = std::cos(kappa * z);
        double cprev = 1.0;
        double c = c1;
        for (std::size_t n = 1; n < terms.size(); ++n) {
            s += 2.0 * terms[n] * c;
            const double cnext = 2.0 * c1 * c - cprev;
            cprev = c;
            c = cnext;
        }
        return std::log(std::max(s, floor));
    });
}

}  // namespace detail

/// Objective (nats) for the circular critic lambda cos(kappa (u - v)):
/// lambda e^{-kappa^2 (1 - rho)} - E_Z[log(I_0(lambda) + 2 sum_n I_n(lambda) cos(n kappa Z) e^{-n^2 kappa^2/2})].
inline double circle_objective(double kappa, double lambda, double rho, int quad_n = 64, double tol = 1e-14) {
    detail::require(lambda >= 0.0 && kappa >= 0.0, "circle_objective: kappa, lambda must be >= 0");
    if (lambda == 0.0) return 0.0;
    const auto q = gauss_hermite_nodes(quad_n);
    return lambda * std::exp(-kappa * kappa * (1.0 - rho)) - lambda -
           detail::circle_log_partition(kappa, lambda, q, tol, 4000);
}

/// Grid maximum of the objective per rho, in bits. The log-partition term is
/// independent of rho and is evaluated once per (kappa, lambda).
inline CircleBound circle_bound(const CircleGrids& g) {
    detail::require(g.rho.size() > 0 && g.kappa.size() > 0 && g.lambda.size() > 0, "circle_bound: empty grid");
    detail::require(g.quad_n >= 1 && g.quad_n <= 128, "circle_bound: quad_n must be in [1, 128]");
    for (Eigen::Index i = 0; i < g.rho.size(); ++i)
        detail::require(g.rho(i) >= 0.0 && g.rho(i) < 1.0, "circle_bound: rho must be in [0, 1)");
    const auto q = gauss_hermite_nodes(g.quad_n);
    const Eigen::Index nk = g.kappa.size();
    const Eigen::Index nl = g.lambda.size();
    Matrix logz(nk, nl);
    for (Eigen::Index a = 0; a < nk; ++a)
        for (Eigen::Index b = 0; b < nl; ++b)
            logz(a, b) = g.lambda(b) + detail::circle_log_partition(g.kappa(a), g.lambda(b), q, g.series_tol, g.max_terms);

    CircleBound out;
    const Eigen::Index nr = g.rho.size();
    out.rho = g.rho;
    out.bound_bits.resize(nr);
    out.true_bits.resize(nr);
    out.kappa_star.resize(nr);
    out.lambda_star.resize(nr);
    for (Eigen::Index r = 0; r < nr; ++r) {
        const double rho = g.rho(r);
        double best = 0.0;
        double bk = 0.0;
        double bl = 0.0;
        for (Eigen::Index a = 0; a < nk; ++a) {
            const double decay = std::exp(-g.kappa(a) * g.kappa(a) * (1.0 - rho));
            for (Eigen::Index b = 0; b < nl; ++b) {
                const double v = g.lambda(b) * decay - logz(a, b);
                if (v > best) {
                    best = v;
                    bk = g.kappa(a);
                    bl = g.lambda(b);
                }
            }
        }
        out.bound_bits(r) = best / std::numbers::ln2;
        out.true_bits(r) = -0.5 * std::log2(1.0 - rho * rho);
        out.kappa_star(r) = bk;
        out.lambda_star(r) = bl;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Nearest-neighbour intrinsic dimension
// ---------------------------------------------------------------------------

struct IdEstimate {
    double dimension = 0.0;
    bool degenerate = false;  ///< zero distances were floored
};

namespace detail {

inline constexpr double kDistanceFloor = 1e-12;

/// Sorted Euclidean distances to the k nearest other points, n x k.
inline Matrix knn_distances(const Matrix& pts, int k) {
    const Eigen::Index n = pts.rows();
    require(n > k && k >= 1, "knn: need more points than neighbours");
    require(all_finite(pts), "knn: non-finite points");
    const Vector sq = pts.rowwise().squaredNorm();
    Matrix out(n, k);
    constexpr Eigen::Index block = 256;
    std::vector<std::pair<double, Eigen::Index>> row(static_cast<std::size_t>(n));
    for (Eigen::Index b0 = 0; b0 < n; b0 += block) {
        const Eigen::Index bn = std::min(block, n - b0);
        Matrix d2 = -2.0 * pts.middleRows(b0, bn) * pts.transpose();
        d2.rowwise() += sq.transpose();
        d2.colwise() += sq.segment(b0, bn);
        for (Eigen::Index i = 0; i < bn; ++i) {
            std::vector<double> dist;
            dist.reserve(static_cast<std::size_t>(n - 1));
            for (Eigen::Index j = 0; j < n; ++j)
                if (j != b0 + i) dist.push_back(std::sqrt(std::max(d2(i, j), 0.0)));
            std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
            for (int c = 0; c < k; ++c) out(b0 + i, c) = dist[static_cast<std::size_t>(c)];
        }
    }
    return out;
}

}  // namespace detail

/// Levina-Bickel MLE averaged over points for each k in [k_min, k_max], then
/// averaged over k:  m_k(x) = [ (1/(k-1)) sum_{j<k} log(T_k(x)/T_j(x)) ]^{-1}.
inline IdEstimate levina_bickel(const Matrix& pts, int k_min = 10, int k_max = 20) {
    detail::require(k_min >= 2 && k_max >= k_min, "levina_bickel: need 2 <= k_min <= k_max");
    detail::require(pts.rows() > k_max, "levina_bickel: need more points than k_max");
    Matrix d = detail::knn_distances(pts, k_max);
    IdEstimate est;
    if ((d.array() < detail::kDistanceFloor).any()) {
        est.degenerate = true;
        d = d.cwiseMax(detail::kDistanceFloor);
    }
    const Matrix logd = d.array().log().matrix();
    double acc = 0.0;
    for (int k = k_min; k <= k_max; ++k) {
        double sum_m = 0.0;
        for (Eigen::Index i = 0; i < logd.rows(); ++i) {
            double s = 0.0;
            for (int j = 0; j < k - 1; ++j) s += logd(i, k - 1) - logd(i, j);
            sum_m += s > 0.0 ? (k - 1) / s : 0.0;
        }
        acc += sum_m / static_cast<double>(logd.rows());
    }
    est.dimension = acc / (k_max - k_min + 1);
    return est;
}

/// Two-NN: mu_i = r_2/r_1, sorted; the largest `discard` fraction is dropped;
/// d is the least-squares slope through the origin of -log(1 - F(mu)) vs log(mu)
/// with F(mu_(i)) = i / n.
inline IdEstimate two_nn(const Matrix& pts, double discard = 0.1) {
    detail::require(pts.rows() >= 10, "two_nn: need at least 10 points");
    detail::require(discard >= 0.0 && discard < 1.0, "two_nn: discard fraction must be in [0, 1)");
    Matrix d = detail::knn_distances(pts, 2);
    IdEstimate est;
    if ((d.array() < detail::kDistanceFloor).any()) {
        est.degenerate = true;
        d = d.cwiseMax(detail::kDistanceFloor);
    }
    const Eigen::Index n = d.rows();
    std::vector<double> mu(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) mu[static_cast<std::size_t>(i)] = d(i, 1) / d(i, 0);
    std::sort(mu.begin(), mu.end());
    const auto keep = static_cast<std::size_t>(std::floor((1.0 - discard) * static_cast<double>(n)));
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < keep; ++i) {
        const double f = static_cast<double>(i + 1) / static_cast<double>(n);
        if (f >= 1.0) break;
        const double xv = std::log(mu[i]);
        const double yv = -std::log(1.0 - f);
        sxy += xv * yv;
        sxx += xv * xv;
    }
    if (!(sxx > 0.0)) throw DegenerateSpectrum("two_nn: all distance ratios equal 1");
    est.dimension = sxy / sxx;
    return est;
}

}  // namespace dimest
