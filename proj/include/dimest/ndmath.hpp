#pragma once

// Dense linear algebra, random sampling and special functions shared by all
// modules. Storage is delegated to Eigen; the decompositions and special
// functions below are implemented here.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dimest/error.hpp"

namespace dimest {

/// Row-major dense real matrix. Rows are samples, columns are features.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

inline bool all_finite(const Matrix& m) { return m.allFinite(); }
inline bool all_finite(const Vector& v) { return v.allFinite(); }

// ---------------------------------------------------------------------------
// Random numbers
// ---------------------------------------------------------------------------

/// SplitMix64 finalizer. Used for seeding and for deriving child seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Child seed for stream `index` of a master seed:
/// splitmix64(master ^ splitmix64(index + 1)). Distinct indices give
/// statistically independent xoshiro streams.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
    return splitmix64(master ^ splitmix64(index + 1));
}

/// xoshiro256** seeded through SplitMix64. Normal variates use the
/// Box-Muller transform with the second variate cached, so the stream is a
/// pure function of the seed.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) noexcept : seed_(seed) {
        std::uint64_t s = seed;
        for (auto& w : state_) {
            s += 0x9E3779B97F4A7C15ULL;
            std::uint64_t z = s;
            z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
            z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
            w = z ^ (z >> 31);
        }
    }

    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }

    std::uint64_t next_u64() noexcept {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). Rejection sampling keeps it unbiased.
    std::uint64_t uniform_index(std::uint64_t n) {
        if (n == 0) throw InvalidInput("uniform_index: empty range");
        const std::uint64_t limit = (~std::uint64_t{0} / n) * n;
        std::uint64_t r = 0;
        do {
            r = next_u64();
        } while (r >= limit);
        return r % n;
    }

    double normal() noexcept {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double th = 2.0 * std::numbers::pi * u2;
        cached_ = r * std::sin(th);
        has_cached_ = true;
        return r * std::cos(th);
    }

    /// Independent generator for stream `index`.
    [[nodiscard]] Rng split(std::uint64_t index) const noexcept {
        return Rng(derive_seed(seed_, index));
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(uniform_index(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t seed_;
    std::array<std::uint64_t, 4> state_{};
    double cached_ = 0.0;
    bool has_cached_ = false;
};

inline Matrix standard_normal(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
    return m;
}

/// n draws of N(mean, chol*chol^T), one per row.
inline Matrix sample_gaussian(Rng& rng, const Vector& mean, const Matrix& chol_cov, Eigen::Index n) {
    const Eigen::Index d = mean.size();
    detail::require(chol_cov.rows() == d && chol_cov.cols() == d,
                    "sample_gaussian: cholesky factor must be dim x dim");
    detail::require(all_finite(mean) && all_finite(chol_cov), "sample_gaussian: non-finite input");
    for (Eigen::Index i = 0; i < d; ++i) {
        detail::require(chol_cov(i, i) > 0.0, "sample_gaussian: non-positive cholesky diagonal");
        for (Eigen::Index j = i + 1; j < d; ++j)
            detail::require(chol_cov(i, j) == 0.0, "sample_gaussian: factor is not lower triangular");
    }
    detail::require(n >= 0, "sample_gaussian: negative count");
    Matrix out = standard_normal(rng, n, d) * chol_cov.transpose();
    out.rowwise() += mean.transpose();
    return out;
}

// ---------------------------------------------------------------------------
// Singular value decomposition (one-sided Jacobi)
// ---------------------------------------------------------------------------

struct Svd {
    Matrix U;  ///< m x r, orthonormal columns
    Vector S;  ///< r singular values, descending
    Matrix V;  ///< n x r, orthonormal columns
};

namespace detail {

// Hestenes one-sided Jacobi on a tall (m >= n) column-major work matrix.
inline Svd jacobi_svd_tall(const Matrix& m) {
    using ColMat = Eigen::MatrixXd;
    const Eigen::Index rows = m.rows();
    const Eigen::Index n = m.cols();
    ColMat a = m;
    ColMat v = ColMat::Identity(n, n);
    constexpr double tol = 1e-15;
    constexpr int max_sweeps = 80;

    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        bool rotated = false;
        for (Eigen::Index p = 0; p + 1 < n; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                const double alpha = a.col(p).squaredNorm();
                const double beta = a.col(q).squaredNorm();
                const double gamma = a.col(p).dot(a.col(q));
                if (gamma == 0.0 || std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (Eigen::Index i = 0; i < rows; ++i) {
                    const double ap = a(i, p);
                    const double aq = a(i, q);
                    a(i, p) = c * ap - s * aq;
                    a(i, q) = s * ap + c * aq;
                }
                for (Eigen::Index i = 0; i < n; ++i) {
                    const double vp = v(i, p);
                    const double vq = v(i, q);
                    v(i, p) = c * vp - s * vq;
                    v(i, q) = s * vp + c * vq;
                }
            }
        }
        if (!rotated) break;
    }

    Vector sv(n);
    for (Eigen::Index j = 0; j < n; ++j) sv(j) = a.col(j).norm();

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) { return sv(i) > sv(j); });

    Svd out;
    out.U = Matrix::Zero(rows, n);
    out.S = Vector(n);
    out.V = Matrix(n, n);
    const double smax = n > 0 ? sv(order[0]) : 0.0;
    const double zero_cut = std::max(smax, 1e-300) * 1e-300;
    std::vector<bool> filled(static_cast<std::size_t>(n), false);
    for (Eigen::Index k = 0; k < n; ++k) {
        const Eigen::Index j = order[static_cast<std::size_t>(k)];
        out.S(k) = sv(j);
        out.V.col(k) = v.col(j);
        if (sv(j) > zero_cut) {
            out.U.col(k) = a.col(j) / sv(j);
            filled[static_cast<std::size_t>(k)] = true;
        }
    }
    // Complete U for null singular values by Gram-Schmidt on unit vectors.
    Eigen::Index e = 0;
    for (Eigen::Index k = 0; k < n; ++k) {
        if (filled[static_cast<std::size_t>(k)]) continue;
        while (e < rows) {
            Vector cand = Vector::Unit(rows, e++);
            for (int pass = 0; pass < 2; ++pass)
                for (Eigen::Index c = 0; c < n; ++c)
                    if (filled[static_cast<std::size_t>(c)])
                        cand -= out.U.col(c).dot(cand) * out.U.col(c);
            const double nrm = cand.norm();
            if (nrm > 1e-8) {
                out.U.col(k) = cand / nrm;
                filled[static_cast<std::size_t>(k)] = true;
                break;
            }
        }
    }
    return out;
}

}  // namespace detail

/// Thin SVD m = U diag(S) V^T with r = min(rows, cols).
inline Svd svd(const Matrix& m) {
    detail::require(m.rows() >= 1 && m.cols() >= 1, "svd: empty matrix");
    detail::require(all_finite(m), "svd: non-finite input");
    if (m.rows() >= m.cols()) return detail::jacobi_svd_tall(m);
    Svd t = detail::jacobi_svd_tall(m.transpose());
    return Svd{std::move(t.V), std::move(t.S), std::move(t.U)};
}

inline Vector singular_values(const Matrix& m) { return svd(m).S; }

/// Eigendecomposition of a symmetric positive semi-definite matrix via SVD.
/// Returns (eigenvalues descending, eigenvectors as columns).
inline std::pair<Vector, Matrix> symmetric_psd_eigen(const Matrix& m) {
    detail::require(m.rows() == m.cols(), "symmetric_psd_eigen: matrix not square");
    Matrix sym = 0.5 * (m + m.transpose());
    Svd d = svd(sym);
    return {std::move(d.S), std::move(d.V)};
}

/// m^p for symmetric positive definite m (p = -1/2 for whitening).
inline Matrix spd_power(const Matrix& m, double p) {
    auto [vals, vecs] = symmetric_psd_eigen(m);
    for (Eigen::Index i = 0; i < vals.size(); ++i) {
        if (!(vals(i) > 0.0)) throw InvalidInput("spd_power: matrix is not positive definite");
        vals(i) = std::pow(vals(i), p);
    }
    return vecs * vals.asDiagonal() * vecs.transpose();
}

// ---------------------------------------------------------------------------
// Special functions
// ---------------------------------------------------------------------------

/// e^{-z} I_n(z). Power series sum_k (z/2)^{2k+n} / (k! (k+n)!) summed in
/// log space relative to its largest term, so the result stays representable
/// for any z where it is above the underflow threshold.
inline double bessel_i_scaled(unsigned order, double z) {
    if (!(z >= 0.0) || !std::isfinite(z)) throw InvalidInput("bessel_i: argument must be finite and >= 0");
    const double n = order;
    if (z == 0.0) return order == 0 ? 1.0 : 0.0;
    const double half = 0.5 * z;
    const double log_q = 2.0 * std::log(half);
    std::vector<double> log_terms{n * std::log(half) - std::lgamma(n + 1.0)};
    double peak = log_terms.front();
    for (int k = 1; k < 1000000; ++k) {
        const double t = log_terms.back() + log_q - std::log(static_cast<double>(k) * (static_cast<double>(k) + n));
        log_terms.push_back(t);
        peak = std::max(peak, t);
        if (t < peak - 40.0 && static_cast<double>(k) > half) break;
    }
    double sum = 0.0;
    for (double t : log_terms) sum += std::exp(t - peak);
    return std::exp(peak - z) * sum;
}

/// Modified Bessel function of the first kind I_n(z), z >= 0.
inline double bessel_i(unsigned order, double z) {
    const double s = bessel_i_scaled(order, z);
    return s * std::exp(z);
}

struct Quadrature {
    Vector nodes;    ///< ascending
    Vector weights;  ///< physicists' convention: sum = sqrt(pi)
};

/// Gauss-Hermite rule for weight e^{-x^2}. Newton iteration on the
/// orthonormal Hermite recurrence with the usual asymptotic starting guesses.
inline Quadrature gauss_hermite_nodes(int n) {
    if (n < 1 || n > 128) throw InvalidInput("gauss_hermite_nodes: n must be in [1, 128]");
    constexpr double pim4 = 0.7511255444649425;  // pi^{-1/4}
    Quadrature q{Vector::Zero(n), Vector::Zero(n)};
    const int m = (n + 1) / 2;
    double z = 0.0;
    for (int i = 0; i < m; ++i) {
        if (i == 0) {
            z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -0.16667);
        } else if (i == 1) {
            z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
        } else if (i == 2) {
            z = 1.86 * z - 0.86 * q.nodes(n - 1);
        } else if (i == 3) {
            z = 1.91 * z - 0.91 * q.nodes(n - 2);
        } else {
            z = 2.0 * z - q.nodes(n - i + 1);
        }
        double pp = 0.0;
        for (int it = 0; it < 200; ++it) {
            double p1 = pim4;
            double p2 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = z * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(static_cast<double>(j) / (j + 1)) * p3;
            }
            pp = std::sqrt(2.0 * n) * p2;
            const double z1 = z;
            z = z1 - p1 / pp;
            if (std::abs(z - z1) <= 1e-15 * std::max(1.0, std::abs(z))) break;
        }
        // Negative nodes first; the i-th largest root sits at index n-1-i.
        q.nodes(i) = -z;
        q.nodes(n - 1 - i) = z;
        q.weights(i) = 2.0 / (pp * pp);
        q.weights(n - 1 - i) = q.weights(i);
    }
    if (n % 2 == 1) q.nodes(n / 2) = 0.0;
    return q;
}

/// E[f(Z)] for Z ~ N(0, 1) using an n-point Gauss-Hermite rule.
template <class F>
double gaussian_expectation(const Quadrature& q, F&& f) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < q.nodes.size(); ++i)
        acc += q.weights(i) * f(std::numbers::sqrt2 * q.nodes(i));
    return acc / std::sqrt(std::numbers::pi);
}

// ---------------------------------------------------------------------------
// Small statistics helpers
// ---------------------------------------------------------------------------

inline Vector column_mean(const Matrix& m) { return m.colwise().mean().transpose(); }

/// Unbiased per-column variance.
inline Vector column_variance(const Matrix& m) {
    if (m.rows() < 2) return Vector::Zero(m.cols());
    const Vector mu = column_mean(m);
    Matrix c = m.rowwise() - mu.transpose();
    return (c.array().square().colwise().sum() / static_cast<double>(m.rows() - 1)).transpose();
}

/// Unbiased covariance of the columns of a and b: (1/(n-1)) (A - mean)^T (B - mean).
inline Matrix cross_cov(const Matrix& a, const Matrix& b) {
    detail::require(a.rows() == b.rows(), "cross_cov: row mismatch");
    detail::require(a.rows() >= 2, "cross_cov: need at least two rows");
    Matrix ac = a.rowwise() - a.colwise().mean();
    Matrix bc = b.rowwise() - b.colwise().mean();
    return (ac.transpose() * bc) / static_cast<double>(a.rows() - 1);
}

inline double median(std::vector<double> v) {
    if (v.empty()) throw InvalidInput("median: empty input");
    const auto mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    double hi = v[mid];
    if (v.size() % 2 == 1) return hi;
    const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
}

}  // namespace dimest
