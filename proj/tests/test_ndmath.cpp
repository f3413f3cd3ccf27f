#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <Eigen/SVD>

#include "dimest/ndmath.hpp"

using namespace dimest;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

double frob_rel_error(const Matrix& m, const Svd& d) {
    const Matrix r = d.U * d.S.asDiagonal() * d.V.transpose();
    return (r - m).norm() / m.norm();
}

double orthonormality_error(const Matrix& q) {
    return (q.transpose() * q - Matrix::Identity(q.cols(), q.cols())).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("svd of identity and diagonal matrices") {
    const Svd id = svd(Matrix::Identity(3, 3));
    CHECK(id.S.isApprox(Vector::Ones(3), 1e-14));

    Matrix d = Matrix::Zero(3, 3);
    d.diagonal() << 1.0, 3.0, 2.0;
    const Svd s = svd(d);
    CHECK_THAT(s.S(0), WithinAbs(3.0, 1e-14));
    CHECK_THAT(s.S(1), WithinAbs(2.0, 1e-14));
    CHECK_THAT(s.S(2), WithinAbs(1.0, 1e-14));
    // Factors are signed permutations.
    CHECK(s.U.cwiseAbs().isApprox(s.V.cwiseAbs(), 1e-14));
    CHECK_THAT(std::abs(s.U(1, 0)), WithinAbs(1.0, 1e-14));
}

TEST_CASE("svd reconstructs random tall, wide and rank-deficient matrices") {
    Rng rng(11);
    for (auto [r, c] : {std::pair{5, 4}, std::pair{4, 7}, std::pair{40, 12}, std::pair{1, 6}, std::pair{6, 1}}) {
        const Matrix m = standard_normal(rng, r, c);
        const Svd d = svd(m);
        CHECK(frob_rel_error(m, d) <= 1e-10);
        CHECK(orthonormality_error(d.U) <= 1e-10);
        CHECK(orthonormality_error(d.V) <= 1e-10);
        CHECK((d.S.array() >= 0.0).all());
        for (Eigen::Index i = 1; i < d.S.size(); ++i) CHECK(d.S(i) <= d.S(i - 1));
    }
    const Matrix a = standard_normal(rng, 8, 2);
    const Matrix low = a * standard_normal(rng, 2, 6);  // rank 2
    const Svd d = svd(low);
    CHECK(frob_rel_error(low, d) <= 1e-10);
    CHECK(d.S(2) <= 1e-12 * d.S(0));
}

TEST_CASE("singular values agree with Eigen's JacobiSVD") {
    Rng rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        const Matrix m = standard_normal(rng, 9, 6) * (trial + 1.0);
        const Eigen::JacobiSVD<Eigen::MatrixXd> ref{Eigen::MatrixXd(m)};
        const Vector s = singular_values(m);
        for (Eigen::Index i = 0; i < s.size(); ++i) CHECK_THAT(s(i), WithinRel(ref.singularValues()(i), 1e-11));
    }
}

TEST_CASE("singular values are invariant under row and column permutations") {
    Rng rng(5);
    const Matrix m = standard_normal(rng, 7, 5);
    Eigen::PermutationMatrix<Eigen::Dynamic> pr(7), pc(5);
    pr.indices() << 3, 0, 6, 1, 5, 2, 4;
    pc.indices() << 4, 2, 0, 1, 3;
    const Matrix mp = pr * m * pc;
    CHECK((singular_values(m) - singular_values(mp)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("svd rejects non-finite and empty input") {
    Matrix m = Matrix::Ones(3, 3);
    m(1, 2) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(svd(m), InvalidInput);
    m(1, 2) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(svd(m), InvalidInput);
    CHECK_THROWS_AS(svd(Matrix(0, 3)), InvalidInput);
}

TEST_CASE("spd_power inverts and whitens") {
    Rng rng(17);
    const Matrix a = standard_normal(rng, 20, 4);
    const Matrix s = a.transpose() * a / 20.0 + 0.1 * Matrix::Identity(4, 4);
    const Matrix w = spd_power(s, -0.5);
    CHECK((w * s * w - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK((spd_power(s, -1.0) * s - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() <= 1e-10);
    Matrix bad = Matrix::Identity(2, 2);
    bad(1, 1) = 0.0;
    CHECK_THROWS_AS(spd_power(bad, -0.5), InvalidInput);
}

TEST_CASE("sample_gaussian matches the requested moments") {
    Rng rng(42);
    const Matrix x = sample_gaussian(rng, Vector::Zero(2), Matrix::Identity(2, 2), 100000);
    REQUIRE(x.rows() == 100000);
    const Matrix c = cross_cov(x, x);
    CHECK((c - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 0.05);

    Matrix chol(1, 1);
    chol(0, 0) = 2.0;
    Vector mean(1);
    mean(0) = -1.5;
    const Matrix y = sample_gaussian(rng, mean, chol, 100000);
    CHECK_THAT(column_variance(y)(0), WithinRel(4.0, 0.05));
    CHECK_THAT(column_mean(y)(0), WithinAbs(-1.5, 0.03));

    CHECK(sample_gaussian(rng, Vector::Zero(3), Matrix::Identity(3, 3), 0).rows() == 0);
}

TEST_CASE("sample_gaussian rejects a Cholesky factor with non-positive diagonal") {
    Rng rng(1);
    Matrix chol = Matrix::Identity(2, 2);
    chol(1, 1) = 0.0;
    CHECK_THROWS_AS(sample_gaussian(rng, Vector::Zero(2), chol, 10), InvalidInput);
    chol(1, 1) = -1.0;
    CHECK_THROWS_AS(sample_gaussian(rng, Vector::Zero(2), chol, 10), InvalidInput);
}

TEST_CASE("bessel_i closed values") {
    CHECK(bessel_i(0, 0.0) == 1.0);
    CHECK(bessel_i(1, 0.0) == 0.0);
    CHECK_THAT(bessel_i(0, 1.0), WithinRel(1.2660658777520082, 1e-14));
    CHECK_THROWS_AS(bessel_i(0, -0.1), InvalidInput);
    CHECK_THROWS_AS(bessel_i(2, std::numeric_limits<double>::infinity()), InvalidInput);
}

TEST_CASE("bessel_i matches the standard library over z <= 50, n <= 60") {
    double worst = 0.0;
    for (unsigned n : {0u, 1u, 2u, 5u, 10u, 25u, 40u, 60u})
        for (double z : {1e-3, 0.1, 0.5, 1.0, 2.5, 7.0, 13.0, 20.0, 33.3, 50.0}) {
            const double ref = std::cyl_bessel_i(static_cast<double>(n), z);
            if (ref < std::numeric_limits<double>::min()) continue;
            worst = std::max(worst, std::abs(bessel_i(n, z) - ref) / ref);
        }
    CHECK(worst <= 1e-10);
}

TEST_CASE("scaled bessel stays finite where the unscaled value overflows") {
    const double s = bessel_i_scaled(0, 800.0);
    CHECK(std::isfinite(s));
    // e^{-z} I_0(z) ~ 1 / sqrt(2 pi z) for large z.
    CHECK_THAT(s, WithinRel(1.0 / std::sqrt(2.0 * std::numbers::pi * 800.0), 1e-3));
}

TEST_CASE("gauss_hermite small rules") {
    const Quadrature q1 = gauss_hermite_nodes(1);
    CHECK(q1.nodes(0) == 0.0);
    CHECK_THAT(q1.weights(0), WithinRel(std::sqrt(std::numbers::pi), 1e-14));
    CHECK_THAT(gaussian_expectation(q1, [](double) { return 1.0; }), WithinAbs(1.0, 1e-14));

    const Quadrature q5 = gauss_hermite_nodes(5);
    CHECK_THAT(gaussian_expectation(q5, [](double z) { return z * z; }), WithinAbs(1.0, 1e-12));
    CHECK_THAT(gaussian_expectation(q5, [](double z) { return z * z * z * z; }), WithinAbs(3.0, 1e-12));
}

TEST_CASE("gauss_hermite integrates polynomials of degree 2n-1 exactly") {
    for (int n : {2, 3, 8, 20, 64, 128}) {
        const Quadrature q = gauss_hermite_nodes(n);
        CHECK_THAT(q.weights.sum(), WithinRel(std::sqrt(std::numbers::pi), 1e-12));
        // Even moments (2k-1)!!; checked relative to the moment size.
        double dfact = 1.0;
        for (int k = 1; 2 * k <= std::min(2 * n - 1, 30); ++k) {
            dfact *= (2 * k - 1);
            const double m = gaussian_expectation(q, [k](double z) { return std::pow(z, 2 * k); });
            CHECK(std::abs(m - dfact) <= 1e-12 * dfact);
        }
        CHECK_THAT(gaussian_expectation(q, [](double z) { return z * z * z + z; }), WithinAbs(0.0, 1e-12));
        for (Eigen::Index i = 1; i < q.nodes.size(); ++i) CHECK(q.nodes(i) > q.nodes(i - 1));
    }
    CHECK_THROWS_AS(gauss_hermite_nodes(0), InvalidInput);
    CHECK_THROWS_AS(gauss_hermite_nodes(129), InvalidInput);
}

TEST_CASE("Rng streams are reproducible and split streams differ") {
    Rng a(123), b(123);
    for (int i = 0; i < 1000; ++i) REQUIRE(a.next_u64() == b.next_u64());
    Rng c(124);
    int equal_first = 0;
    for (int i = 0; i < 100; ++i) equal_first += Rng(123).next_u64() == c.next_u64();
    CHECK(equal_first == 0);
    const Rng s0 = Rng(9).split(0), s1 = Rng(9).split(1);
    CHECK(s0.seed() != s1.seed());
    CHECK(s0.seed() == derive_seed(9, 0));
    Rng x(derive_seed(9, 0)), y(derive_seed(9, 1));
    int equal = 0;
    for (int i = 0; i < 100; ++i) equal += x.next_u64() == y.next_u64();
    CHECK(equal == 0);
}

TEST_CASE("Rng uniform, index and normal statistics") {
    Rng rng(77);
    double sum = 0.0, sq = 0.0;
    std::vector<int> counts(7, 0);
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        ++counts[static_cast<std::size_t>(rng.uniform_index(7))];
        const double z = rng.normal();
        sum += z;
        sq += z * z;
    }
    CHECK_THAT(sum / n, WithinAbs(0.0, 0.01));
    CHECK_THAT(sq / n, WithinAbs(1.0, 0.02));
    for (int c : counts) CHECK_THAT(c / static_cast<double>(n), WithinAbs(1.0 / 7.0, 0.005));
    CHECK_THROWS_AS(rng.uniform_index(0), InvalidInput);
}

TEST_CASE("shuffle produces a permutation") {
    Rng rng(8);
    std::vector<int> v(50);
    std::iota(v.begin(), v.end(), 0);
    rng.shuffle(v);
    std::vector<int> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < 50; ++i) CHECK(sorted[static_cast<std::size_t>(i)] == i);
    CHECK(v != sorted);
}

TEST_CASE("cross_cov, column statistics and median") {
    Matrix a(4, 2), b(4, 1);
    a << 1, 2, 2, 4, 3, 6, 4, 8;
    b << 1, 1, 1, 1;
    CHECK(cross_cov(a, b).cwiseAbs().maxCoeff() == 0.0);
    const Matrix c = cross_cov(a, a);
    CHECK_THAT(c(0, 0), WithinRel(5.0 / 3.0, 1e-14));
    CHECK_THAT(c(0, 1), WithinRel(10.0 / 3.0, 1e-14));
    CHECK_THAT(column_variance(a)(1), WithinRel(20.0 / 3.0, 1e-14));
    CHECK_THROWS_AS(cross_cov(a, Matrix(3, 1)), InvalidInput);
    CHECK_THROWS_AS(cross_cov(Matrix(1, 2), Matrix(1, 2)), InvalidInput);

    CHECK(median({3.0, 1.0, 2.0}) == 2.0);
    CHECK(median({4.0, 1.0, 3.0, 2.0}) == 2.5);
    CHECK_THROWS_AS(median({}), InvalidInput);
}
