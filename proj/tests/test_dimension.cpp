#include <catch_amalgamated.hpp>

#include <cmath>

#include "dimest/dimension.hpp"

using namespace dimest;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Vector spectrum(std::initializer_list<double> v) {
    Vector s(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) s(i++) = x;
    return s;
}

const std::vector<PrMetric> kAllMetrics{PrSv{}, PrEig{}, PrEntropy{}, PrAlpha{0.5}, PrAlpha{1.7}};

}  // namespace

TEST_CASE("cross-covariance of a standardized column with itself is its variance") {
    Rng rng(1);
    Matrix z = standard_normal(rng, 5000, 1);
    z = (z.array() - z.mean()).matrix();
    const Matrix c = cross_covariance(z, z);
    REQUIRE(c.rows() == 1);
    CHECK_THAT(c(0, 0), WithinRel(z.squaredNorm() / 4999.0, 1e-12));
    CHECK_THAT(c(0, 0), WithinAbs(1.0, 0.05));
}

TEST_CASE("cross-covariance of independent columns vanishes") {
    Rng rng(2);
    const Matrix zx = standard_normal(rng, 100000, 3);
    const Matrix zy = standard_normal(rng, 100000, 3);
    CHECK(cross_covariance(zx, zy).cwiseAbs().maxCoeff() < 0.02);
}

TEST_CASE("cross-covariance centres and rejects short inputs") {
    const Matrix k = Matrix::Constant(6, 2, 3.5);
    CHECK(cross_covariance(k, k).isZero());
    Matrix a(3, 1), b(3, 2);
    a << 1, 2, 3;
    b << 0, 1, 2, 5, 4, 1;
    // Unbiased: sum (a - 2)(b - mean) / 2.
    CHECK_THAT(cross_covariance(a, b)(0, 0), WithinAbs(2.0, 1e-15));
    CHECK_THAT(cross_covariance(a, b)(0, 1), WithinAbs(0.0, 1e-15));
    CHECK_THROWS_AS(cross_covariance(a.topRows(1), b.topRows(1)), InvalidInput);
    CHECK_THROWS_AS(cross_covariance(a, b.topRows(2)), InvalidInput);
}

TEST_CASE("equal modes count fully under every metric") {
    for (const auto& m : kAllMetrics) CHECK_THAT(d_eff(spectrum({1, 1, 1, 1}), m), WithinAbs(4.0, 1e-12));
    for (const auto& m : kAllMetrics) CHECK_THAT(d_eff(spectrum({1, 0, 0}), m), WithinAbs(1.0, 1e-12));
}

TEST_CASE("participation ratios of an unequal spectrum") {
    const Vector s = spectrum({1, 1, 0.1});
    CHECK_THAT(d_eff(s, PrSv{}), WithinAbs(2.1 * 2.1 / 2.01, 1e-12));
    CHECK_THAT(d_eff(s, PrEig{}), WithinAbs(2.01 * 2.01 / 2.0001, 1e-12));
    CHECK_THAT(d_eff(s, PrSv{}), WithinAbs(2.194, 5e-4));
    CHECK_THAT(d_eff(s, PrEig{}), WithinAbs(2.0202, 5e-4));
    const double p1 = 1.0 / 2.1, p3 = 0.1 / 2.1;
    CHECK_THAT(d_eff(s, PrEntropy{}), WithinRel(std::exp(-2 * p1 * std::log(p1) - p3 * std::log(p3)), 1e-12));
    const double h = 2.0 + std::sqrt(0.1);
    CHECK_THAT(d_eff(s, PrAlpha{0.5}), WithinRel(h * h / 2.1, 1e-12));
    CHECK_THAT(d_eff(s, PrAlpha{1.0}), WithinRel(d_eff(s, PrSv{}), 1e-12));
    CHECK_THAT(d_eff(s, PrAlpha{2.0}), WithinRel(d_eff(s, PrEig{}), 1e-12));
}

TEST_CASE("d_eff error paths") {
    CHECK_THROWS_AS(d_eff(Vector::Zero(4)), DegenerateSpectrum);
    CHECK_THROWS_AS(d_eff(spectrum({1, -0.5})), InvalidInput);
    CHECK_THROWS_AS(d_eff(spectrum({1, NAN})), InvalidInput);
    CHECK_THROWS_AS(d_eff(spectrum({1, 0.5}), PrAlpha{0.0}), InvalidInput);
}

TEST_CASE("d_eff is scale invariant and bounded by the support") {
    Rng rng(7);
    for (int rep = 0; rep < 200; ++rep) {
        const Eigen::Index k = 1 + static_cast<Eigen::Index>(rng.uniform_index(12));
        Vector s(k);
        Eigen::Index nnz = 0;
        for (Eigen::Index i = 0; i < k; ++i) {
            s(i) = rng.uniform() < 0.2 ? 0.0 : std::exp(rng.uniform(-6.0, 2.0));
            nnz += s(i) > 0.0;
        }
        if (nnz == 0) s(0) = 1.0, nnz = 1;
        const double c = std::exp(rng.uniform(-200.0, 200.0));
        for (const auto& m : kAllMetrics) {
            const double d = d_eff(s, m);
            CHECK(d >= 1.0 - 1e-12);
            CHECK(d <= static_cast<double>(nnz) + 1e-9);
            CHECK_THAT(d_eff(c * s, m), WithinRel(d, 1e-10));
        }
    }
}

TEST_CASE("eigenvalue ratio never exceeds the singular-value ratio, which never exceeds entropy") {
    Rng rng(8);
    for (int rep = 0; rep < 500; ++rep) {
        const Eigen::Index k = 2 + static_cast<Eigen::Index>(rng.uniform_index(10));
        Vector s(k);
        for (Eigen::Index i = 0; i < k; ++i) s(i) = std::exp(rng.uniform(-4.0, 1.0));
        const double eig = d_eff(s, PrEig{});
        const double sv = d_eff(s, PrSv{});
        const double ent = d_eff(s, PrEntropy{});
        CHECK(eig <= sv + 1e-12);
        CHECK(sv <= ent + 1e-12);
    }
}

TEST_CASE("spectrum report fills every metric and flags a thin margin") {
    const SpectrumReport r = spectrum_report(spectrum({2, 2, 2, 0, 0, 0}), 1000, 0.5);
    CHECK(r.kz == 6);
    CHECK(r.n_samples_used == 1000);
    CHECK_THAT(r.d_eff_sv, WithinAbs(3.0, 1e-12));
    CHECK_THAT(r.d_eff_eig, WithinAbs(3.0, 1e-12));
    CHECK_THAT(r.d_eff_entropy, WithinAbs(3.0, 1e-12));
    CHECK_THAT(r.d_eff_alpha, WithinAbs(3.0, 1e-12));
    CHECK(r.small_margin);
    CHECK(r.warnings() == std::vector<std::string>{"kz_minus_deff_below_4"});

    const SpectrumReport wide = spectrum_report(spectrum({1, 1, 0, 0, 0, 0, 0, 0}), 10, 0.5);
    CHECK_FALSE(wide.small_margin);
    CHECK(wide.warnings().empty());
}

TEST_CASE("one-shot dimension recovers the rank of a planted cross-covariance") {
    // Encoders that pass the first three coordinates through: the output
    // cross-covariance then has rank three.
    CriticModel m;
    m.family = CriticFamily::Separable;
    m.enc_x.activation = Activation::Identity;
    Matrix w = Matrix::Zero(6, 6);
    w.topLeftCorner(3, 3).setIdentity();
    m.enc_x.layers.push_back({w, Vector::Zero(6)});
    m.enc_y = m.enc_x;
    Rng rng(4);
    const Matrix z = standard_normal(rng, 20000, 6);
    const Matrix x = z + 0.3 * standard_normal(rng, 20000, 6);
    const Matrix y = z + 0.3 * standard_normal(rng, 20000, 6);
    const SpectrumReport r = one_shot_dimension(m, x, y, 2.0);
    CHECK(r.kz == 6);
    CHECK(r.n_samples_used == 20000);
    CHECK_THAT(r.d_eff_sv, WithinAbs(3.0, 0.05));
    CHECK(r.singular_values(3) < 0.05);
    CHECK_FALSE(r.suppressed);

    const SpectrumReport weak = one_shot_dimension(m, x, y, 0.3);
    CHECK(weak.suppressed);
    CHECK(weak.warnings().front() == "mi_below_reliability_threshold");
    CHECK(weak.d_eff_sv == r.d_eff_sv);
    CHECK_FALSE(one_shot_dimension(m, x, y, 0.3, 0.5, 0.2).suppressed);
}
