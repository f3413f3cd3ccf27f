#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "dimest/datagen.hpp"

using namespace dimest;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

double corr(const Matrix& a, Eigen::Index ca, const Matrix& b, Eigen::Index cb) {
    Matrix ab(a.rows(), 2);
    ab.col(0) = a.col(ca);
    ab.col(1) = b.col(cb);
    const Matrix c = cross_cov(ab, ab);
    return c(0, 1) / std::sqrt(c(0, 0) * c(1, 1));
}

std::filesystem::path scratch_dir(const std::string& name) {
    auto d = std::filesystem::temp_directory_path() / ("dimest_test_" + name);
    std::filesystem::remove_all(d);
    std::filesystem::create_directories(d);
    return d;
}

}  // namespace

TEST_CASE("correlation for an equal MI split") {
    CHECK_THAT(correlation_for_bits(2.0, 4), WithinAbs(std::sqrt(0.5), 1e-15));
    CHECK_THAT(correlation_for_bits(2.0, 1), WithinAbs(std::sqrt(1.0 - 1.0 / 16.0), 1e-15));
    CHECK_THAT(correlation_for_bits(2.0, 1), WithinAbs(0.9682, 5e-5));
    CHECK(correlation_for_bits(0.0, 3) == 0.0);
    CHECK_THAT(bits_for_correlation(0.7071067811865476), WithinAbs(0.5, 1e-12));
    for (double i : {0.1, 1.0, 2.0, 6.0})
        for (int k : {1, 2, 4, 8}) CHECK_THAT(k * bits_for_correlation(correlation_for_bits(i, k)), WithinRel(i, 1e-12));
}

TEST_CASE("analytic MI is known only for the joint Gaussian") {
    CHECK(analytic_mi_bits(JointGaussian{4, 2.0}) == 2.0);
    CHECK_FALSE(analytic_mi_bits(GaussianMixture{}).has_value());
    CHECK_FALSE(analytic_mi_bits(SwissRoll{}).has_value());
}

TEST_CASE("joint Gaussian latents have the target per-dimension correlation") {
    Rng rng(1);
    const int n = 100000;
    const auto z = sample_latent(JointGaussian{4, 2.0}, rng, n);
    const double rho = std::sqrt(0.5);
    // Standard error of a sample correlation is (1 - rho^2) / sqrt(n).
    const double se = (1.0 - rho * rho) / std::sqrt(static_cast<double>(n));
    for (int k = 0; k < 4; ++k) {
        CHECK_THAT(corr(z.zx, k, z.zy, k), WithinAbs(rho, 3.0 * se));
        CHECK_THAT(column_variance(z.zy)(k), WithinAbs(1.0, 0.02));
    }
    CHECK(std::abs(corr(z.zx, 0, z.zy, 1)) < 0.02);
}

TEST_CASE("zero MI gives independent views") {
    Rng rng(2);
    const auto z = sample_latent(JointGaussian{2, 0.0}, rng, 100000);
    CHECK(std::abs(corr(z.zx, 0, z.zy, 0)) < 0.02);
    CHECK(std::abs(corr(z.zx, 1, z.zy, 1)) < 0.02);
}

TEST_CASE("mixture components sit on the ring") {
    const GaussianMixture m{8, 2.0, 2.0};
    Rng rng(3);
    const int n = 800000;
    const auto z = sample_latent(m, rng, n);
    // Overlapping components: check the pooled moments of the ring.
    CHECK_THAT(column_mean(z.zx)(0), WithinAbs(0.0, 0.01));
    CHECK_THAT(column_mean(z.zy)(0), WithinAbs(0.0, 0.01));
    // Var = mu^2/2 + 1 on each axis for a uniform ring of 8 >= 3 points.
    CHECK_THAT(column_variance(z.zx)(0), WithinAbs(3.0, 0.02));
    CHECK_THAT(column_variance(z.zy)(0), WithinAbs(3.0, 0.02));
}

TEST_CASE("single-peak mixture has the within-peak correlation and ring mean") {
    const GaussianMixture m{1, 2.0, 2.0};
    Rng rng(4);
    const auto z = sample_latent(m, rng, 100000);
    // One peak at theta = 2 pi: mean (mu, 0).
    CHECK_THAT(column_mean(z.zx)(0), WithinAbs(2.0, 0.05));
    CHECK_THAT(column_mean(z.zy)(0), WithinAbs(0.0, 0.05));
    CHECK_THAT(corr(z.zx, 0, z.zy, 0), WithinAbs(std::sqrt(1.0 - 1.0 / 16.0), 0.003));
}

TEST_CASE("mixture component means match the ring at 1e5 draws per component") {
    const int peaks = 4;
    for (int k = 1; k <= peaks; ++k) {
        // A four-peak mixture restricted to component k is a one-peak mixture rotated to theta_k.
        const double th = 2.0 * std::numbers::pi * k / peaks;
        Matrix zx(100000, 1), zy(100000, 1);
        int got = 0;
        Rng src(200 + k);
        while (got < 100000) {
            const auto z = sample_latent(GaussianMixture{peaks, 6.0, 2.0}, src, 1);
            // Components are separated by > 8 sigma at mu = 6, so the nearest ring point identifies them.
            const double a = std::atan2(z.zy(0, 0), z.zx(0, 0));
            const double d = std::remainder(a - th, 2.0 * std::numbers::pi);
            if (std::abs(d) < std::numbers::pi / peaks) {
                zx(got, 0) = z.zx(0, 0);
                zy(got, 0) = z.zy(0, 0);
                ++got;
            }
        }
        CHECK_THAT(column_mean(zx)(0), WithinAbs(6.0 * std::cos(th), 0.05));
        CHECK_THAT(column_mean(zy)(0), WithinAbs(6.0 * std::sin(th), 0.05));
    }
}

TEST_CASE("hypersphere shell radius spread matches sigma_r and views share the latent") {
    Rng rng(5);
    const auto z = sample_latent(HypersphereShell{3, 4.0, 0.5}, rng, 50000);
    CHECK(z.zx == z.zy);
    const Vector r = z.zx.rowwise().norm();
    const double mean = r.mean();
    const double sd = std::sqrt((r.array() - mean).square().sum() / (r.size() - 1.0));
    CHECK_THAT(mean, WithinAbs(4.0, 0.02));
    CHECK_THAT(sd, WithinRel(0.5, 0.1));
}

TEST_CASE("swiss roll latent lies on the rolled sheet") {
    Rng rng(6);
    const SwissRoll s{};
    const auto z = sample_latent(s, rng, 2000);
    CHECK(z.zx.cols() == 3);
    CHECK(z.zx == z.zy);
    for (Eigen::Index i = 0; i < z.zx.rows(); ++i) {
        const double t = std::hypot(z.zx(i, 0), z.zx(i, 1));
        REQUIRE(t >= s.t0 - 1e-12);
        REQUIRE(t <= s.t1 + 1e-12);
        CHECK_THAT(z.zx(i, 0), WithinAbs(t * std::sin(t), 1e-9));
        REQUIRE(z.zx(i, 2) >= 0.0);
        REQUIRE(z.zx(i, 2) <= 15.0);
    }
}

TEST_CASE("invalid latent specs are rejected") {
    Rng rng(1);
    CHECK_THROWS_AS(sample_latent(JointGaussian{0, 1.0}, rng, 5), InvalidInput);
    CHECK_THROWS_AS(sample_latent(JointGaussian{2, -1.0}, rng, 5), InvalidInput);
    CHECK_THROWS_AS(sample_latent(GaussianMixture{0, 2.0, 2.0}, rng, 5), InvalidInput);
    CHECK_THROWS_AS(sample_latent(HypersphereShell{3, 0.0, 0.5}, rng, 5), InvalidInput);
    CHECK_THROWS_AS(sample_latent(SwissRoll{3.0, 1.0, 0.0, 1.0}, rng, 5), InvalidInput);
    CHECK_THROWS_AS(sample_latent(JointGaussian{}, rng, 0), InvalidInput);
}

TEST_CASE("identity-padded linear teacher copies the latent") {
    Matrix m = Matrix::Zero(3, 10);
    m.leftCols(3) = Matrix::Identity(3, 3);
    const TeacherMap t = TeacherMap::from_matrix(m);
    Rng rng(7);
    const Matrix z = standard_normal(rng, 5, 3);
    const Matrix x = apply_teacher(t, z);
    CHECK(x.leftCols(3) == z);
    CHECK(x.rightCols(7).isZero());
    CHECK_THROWS_AS(apply_teacher(t, Matrix::Ones(5, 2)), InvalidInput);
}

TEST_CASE("teachers are deterministic in their seed and nondegenerate") {
    for (TeacherKind kind : {TeacherKind::Linear, TeacherKind::Nonlinear}) {
        const TeacherPair a = make_teachers(JointGaussian{4, 2.0}, kind, 11);
        const TeacherPair b = make_teachers(JointGaussian{4, 2.0}, kind, 11);
        Rng rng(8);
        const Matrix z = standard_normal(rng, 2000, 4);
        const Matrix xa = a.x.apply(z);
        CHECK(xa == b.x.apply(z));
        CHECK(xa.cols() == 500);
        CHECK(xa != a.y.apply(z));
        CHECK(column_variance(xa).minCoeff() > 0.0);
    }
    CHECK_THROWS_AS(teacher_kind_from_string("cubic"), InvalidInput);
}

TEST_CASE("observation noise scale and independence") {
    Rng rng(9);
    const Matrix x = standard_normal(rng, 100000, 3);
    CHECK(add_observation_noise(x, 0.0, rng) == x);
    CHECK_THROWS_AS(add_observation_noise(x, -0.5, rng), InvalidInput);

    Rng nx(derive_seed(5, 1)), ny(derive_seed(5, 2));
    const Matrix ex = add_observation_noise(x, 1.0, nx) - x;
    const Matrix ey = add_observation_noise(x, 1.0, ny) - x;
    for (int c = 0; c < 3; ++c) {
        CHECK_THAT(column_variance(ex)(c), WithinRel(1.0, 0.05));
        CHECK(std::abs(corr(ex, c, ey, c)) < 0.02);
    }
}

TEST_CASE("make_pair builds 500-wide views and records its provenance") {
    const LatentSpec spec = JointGaussian{4, 2.0};
    const TeacherPair tp = make_teachers(spec, TeacherKind::Linear, 3);
    Rng rng(10);
    const DatasetPair d = make_pair(spec, tp, 0.0, rng, Regime::Finite, 1024);
    CHECK(d.x.rows() == 1024);
    CHECK(d.x.cols() == 500);
    CHECK(d.y.cols() == 500);
    CHECK(d.meta.sigma_x == 0.0);
    CHECK(d.meta.teacher == "linear");
    CHECK(d.meta.sample_seed == 10);

    Rng again(10);
    CHECK(make_pair(spec, tp, 0.0, again, Regime::Finite, 1024).x == d.x);
}

TEST_CASE("shared-latent datasets drive both views from one draw") {
    const LatentSpec spec = HypersphereShell{3, 4.0, 0.5};
    const TeacherPair tp = make_teachers(spec, TeacherKind::Linear, 4, 20);
    Rng rng(11);
    const DatasetPair d = make_pair(spec, tp, 0.0, rng, Regime::Finite, 300);
    // Both views are linear images of the same z, so their joint rank is 3.
    Matrix both(300, 40);
    both << d.x, d.y;
    const Vector s = singular_values(both);
    CHECK(s(2) > 1e-6 * s(0));
    CHECK(s(3) < 1e-9 * s(0));
}

TEST_CASE("pair sampler fixes one noise scale for all batches") {
    const LatentSpec spec = JointGaussian{2, 1.0};
    const PairSampler sampler(spec, make_teachers(spec, TeacherKind::Linear, 5, 30), 0.5, 77);
    CHECK(sampler.sigma_x() > 0.0);
    // Unit latents through x = z M give column variances sum_k M_kj^2.
    const double col_var = sampler.teachers().x.matrix().array().square().colwise().sum().mean();
    CHECK_THAT(sampler.sigma_x(), WithinRel(0.5 * std::sqrt(col_var), 0.03));
    Rng r1(3), r2(3);
    const auto a = sampler.draw(r1, 64);
    const auto b = sampler.draw(r2, 64);
    CHECK(a.first == b.first);
    CHECK(a.first.cols() == 30);
    CHECK_THROWS_AS(PairSampler(spec, make_teachers(JointGaussian{3, 1.0}, TeacherKind::Linear, 5, 30), 0.5, 77),
                    InvalidInput);
}

TEST_CASE("dataset container round trip") {
    const auto dir = scratch_dir("dataset");
    const LatentSpec spec = GaussianMixture{8, 2.0, 2.0};
    Rng rng(12);
    const DatasetPair d = make_pair(spec, make_teachers(spec, TeacherKind::Nonlinear, 6, 16), 0.5, rng,
                                    Regime::Resampling, 40);
    save_dataset((dir / "pair").string(), d);
    const DatasetPair e = load_dataset((dir / "pair").string());
    CHECK(e.x == d.x);
    CHECK(e.y == d.y);
    CHECK(e.meta.sigma_y == d.meta.sigma_y);
    CHECK(e.meta.regime == Regime::Resampling);
    CHECK(std::get<GaussianMixture>(e.meta.spec).n_peaks == 8);

    {
        std::ofstream bad(dir / "bad.bin", std::ios::binary);
        bad << "XXXX";
    }
    CHECK_THROWS_AS(load_dataset((dir / "bad").string()), InvalidInput);
    CHECK_THROWS_AS(load_dataset((dir / "missing").string()), InvalidInput);
    CHECK_THROWS_AS(latent_from_json(nlohmann::json{{"kind", "torus"}}), InvalidInput);
}
