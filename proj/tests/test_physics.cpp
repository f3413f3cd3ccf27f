#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <set>

#include "dimest/physics.hpp"

using namespace dimest;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("critical temperature") { CHECK_THAT(kIsingTc, WithinAbs(2.269185314213022, 1e-12)); }

TEST_CASE("energy and magnetization of simple configurations") {
    IsingConfig up{4, 1.0, std::vector<std::int8_t>(16, 1)};
    CHECK(ising_energy(up) == -32.0);
    CHECK(ising_magnetization(up) == 1.0);
    IsingConfig checker{4, 1.0, std::vector<std::int8_t>(16)};
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) checker.spins[static_cast<std::size_t>(i * 4 + j)] = (i + j) % 2 ? 1 : -1;
    CHECK(ising_energy(checker) == 32.0);
    CHECK(ising_magnetization(checker) == 0.0);
}

TEST_CASE("L=2 Metropolis energies match exact enumeration at T=2") {
    const double T = 2.0;
    // Oracle: all 16 states with Boltzmann weights.
    std::map<int, double> exact;
    double z = 0.0;
    for (int bits = 0; bits < 16; ++bits) {
        IsingConfig c{2, T, std::vector<std::int8_t>(4)};
        for (int k = 0; k < 4; ++k) c.spins[static_cast<std::size_t>(k)] = (bits >> k) & 1 ? 1 : -1;
        const double e = ising_energy(c);
        const double w = std::exp(-e / T);
        exact[static_cast<int>(e)] += w;
        z += w;
    }
    for (auto& [e, w] : exact) w /= z;

    Rng rng(2024);
    const int n = 40000;
    const auto configs = ising_sample(2, T, n, rng, IsingSchedule{4, 100, 16});
    REQUIRE(configs.size() == static_cast<std::size_t>(n));
    std::map<int, int> counts;
    for (const auto& c : configs) ++counts[static_cast<int>(ising_energy(c))];
    for (const auto& [e, p] : exact) {
        const double got = counts[e] / static_cast<double>(n);
        const double sigma = std::sqrt(p * (1.0 - p) / n);
        INFO("E=" << e << " exact=" << p << " sampled=" << got);
        CHECK(std::abs(got - p) <= 3.0 * sigma);
    }
    for (const auto& [e, c] : counts) CHECK(exact.count(e) == 1);
}

TEST_CASE("deep ordered phase stays magnetized") {
    Rng rng(1);
    const auto configs = ising_sample(16, 0.1, 64, rng, IsingSchedule{2, 50, 8});
    for (const auto& c : configs) CHECK(std::abs(ising_magnetization(c)) > 0.95);
}

TEST_CASE("deep disordered phase has no order and vanishing bond energy") {
    Rng rng(2);
    const int L = 16;
    const auto configs = ising_sample(L, 10.0, 400, rng, IsingSchedule{4, 100, 8});
    double m = 0.0, e = 0.0;
    for (const auto& c : configs) {
        m += std::abs(ising_magnetization(c));
        e += ising_energy(c) / (2.0 * L * L);
    }
    m /= static_cast<double>(configs.size());
    e /= static_cast<double>(configs.size());
    CHECK(m < 0.1);
    // High-temperature expansion: energy per bond ~ -tanh(1/T) ~ -0.1.
    CHECK_THAT(e, WithinAbs(-std::tanh(0.1), 0.02));
    CHECK(std::abs(e) < 0.15);
}

TEST_CASE("ising_sample rejects bad arguments and is reproducible") {
    Rng rng(3);
    CHECK_THROWS_AS(ising_sample(1, 2.0, 10, rng), InvalidInput);
    CHECK_THROWS_AS(ising_sample(4, 0.0, 10, rng), InvalidInput);
    CHECK_THROWS_AS(ising_sample(4, -1.0, 10, rng), InvalidInput);
    CHECK(ising_sample(4, 2.0, 0, rng).empty());
    Rng a(9), b(9);
    const auto ca = ising_sample(6, 2.3, 20, a, IsingSchedule{3, 10, 4});
    const auto cb = ising_sample(6, 2.3, 20, b, IsingSchedule{3, 10, 4});
    for (std::size_t i = 0; i < ca.size(); ++i) CHECK(ca[i].spins == cb[i].spins);
}

TEST_CASE("diagonal split covers the lattice with disjoint halves") {
    for (int L : {2, 3, 4, 7, 8, 16}) {
        const auto s = ising_split_indices(L);
        std::set<int> xs(s.x.begin(), s.x.end()), ys(s.y.begin(), s.y.end());
        CHECK(xs.size() == s.x.size());
        for (int v : ys) CHECK(xs.count(v) == 0);
        const std::size_t covered = xs.size() + ys.size();
        if (L % 2 == 0) {
            CHECK(covered == static_cast<std::size_t>(L * L));
            CHECK(s.x.size() == s.y.size());
        } else {
            CHECK(covered == static_cast<std::size_t>(L * L - L));
        }
        // X is the upper-left corner.
        CHECK(xs.count(0) == 1);
        CHECK(ys.count(L * L - 1) == 1);
    }
}

TEST_CASE("split views of an all-up L=2 lattice") {
    const IsingConfig up{2, 1.0, std::vector<std::int8_t>(4, 1)};
    const auto [x, y] = ising_split_views(up);
    CHECK(x.size() == 2);
    CHECK(y.size() == 2);
    CHECK((x.array() == 1.0).all());
    CHECK((y.array() == 1.0).all());
}

TEST_CASE("flipping one spin changes exactly one view") {
    const int L = 6;
    IsingConfig c{L, 1.0, std::vector<std::int8_t>(static_cast<std::size_t>(L * L), 1)};
    const auto [x0, y0] = ising_split_views(c);
    for (int k = 0; k < L * L; ++k) {
        c.spins[static_cast<std::size_t>(k)] = -1;
        const auto [x, y] = ising_split_views(c);
        const bool dx = x != x0, dy = y != y0;
        CHECK(dx != dy);
        c.spins[static_cast<std::size_t>(k)] = 1;
    }
}

TEST_CASE("ising_dataset stacks split views row by row") {
    Rng rng(4);
    const auto configs = ising_sample(4, 2.5, 5, rng, IsingSchedule{1, 5, 2});
    const DatasetPair d = ising_dataset(configs);
    CHECK(d.x.rows() == 5);
    CHECK(d.x.cols() == 8);
    for (int r = 0; r < 5; ++r) {
        const auto [x, y] = ising_split_views(configs[static_cast<std::size_t>(r)]);
        CHECK(d.x.row(r).transpose() == x);
        CHECK(d.y.row(r).transpose() == y);
    }
    CHECK_THROWS_AS(ising_dataset({}), InvalidInput);
}

TEST_CASE("pendulum at rest stays at rest") {
    const auto s = pendulum_trajectory(SinglePendulum{}, {0.0, 0.0}, 1e-3, 1000);
    CHECK(s.size() == 1001);
    CHECK(s.back()[0] == 0.0);
    CHECK(s.back()[1] == 0.0);
    const auto d = pendulum_trajectory(DoublePendulum{}, {0.0, 0.0, 0.0, 0.0}, 1e-3, 100);
    for (double v : d.back()) CHECK(v == 0.0);
}

TEST_CASE("small-angle period matches the harmonic limit") {
    const SinglePendulum p{};
    const double dt = 1e-4;
    const auto s = pendulum_trajectory(p, {0.05, 0.0}, dt, 30000);
    // Successive downward zero crossings of theta, linearly interpolated.
    std::vector<double> crossings;
    for (std::size_t i = 1; i < s.size(); ++i)
        if (s[i - 1][0] > 0.0 && s[i][0] <= 0.0)
            crossings.push_back((static_cast<double>(i) - 1.0 + s[i - 1][0] / (s[i - 1][0] - s[i][0])) * dt);
    REQUIRE(crossings.size() >= 2);
    const double period = crossings[1] - crossings[0];
    CHECK_THAT(period, WithinRel(2.0 * std::numbers::pi * std::sqrt(p.length / kGravity), 0.01));
}

TEST_CASE("RK4 conserves pendulum energy") {
    const SinglePendulum sp{};
    const auto s = pendulum_trajectory(sp, {1.0, 0.5}, 1e-3, 10000);
    const double e0 = pendulum_energy(sp, s.front());
    CHECK(std::abs(pendulum_energy(sp, s.back()) - e0) / std::abs(e0) < 1e-6);

    const DoublePendulum dp{};
    const auto d = pendulum_trajectory(dp, {1.2, -0.7, 0.3, 2.0}, 1e-4, 10000);
    const double d0 = pendulum_energy(dp, d.front());
    CHECK(std::abs(pendulum_energy(dp, d.back()) - d0) / std::abs(d0) < 1e-5);
}

TEST_CASE("double pendulum equations match a finite-difference Lagrangian oracle") {
    // Generalised momenta p = dL/dw; Euler-Lagrange: d/dt p = dL/dtheta.
    const DoublePendulum dp{};
    auto lagrangian = [&](double t1, double t2, double w1, double w2) {
        PendulumState s{t1, t2, w1, w2};
        const double pot = -(dp.m1 + dp.m2) * kGravity * dp.l1 * std::cos(t1) - dp.m2 * kGravity * dp.l2 * std::cos(t2);
        return pendulum_energy(dp, s) - 2.0 * pot;  // T - V = E - 2V
    };
    const PendulumState s{0.4, -1.1, 0.8, -0.3};
    const auto ds = pendulum_derivative(dp, s);
    const double h = 1e-5;
    auto partial = [&](int k, const PendulumState& at) {
        PendulumState a = at, b = at;
        a[static_cast<std::size_t>(k)] += h;
        b[static_cast<std::size_t>(k)] -= h;
        return (lagrangian(a[0], a[1], a[2], a[3]) - lagrangian(b[0], b[1], b[2], b[3])) / (2.0 * h);
    };
    // d/dt of p_k along the flow, by a small explicit step of the state.
    const double dt = 1e-5;
    PendulumState fwd = s, bwd = s;
    for (std::size_t i = 0; i < 4; ++i) {
        fwd[i] += dt * ds[i];
        bwd[i] -= dt * ds[i];
    }
    for (int k = 0; k < 2; ++k) {
        const double dp_dt = (partial(2 + k, fwd) - partial(2 + k, bwd)) / (2.0 * dt);
        CHECK_THAT(dp_dt, WithinAbs(partial(k, s), 1e-4));
    }
}

TEST_CASE("pendulum_trajectory validates input") {
    CHECK_THROWS_AS(pendulum_trajectory(SinglePendulum{}, {0.0, 0.0}, 0.0, 10), InvalidInput);
    CHECK_THROWS_AS(pendulum_trajectory(SinglePendulum{}, {0.0, 0.0, 0.0}, 1e-3, 10), InvalidInput);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(pendulum_trajectory(SinglePendulum{}, {nan, 0.0}, 1e-3, 10), IntegrationError);
    CHECK_THROWS_AS(pendulum_trajectory(SinglePendulum{}, {nan, 0.0}, 1e-3, 10), NumericalError);
}

TEST_CASE("theta = 0 renders the bob directly below the pivot") {
    const Frame f = render_frame(SinglePendulum{}, {0.0, 0.0}, 32);
    CHECK(f.side() == 32);
    CHECK(f.pixels.minCoeff() >= 0.0);
    CHECK(f.pixels.maxCoeff() <= 1.0);
    // Bob centre at (row 16 + 0.9 * 16, column 16).
    Eigen::Index r = 0, c = 0;
    double best = -1.0;
    for (Eigen::Index i = 0; i < 32; ++i)
        for (Eigen::Index j = 0; j < 32; ++j)
            if (f.pixels(i, j) > best + 1e-12) {
                best = f.pixels(i, j);
                r = i;
                c = j;
            }
    CHECK(best == 1.0);
    CHECK(std::abs(static_cast<double>(c) + 0.5 - 16.0) <= 1.0);
    CHECK(r > 20);
    // Left-right mirror symmetry.
    CHECK((f.pixels - f.pixels.rowwise().reverse()).cwiseAbs().maxCoeff() < 1e-12);
    // Nothing is drawn above the pivot.
    CHECK(f.pixels.topRows(14).isZero());
}

TEST_CASE("distinct angles render distinct frames") {
    for (const PendulumKind& kind : {PendulumKind{SinglePendulum{}}, PendulumKind{DoublePendulum{}}}) {
        std::vector<Frame> frames;
        for (int k = -8; k <= 8; ++k) {
            PendulumState s(state_size(kind), 0.0);
            s[0] = 0.15 * k;
            if (s.size() == 4) s[1] = -0.1 * k;
            frames.push_back(render_frame(kind, s, 16));
        }
        for (std::size_t i = 0; i < frames.size(); ++i)
            for (std::size_t j = i + 1; j < frames.size(); ++j)
                CHECK((frames[i].pixels - frames[j].pixels).cwiseAbs().maxCoeff() > 0.0);
    }
}

TEST_CASE("delay embedding yields T-3 aligned pairs per trajectory") {
    Rng rng(5);
    PendulumVideoConfig cfg;
    cfg.trajectories = 2;
    cfg.frames = 60;
    cfg.P = 8;
    const auto videos = pendulum_videos(SinglePendulum{}, cfg, rng);
    REQUIRE(videos.size() == 2);
    const DatasetPair d = delay_embed(videos);
    CHECK(d.x.rows() == 2 * 57);
    CHECK(d.x.cols() == 2 * 64);
    auto flat = [](const Frame& f) { return Eigen::Map<const Eigen::RowVectorXd>(f.pixels.data(), 64); };
    // Row 57 starts the second trajectory.
    CHECK(d.x.row(57).head(64) == flat(videos[1][0]));
    CHECK(d.y.row(57).tail(64) == flat(videos[1][3]));
    CHECK(d.y.row(56).tail(64) == flat(videos[0][59]));
    CHECK(d.x.row(10).tail(64) == flat(videos[0][11]));

    CHECK_THROWS_AS(delay_embed({}), InvalidInput);
    std::vector<std::vector<Frame>> shortv{std::vector<Frame>(3, videos[0][0])};
    CHECK_THROWS_AS(delay_embed(shortv), InvalidInput);
}

TEST_CASE("random initial conditions stay in range") {
    Rng rng(6);
    for (int i = 0; i < 200; ++i) {
        const auto s = random_pendulum_state(DoublePendulum{}, rng);
        REQUIRE(s.size() == 4);
        CHECK(std::abs(s[0]) < std::numbers::pi / 2);
        CHECK(std::abs(s[3]) < std::sqrt(kGravity / 0.384));
    }
}

TEST_CASE("PGM export writes a valid P5 header and payload") {
    const auto path = std::filesystem::temp_directory_path() / "dimest_test_frame.pgm";
    const Frame f = render_frame(SinglePendulum{}, {0.3, 0.0}, 8);
    write_pgm(path.string(), f);
    std::ifstream is(path, std::ios::binary);
    std::string magic;
    int w = 0, h = 0, maxv = 0;
    is >> magic >> w >> h >> maxv;
    is.get();
    CHECK(magic == "P5");
    CHECK(w == 8);
    CHECK(h == 8);
    CHECK(maxv == 255);
    std::string payload((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    CHECK(payload.size() == 64);
    CHECK_THROWS_AS(write_pgm("/nonexistent/dir/x.pgm", f), InvalidInput);
}
