#pragma once

// 2D Ising Metropolis sampler with spatial view splitting, and a synthetic
// pendulum simulator with rasterised frames and delay-embedded views.

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include "dimest/datagen.hpp"
#include "dimest/error.hpp"
#include "dimest/ndmath.hpp"

namespace dimest {

// ---------------------------------------------------------------------------
// Ising
// ---------------------------------------------------------------------------

/// Onsager critical temperature of the square lattice, 2 / ln(1 + sqrt 2).
inline const double kIsingTc = 2.0 / std::log(1.0 + std::numbers::sqrt2);

struct IsingConfig {
    int L = 0;
    double T = 0.0;
    std::vector<std::int8_t> spins;  ///< row-major L x L, entries +-1

    [[nodiscard]] int at(int i, int j) const { return spins[static_cast<std::size_t>(i * L + j)]; }
};

/// E = -sum_i s_i (s_right(i) + s_down(i)) with periodic wrap (J = 1, h = 0).
/// For L = 2 the right and left neighbours coincide, so each bond is counted twice.
inline double ising_energy(const IsingConfig& c) {
    double e = 0.0;
    for (int i = 0; i < c.L; ++i)
        for (int j = 0; j < c.L; ++j) e -= c.at(i, j) * (c.at(i, (j + 1) % c.L) + c.at((i + 1) % c.L, j));
    return e;
}

inline double ising_magnetization(const IsingConfig& c) {
    double m = 0.0;
    for (auto s : c.spins) m += s;
    return m / static_cast<double>(c.spins.size());
}

struct IsingSchedule {
    int sweeps_between = 0;  ///< 0 -> 2 L
    int burn_in = -1;        ///< sweeps; < 0 -> 4 L^2
    int replicas = 64;
};

namespace detail {

class IsingChain {
public:
    IsingChain(int L, double T, Rng rng)
        : L_(L), rng_(std::move(rng)), spins_(static_cast<std::size_t>(L * L)), order_(static_cast<std::size_t>(L * L)) {
        const std::int8_t s0 = rng_.uniform() < 0.5 ? 1 : -1;
        std::fill(spins_.begin(), spins_.end(), s0);
        std::iota(order_.begin(), order_.end(), 0);
        // Acceptance for dE = 4 and 8; dE <= 0 always accepted.
        accept_[0] = std::exp(-4.0 / T);
        accept_[1] = std::exp(-8.0 / T);
    }

    /// Every site once, in a fresh random order. A fixed checkerboard order
    /// makes the zero-cost flips deterministic, and at L = 2 the chain then
    /// never reaches the striped states.
    void sweep() {
        rng_.shuffle(order_);
        for (int site : order_) {
            const int i = site / L_;
            const int j = site % L_;
            const int nb = s((i + L_ - 1) % L_, j) + s((i + 1) % L_, j) + s(i, (j + L_ - 1) % L_) + s(i, (j + 1) % L_);
            const int de = 2 * s(i, j) * nb;
            if (de <= 0 || rng_.uniform() < accept_[static_cast<std::size_t>(de / 4 - 1)])
                spins_[static_cast<std::size_t>(site)] = static_cast<std::int8_t>(-s(i, j));
        }
    }

    [[nodiscard]] const std::vector<std::int8_t>& spins() const { return spins_; }

private:
    [[nodiscard]] int s(int i, int j) const { return spins_[static_cast<std::size_t>(i * L_ + j)]; }

    int L_;
    Rng rng_;
    std::vector<std::int8_t> spins_;
    std::vector<int> order_;
    std::array<double, 2> accept_{};
};

}  // namespace detail

/// Single-spin Metropolis. Configurations are collected round-robin from
/// independent replicas, each started all-up or all-down.
inline std::vector<IsingConfig> ising_sample(int L, double T, int n_configs, Rng& rng, IsingSchedule sched = {}) {
    detail::require(L >= 2, "ising_sample: L must be >= 2");
    detail::require(T > 0.0 && std::isfinite(T), "ising_sample: temperature must be > 0");
    detail::require(n_configs >= 0, "ising_sample: negative config count");
    detail::require(sched.replicas >= 1, "ising_sample: need at least one replica");
    const int between = sched.sweeps_between > 0 ? sched.sweeps_between : 2 * L;
    const int burn = sched.burn_in >= 0 ? sched.burn_in : 4 * L * L;
    const int reps = std::min(sched.replicas, std::max(n_configs, 1));

    std::vector<detail::IsingChain> chains;
    chains.reserve(static_cast<std::size_t>(reps));
    const std::uint64_t base = rng.next_u64();
    for (int r = 0; r < reps; ++r) chains.emplace_back(L, T, Rng(derive_seed(base, static_cast<std::uint64_t>(r))));
    for (auto& c : chains)
        for (int s = 0; s < burn; ++s) c.sweep();

    std::vector<IsingConfig> out;
    out.reserve(static_cast<std::size_t>(n_configs));
    while (static_cast<int>(out.size()) < n_configs) {
        for (auto& c : chains) {
            if (static_cast<int>(out.size()) == n_configs) break;
            for (int s = 0; s < between; ++s) c.sweep();
            out.push_back(IsingConfig{L, T, c.spins()});
        }
    }
    return out;
}

struct SplitIndices {
    std::vector<int> x;  ///< flat site indices of the upper-left view
    std::vector<int> y;  ///< lower-right view
};

/// Diagonal split: i + j < L - 1 goes to X, i + j > L - 1 to Y. Sites on the
/// anti-diagonal go to X when i < L/2 for even L and are dropped for odd L.
inline SplitIndices ising_split_indices(int L) {
    detail::require(L >= 2, "ising_split_indices: L must be >= 2");
    SplitIndices s;
    for (int i = 0; i < L; ++i)
        for (int j = 0; j < L; ++j) {
            const int d = i + j;
            const int idx = i * L + j;
            if (d < L - 1) s.x.push_back(idx);
            else if (d > L - 1) s.y.push_back(idx);
            else if (L % 2 == 0) (i < L / 2 ? s.x : s.y).push_back(idx);
        }
    return s;
}

inline std::pair<Vector, Vector> ising_split_views(const IsingConfig& c) {
    const auto idx = ising_split_indices(c.L);
    Vector x(static_cast<Eigen::Index>(idx.x.size()));
    Vector y(static_cast<Eigen::Index>(idx.y.size()));
    for (std::size_t k = 0; k < idx.x.size(); ++k) x(static_cast<Eigen::Index>(k)) = c.spins[static_cast<std::size_t>(idx.x[k])];
    for (std::size_t k = 0; k < idx.y.size(); ++k) y(static_cast<Eigen::Index>(k)) = c.spins[static_cast<std::size_t>(idx.y[k])];
    return {x, y};
}

/// Stacks the split views of a configuration set into a paired dataset.
inline DatasetPair ising_dataset(const std::vector<IsingConfig>& configs) {
    detail::require(!configs.empty(), "ising_dataset: no configurations");
    const int L = configs.front().L;
    const auto idx = ising_split_indices(L);
    DatasetPair d;
    const auto n = static_cast<Eigen::Index>(configs.size());
    d.x.resize(n, static_cast<Eigen::Index>(idx.x.size()));
    d.y.resize(n, static_cast<Eigen::Index>(idx.y.size()));
    for (Eigen::Index r = 0; r < n; ++r) {
        const auto& c = configs[static_cast<std::size_t>(r)];
        detail::require(c.L == L, "ising_dataset: mixed lattice sizes");
        for (std::size_t k = 0; k < idx.x.size(); ++k)
            d.x(r, static_cast<Eigen::Index>(k)) = c.spins[static_cast<std::size_t>(idx.x[k])];
        for (std::size_t k = 0; k < idx.y.size(); ++k)
            d.y(r, static_cast<Eigen::Index>(k)) = c.spins[static_cast<std::size_t>(idx.y[k])];
    }
    return d;
}

// ---------------------------------------------------------------------------
// Pendulums
// ---------------------------------------------------------------------------

inline constexpr double kGravity = 9.81;

struct SinglePendulum {
    double m = 1.0;
    double length = 0.5;
};

struct DoublePendulum {
    double l1 = 0.205;
    double l2 = 0.179;
    double m1 = 0.262;
    double m2 = 0.11;
};

using PendulumKind = std::variant<SinglePendulum, DoublePendulum>;

/// Angles from the downward vertical followed by angular velocities:
/// (theta, omega) for the single pendulum, (theta1, theta2, omega1, omega2) for the double.
using PendulumState = std::vector<double>;

inline std::size_t state_size(const PendulumKind& k) {
    return std::holds_alternative<SinglePendulum>(k) ? 2 : 4;
}

inline PendulumState pendulum_derivative(const PendulumKind& kind, const PendulumState& s) {
    if (const auto* p = std::get_if<SinglePendulum>(&kind)) return {s[1], -kGravity / p->length * std::sin(s[0])};
    const auto& d = std::get<DoublePendulum>(kind);
    const double t1 = s[0], t2 = s[1], w1 = s[2], w2 = s[3];
    const double delta = t1 - t2;
    const double den = 2.0 * d.m1 + d.m2 - d.m2 * std::cos(2.0 * delta);
    const double a1 = (-kGravity * (2.0 * d.m1 + d.m2) * std::sin(t1) - d.m2 * kGravity * std::sin(t1 - 2.0 * t2) -
                       2.0 * std::sin(delta) * d.m2 * (w2 * w2 * d.l2 + w1 * w1 * d.l1 * std::cos(delta))) /
                      (d.l1 * den);
    const double a2 = 2.0 * std::sin(delta) *
                      (w1 * w1 * d.l1 * (d.m1 + d.m2) + kGravity * (d.m1 + d.m2) * std::cos(t1) +
                       w2 * w2 * d.l2 * d.m2 * std::cos(delta)) /
                      (d.l2 * den);
    return {w1, w2, a1, a2};
}

inline double pendulum_energy(const PendulumKind& kind, const PendulumState& s) {
    if (const auto* p = std::get_if<SinglePendulum>(&kind))
        return 0.5 * p->m * p->length * p->length * s[1] * s[1] - p->m * kGravity * p->length * std::cos(s[0]);
    const auto& d = std::get<DoublePendulum>(kind);
    const double t1 = s[0], t2 = s[1], w1 = s[2], w2 = s[3];
    const double kin = 0.5 * d.m1 * d.l1 * d.l1 * w1 * w1 +
                       0.5 * d.m2 * (d.l1 * d.l1 * w1 * w1 + d.l2 * d.l2 * w2 * w2 + 2.0 * d.l1 * d.l2 * w1 * w2 * std::cos(t1 - t2));
    const double pot = -(d.m1 + d.m2) * kGravity * d.l1 * std::cos(t1) - d.m2 * kGravity * d.l2 * std::cos(t2);
    return kin + pot;
}

/// Classical RK4 for `steps` steps. Returns steps + 1 states including `init`.
inline std::vector<PendulumState> pendulum_trajectory(const PendulumKind& kind, const PendulumState& init, double dt,
                                                      int steps) {
    detail::require(dt > 0.0 && std::isfinite(dt), "pendulum_trajectory: dt must be > 0");
    detail::require(steps >= 0, "pendulum_trajectory: negative step count");
    detail::require(init.size() == state_size(kind), "pendulum_trajectory: state has the wrong size");
    std::vector<PendulumState> out;
    out.reserve(static_cast<std::size_t>(steps) + 1);
    out.push_back(init);
    PendulumState s = init;
    const std::size_t n = s.size();
    PendulumState tmp(n);
    auto axpy = [&](const PendulumState& k, double h) {
        for (std::size_t i = 0; i < n; ++i) tmp[i] = s[i] + h * k[i];
        return tmp;
    };
    for (int step = 0; step < steps; ++step) {
        const auto k1 = pendulum_derivative(kind, s);
        const auto k2 = pendulum_derivative(kind, axpy(k1, 0.5 * dt));
        const auto k3 = pendulum_derivative(kind, axpy(k2, 0.5 * dt));
        const auto k4 = pendulum_derivative(kind, axpy(k3, dt));
        for (std::size_t i = 0; i < n; ++i) s[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        for (double v : s)
            if (!std::isfinite(v)) throw IntegrationError("pendulum_trajectory: state became non-finite at step " + std::to_string(step));
        out.push_back(s);
    }
    return out;
}

/// Grayscale P x P raster with values in [0, 1].
struct Frame {
    Matrix pixels;

    [[nodiscard]] Eigen::Index side() const { return pixels.rows(); }
};

namespace detail {

inline double segment_distance(double px, double py, double ax, double ay, double bx, double by) {
    const double vx = bx - ax, vy = by - ay;
    const double len2 = vx * vx + vy * vy;
    double t = len2 > 0.0 ? ((px - ax) * vx + (py - ay) * vy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double dx = px - (ax + t * vx), dy = py - (ay + t * vy);
    return std::sqrt(dx * dx + dy * dy);
}

}  // namespace detail

/// Pivot at the image centre; the fully extended pendulum reaches 90% of the
/// half-width. Arms are anti-aliased lines of intensity 0.5, bobs discs of 1.
inline Frame render_frame(const PendulumKind& kind, const PendulumState& s, int P = 32) {
    detail::require(P >= 4, "render_frame: P must be >= 4");
    detail::require(s.size() == state_size(kind), "render_frame: state has the wrong size");
    const double c = 0.5 * P;
    std::vector<std::array<double, 2>> joints{{c, c}};
    std::vector<double> arm;
    if (const auto* p = std::get_if<SinglePendulum>(&kind)) {
        arm = {p->length};
    } else {
        const auto& d = std::get<DoublePendulum>(kind);
        arm = {d.l1, d.l2};
    }
    double reach = 0.0;
    for (double l : arm) reach += l;
    const double scale = 0.9 * c / reach;
    for (std::size_t k = 0; k < arm.size(); ++k) {
        const auto& prev = joints.back();
        // column grows to the right, row grows downward
        joints.push_back({prev[0] + scale * arm[k] * std::sin(s[k]), prev[1] + scale * arm[k] * std::cos(s[k])});
    }
    const double bob_r = std::max(1.0, P / 16.0);
    const double arm_half = std::max(0.5, P / 64.0);
    Frame f{Matrix::Zero(P, P)};
    for (int r = 0; r < P; ++r)
        for (int col = 0; col < P; ++col) {
            const double px = col + 0.5, py = r + 0.5;
            double v = 0.0;
            for (std::size_t k = 0; k + 1 < joints.size(); ++k) {
                const double dist = detail::segment_distance(px, py, joints[k][0], joints[k][1], joints[k + 1][0], joints[k + 1][1]);
                v = std::max(v, 0.5 * std::clamp(arm_half + 0.5 - dist, 0.0, 1.0));
            }
            for (std::size_t k = 1; k < joints.size(); ++k) {
                const double dist = std::hypot(px - joints[k][0], py - joints[k][1]);
                v = std::max(v, std::clamp(bob_r + 0.5 - dist, 0.0, 1.0));
            }
            f.pixels(r, col) = std::clamp(v, 0.0, 1.0);
        }
    return f;
}

/// X = [F_t, F_{t+1}], Y = [F_{t+2}, F_{t+3}] per trajectory, flattened row-major.
/// A trajectory of T frames contributes T - 3 pairs; pairs never cross trajectories.
inline DatasetPair delay_embed(const std::vector<std::vector<Frame>>& trajectories) {
    Eigen::Index rows = 0;
    Eigen::Index px = -1;
    for (const auto& tr : trajectories) {
        if (tr.size() < 4) throw InvalidInput("delay_embed: each trajectory needs at least 4 frames");
        rows += static_cast<Eigen::Index>(tr.size()) - 3;
        for (const auto& f : tr) {
            if (px < 0) px = f.pixels.size();
            if (f.pixels.size() != px) throw InvalidInput("delay_embed: frames have different sizes");
        }
    }
    if (trajectories.empty()) throw InvalidInput("delay_embed: no trajectories");
    DatasetPair d;
    d.x.resize(rows, 2 * px);
    d.y.resize(rows, 2 * px);
    Eigen::Index r = 0;
    auto flat = [](const Frame& f) { return Eigen::Map<const Eigen::RowVectorXd>(f.pixels.data(), f.pixels.size()); };
    for (const auto& tr : trajectories)
        for (std::size_t t = 0; t + 3 < tr.size(); ++t, ++r) {
            d.x.row(r).head(px) = flat(tr[t]);
            d.x.row(r).tail(px) = flat(tr[t + 1]);
            d.y.row(r).head(px) = flat(tr[t + 2]);
            d.y.row(r).tail(px) = flat(tr[t + 3]);
        }
    return d;
}

struct PendulumVideoConfig {
    int trajectories = 100;
    int frames = 60;
    int P = 32;
    double frame_dt = 1.0 / 30.0;
    int substeps = 20;
};

/// Random initial condition: angles uniform in (-pi/2, pi/2), angular
/// velocities uniform in (-omega_max, omega_max) with omega_max = sqrt(g / L_total).
inline PendulumState random_pendulum_state(const PendulumKind& kind, Rng& rng) {
    const double reach = std::holds_alternative<SinglePendulum>(kind)
                             ? std::get<SinglePendulum>(kind).length
                             : std::get<DoublePendulum>(kind).l1 + std::get<DoublePendulum>(kind).l2;
    const double wmax = std::sqrt(kGravity / reach);
    const std::size_t half = state_size(kind) / 2;
    PendulumState s(2 * half);
    for (std::size_t i = 0; i < half; ++i) s[i] = rng.uniform(-0.5 * std::numbers::pi, 0.5 * std::numbers::pi);
    for (std::size_t i = 0; i < half; ++i) s[half + i] = rng.uniform(-wmax, wmax);
    return s;
}

/// Rendered frame sequences, one per random initial condition.
inline std::vector<std::vector<Frame>> pendulum_videos(const PendulumKind& kind, const PendulumVideoConfig& cfg, Rng& rng) {
    detail::require(cfg.trajectories >= 1 && cfg.frames >= 1 && cfg.substeps >= 1, "pendulum_videos: invalid config");
    std::vector<std::vector<Frame>> out;
    out.reserve(static_cast<std::size_t>(cfg.trajectories));
    for (int t = 0; t < cfg.trajectories; ++t) {
        const auto init = random_pendulum_state(kind, rng);
        const auto states = pendulum_trajectory(kind, init, cfg.frame_dt / cfg.substeps, (cfg.frames - 1) * cfg.substeps);
        std::vector<Frame> frames;
        frames.reserve(static_cast<std::size_t>(cfg.frames));
        for (int f = 0; f < cfg.frames; ++f)
            frames.push_back(render_frame(kind, states[static_cast<std::size_t>(f * cfg.substeps)], cfg.P));
        out.push_back(std::move(frames));
    }
    return out;
}

/// Binary 8-bit PGM (P5).
inline void write_pgm(const std::string& path, const Frame& f) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InvalidInput("write_pgm: cannot open " + path);
    os << "P5\n" << f.pixels.cols() << ' ' << f.pixels.rows() << "\n255\n";
    for (Eigen::Index i = 0; i < f.pixels.size(); ++i) {
        const double v = std::clamp(f.pixels.data()[i], 0.0, 1.0);
        os.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * v))));
    }
}

}  // namespace dimest
