#pragma once

// Synthetic latent distributions, frozen teacher maps, observation noise and
// the paired-dataset container.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <optional>
#include <string>
#include <variant>

#include <json.hpp>

#include "dimest/autonet.hpp"
#include "dimest/error.hpp"
#include "dimest/ndmath.hpp"

namespace dimest {

// ---------------------------------------------------------------------------
// Latent specifications
// ---------------------------------------------------------------------------

/// K_Z pairs (z_x,i, z_y,i) with equal correlation, total MI `i_bits`.
struct JointGaussian {
    int kz = 4;
    double i_bits = 2.0;
};

/// 1-d per view: equally likely unit-variance components on a ring of radius mu.
struct GaussianMixture {
    int n_peaks = 8;
    double mu = 2.0;
    double i_peak_bits = 2.0;
};

/// Shared latent near a sphere S^{kz-1} of radius r with radial noise sigma_r.
struct HypersphereShell {
    int kz = 3;
    double r = 4.0;
    double sigma_r = 0.5;
};

/// Shared latent (t sin t, t cos t, h).
struct SwissRoll {
    double t0 = 1.5 * std::numbers::pi;
    double t1 = 3.5 * std::numbers::pi;
    double h0 = 0.0;
    double h1 = 15.0;
};

using LatentSpec = std::variant<JointGaussian, GaussianMixture, HypersphereShell, SwissRoll>;

/// Per-dimension correlation that splits `i_bits` equally over `kz` pairs.
inline double correlation_for_bits(double i_bits, double kz) {
    return std::sqrt(1.0 - std::exp2(-2.0 * i_bits / kz));
}

inline double bits_for_correlation(double rho) { return -0.5 * std::log2(1.0 - rho * rho); }

inline void validate(const LatentSpec& spec) {
    std::visit(
        [](const auto& s) {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, JointGaussian>) {
                detail::require(s.kz >= 1, "JointGaussian: kz must be >= 1");
                detail::require(s.i_bits >= 0.0 && std::isfinite(s.i_bits), "JointGaussian: I must be >= 0");
            } else if constexpr (std::is_same_v<S, GaussianMixture>) {
                detail::require(s.n_peaks >= 1, "GaussianMixture: n_peaks must be >= 1");
                detail::require(s.i_peak_bits >= 0.0 && std::isfinite(s.mu), "GaussianMixture: invalid parameters");
            } else if constexpr (std::is_same_v<S, HypersphereShell>) {
                detail::require(s.kz >= 1, "HypersphereShell: kz must be >= 1");
                detail::require(s.r > 0.0 && s.sigma_r >= 0.0, "HypersphereShell: need r > 0, sigma_r >= 0");
            } else {
                detail::require(s.t1 > s.t0 && s.h1 >= s.h0, "SwissRoll: empty parameter range");
            }
        },
        spec);
}

/// Latent widths (x side, y side).
inline std::pair<int, int> latent_dims(const LatentSpec& spec) {
    return std::visit(
        [](const auto& s) -> std::pair<int, int> {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, JointGaussian>) return {s.kz, s.kz};
            else if constexpr (std::is_same_v<S, GaussianMixture>) return {1, 1};
            else if constexpr (std::is_same_v<S, HypersphereShell>) return {s.kz, s.kz};
            else return {3, 3};
        },
        spec);
}

/// True when both views are driven by the same latent draw.
inline bool shared_latent(const LatentSpec& spec) {
    return std::holds_alternative<HypersphereShell>(spec) || std::holds_alternative<SwissRoll>(spec);
}

inline std::optional<double> analytic_mi_bits(const LatentSpec& spec) {
    if (const auto* g = std::get_if<JointGaussian>(&spec)) return g->i_bits;
    return std::nullopt;
}

struct LatentSample {
    Matrix zx;
    Matrix zy;
};

inline LatentSample sample_latent(const LatentSpec& spec, Rng& rng, Eigen::Index n) {
    validate(spec);
    detail::require(n >= 1, "sample_latent: n must be >= 1");
    auto [kx, ky] = latent_dims(spec);
    LatentSample out{Matrix(n, kx), Matrix(n, ky)};
    if (const auto* g = std::get_if<JointGaussian>(&spec)) {
        const double rho = correlation_for_bits(g->i_bits, g->kz);
        const double c = std::sqrt(1.0 - rho * rho);
        for (Eigen::Index r = 0; r < n; ++r)
            for (int k = 0; k < g->kz; ++k) {
                const double a = rng.normal();
                const double b = rng.normal();
                out.zx(r, k) = a;
                out.zy(r, k) = rho * a + c * b;
            }
    } else if (const auto* m = std::get_if<GaussianMixture>(&spec)) {
        const double rho = correlation_for_bits(m->i_peak_bits, 1.0);
        const double c = std::sqrt(1.0 - rho * rho);
        for (Eigen::Index r = 0; r < n; ++r) {
            const auto k = static_cast<double>(rng.uniform_index(static_cast<std::uint64_t>(m->n_peaks)) + 1);
            const double th = 2.0 * std::numbers::pi * k / m->n_peaks;
            const double a = rng.normal();
            const double b = rng.normal();
            out.zx(r, 0) = m->mu * std::cos(th) + a;
            out.zy(r, 0) = m->mu * std::sin(th) + rho * a + c * b;
        }
    } else if (const auto* h = std::get_if<HypersphereShell>(&spec)) {
        for (Eigen::Index r = 0; r < n; ++r) {
            double norm = 0.0;
            do {
                for (int k = 0; k < h->kz; ++k) out.zx(r, k) = rng.normal();
                norm = out.zx.row(r).norm();
            } while (norm == 0.0);
            const double radius = h->r + h->sigma_r * rng.normal();
            out.zx.row(r) *= radius / norm;
        }
        out.zy = out.zx;
    } else {
        const auto& s = std::get<SwissRoll>(spec);
        for (Eigen::Index r = 0; r < n; ++r) {
            const double t = rng.uniform(s.t0, s.t1);
            const double hh = rng.uniform(s.h0, s.h1);
            out.zx(r, 0) = t * std::sin(t);
            out.zx(r, 1) = t * std::cos(t);
            out.zx(r, 2) = hh;
        }
        out.zy = out.zx;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Teachers
// ---------------------------------------------------------------------------

enum class TeacherKind { Linear, Nonlinear };

inline const char* to_string(TeacherKind k) { return k == TeacherKind::Linear ? "linear" : "nonlinear"; }

inline TeacherKind teacher_kind_from_string(const std::string& s) {
    if (s == "linear") return TeacherKind::Linear;
    if (s == "nonlinear") return TeacherKind::Nonlinear;
    throw InvalidInput("unknown teacher kind '" + s + "'");
}

/// Frozen observation map R^{K_Z} -> R^K. Only a forward evaluation is exposed.
class TeacherMap {
public:
    /// Linear map with i.i.d. N(0, 1/K_Z) entries.
    static TeacherMap linear(std::uint64_t seed, Eigen::Index kz, Eigen::Index k = 500) {
        detail::require(kz >= 1 && k >= 1, "TeacherMap: widths must be >= 1");
        Rng rng(seed);
        TeacherMap t(TeacherKind::Linear, seed);
        t.linear_ = standard_normal(rng, kz, k) / std::sqrt(static_cast<double>(kz));
        return t;
    }

    /// kz -> hidden -> k, Softplus, Xavier normal.
    static TeacherMap nonlinear(std::uint64_t seed, Eigen::Index kz, Eigen::Index k = 500, Eigen::Index hidden = 1024) {
        detail::require(kz >= 1 && k >= 1 && hidden >= 1, "TeacherMap: widths must be >= 1");
        Rng rng(seed);
        TeacherMap t(TeacherKind::Nonlinear, seed);
        t.net_ = init_mlp(rng, {kz, hidden, k}, Activation::Softplus, Init::XavierNormal);
        return t;
    }

    /// Wraps an explicit K_Z x K matrix (x = z M).
    static TeacherMap from_matrix(Matrix m) {
        TeacherMap t(TeacherKind::Linear, 0);
        t.linear_ = std::move(m);
        return t;
    }

    static TeacherMap make(TeacherKind kind, std::uint64_t seed, Eigen::Index kz, Eigen::Index k = 500) {
        return kind == TeacherKind::Linear ? linear(seed, kz, k) : nonlinear(seed, kz, k);
    }

    [[nodiscard]] TeacherKind kind() const noexcept { return kind_; }
    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
    [[nodiscard]] Eigen::Index in_dim() const { return kind_ == TeacherKind::Linear ? linear_.rows() : net_.in_dim(); }
    [[nodiscard]] Eigen::Index out_dim() const { return kind_ == TeacherKind::Linear ? linear_.cols() : net_.out_dim(); }
    /// The K_Z x K matrix of a linear teacher.
    [[nodiscard]] const Matrix& matrix() const {
        if (kind_ != TeacherKind::Linear) throw InvalidInput("TeacherMap: not a linear map");
        return linear_;
    }

    [[nodiscard]] Matrix apply(const Matrix& z) const {
        if (z.cols() != in_dim())
            throw InvalidInput("apply_teacher: latent has " + std::to_string(z.cols()) + " columns, map expects " +
                               std::to_string(in_dim()));
        return kind_ == TeacherKind::Linear ? Matrix(z * linear_) : predict(net_, z);
    }

private:
    TeacherMap(TeacherKind kind, std::uint64_t seed) : kind_(kind), seed_(seed) {}

    TeacherKind kind_;
    std::uint64_t seed_;
    Matrix linear_;
    MlpParams net_;
};

inline Matrix apply_teacher(const TeacherMap& map, const Matrix& z) { return map.apply(z); }

struct TeacherPair {
    TeacherMap x;
    TeacherMap y;
};

/// Two independently seeded teachers, one per view.
inline TeacherPair make_teachers(const LatentSpec& spec, TeacherKind kind, std::uint64_t seed, Eigen::Index k = 500) {
    auto [kx, ky] = latent_dims(spec);
    return {TeacherMap::make(kind, derive_seed(seed, 0), kx, k), TeacherMap::make(kind, derive_seed(seed, 1), ky, k)};
}

// ---------------------------------------------------------------------------
// Noise
// ---------------------------------------------------------------------------

/// eta * sqrt(mean over columns of the per-column variance of x).
inline double noise_scale(const Matrix& x, double eta) {
    detail::require(eta >= 0.0 && std::isfinite(eta), "add_observation_noise: eta must be >= 0");
    if (eta == 0.0 || x.rows() < 2) return 0.0;
    return eta * std::sqrt(column_variance(x).mean());
}

/// Adds i.i.d. N(0, sigma^2) to every entry.
inline Matrix add_noise_sigma(Matrix x, double sigma, Rng& rng) {
    detail::require(sigma >= 0.0 && std::isfinite(sigma), "add_noise_sigma: sigma must be >= 0");
    if (sigma == 0.0) return x;
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] += sigma * rng.normal();
    return x;
}

inline Matrix add_observation_noise(const Matrix& x, double eta, Rng& rng) {
    return add_noise_sigma(x, noise_scale(x, eta), rng);
}

// ---------------------------------------------------------------------------
// Paired datasets
// ---------------------------------------------------------------------------

enum class Regime { Finite, Resampling };

inline const char* to_string(Regime r) { return r == Regime::Finite ? "finite" : "resampling"; }

struct DatasetMeta {
    LatentSpec spec = JointGaussian{};
    std::string teacher = "nonlinear";
    std::uint64_t teacher_seed_x = 0;
    std::uint64_t teacher_seed_y = 0;
    double eta = 0.0;
    double sigma_x = 0.0;
    double sigma_y = 0.0;
    Regime regime = Regime::Finite;
    std::uint64_t sample_seed = 0;
};

struct DatasetPair {
    Matrix x;
    Matrix y;
    DatasetMeta meta;

    [[nodiscard]] Eigen::Index size() const { return x.rows(); }
};

/// Draws batches X = F_X(Z_X) + noise, Y = F_Y(Z_Y) + noise. The noise scale
/// is fixed once from a reference draw so that every batch of a resampling
/// run sees the same sigma.
class PairSampler {
public:
    PairSampler(LatentSpec spec, TeacherPair teachers, double eta, std::uint64_t calibration_seed,
                Eigen::Index calibration_n = 10000)
        : spec_(std::move(spec)), teachers_(std::move(teachers)), eta_(eta) {
        validate(spec_);
        auto [kx, ky] = latent_dims(spec_);
        detail::require(teachers_.x.in_dim() == kx && teachers_.y.in_dim() == ky,
                        "PairSampler: teacher input widths do not match the latent");
        detail::require(eta >= 0.0 && std::isfinite(eta), "PairSampler: eta must be >= 0");
        if (eta_ > 0.0) {
            Rng rng(calibration_seed);
            auto z = sample_latent(spec_, rng, calibration_n);
            sigma_x_ = noise_scale(teachers_.x.apply(z.zx), eta_);
            sigma_y_ = noise_scale(teachers_.y.apply(z.zy), eta_);
        }
    }

    [[nodiscard]] std::pair<Matrix, Matrix> draw(Rng& rng, Eigen::Index n) const {
        auto z = sample_latent(spec_, rng, n);
        Matrix x = teachers_.x.apply(z.zx);
        Matrix y = teachers_.y.apply(z.zy);
        if (eta_ > 0.0) {
            Rng nx(derive_seed(rng.next_u64(), 1));
            Rng ny(derive_seed(rng.next_u64(), 2));
            x = add_noise_sigma(std::move(x), sigma_x_, nx);
            y = add_noise_sigma(std::move(y), sigma_y_, ny);
        }
        return {std::move(x), std::move(y)};
    }

    [[nodiscard]] const LatentSpec& spec() const noexcept { return spec_; }
    [[nodiscard]] const TeacherPair& teachers() const noexcept { return teachers_; }
    [[nodiscard]] double eta() const noexcept { return eta_; }
    [[nodiscard]] double sigma_x() const noexcept { return sigma_x_; }
    [[nodiscard]] double sigma_y() const noexcept { return sigma_y_; }
    [[nodiscard]] Eigen::Index x_dim() const { return teachers_.x.out_dim(); }
    [[nodiscard]] Eigen::Index y_dim() const { return teachers_.y.out_dim(); }

private:
    LatentSpec spec_;
    TeacherPair teachers_;
    double eta_;
    double sigma_x_ = 0.0;
    double sigma_y_ = 0.0;
};

/// One fixed dataset. Noise scales come from the clean outputs of this draw;
/// the X and Y noise streams are seeded from two fresh draws of `rng`.
inline DatasetPair make_pair(const LatentSpec& spec, const TeacherPair& teachers, double eta, Rng& rng, Regime regime,
                             Eigen::Index n) {
    validate(spec);
    DatasetPair d;
    d.meta.spec = spec;
    d.meta.teacher = to_string(teachers.x.kind());
    d.meta.teacher_seed_x = teachers.x.seed();
    d.meta.teacher_seed_y = teachers.y.seed();
    d.meta.eta = eta;
    d.meta.regime = regime;
    d.meta.sample_seed = rng.seed();
    auto z = sample_latent(spec, rng, n);
    d.x = teachers.x.apply(z.zx);
    d.y = teachers.y.apply(z.zy);
    d.meta.sigma_x = noise_scale(d.x, eta);
    d.meta.sigma_y = noise_scale(d.y, eta);
    Rng nx(derive_seed(rng.next_u64(), 1));
    Rng ny(derive_seed(rng.next_u64(), 2));
    d.x = add_noise_sigma(std::move(d.x), d.meta.sigma_x, nx);
    d.y = add_noise_sigma(std::move(d.y), d.meta.sigma_y, ny);
    return d;
}

// ---------------------------------------------------------------------------
// Container: <stem>.bin + <stem>.json
// ---------------------------------------------------------------------------
//
// .bin, little-endian: char[4] "DPAR", u32 version (=1), u64 rows,
// u64 x_cols, u64 y_cols, rows*x_cols f64 (row-major X), rows*y_cols f64 (Y).
// .json: {"latent": {...}, "teacher", "teacher_seed_x", "teacher_seed_y",
// "eta", "sigma_x", "sigma_y", "regime", "sample_seed", "rows", "x_cols", "y_cols"}.

inline nlohmann::json to_json(const LatentSpec& spec) {
    return std::visit(
        [](const auto& s) -> nlohmann::json {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, JointGaussian>)
                return {{"kind", "joint_gaussian"}, {"kz", s.kz}, {"i_bits", s.i_bits}};
            else if constexpr (std::is_same_v<S, GaussianMixture>)
                return {{"kind", "gaussian_mixture"}, {"n_peaks", s.n_peaks}, {"mu", s.mu}, {"i_peak_bits", s.i_peak_bits}};
            else if constexpr (std::is_same_v<S, HypersphereShell>)
                return {{"kind", "hypersphere_shell"}, {"kz", s.kz}, {"r", s.r}, {"sigma_r", s.sigma_r}};
            else
                return {{"kind", "swiss_roll"}, {"t0", s.t0}, {"t1", s.t1}, {"h0", s.h0}, {"h1", s.h1}};
        },
        spec);
}

inline LatentSpec latent_from_json(const nlohmann::json& j) {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "joint_gaussian") return JointGaussian{j.at("kz").get<int>(), j.at("i_bits").get<double>()};
    if (kind == "gaussian_mixture")
        return GaussianMixture{j.at("n_peaks").get<int>(), j.at("mu").get<double>(), j.at("i_peak_bits").get<double>()};
    if (kind == "hypersphere_shell")
        return HypersphereShell{j.at("kz").get<int>(), j.at("r").get<double>(), j.at("sigma_r").get<double>()};
    if (kind == "swiss_roll")
        return SwissRoll{j.at("t0").get<double>(), j.at("t1").get<double>(), j.at("h0").get<double>(),
                         j.at("h1").get<double>()};
    throw InvalidInput("unknown latent kind '" + kind + "'");
}

inline void save_dataset(const std::string& stem, const DatasetPair& d) {
    detail::require(d.x.rows() == d.y.rows(), "save_dataset: row counts differ");
    std::ofstream bin(stem + ".bin", std::ios::binary);
    if (!bin) throw InvalidInput("save_dataset: cannot open " + stem + ".bin");
    bin.write("DPAR", 4);
    detail::write_pod<std::uint32_t>(bin, 1);
    detail::write_pod<std::uint64_t>(bin, static_cast<std::uint64_t>(d.x.rows()));
    detail::write_pod<std::uint64_t>(bin, static_cast<std::uint64_t>(d.x.cols()));
    detail::write_pod<std::uint64_t>(bin, static_cast<std::uint64_t>(d.y.cols()));
    bin.write(reinterpret_cast<const char*>(d.x.data()), static_cast<std::streamsize>(d.x.size() * 8));
    bin.write(reinterpret_cast<const char*>(d.y.data()), static_cast<std::streamsize>(d.y.size() * 8));
    if (!bin) throw InvalidInput("save_dataset: write failed");

    nlohmann::json j{{"latent", to_json(d.meta.spec)},
                     {"teacher", d.meta.teacher},
                     {"teacher_seed_x", d.meta.teacher_seed_x},
                     {"teacher_seed_y", d.meta.teacher_seed_y},
                     {"eta", d.meta.eta},
                     {"sigma_x", d.meta.sigma_x},
                     {"sigma_y", d.meta.sigma_y},
                     {"regime", to_string(d.meta.regime)},
                     {"sample_seed", d.meta.sample_seed},
                     {"rows", d.x.rows()},
                     {"x_cols", d.x.cols()},
                     {"y_cols", d.y.cols()}};
    std::ofstream meta(stem + ".json");
    meta << j.dump(2) << '\n';
}

inline DatasetPair load_dataset(const std::string& stem) {
    std::ifstream bin(stem + ".bin", std::ios::binary);
    if (!bin) throw InvalidInput("load_dataset: cannot open " + stem + ".bin");
    char magic[4];
    bin.read(magic, 4);
    if (!bin || std::string(magic, 4) != "DPAR") throw InvalidInput("load_dataset: bad magic");
    if (detail::read_pod<std::uint32_t>(bin) != 1) throw InvalidInput("load_dataset: unsupported version");
    const auto rows = static_cast<Eigen::Index>(detail::read_pod<std::uint64_t>(bin));
    const auto xc = static_cast<Eigen::Index>(detail::read_pod<std::uint64_t>(bin));
    const auto yc = static_cast<Eigen::Index>(detail::read_pod<std::uint64_t>(bin));
    DatasetPair d;
    d.x.resize(rows, xc);
    d.y.resize(rows, yc);
    bin.read(reinterpret_cast<char*>(d.x.data()), static_cast<std::streamsize>(d.x.size() * 8));
    bin.read(reinterpret_cast<char*>(d.y.data()), static_cast<std::streamsize>(d.y.size() * 8));
    if (!bin) throw InvalidInput("load_dataset: truncated payload");

    std::ifstream meta(stem + ".json");
    if (meta) {
        const auto j = nlohmann::json::parse(meta);
        d.meta.spec = latent_from_json(j.at("latent"));
        d.meta.teacher = j.value("teacher", "");
        d.meta.teacher_seed_x = j.value("teacher_seed_x", std::uint64_t{0});
        d.meta.teacher_seed_y = j.value("teacher_seed_y", std::uint64_t{0});
        d.meta.eta = j.value("eta", 0.0);
        d.meta.sigma_x = j.value("sigma_x", 0.0);
        d.meta.sigma_y = j.value("sigma_y", 0.0);
        d.meta.regime = j.value("regime", "finite") == "finite" ? Regime::Finite : Regime::Resampling;
        d.meta.sample_seed = j.value("sample_seed", std::uint64_t{0});
    }
    return d;
}

}  // namespace dimest
