#pragma once

// Named experiment recipes. Each recipe reads its resolved ExperimentConfig,
// runs its (trial, grid-point) jobs sequentially in key order and writes CSV
// tables, per-run JSON records, the resolved config and a summary.

#include <chrono>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "dimest/baselines.hpp"
#include "dimest/critics.hpp"
#include "dimest/datagen.hpp"
#include "dimest/dimension.hpp"
#include "dimest/error.hpp"
#include "dimest/experiment.hpp"
#include "dimest/output.hpp"
#include "dimest/physics.hpp"
#include "dimest/scaling.hpp"
#include "dimest/trainer.hpp"

namespace dimest {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Config readers
// ---------------------------------------------------------------------------

/// Seed of a named random stream under the recipe's master seed.
inline std::uint64_t stream_seed(std::uint64_t master, const std::string& tag) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : tag) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return derive_seed(master, h);
}

inline CriticArch critic_arch_from(const Json& critic, Eigen::Index kx, Eigen::Index ky, int kz, bool siamese = false) {
    CriticArch a;
    a.input_x = kx;
    a.input_y = ky;
    a.kz = kz;
    a.encoder_hidden = critic.at("encoder_hidden").get<std::vector<Eigen::Index>>();
    a.head_hidden = critic.at("head_hidden").get<std::vector<Eigen::Index>>();
    a.concat_hidden = critic.at("concat_hidden").get<std::vector<Eigen::Index>>();
    a.siamese = siamese;
    return a;
}

inline TrainConfig resampling_config_from(const Json& t) {
    TrainConfig c;
    c.regime = Resampling{t.at("iters").get<int>()};
    c.batch = t.at("batch").get<int>();
    c.adam.lr = t.at("lr").get<double>();
    c.report_window = t.at("report_window").get<double>();
    c.fail_threshold_bits = t.at("fail_threshold_bits").get<double>();
    c.standardize_inputs = t.at("standardize_inputs").get<bool>();
    c.validate();
    return c;
}

inline TrainConfig finite_config_from(const Json& f) {
    TrainConfig c;
    c.regime = Finite{f.at("epochs").get<int>(), f.at("test_size").get<int>(), f.at("test_fraction").get<double>()};
    c.batch = f.at("batch").get<int>();
    c.adam.lr = f.at("lr").get<double>();
    c.median_filter_epochs = f.at("median_filter_epochs").get<int>();
    const auto rule = f.at("stop_rule").get<std::string>();
    if (rule == "max_test")
        c.stop_rule = MaxTest{};
    else if (rule == "fraction_of_max_test")
        c.stop_rule = FractionOfMaxTest{f.at("fraction").get<double>()};
    else
        throw UsageError("unknown stop_rule '" + rule + "' (expected max_test or fraction_of_max_test)");
    c.fail_threshold_bits = f.at("fail_threshold_bits").get<double>();
    c.standardize_inputs = f.at("standardize_inputs").get<bool>();
    c.validate();
    return c;
}

/// "gaussian" (K_Z pairs at total I bits), "mixture", "hypersphere", "swiss_roll".
inline LatentSpec latent_from_name(const std::string& name, const Json& data, int kz, double i_bits) {
    if (name == "gaussian") return JointGaussian{kz, i_bits};
    if (name == "mixture") {
        const Json& m = data.at("mixture");
        return GaussianMixture{m.at("n_peaks").get<int>(), m.at("mu").get<double>(), m.at("i_peak_bits").get<double>()};
    }
    if (name == "hypersphere") return HypersphereShell{};
    if (name == "swiss_roll") return SwissRoll{};
    throw UsageError("unknown latent '" + name + "' (expected gaussian, mixture, hypersphere or swiss_roll)");
}

inline LatentSpec latent_from_name(const std::string& name, const Json& data) {
    return latent_from_name(name, data, data.at("KZ").get<int>(), data.at("I_bits").get<double>());
}

// ---------------------------------------------------------------------------
// Run protocols
// ---------------------------------------------------------------------------

struct RunOutcome {
    TrainRecord record;
    std::optional<SpectrumReport> spectrum;
};

struct SpectrumSettings {
    Eigen::Index n_eval = 10000;  ///< resampling regime only; 0 disables the spectrum
    double alpha = 0.5;
    double threshold_bits = kDeffReliabilityBits;

    static SpectrumSettings from(const Json& d) {
        return {d.at("n_eval").get<Eigen::Index>(), d.at("alpha").get<double>(), d.at("threshold_bits").get<double>()};
    }
};

namespace detail {

/// A collapsed encoder pair of a run that failed to learn has no spectrum.
inline std::optional<SpectrumReport> spectrum_or_none(const TrainRecord& rec, const Matrix& x, const Matrix& y,
                                                      const SpectrumSettings& s) {
    try {
        return one_shot_dimension(rec.model, x, y, rec.reported_bits, s.alpha, s.threshold_bits);
    } catch (const DegenerateSpectrum&) {
        if (rec.failed) return std::nullopt;
        throw;
    }
}

}  // namespace detail

/// Fresh batches from `sampler`; the spectrum uses `n_eval` fresh samples.
inline RunOutcome resampling_run(const PairSampler& sampler, CriticFamily family, const CriticArch& arch,
                                 const TrainConfig& cfg, Rng& rng, const SpectrumSettings& spec = {}) {
    RunOutcome out;
    out.record = train_resampling(make_critic(rng, family, arch), sampler, cfg, rng);
    if (spec.n_eval > 0 && family != CriticFamily::Concatenated) {
        Rng eval(derive_seed(rng.next_u64(), 3));
        const auto [x, y] = sampler.draw(eval, spec.n_eval);
        out.spectrum = detail::spectrum_or_none(out.record, x, y, spec);
    }
    return out;
}

/// Fixed dataset; the spectrum uses the full training split.
inline RunOutcome finite_run(const DatasetPair& data, CriticFamily family, const CriticArch& arch, const TrainConfig& cfg,
                             Rng& rng, const SpectrumSettings& spec = {}, bool want_spectrum = true) {
    RunOutcome out;
    out.record = train_finite(make_critic(rng, family, arch), data, cfg, rng);
    if (want_spectrum && family != CriticFamily::Concatenated) {
        const auto& rows = out.record.train_rows;
        const Matrix x = detail::gather_rows(data.x, rows, 0, rows.size());
        const Matrix y = detail::gather_rows(data.y, rows, 0, rows.size());
        out.spectrum = detail::spectrum_or_none(out.record, x, y, spec);
    }
    return out;
}

inline double nan_value() { return std::numeric_limits<double>::quiet_NaN(); }

/// Columns shared by every table that reports a spectrum.
inline std::vector<std::string> spectrum_columns() {
    return {"d_eff_sv[dimensionless]", "d_eff_eig[dimensionless]", "d_eff_entropy[dimensionless]",
            "d_eff_alpha[dimensionless]", "deff_suppressed[bool]", "kz_margin_warning[bool]"};
}

inline std::vector<CsvCell> spectrum_cells(const std::optional<SpectrumReport>& s) {
    if (!s) return {nan_value(), nan_value(), nan_value(), nan_value(), std::int64_t{1}, std::int64_t{0}};
    return {s->d_eff_sv, s->d_eff_eig, s->d_eff_entropy, s->d_eff_alpha, std::int64_t{s->suppressed},
            std::int64_t{s->small_margin}};
}

/// Per-run record: settings, curves, t*, reported MI and spectrum.
/// Resampling curves are stored as means over blocks of `stride` steps.
inline Json run_json(const std::string& id, const Json& settings, const RunOutcome& r, int stride = 1) {
    const TrainRecord& rec = r.record;
    Json j;
    j["id"] = id;
    j["settings"] = settings;
    j["reported_mi_bits"] = rec.reported_bits;
    j["failed"] = rec.failed;
    j["t_star"] = rec.t_star;
    std::vector<double> train;
    if (stride <= 1) {
        train = rec.train_bits;
    } else {
        for (std::size_t i = 0; i < rec.train_bits.size(); i += static_cast<std::size_t>(stride)) {
            const std::size_t end = std::min(rec.train_bits.size(), i + static_cast<std::size_t>(stride));
            double acc = 0.0;
            for (std::size_t k = i; k < end; ++k) acc += rec.train_bits[k];
            train.push_back(acc / static_cast<double>(end - i));
        }
    }
    j["curve_stride"] = std::max(stride, 1);
    j["train_mi_bits"] = train;
    if (!rec.test_bits.empty()) {
        j["test_mi_bits"] = rec.test_bits;
        j["test_mi_filtered_bits"] = rec.test_filtered;
    }
    if (r.spectrum) {
        const auto& s = *r.spectrum;
        j["spectrum"] = {{"singular_values", std::vector<double>(s.singular_values.data(),
                                                                 s.singular_values.data() + s.singular_values.size())},
                         {"d_eff_sv", s.d_eff_sv},
                         {"d_eff_eig", s.d_eff_eig},
                         {"d_eff_entropy", s.d_eff_entropy},
                         {"d_eff_alpha", s.d_eff_alpha},
                         {"alpha", s.alpha},
                         {"n_samples_used", s.n_samples_used},
                         {"suppressed", s.suppressed},
                         {"warnings", s.warnings()}};
    }
    return j;
}

// ---------------------------------------------------------------------------
// Recipe plumbing
// ---------------------------------------------------------------------------

struct RecipeResult {
    std::vector<fs::path> files;
    Json summary = Json::object();
};

/// Output sink for one recipe run. Every file carries the config hash.
class RecipeContext {
public:
    RecipeContext(const ExperimentConfig& cfg, fs::path out, std::ostream* log)
        : cfg_(cfg), out_(std::move(out)), log_(log), hash_(cfg.hash()) {
        fs::create_directories(out_);
    }

    [[nodiscard]] const ExperimentConfig& config() const noexcept { return cfg_; }
    [[nodiscard]] const Json& params() const noexcept { return cfg_.params; }
    [[nodiscard]] std::uint64_t seed() const noexcept { return cfg_.seed; }
    [[nodiscard]] const std::string& hash() const noexcept { return hash_; }
    [[nodiscard]] const fs::path& dir() const noexcept { return out_; }

    void table(const std::string& name, const CsvTable& t) {
        const fs::path p = out_ / (name + ".csv");
        t.write(p, cfg_.recipe, hash_);
        result_.files.push_back(p);
    }

    void run_record(const std::string& id, Json j) {
        j["config_hash"] = hash_;
        const fs::path p = out_ / "runs" / (id + ".json");
        write_json(p, j);
        result_.files.push_back(p);
    }

    void file(const fs::path& p) { result_.files.push_back(p); }

    void log(const std::string& line) const {
        if (log_) *log_ << "[" << cfg_.recipe << "] " << line << std::endl;
    }

    Json& summary() { return result_.summary; }

    RecipeResult finish() {
        Json cfg = cfg_.to_json();
        cfg["config_hash"] = hash_;
        write_json(out_ / "config.json", cfg);
        result_.files.push_back(out_ / "config.json");
        Json s = result_.summary;
        s["recipe"] = cfg_.recipe;
        s["config_hash"] = hash_;
        write_json(out_ / "summary.json", s);
        result_.files.push_back(out_ / "summary.json");
        return std::move(result_);
    }

private:
    const ExperimentConfig& cfg_;
    fs::path out_;
    std::ostream* log_;
    std::string hash_;
    RecipeResult result_;
};

namespace detail {

inline std::string pad(int v, int width = 2) {
    std::ostringstream os;
    os << std::setw(width) << std::setfill('0') << v;
    return os.str();
}

inline std::string tag_number(double v) {
    std::string s = format_number(v);
    for (auto& c : s)
        if (c == '.') c = 'p';
    return s;
}

class Stopwatch {
public:
    [[nodiscard]] double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline std::string describe(const RunOutcome& r, double secs) {
    std::ostringstream os;
    os << "mi=" << format_number(r.record.reported_bits) << " bits";
    if (r.spectrum) os << " d_eff=" << format_number(r.spectrum->d_eff_sv);
    if (r.record.failed) os << " (failed)";
    os << " [" << std::fixed << std::setprecision(1) << secs << " s]";
    return os.str();
}

inline std::int64_t flag(bool b) { return b ? 1 : 0; }

/// k_z* per curve key from a sweep table; NaN-safe summary entry.
inline Json saturation_json(const std::optional<int>& kz, const std::map<int, double>& best) {
    Json j;
    j["kz_star"] = kz ? Json(*kz) : Json(nullptr);
    Json m = Json::object();
    for (const auto& [k, v] : best) m[std::to_string(k)] = std::isnan(v) ? Json(nullptr) : Json(v);
    j["max_over_trials_bits"] = m;
    return j;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Recipes
// ---------------------------------------------------------------------------

/// MI vs k_z for each latent x teacher x critic family, max over trials,
/// saturation k_z*, and the CCA reference MI from the top-k canonical pairs.
inline void recipe_fig2_sweep(RecipeContext& ctx) {
    const Json& p = ctx.params();
    const auto kz_list = p.at("kz_list").get<std::vector<int>>();
    const int trials = p.at("trials").get<int>();
    const double delta = p.at("delta_bits").get<double>();
    const TrainConfig train = resampling_config_from(p.at("train"));
    const Json& data = p.at("data");
    const auto k = data.at("K").get<Eigen::Index>();

    CsvTable rows({"latent", "teacher", "family", "kz[count]", "trial[index]", "mi[bits]", "failed[bool]",
                   "true_mi[bits]"});
    CsvTable sat({"latent", "teacher", "family", "kz_star[count]", "delta[bits]", "max_mi[bits]"});
    for (const auto& latent : p.at("latents").get<std::vector<std::string>>())
        for (const auto& teacher : p.at("teachers").get<std::vector<std::string>>()) {
            const LatentSpec spec = latent_from_name(latent, data);
            const double truth = analytic_mi_bits(spec).value_or(nan_value());
            const std::string key = latent + "/" + teacher;
            const TeacherPair tp = make_teachers(spec, teacher_kind_from_string(teacher), stream_seed(ctx.seed(), "teacher/" + key), k);
            const PairSampler sampler(spec, tp, 0.0, stream_seed(ctx.seed(), "calibration/" + key));
            for (const auto& fam : p.at("families").get<std::vector<std::string>>()) {
                const CriticFamily family = critic_family_from_string(fam);
                const auto table = sweep_kz(kz_list, trials, stream_seed(ctx.seed(), "train/" + key + "/" + fam),
                                            [&](int kz, int trial, Rng& rng) {
                                                detail::Stopwatch sw;
                                                const auto arch = critic_arch_from(p.at("critic"), k, k, kz);
                                                RunOutcome r = resampling_run(sampler, family, arch, train, rng, {0});
                                                const std::string id = "fig2_" + latent + "_" + teacher + "_" + fam + "_kz" +
                                                                       detail::pad(kz) + "_t" + std::to_string(trial);
                                                ctx.run_record(id, run_json(id, {{"latent", latent}, {"teacher", teacher}, {"family", fam},
                                                                                 {"kz", kz}, {"trial", trial}}, r, 100));
                                                ctx.log(id + " " + detail::describe(r, sw.seconds()));
                                                return r.record;
                                            });
                for (const auto& row : table.rows)
                    rows.add({latent, teacher, fam, std::int64_t{row.kz}, std::int64_t{row.trial}, row.mi_bits,
                              detail::flag(row.failed), truth});
                const auto best = table.max_over_trials();
                const auto kz_star = saturation_kz(best, delta);
                double top = nan_value();
                for (const auto& [kz, v] : best)
                    if (!std::isnan(v) && (std::isnan(top) || v > top)) top = v;
                sat.add({latent, teacher, fam, kz_star ? CsvCell{std::int64_t{*kz_star}} : CsvCell{nan_value()}, delta, top});
                ctx.summary()[key][fam] = detail::saturation_json(kz_star, best);
            }
            Rng cca_rng(stream_seed(ctx.seed(), "cca/" + key));
            const auto [x, y] = sampler.draw(cca_rng, p.at("cca_samples").get<Eigen::Index>());
            const CcaResult cca = cca_mi(x, y);
            for (int kz : kz_list) {
                const Eigen::Index used = std::min<Eigen::Index>(kz, cca.mi_bits_cumulative.size());
                rows.add({latent, teacher, std::string("cca"), std::int64_t{kz}, std::int64_t{0},
                          used > 0 ? cca.mi_bits_cumulative(used - 1) : 0.0, std::int64_t{0}, truth});
            }
        }
    ctx.table("fig2_sweep", rows);
    ctx.table("fig2_saturation", sat);
}

/// MI vs k_z under additive observation noise (nonlinear teachers), with the
/// one-shot spectrum of every run.
inline void recipe_fig3_noise(RecipeContext& ctx) {
    const Json& p = ctx.params();
    const auto kz_list = p.at("kz_list").get<std::vector<int>>();
    const int trials = p.at("trials").get<int>();
    const double delta = p.at("delta_bits").get<double>();
    const TrainConfig train = resampling_config_from(p.at("train"));
    const Json& data = p.at("data");
    const auto k = data.at("K").get<Eigen::Index>();
    const auto teacher = teacher_kind_from_string(data.at("teacher").get<std::string>());
    const auto fam = p.at("family").get<std::string>();
    const CriticFamily family = critic_family_from_string(fam);
    const SpectrumSettings ss = SpectrumSettings::from(p.at("dimension"));

    std::vector<std::string> cols{"latent", "eta[ratio]", "kz[count]", "trial[index]", "mi[bits]", "failed[bool]"};
    for (const auto& c : spectrum_columns()) cols.push_back(c);
    CsvTable rows(cols);
    CsvTable sat({"latent", "eta[ratio]", "kz_star[count]", "delta[bits]"});
    for (const auto& latent : p.at("latents").get<std::vector<std::string>>()) {
        const LatentSpec spec = latent_from_name(latent, data);
        const TeacherPair tp = make_teachers(spec, teacher, stream_seed(ctx.seed(), "teacher/" + latent), k);
        for (double eta : p.at("eta_list").get<std::vector<double>>()) {
            const std::string key = latent + "/eta" + detail::tag_number(eta);
            const PairSampler sampler(spec, tp, eta, stream_seed(ctx.seed(), "calibration/" + key));
            std::map<std::pair<int, int>, std::optional<SpectrumReport>> spectra;
            const auto table = sweep_kz(kz_list, trials, stream_seed(ctx.seed(), "train/" + key), [&](int kz, int trial, Rng& rng) {
                detail::Stopwatch sw;
                RunOutcome r = resampling_run(sampler, family, critic_arch_from(p.at("critic"), k, k, kz), train, rng, ss);
                spectra[{kz, trial}] = r.spectrum;
                const std::string id = "fig3_" + latent + "_eta" + detail::tag_number(eta) + "_kz" + detail::pad(kz) + "_t" +
                                       std::to_string(trial);
                ctx.run_record(id, run_json(id, {{"latent", latent}, {"eta", eta}, {"kz", kz}, {"trial", trial}}, r, 100));
                ctx.log(id + " " + detail::describe(r, sw.seconds()));
                return r.record;
            });
            for (const auto& row : table.rows) {
                std::vector<CsvCell> cells{latent, eta, std::int64_t{row.kz}, std::int64_t{row.trial}, row.mi_bits,
                                           detail::flag(row.failed)};
                for (auto& c : spectrum_cells(spectra.at({row.kz, row.trial}))) cells.push_back(std::move(c));
                rows.add(std::move(cells));
            }
            const auto best = table.max_over_trials();
            const auto kz_star = saturation_kz(best, delta);
            sat.add({latent, eta, kz_star ? CsvCell{std::int64_t{*kz_star}} : CsvCell{nan_value()}, delta});
            ctx.summary()[key] = detail::saturation_json(kz_star, best);
        }
    }
    ctx.table("fig3_noise", rows);
    ctx.table("fig3_saturation", sat);
}

/// One-shot d_eff: the spectrum of one model (panel A), d_eff vs k_z (B),
/// d_eff vs K_Z at a large k_z for several I (C) and batch sizes (D).
inline void recipe_fig4_oneshot(RecipeContext& ctx) {
    const Json& p = ctx.params();
    const Json& data = p.at("data");
    const auto k = data.at("K").get<Eigen::Index>();
    const auto teacher = teacher_kind_from_string(data.at("teacher").get<std::string>());
    const int trials = p.at("trials").get<int>();
    const TrainConfig base = resampling_config_from(p.at("train"));
    const SpectrumSettings ss = SpectrumSettings::from(p.at("dimension"));
    const int kz_big = p.at("oneshot_kz").get<int>();

    // Runs are keyed by (latent, K_Z, I, batch, k_z, trial) so panels share them.
    std::map<std::string, RunOutcome> memo;
    auto run = [&](const std::string& latent, int KZ, double I, int batch, int kz, int trial) -> const RunOutcome& {
        const std::string key = latent + "_KZ" + std::to_string(KZ) + "_I" + detail::tag_number(I) + "_B" +
                                std::to_string(batch) + "_kz" + detail::pad(kz) + "_t" + std::to_string(trial);
        if (auto it = memo.find(key); it != memo.end()) return it->second;
        const LatentSpec spec = latent_from_name(latent, data, KZ, I);
        const std::string dkey = latent + "/KZ" + std::to_string(KZ) + "/I" + detail::tag_number(I);
        const TeacherPair tp = make_teachers(spec, teacher, stream_seed(ctx.seed(), "teacher/" + dkey), k);
        const PairSampler sampler(spec, tp, 0.0, stream_seed(ctx.seed(), "calibration/" + dkey));
        TrainConfig cfg = base;
        cfg.batch = batch;
        Rng rng(stream_seed(ctx.seed(), "train/" + key));
        detail::Stopwatch sw;
        RunOutcome r = resampling_run(sampler, CriticFamily::Hybrid, critic_arch_from(p.at("critic"), k, k, kz), cfg, rng, ss);
        const std::string id = "fig4_" + key;
        ctx.run_record(id, run_json(id, {{"latent", latent}, {"KZ", KZ}, {"I_bits", I}, {"batch", batch}, {"kz", kz}, {"trial", trial}},
                                    r, 100));
        ctx.log(id + " " + detail::describe(r, sw.seconds()));
        return memo.emplace(key, std::move(r)).first->second;
    };

    const int KZ0 = data.at("KZ").get<int>();
    const double I0 = data.at("I_bits").get<double>();
    const int B0 = base.batch;

    CsvTable spectrum({"kz[count]", "index[count]", "singular_value[arb]", "normalized[dimensionless]"});
    {
        const RunOutcome& r = run("gaussian", KZ0, I0, B0, p.at("spectrum_kz").get<int>(), 0);
        if (r.spectrum) {
            const Vector& s = r.spectrum->singular_values;
            for (Eigen::Index i = 0; i < s.size(); ++i)
                spectrum.add({std::int64_t{s.size()}, std::int64_t{i + 1}, s(i), s(0) > 0 ? s(i) / s(0) : 0.0});
        }
    }
    ctx.table("fig4_spectrum", spectrum);

    std::vector<std::string> cols{"panel", "latent", "KZ[count]", "I[bits]", "batch[count]", "kz[count]", "trial[index]",
                                  "mi[bits]", "failed[bool]"};
    for (const auto& c : spectrum_columns()) cols.push_back(c);
    CsvTable rows(cols);
    auto add = [&](const std::string& panel, const std::string& latent, int KZ, double I, int batch, int kz, int trial) {
        const RunOutcome& r = run(latent, KZ, I, batch, kz, trial);
        std::vector<CsvCell> cells{panel, latent, std::int64_t{KZ}, I, std::int64_t{batch}, std::int64_t{kz},
                                   std::int64_t{trial}, r.record.reported_bits, detail::flag(r.record.failed)};
        for (auto& c : spectrum_cells(r.spectrum)) cells.push_back(std::move(c));
        rows.add(std::move(cells));
    };
    for (const auto& latent : p.at("latents").get<std::vector<std::string>>())
        for (int kz : p.at("kz_list").get<std::vector<int>>())
            for (int t = 0; t < trials; ++t) add("B", latent, KZ0, I0, B0, kz, t);
    for (double I : p.at("I_list").get<std::vector<double>>())
        for (int KZ : p.at("KZ_list").get<std::vector<int>>())
            for (int t = 0; t < trials; ++t) add("C", "gaussian", KZ, I, B0, kz_big, t);
    for (int batch : p.at("batch_list").get<std::vector<int>>())
        for (int KZ : p.at("KZ_list").get<std::vector<int>>())
            for (int t = 0; t < trials; ++t) add("D", "gaussian", KZ, I0, batch, kz_big, t);
    ctx.table("fig4_deff", rows);
}

/// Finite data: max-test/train-estimate curves (A), d_eff vs N (B), d_eff vs
/// K_Z for several I at fixed N (C) and for several N at fixed I (D).
inline void recipe_fig5_finite(RecipeContext& ctx) {
    const Json& p = ctx.params();
    const Json& data = p.at("data");
    const auto k = data.at("K").get<Eigen::Index>();
    const auto teacher = teacher_kind_from_string(data.at("teacher").get<std::string>());
    const int trials = p.at("trials").get<int>();
    const int kz = p.at("kz").get<int>();
    const TrainConfig cfg = finite_config_from(p.at("finite"));
    const SpectrumSettings ss = SpectrumSettings::from(p.at("dimension"));

    std::map<std::string, RunOutcome> memo;
    auto run = [&](const std::string& latent, int KZ, double I, Eigen::Index n, int trial) -> const RunOutcome& {
        const std::string dkey = latent + "_KZ" + std::to_string(KZ) + "_I" + detail::tag_number(I);
        const std::string key = dkey + "_N" + std::to_string(n) + "_t" + std::to_string(trial);
        if (auto it = memo.find(key); it != memo.end()) return it->second;
        const LatentSpec spec = latent_from_name(latent, data, KZ, I);
        const TeacherPair tp = make_teachers(spec, teacher, stream_seed(ctx.seed(), "teacher/" + dkey), k);
        Rng data_rng(stream_seed(ctx.seed(), "data/" + key));
        const DatasetPair d = make_pair(spec, tp, 0.0, data_rng, Regime::Finite, n);
        Rng rng(stream_seed(ctx.seed(), "train/" + key));
        detail::Stopwatch sw;
        RunOutcome r = finite_run(d, CriticFamily::Hybrid, critic_arch_from(p.at("critic"), k, k, kz), cfg, rng, ss);
        const std::string id = "fig5_" + key;
        ctx.run_record(id, run_json(id, {{"latent", latent}, {"KZ", KZ}, {"I_bits", I}, {"N", n}, {"kz", kz}, {"trial", trial}}, r));
        ctx.log(id + " " + detail::describe(r, sw.seconds()));
        return memo.emplace(key, std::move(r)).first->second;
    };

    const int KZ0 = data.at("KZ").get<int>();
    const double I0 = data.at("I_bits").get<double>();
    const auto n_list = p.at("N_list").get<std::vector<Eigen::Index>>();
    const Eigen::Index n_a = std::find(n_list.begin(), n_list.end(), 1024) != n_list.end() ? 1024 : n_list.front();

    CsvTable curves({"trial[index]", "epoch[index]", "train_mi[bits]", "test_mi[bits]", "test_mi_filtered[bits]",
                     "selected[bool]"});
    for (int t = 0; t < trials; ++t) {
        const TrainRecord& rec = run("gaussian", KZ0, I0, n_a, t).record;
        for (std::size_t e = 0; e < rec.test_bits.size(); ++e)
            curves.add({std::int64_t{t}, static_cast<std::int64_t>(e), rec.train_bits[e], rec.test_bits[e],
                        rec.test_filtered[e], detail::flag(static_cast<int>(e) == rec.t_star)});
    }
    ctx.table("fig5_curves", curves);

    std::vector<std::string> cols{"panel", "latent", "KZ[count]", "I[bits]", "N[count]", "kz[count]", "trial[index]",
                                  "t_star[epoch]", "mi[bits]", "failed[bool]"};
    for (const auto& c : spectrum_columns()) cols.push_back(c);
    CsvTable rows(cols);
    auto add = [&](const std::string& panel, const std::string& latent, int KZ, double I, Eigen::Index n, int t) {
        const RunOutcome& r = run(latent, KZ, I, n, t);
        std::vector<CsvCell> cells{panel, latent, std::int64_t{KZ}, I, std::int64_t{n}, std::int64_t{kz}, std::int64_t{t},
                                   std::int64_t{r.record.t_star}, r.record.reported_bits, detail::flag(r.record.failed)};
        for (auto& c : spectrum_cells(r.spectrum)) cells.push_back(std::move(c));
        rows.add(std::move(cells));
    };
    for (const auto& latent : p.at("latents").get<std::vector<std::string>>())
        for (auto n : n_list)
            for (int t = 0; t < trials; ++t) add("B", latent, KZ0, I0, n, t);
    const auto n_cd = p.at("panel_cd_N").get<Eigen::Index>();
    for (double I : p.at("I_list").get<std::vector<double>>())
        for (int KZ : p.at("KZ_list").get<std::vector<int>>())
            for (int t = 0; t < trials; ++t) add("C", "gaussian", KZ, I, n_cd, t);
    for (auto n : n_list)
        for (int KZ : p.at("KZ_list").get<std::vector<int>>())
            for (int t = 0; t < trials; ++t) add("D", "gaussian", KZ, I0, n, t);
    ctx.table("fig5_deff", rows);
}

// ---------------------------------------------------------------------------
// Ising
// ---------------------------------------------------------------------------

/// Writes the scaling tables for a finished Ising sweep held in `rows`.
inline IsingAnalysis write_ising_analysis(const std::vector<IsingObservation>& obs, int n_bootstrap, std::uint64_t seed,
                                          double threshold_bits, const fs::path& dir, const std::string& recipe,
                                          const std::string& hash, std::vector<fs::path>* files = nullptr) {
    const IsingAnalysis a = ising_scaling_analysis(obs, n_bootstrap, seed, threshold_bits);
    CsvTable peaks({"L[sites]", "trials[count]", "I_max[bits]", "I_max_boot_mean[bits]", "I_max_boot_std[bits]", "T_max[J/k_B]",
                    "T_max_boot_mean[J/k_B]", "T_max_boot_std[J/k_B]"});
    for (const auto& s : a.fit.sizes)
        peaks.add({std::int64_t{s.L}, std::int64_t{s.trials}, s.i_max, s.i_max_mean, s.i_max_std, s.t_max, s.t_max_mean,
                   s.t_max_std});
    CsvTable fit({"a[bits per log2 L]", "a_std[bits per log2 L]", "b[bits]", "b_std[bits]", "c[J/k_B sites]",
                  "c_std[J/k_B sites]", "bootstrap[count]", "Tc[J/k_B]", "collapse_residual[dimensionless]"});
    fit.add({a.fit.a, a.fit.a_std, a.fit.b, a.fit.b_std, a.fit.c, a.fit.c_std, std::int64_t{a.fit.bootstrap}, a.fit.tc,
             a.collapse_residual});
    CsvTable collapse({"L[sites]", "T[J/k_B]", "x[dimensionless]", "mi[bits]", "d_eff_sv[dimensionless]", "suppressed[bool]"});
    for (const auto& r : a.collapse)
        collapse.add({std::int64_t{r.L}, r.T, r.x, r.mi_bits, r.d_eff, std::int64_t{r.suppressed}});
    for (const auto& [name, t] : {std::pair<std::string, const CsvTable*>{"ising_peaks", &peaks}, {"ising_fit", &fit},
                                  {"ising_collapse", &collapse}}) {
        t->write(dir / (name + ".csv"), recipe, hash);
        if (files) files->push_back(dir / (name + ".csv"));
    }
    return a;
}

inline std::vector<IsingObservation> ising_observations(const CsvTable& t) {
    const auto L = t.numbers("L[sites]");
    const auto T = t.numbers("T[J/k_B]");
    const auto trial = t.numbers("trial[index]");
    const auto mi = t.numbers("mi[bits]");
    const auto d = t.numbers("d_eff_sv[dimensionless]");
    std::vector<IsingObservation> out;
    for (std::size_t i = 0; i < L.size(); ++i)
        out.push_back({static_cast<int>(L[i]), T[i], static_cast<int>(trial[i]), mi[i], d[i]});
    return out;
}

/// Re-runs the scaling analysis on a finished fig6a_ising output directory.
inline IsingAnalysis analyze_ising_dir(const fs::path& dir) {
    const fs::path csv = dir / "fig6a_ising.csv";
    if (!fs::exists(csv)) throw InvalidInput("analyze ising: " + csv.string() + " not found");
    const ExperimentConfig cfg = ExperimentConfig::from_json(read_json(dir / "config.json"));
    const Json& p = cfg.params;
    return write_ising_analysis(ising_observations(CsvTable::read(csv)), p.at("bootstrap").get<int>(),
                                stream_seed(cfg.seed, "bootstrap"), p.at("dimension").at("threshold_bits").get<double>(), dir,
                                cfg.recipe, cfg.hash());
}

/// Dataset of split views for one (L, T) grid point plus its mean |m| and energy per site.
struct IsingPointData {
    DatasetPair data;
    double abs_magnetization = 0.0;
    double energy_per_site = 0.0;
};

inline IsingPointData ising_point_data(int L, double T, int n_configs, const IsingSchedule& sched, std::uint64_t seed) {
    Rng rng(seed);
    const auto configs = ising_sample(L, T, n_configs, rng, sched);
    IsingPointData d;
    d.data = ising_dataset(configs);
    for (const auto& c : configs) {
        d.abs_magnetization += std::abs(ising_magnetization(c));
        d.energy_per_site += ising_energy(c) / (L * L);
    }
    d.abs_magnetization /= static_cast<double>(configs.size());
    d.energy_per_site /= static_cast<double>(configs.size());
    return d;
}

/// MI(T) and d_eff(T) between the two spatial halves for each L, followed by
/// the finite-size scaling analysis.
inline void recipe_fig6a_ising(RecipeContext& ctx) {
    const Json& p = ctx.params();
    const int trials = p.at("trials").get<int>();
    const int kz = p.at("kz").get<int>();
    const TrainConfig cfg = finite_config_from(p.at("finite"));
    const SpectrumSettings ss = SpectrumSettings::from(p.at("dimension"));
    IsingSchedule sched;
    sched.sweeps_between = p.at("sweeps_between").get<int>();
    sched.burn_in = p.at("burn_in").get<int>();
    sched.replicas = p.at("replicas").get<int>();

    std::vector<std::string> cols{"L[sites]", "T[J/k_B]", "trial[index]", "mi[bits]", "failed[bool]", "t_star[epoch]"};
    for (const auto& c : spectrum_columns()) cols.push_back(c);
    cols.emplace_back("abs_magnetization[per site]");
    cols.emplace_back("energy[J per site]");
    CsvTable rows(cols);
    std::vector<IsingObservation> obs;
    for (int L : p.at("L_list").get<std::vector<int>>())
        for (double T : p.at("T_list").get<std::vector<double>>()) {
            const std::string key = "L" + detail::pad(L, 3) + "_T" + detail::tag_number(T);
            detail::Stopwatch sw;
            const IsingPointData pd = ising_point_data(L, T, p.at("n_configs").get<int>(), sched, stream_seed(ctx.seed(), "mcmc/" + key));
            ctx.log("sampled " + key + " |m|=" + format_number(pd.abs_magnetization));
            const auto arch = critic_arch_from(p.at("critic"), pd.data.x.cols(), pd.data.y.cols(), kz);
            for (int t = 0; t < trials; ++t) {
                Rng rng(stream_seed(ctx.seed(), "train/" + key + "/t" + std::to_string(t)));
                detail::Stopwatch rw;
                const RunOutcome r = finite_run(pd.data, CriticFamily::Hybrid, arch, cfg, rng, ss);
                const std::string id = "fig6a_" + key + "_t" + std::to_string(t);
                ctx.run_record(id, run_json(id, {{"L", L}, {"T", T}, {"kz", kz}, {"trial", t}}, r));
                ctx.log(id + " " + detail::describe(r, rw.seconds()));
                std::vector<CsvCell> cells{std::int64_t{L}, T, std::int64_t{t}, r.record.reported_bits,
                                           detail::flag(r.record.failed), std::int64_t{r.record.t_star}};
                for (auto& c : spectrum_cells(r.spectrum)) cells.push_back(std::move(c));
                cells.emplace_back(pd.abs_magnetization);
                cells.emplace_back(pd.energy_per_site);
                rows.add(std::move(cells));
                obs.push_back({L, T, t, r.record.reported_bits, r.spectrum ? r.spectrum->d_eff_sv : nan_value()});
            }
        }
    ctx.table("fig6a_ising", rows);
    std::vector<fs::path> files;
    const IsingAnalysis a = write_ising_analysis(obs, p.at("bootstrap").get<int>(), stream_seed(ctx.seed(), "bootstrap"),
                                                 ss.threshold_bits, ctx.dir(), ctx.config().recipe, ctx.hash(), &files);
    for (const auto& f : files) ctx.file(f);
    Json peaks = Json::array();
    for (const auto& s : a.fit.sizes) peaks.push_back({{"L", s.L}, {"I_max", s.i_max}, {"T_max", s.t_max}});
    ctx.summary()["peaks"] = peaks;
    ctx.summary()["a"] = a.fit.a;
    ctx.summary()["c"] = a.fit.c;
}

// ---------------------------------------------------------------------------
// Pendulum
// ---------------------------------------------------------------------------

inline PendulumKind pendulum_from_name(const std::string& name) {
    if (name == "single") return SinglePendulum{};
    if (name == "double") return DoublePendulum{};
    throw UsageError("unknown pendulum kind '" + name + "' (expected single or double)");
}

/// Delay-embedded video dataset for one (kind, trajectory count, trial).
inline DatasetPair pendulum_dataset(const PendulumKind& kind, const PendulumVideoConfig& vc, std::uint64_t seed,
                                    std::vector<std::vector<Frame>>* keep = nullptr) {
    Rng rng(seed);
    auto videos = pendulum_videos(kind, vc, rng);
    DatasetPair d = delay_embed(videos);
    if (keep) *keep = std::move(videos);
    return d;
}

/// d_eff of past/future frame pairs for single and double pendulums.
inline void recipe_fig6b_pendulum(RecipeContext& ctx) {
    const Json& p = ctx.params();
    const int trials = p.at("trials").get<int>();
    const int kz = p.at("kz").get<int>();
    const bool siamese = p.at("siamese").get<bool>();
    const TrainConfig cfg = finite_config_from(p.at("finite"));
    const SpectrumSettings ss = SpectrumSettings::from(p.at("dimension"));
    PendulumVideoConfig vc;
    vc.frames = p.at("frames").get<int>();
    vc.P = p.at("P").get<int>();
    vc.frame_dt = p.at("frame_dt").get<double>();
    vc.substeps = p.at("substeps").get<int>();
    const int export_frames = p.at("export_frames").get<int>();

    std::vector<std::string> cols{"kind", "trajectories[count]", "samples[count]", "trial[index]", "t_star[epoch]",
                                  "mi[bits]", "failed[bool]"};
    for (const auto& c : spectrum_columns()) cols.push_back(c);
    CsvTable rows(cols);
    for (const auto& name : p.at("kinds").get<std::vector<std::string>>()) {
        const PendulumKind kind = pendulum_from_name(name);
        for (int n_traj : p.at("trajectories_list").get<std::vector<int>>())
            for (int t = 0; t < trials; ++t) {
                vc.trajectories = n_traj;
                const std::string key = name + "_traj" + std::to_string(n_traj) + "_t" + std::to_string(t);
                std::vector<std::vector<Frame>> videos;
                const DatasetPair d = pendulum_dataset(kind, vc, stream_seed(ctx.seed(), "video/" + key), &videos);
                if (t == 0 && export_frames > 0)
                    for (int f = 0; f < std::min<int>(export_frames, vc.frames); ++f) {
                        const fs::path img = ctx.dir() / "frames" / (name + "_traj" + std::to_string(n_traj) + "_f" + detail::pad(f) + ".pgm");
                        fs::create_directories(img.parent_path());
                        write_pgm(img.string(), videos.front()[static_cast<std::size_t>(f)]);
                        ctx.file(img);
                    }
                Rng rng(stream_seed(ctx.seed(), "train/" + key));
                detail::Stopwatch sw;
                const auto arch = critic_arch_from(p.at("critic"), d.x.cols(), d.y.cols(), kz, siamese);
                const RunOutcome r = finite_run(d, CriticFamily::Hybrid, arch, cfg, rng, ss);
                const std::string id = "fig6b_" + key;
                ctx.run_record(id, run_json(id, {{"kind", name}, {"trajectories", n_traj}, {"kz", kz}, {"trial", t}}, r));
                ctx.log(id + " " + detail::describe(r, sw.seconds()));
                std::vector<CsvCell> cells{name, std::int64_t{n_traj}, std::int64_t{d.size()}, std::int64_t{t},
                                           std::int64_t{r.record.t_star}, r.record.reported_bits, detail::flag(r.record.failed)};
                for (auto& c : spectrum_cells(r.spectrum)) cells.push_back(std::move(c));
                rows.add(std::move(cells));
            }
    }
    ctx.table("fig6b_pendulum", rows);
}

// ---------------------------------------------------------------------------
// Appendix recipes
// ---------------------------------------------------------------------------

/// Best separable critic with a k_z = 2 circle embedding vs the true Gaussian MI.
inline void recipe_appA_circle(RecipeContext& ctx) {
    const Json& p = ctx.params();
    CircleGrids g;
    g.rho = lin_grid(0.0, p.at("rho_max").get<double>(), p.at("rho_points").get<int>());
    const Json& kp = p.at("kappa");
    const Json& lp = p.at("lambda");
    g.kappa = log_grid(kp.at("lo").get<double>(), kp.at("hi").get<double>(), kp.at("n").get<int>());
    g.lambda = log_grid(lp.at("lo").get<double>(), lp.at("hi").get<double>(), lp.at("n").get<int>());
    g.quad_n = p.at("quad_n").get<int>();
    const CircleBound b = circle_bound(g);
    const Vector gap = b.gap_bits();
    CsvTable rows({"rho[correlation]", "true_mi[bits]", "bound_mi[bits]", "gap[bits]", "kappa_star[dimensionless]",
                   "lambda_star[dimensionless]"});
    Eigen::Index arg = 0;
    for (Eigen::Index i = 0; i < b.rho.size(); ++i) {
        rows.add({b.rho(i), b.true_bits(i), b.bound_bits(i), gap(i), b.kappa_star(i), b.lambda_star(i)});
        if (gap(i) > gap(arg)) arg = i;
    }
    ctx.table("appA_circle", rows);
    ctx.summary()["max_gap_bits"] = gap(arg);
    ctx.summary()["argmax_rho"] = b.rho(arg);
    ctx.log("max gap " + format_number(gap(arg)) + " bits at rho=" + format_number(b.rho(arg)));
}

/// Hybrid-critic d_eff vs Levina-Bickel and Two-NN on noisy teacher data.
inline void recipe_appC_idcompare(RecipeContext& ctx) {
    const Json& p = ctx.params();
    const Json& data = p.at("data");
    const auto k = data.at("K").get<Eigen::Index>();
    const auto teacher = teacher_kind_from_string(data.at("teacher").get<std::string>());
    const int trials = p.at("trials").get<int>();
    const int kz = p.at("kz").get<int>();
    const auto n = p.at("N").get<Eigen::Index>();
    const TrainConfig cfg = finite_config_from(p.at("finite"));
    const SpectrumSettings ss = SpectrumSettings::from(p.at("dimension"));
    const int k_min = p.at("lb_k_min").get<int>();
    const int k_max = p.at("lb_k_max").get<int>();
    const double discard = p.at("twonn_discard").get<double>();
    const LatentSpec spec = latent_from_name("gaussian", data);
    const TeacherPair tp = make_teachers(spec, teacher, stream_seed(ctx.seed(), "teacher"), k);

    CsvTable rows({"eta[ratio]", "trial[index]", "method", "d[dimensionless]", "d_x[dimensionless]", "d_y[dimensionless]",
                   "mi[bits]"});
    for (double eta : p.at("eta_list").get<std::vector<double>>())
        for (int t = 0; t < trials; ++t) {
            const std::string key = "eta" + detail::tag_number(eta) + "_t" + std::to_string(t);
            Rng data_rng(stream_seed(ctx.seed(), "data/" + key));
            const DatasetPair d = make_pair(spec, tp, eta, data_rng, Regime::Finite, n);
            Rng rng(stream_seed(ctx.seed(), "train/" + key));
            detail::Stopwatch sw;
            const RunOutcome r = finite_run(d, CriticFamily::Hybrid, critic_arch_from(p.at("critic"), k, k, kz), cfg, rng, ss);
            const std::string id = "appC_" + key;
            ctx.run_record(id, run_json(id, {{"eta", eta}, {"trial", t}, {"kz", kz}, {"N", n}}, r));
            ctx.log(id + " " + detail::describe(r, sw.seconds()));
            const double deff = r.spectrum ? r.spectrum->d_eff_sv : nan_value();
            rows.add({eta, std::int64_t{t}, std::string("hybrid_deff"), deff, deff, deff, r.record.reported_bits});
            const IdEstimate lx = levina_bickel(d.x, k_min, k_max);
            const IdEstimate ly = levina_bickel(d.y, k_min, k_max);
            rows.add({eta, std::int64_t{t}, std::string("levina_bickel"), 0.5 * (lx.dimension + ly.dimension), lx.dimension,
                      ly.dimension, nan_value()});
            const IdEstimate tx = two_nn(d.x, discard);
            const IdEstimate ty = two_nn(d.y, discard);
            rows.add({eta, std::int64_t{t}, std::string("two_nn"), 0.5 * (tx.dimension + ty.dimension), tx.dimension,
                      ty.dimension, nan_value()});
        }
    ctx.table("appC_idcompare", rows);
}

/// One-shot d_eff of hybrid and separable critics vs the number of mixture peaks.
inline void recipe_appD_mixture_peaks(RecipeContext& ctx) {
    const Json& p = ctx.params();
    const Json& data = p.at("data");
    const auto k = data.at("K").get<Eigen::Index>();
    const auto teacher = teacher_kind_from_string(data.at("teacher").get<std::string>());
    const int trials = p.at("trials").get<int>();
    const int kz = p.at("kz").get<int>();
    const TrainConfig train = resampling_config_from(p.at("train"));
    const SpectrumSettings ss = SpectrumSettings::from(p.at("dimension"));
    const Json& mix = data.at("mixture");

    std::vector<std::string> cols{"n_peaks[count]", "family", "kz[count]", "trial[index]", "mi[bits]", "failed[bool]"};
    for (const auto& c : spectrum_columns()) cols.push_back(c);
    CsvTable rows(cols);
    for (int np : p.at("n_peaks_list").get<std::vector<int>>()) {
        const LatentSpec spec = GaussianMixture{np, mix.at("mu").get<double>(), mix.at("i_peak_bits").get<double>()};
        const std::string dkey = "peaks" + detail::pad(np);
        const TeacherPair tp = make_teachers(spec, teacher, stream_seed(ctx.seed(), "teacher/" + dkey), k);
        const PairSampler sampler(spec, tp, 0.0, stream_seed(ctx.seed(), "calibration/" + dkey));
        for (const auto& fam : p.at("families").get<std::vector<std::string>>())
            for (int t = 0; t < trials; ++t) {
                const std::string key = dkey + "_" + fam + "_t" + std::to_string(t);
                Rng rng(stream_seed(ctx.seed(), "train/" + key));
                detail::Stopwatch sw;
                const RunOutcome r = resampling_run(sampler, critic_family_from_string(fam),
                                                    critic_arch_from(p.at("critic"), k, k, kz), train, rng, ss);
                const std::string id = "appD_" + key;
                ctx.run_record(id, run_json(id, {{"n_peaks", np}, {"family", fam}, {"kz", kz}, {"trial", t}}, r, 100));
                ctx.log(id + " " + detail::describe(r, sw.seconds()));
                std::vector<CsvCell> cells{std::int64_t{np}, fam, std::int64_t{kz}, std::int64_t{t}, r.record.reported_bits,
                                           detail::flag(r.record.failed)};
                for (auto& c : spectrum_cells(r.spectrum)) cells.push_back(std::move(c));
                rows.add(std::move(cells));
            }
    }
    ctx.table("appD_mixture_peaks", rows);
}

/// Finite-sample MI of hybrid vs separable critics on the representative mixture.
inline void recipe_appD_sample_efficiency(RecipeContext& ctx) {
    const Json& p = ctx.params();
    const Json& data = p.at("data");
    const auto k = data.at("K").get<Eigen::Index>();
    const auto teacher = teacher_kind_from_string(data.at("teacher").get<std::string>());
    const int trials = p.at("trials").get<int>();
    const int kz = p.at("kz").get<int>();
    const TrainConfig cfg = finite_config_from(p.at("finite"));
    const SpectrumSettings ss = SpectrumSettings::from(p.at("dimension"));
    const LatentSpec spec = latent_from_name("mixture", data);
    const TeacherPair tp = make_teachers(spec, teacher, stream_seed(ctx.seed(), "teacher"), k);

    std::vector<std::string> cols{"N[count]", "family", "kz[count]", "trial[index]", "t_star[epoch]", "mi[bits]", "failed[bool]"};
    for (const auto& c : spectrum_columns()) cols.push_back(c);
    CsvTable rows(cols);
    for (auto n : p.at("N_list").get<std::vector<Eigen::Index>>())
        for (int t = 0; t < trials; ++t) {
            const std::string dkey = "N" + std::to_string(n) + "_t" + std::to_string(t);
            Rng data_rng(stream_seed(ctx.seed(), "data/" + dkey));
            const DatasetPair d = make_pair(spec, tp, 0.0, data_rng, Regime::Finite, n);
            for (const auto& fam : p.at("families").get<std::vector<std::string>>()) {
                const std::string key = dkey + "_" + fam;
                Rng rng(stream_seed(ctx.seed(), "train/" + key));
                detail::Stopwatch sw;
                const RunOutcome r = finite_run(d, critic_family_from_string(fam), critic_arch_from(p.at("critic"), k, k, kz),
                                                cfg, rng, ss);
                const std::string id = "appDse_" + key;
                ctx.run_record(id, run_json(id, {{"N", n}, {"family", fam}, {"kz", kz}, {"trial", t}}, r));
                ctx.log(id + " " + detail::describe(r, sw.seconds()));
                std::vector<CsvCell> cells{std::int64_t{n}, fam, std::int64_t{kz}, std::int64_t{t},
                                           std::int64_t{r.record.t_star}, r.record.reported_bits, detail::flag(r.record.failed)};
                for (auto& c : spectrum_cells(r.spectrum)) cells.push_back(std::move(c));
                rows.add(std::move(cells));
            }
        }
    ctx.table("appD_sample_efficiency", rows);
}

/// Runs a recipe into `out`. Unknown names raise UsageError listing the recipes.
inline RecipeResult run_recipe(const ExperimentConfig& cfg, const fs::path& out, std::ostream* log = nullptr) {
    static const std::map<std::string, std::function<void(RecipeContext&)>> table{
        {"fig2_sweep", recipe_fig2_sweep},
        {"fig3_noise", recipe_fig3_noise},
        {"fig4_oneshot", recipe_fig4_oneshot},
        {"fig5_finite", recipe_fig5_finite},
        {"fig6a_ising", recipe_fig6a_ising},
        {"fig6b_pendulum", recipe_fig6b_pendulum},
        {"appA_circle", recipe_appA_circle},
        {"appC_idcompare", recipe_appC_idcompare},
        {"appD_mixture_peaks", recipe_appD_mixture_peaks},
        {"appD_sample_efficiency", recipe_appD_sample_efficiency},
    };
    const auto it = table.find(cfg.recipe);
    if (it == table.end()) throw UsageError("unknown recipe '" + cfg.recipe + "'; known recipes: " + recipe_list());
    RecipeContext ctx(cfg, out, log);
    try {
        it->second(ctx);
    } catch (const Json::exception& e) {
        throw UsageError("config for " + cfg.recipe + ": " + e.what());
    }
    return ctx.finish();
}

}  // namespace dimest
