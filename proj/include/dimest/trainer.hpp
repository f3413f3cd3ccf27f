#pragma once

// Training loops for the two data regimes, stopping rules and k_z sweeps.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <variant>
#include <vector>

#include "dimest/autonet.hpp"
#include "dimest/critics.hpp"
#include "dimest/datagen.hpp"
#include "dimest/error.hpp"
#include "dimest/ndmath.hpp"

namespace dimest {

struct Resampling {
    int iters = 20000;
};

struct Finite {
    int epochs = 100;
    int test_size = 128;         ///< used when test_fraction <= 0
    double test_fraction = 0.0;  ///< fraction of rows held out, overrides test_size when > 0
};

struct MaxTest {};

struct FractionOfMaxTest {
    double fraction = 0.9;
};

using StopRule = std::variant<MaxTest, FractionOfMaxTest>;

struct TrainConfig {
    std::variant<Resampling, Finite> regime = Resampling{};
    int batch = 128;
    AdamConfig adam{};
    double report_window = 0.1;
    int median_filter_epochs = 20;
    StopRule stop_rule = MaxTest{};
    double fail_threshold_bits = 0.05;
    bool standardize_inputs = true;  ///< fit the critic's fixed input scalers before training
    int calibration_rows = 4096;     ///< resampling regime: rows drawn to fit the scalers

    void validate() const {
        detail::require(batch >= 2, "TrainConfig: batch must be >= 2");
        detail::require(report_window > 0.0 && report_window <= 1.0, "TrainConfig: report_window must be in (0, 1]");
        detail::require(calibration_rows >= 2, "TrainConfig: calibration_rows must be >= 2");
        detail::require(median_filter_epochs >= 1, "TrainConfig: median filter window must be >= 1");
        if (const auto* f = std::get_if<FractionOfMaxTest>(&stop_rule))
            detail::require(f->fraction > 0.0 && f->fraction <= 1.0, "TrainConfig: fraction must be in (0, 1]");
        if (const auto* r = std::get_if<Resampling>(&regime)) detail::require(r->iters >= 1, "TrainConfig: iters must be >= 1");
        if (const auto* f = std::get_if<Finite>(&regime)) detail::require(f->epochs >= 1, "TrainConfig: epochs must be >= 1");
    }
};

struct TrainRecord {
    std::vector<double> train_bits;     ///< per step (resampling) or per epoch (finite)
    std::vector<double> test_bits;      ///< per epoch, finite regime only
    std::vector<double> test_filtered;  ///< median-filtered test curve
    int t_star = -1;                    ///< selected epoch index (finite) or last step (resampling)
    double reported_bits = 0.0;
    bool failed = false;                ///< reported MI below the learning threshold
    CriticModel model;                  ///< parameters at t_star
    std::vector<Eigen::Index> train_rows;  ///< finite regime: rows used for training
};

// ---------------------------------------------------------------------------
// Curve utilities
// ---------------------------------------------------------------------------

/// Centred running median. Near the ends the window shrinks on both sides,
/// so an edge sample is never summarised by the epochs on one side of it.
inline std::vector<double> median_filter(const std::vector<double>& v, int window) {
    detail::require(window >= 1, "median_filter: window must be >= 1");
    const int n = static_cast<int>(v.size());
    const int lo_half = (window - 1) / 2;
    const int hi_half = window / 2;
    std::vector<double> out(v.size());
    for (int i = 0; i < n; ++i) {
        const int reach = std::min(i, n - 1 - i);
        const int a = i - std::min(lo_half, reach);
        const int b = i + std::min(hi_half, reach);
        out[static_cast<std::size_t>(i)] = median(std::vector<double>(v.begin() + a, v.begin() + b + 1));
    }
    return out;
}

/// Index of the first maximum.
inline int argmax_first(const std::vector<double>& v) {
    detail::require(!v.empty(), "argmax: empty curve");
    return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

/// Stopping epoch. MaxTest: argmax of the median-filtered curve.
/// FractionOfMaxTest: earliest epoch whose raw test MI reaches fraction * max.
inline int select_stop_epoch(const std::vector<double>& test, const StopRule& rule, int median_window) {
    detail::require(!test.empty(), "select_stop_epoch: empty curve");
    if (std::holds_alternative<MaxTest>(rule)) return argmax_first(median_filter(test, median_window));
    const double frac = std::get<FractionOfMaxTest>(rule).fraction;
    const double mx = *std::max_element(test.begin(), test.end());
    const double target = frac * mx;
    for (std::size_t i = 0; i < test.size(); ++i)
        if (test[i] >= target) return static_cast<int>(i);
    return argmax_first(test);
}

// ---------------------------------------------------------------------------
// Steps
// ---------------------------------------------------------------------------

namespace detail {

/// One Adam step on a batch; returns the batch estimate in nats.
inline double train_step(CriticModel& m, AdamState& opt, const Matrix& xb, const Matrix& yb, std::size_t step) {
    ScoreMatrix s = score_matrix(m, xb, yb);
    if (!all_finite(s.t)) throw TrainingDiverged(step, "non-finite critic scores");
    const auto loss = symm_infonce(s.t);
    if (!std::isfinite(loss.nats)) throw TrainingDiverged(step, "non-finite objective");
    CriticGrads g = score_backward(m, s, loss.grad);
    auto pb = m.blocks();
    auto gb = g.blocks(m);
    for (const auto& b : gb)
        for (double v : b)
            if (!std::isfinite(v)) throw TrainingDiverged(step, "non-finite gradient");
    opt.update(pb, std::vector<std::span<double>>(gb.begin(), gb.end()));
    return loss.nats;
}

inline Matrix gather_rows(const Matrix& m, const std::vector<Eigen::Index>& idx, std::size_t from, std::size_t count) {
    Matrix out(static_cast<Eigen::Index>(count), m.cols());
    for (std::size_t r = 0; r < count; ++r) out.row(static_cast<Eigen::Index>(r)) = m.row(idx[from + r]);
    return out;
}

}  // namespace detail

/// Symmetric InfoNCE (bits) of a fixed sample set, averaged over
/// near-equal chunks of about `batch` rows (at least 2 rows per chunk).
inline double evaluate_mi_bits(const CriticModel& m, const Matrix& x, const Matrix& y, int batch) {
    const Eigen::Index n = x.rows();
    detail::require(n >= 2 && y.rows() == n, "evaluate_mi: need at least 2 aligned rows");
    const Eigen::Index chunks = std::max<Eigen::Index>(1, std::min<Eigen::Index>(
        n / 2, static_cast<Eigen::Index>(std::lround(static_cast<double>(n) / batch))));
    double acc = 0.0;
    Eigen::Index start = 0;
    for (Eigen::Index c = 0; c < chunks; ++c) {
        const Eigen::Index len = n / chunks + (c < n % chunks ? 1 : 0);
        const ScoreMatrix s = score_matrix(m, x.middleRows(start, len), y.middleRows(start, len), false);
        acc += symm_infonce(s.t, false).bits();
        start += len;
    }
    return acc / static_cast<double>(chunks);
}

// ---------------------------------------------------------------------------
// Regimes
// ---------------------------------------------------------------------------

/// Fresh batch every step; reported MI is the mean batch estimate over the
/// final report_window of steps.
inline TrainRecord train_resampling(CriticModel model, const PairSampler& sampler, const TrainConfig& cfg, Rng& rng) {
    cfg.validate();
    const auto* reg = std::get_if<Resampling>(&cfg.regime);
    if (reg == nullptr) throw InvalidInput("train_resampling: config is not in the resampling regime");
    if (cfg.standardize_inputs) {
        Rng cal(derive_seed(rng.next_u64(), 0));
        auto [xc, yc] = sampler.draw(cal, cfg.calibration_rows);
        fit_input_scaling(model, xc, yc);
    }
    AdamState opt(cfg.adam);
    TrainRecord rec;
    rec.train_bits.reserve(static_cast<std::size_t>(reg->iters));
    for (int it = 0; it < reg->iters; ++it) {
        auto [xb, yb] = sampler.draw(rng, cfg.batch);
        const double nats = detail::train_step(model, opt, xb, yb, static_cast<std::size_t>(it));
        rec.train_bits.push_back(nats / std::numbers::ln2);
    }
    const auto window = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(cfg.report_window * reg->iters)));
    double acc = 0.0;
    for (std::size_t i = rec.train_bits.size() - window; i < rec.train_bits.size(); ++i) acc += rec.train_bits[i];
    rec.reported_bits = acc / static_cast<double>(window);
    rec.t_star = reg->iters - 1;
    rec.failed = rec.reported_bits < cfg.fail_threshold_bits;
    rec.model = std::move(model);
    return rec;
}

/// Fixed dataset, shuffled mini-batches, held-out test set. Reports the
/// full-train-set MI at the epoch chosen by the stop rule and returns the
/// parameters of that epoch.
inline TrainRecord train_finite(CriticModel model, const DatasetPair& data, const TrainConfig& cfg, Rng& rng) {
    cfg.validate();
    const auto* reg = std::get_if<Finite>(&cfg.regime);
    if (reg == nullptr) throw InvalidInput("train_finite: config is not in the finite regime");
    const Eigen::Index n = data.x.rows();
    detail::require(data.y.rows() == n, "train_finite: row counts differ");
    const Eigen::Index n_test = reg->test_fraction > 0.0
                                    ? static_cast<Eigen::Index>(std::lround(reg->test_fraction * static_cast<double>(n)))
                                    : reg->test_size;
    if (n_test < 2) throw InvalidInput("train_finite: test set must have at least 2 rows");
    detail::require(n - n_test >= 2 * static_cast<Eigen::Index>(cfg.batch), "train_finite: need at least two training batches");

    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    rng.shuffle(perm);
    std::vector<Eigen::Index> test_idx(perm.begin(), perm.begin() + n_test);
    std::vector<Eigen::Index> train_idx(perm.begin() + n_test, perm.end());
    std::sort(test_idx.begin(), test_idx.end());
    std::sort(train_idx.begin(), train_idx.end());
    const Matrix xt = detail::gather_rows(data.x, test_idx, 0, test_idx.size());
    const Matrix yt = detail::gather_rows(data.y, test_idx, 0, test_idx.size());
    const Matrix xtr = detail::gather_rows(data.x, train_idx, 0, train_idx.size());
    const Matrix ytr = detail::gather_rows(data.y, train_idx, 0, train_idx.size());
    if (cfg.standardize_inputs) fit_input_scaling(model, xtr, ytr);

    AdamState opt(cfg.adam);
    TrainRecord rec;
    std::vector<CriticModel> snapshots;
    snapshots.reserve(static_cast<std::size_t>(reg->epochs));
    std::vector<Eigen::Index> order(train_idx.size());
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    const std::size_t per_epoch = order.size() / static_cast<std::size_t>(cfg.batch);
    std::size_t step = 0;
    for (int e = 0; e < reg->epochs; ++e) {
        rng.shuffle(order);
        for (std::size_t b = 0; b < per_epoch; ++b, ++step) {
            const auto from = b * static_cast<std::size_t>(cfg.batch);
            const Matrix xb = detail::gather_rows(xtr, order, from, static_cast<std::size_t>(cfg.batch));
            const Matrix yb = detail::gather_rows(ytr, order, from, static_cast<std::size_t>(cfg.batch));
            detail::train_step(model, opt, xb, yb, step);
        }
        rec.train_bits.push_back(evaluate_mi_bits(model, xtr, ytr, cfg.batch));
        rec.test_bits.push_back(evaluate_mi_bits(model, xt, yt, cfg.batch));
        snapshots.push_back(model);
    }
    rec.test_filtered = median_filter(rec.test_bits, cfg.median_filter_epochs);
    rec.t_star = select_stop_epoch(rec.test_bits, cfg.stop_rule, cfg.median_filter_epochs);
    rec.reported_bits = rec.train_bits[static_cast<std::size_t>(rec.t_star)];
    rec.failed = rec.reported_bits < cfg.fail_threshold_bits;
    rec.model = std::move(snapshots[static_cast<std::size_t>(rec.t_star)]);
    rec.train_rows = std::move(train_idx);
    return rec;
}

// ---------------------------------------------------------------------------
// k_z sweeps
// ---------------------------------------------------------------------------

struct SweepRow {
    int kz = 0;
    int trial = 0;
    double mi_bits = 0.0;
    bool failed = false;
};

struct SweepTable {
    std::vector<SweepRow> rows;

    /// Max over non-failed trials per k_z (NaN when every trial failed).
    [[nodiscard]] std::map<int, double> max_over_trials() const {
        std::map<int, double> out;
        for (const auto& r : rows) {
            auto [it, inserted] = out.try_emplace(r.kz, std::numeric_limits<double>::quiet_NaN());
            if (r.failed) continue;
            if (std::isnan(it->second) || r.mi_bits > it->second) it->second = r.mi_bits;
        }
        return out;
    }
};

/// Runs `run(kz, trial, rng)` for every (k_z, trial) cell with the trial rng seeded
/// by derive_seed(derive_seed(master, kz), trial). Rows are ordered by (k_z, trial).
template <class Run>
SweepTable sweep_kz(const std::vector<int>& kz_list, int trials, std::uint64_t master, Run&& run) {
    detail::require(!kz_list.empty() && trials >= 1, "sweep_kz: empty sweep");
    SweepTable t;
    std::vector<int> kzs = kz_list;
    std::sort(kzs.begin(), kzs.end());
    for (int kz : kzs)
        for (int tr = 0; tr < trials; ++tr) {
            Rng rng(derive_seed(derive_seed(master, static_cast<std::uint64_t>(kz)), static_cast<std::uint64_t>(tr)));
            const TrainRecord rec = run(kz, tr, rng);
            t.rows.push_back({kz, tr, rec.reported_bits, rec.failed});
        }
    return t;
}

/// Smallest swept k_z whose max-over-trials MI is within delta of the maximum
/// over all larger swept k_z. Empty when no k_z has a usable trial.
inline std::optional<int> saturation_kz(const std::map<int, double>& max_by_kz, double delta = 0.1) {
    std::vector<std::pair<int, double>> v;
    for (const auto& [kz, mi] : max_by_kz)
        if (!std::isnan(mi)) v.emplace_back(kz, mi);
    if (v.empty()) return std::nullopt;
    for (std::size_t i = 0; i < v.size(); ++i) {
        double best_above = -std::numeric_limits<double>::infinity();
        for (std::size_t j = i + 1; j < v.size(); ++j) best_above = std::max(best_above, v[j].second);
        if (v[i].second >= best_above - delta) return v[i].first;
    }
    return v.back().first;
}

}  // namespace dimest
