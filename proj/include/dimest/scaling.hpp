#pragma once

// Finite-size scaling of Ising MI sweeps: peak height and location per
// lattice size, the two scaling fits with bootstrap errors over trials, and
// the d_eff collapse table on the scaling variable L (T / T_c - 1).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <vector>

#include "dimest/error.hpp"
#include "dimest/ndmath.hpp"
#include "dimest/physics.hpp"

namespace dimest {

struct IsingObservation {
    int L = 0;
    double T = 0.0;
    int trial = 0;
    double mi_bits = 0.0;
    double d_eff_sv = std::numeric_limits<double>::quiet_NaN();
};

struct SizePeak {
    int L = 0;
    double i_max = 0.0;  ///< from the trial-mean MI curve
    double t_max = 0.0;
    double i_max_mean = 0.0;  ///< bootstrap over trials
    double i_max_std = 0.0;
    double t_max_mean = 0.0;
    double t_max_std = 0.0;
    int trials = 0;
};

struct ScalingFit {
    std::vector<SizePeak> sizes;  ///< ascending L
    double a = 0.0;               ///< I_max = a log2 L + b
    double b = 0.0;
    double a_std = 0.0;
    double b_std = 0.0;
    double c = 0.0;               ///< T_max - T_c = c / L
    double c_std = 0.0;
    int bootstrap = 0;
    double tc = kIsingTc;
};

struct CollapseRow {
    int L = 0;
    double T = 0.0;
    double x = 0.0;  ///< L (T / T_c - 1)
    double mi_bits = 0.0;
    double d_eff = std::numeric_limits<double>::quiet_NaN();  ///< trial mean; NaN when suppressed
    bool suppressed = false;
};

struct IsingAnalysis {
    ScalingFit fit;
    std::vector<CollapseRow> collapse;
    double collapse_residual = std::numeric_limits<double>::quiet_NaN();
};

/// Vertex of the parabola through the grid maximum and its two neighbours,
/// clamped to that bracket. Falls back to the grid point at an edge or when
/// the three points are not concave.
inline std::pair<double, double> parabolic_peak(const std::vector<double>& x, const std::vector<double>& y) {
    detail::require(x.size() == y.size() && !x.empty(), "parabolic_peak: need matching non-empty grids");
    const auto i = static_cast<std::size_t>(std::max_element(y.begin(), y.end()) - y.begin());
    if (i == 0 || i + 1 == x.size()) return {x[i], y[i]};
    const double x0 = x[i - 1], x1 = x[i], x2 = x[i + 1];
    const double y0 = y[i - 1], y1 = y[i], y2 = y[i + 1];
    // Divided differences.
    const double d01 = (y1 - y0) / (x1 - x0);
    const double d12 = (y2 - y1) / (x2 - x1);
    const double a = (d12 - d01) / (x2 - x0);
    if (!(a < 0.0)) return {x1, y1};
    const double b = d01 - a * (x0 + x1);
    const double xs = std::clamp(-b / (2.0 * a), x0, x2);
    const double ys = y0 + d01 * (xs - x0) + a * (xs - x0) * (xs - x1);
    return {xs, ys};
}

/// Least squares y = slope * t + intercept.
inline std::pair<double, double> fit_line(const std::vector<double>& t, const std::vector<double>& y) {
    detail::require(t.size() == y.size() && t.size() >= 2, "fit_line: need at least two points");
    const double n = static_cast<double>(t.size());
    double st = 0, sy = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        st += t[i];
        sy += y[i];
    }
    const double mt = st / n, my = sy / n;
    double stt = 0, sty = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        stt += (t[i] - mt) * (t[i] - mt);
        sty += (t[i] - mt) * (y[i] - my);
    }
    detail::require(stt > 0.0, "fit_line: abscissae are all equal");
    const double slope = sty / stt;
    return {slope, my - slope * mt};
}

/// Least squares y = c * t.
inline double fit_through_origin(const std::vector<double>& t, const std::vector<double>& y) {
    detail::require(t.size() == y.size() && !t.empty(), "fit_through_origin: need points");
    double tt = 0, ty = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        tt += t[i] * t[i];
        ty += t[i] * y[i];
    }
    detail::require(tt > 0.0, "fit_through_origin: abscissae are all zero");
    return ty / tt;
}

/// RMS mismatch between each size's d_eff(x) and the piecewise-linear curves
/// of the other sizes, over the x-ranges where they overlap. NaN without overlap.
inline double collapse_residual(const std::vector<CollapseRow>& rows) {
    std::map<int, std::vector<std::pair<double, double>>> curves;
    for (const auto& r : rows)
        if (!r.suppressed && std::isfinite(r.d_eff)) curves[r.L].emplace_back(r.x, r.d_eff);
    for (auto& [L, c] : curves) std::sort(c.begin(), c.end());
    double acc = 0.0;
    std::size_t count = 0;
    for (const auto& [L, c] : curves)
        for (const auto& [L2, c2] : curves) {
            if (L2 == L || c2.size() < 2) continue;
            for (const auto& [x, d] : c) {
                if (x < c2.front().first || x > c2.back().first) continue;
                auto hi = std::lower_bound(c2.begin(), c2.end(), std::make_pair(x, -std::numeric_limits<double>::infinity()));
                if (hi == c2.begin()) hi = std::next(hi);
                const auto lo = std::prev(hi);
                const double w = hi->first == lo->first ? 0.0 : (x - lo->first) / (hi->first - lo->first);
                const double interp = lo->second + w * (hi->second - lo->second);
                acc += (d - interp) * (d - interp);
                ++count;
            }
        }
    return count ? std::sqrt(acc / static_cast<double>(count)) : std::numeric_limits<double>::quiet_NaN();
}

namespace detail {

struct SizeGrid {
    std::vector<double> temps;                 // ascending
    std::vector<int> trial_ids;                // ascending
    std::map<int, std::vector<double>> mi;     // trial -> MI per temperature (NaN when missing)
};

inline std::pair<double, double> peak_of_trials(const SizeGrid& g, const std::vector<int>& trials) {
    std::vector<double> xs, ys;
    for (std::size_t k = 0; k < g.temps.size(); ++k) {
        double acc = 0.0;
        int n = 0;
        for (int t : trials) {
            const double v = g.mi.at(t)[k];
            if (std::isfinite(v)) {
                acc += v;
                ++n;
            }
        }
        if (n > 0) {
            xs.push_back(g.temps[k]);
            ys.push_back(acc / n);
        }
    }
    detail::require(!xs.empty(), "ising_scaling_analysis: empty MI curve");
    return parabolic_peak(xs, ys);
}

inline double stddev(const std::vector<double>& v, double* mean_out = nullptr) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    if (mean_out) *mean_out = m;
    if (v.size() < 2) return 0.0;
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace detail

/// Peak MI and its temperature per L (parabolic refinement of the trial-mean
/// curve), I_max = a log2 L + b, T_max - T_c = c / L through the origin, and
/// bootstrap spreads obtained by resampling trials with replacement.
inline IsingAnalysis ising_scaling_analysis(const std::vector<IsingObservation>& obs, int n_bootstrap = 200,
                                            std::uint64_t seed = 1, double threshold_bits = 0.5) {
    detail::require(n_bootstrap >= 1, "ising_scaling_analysis: bootstrap count must be >= 1");
    std::map<int, detail::SizeGrid> grids;
    {
        std::map<int, std::set<double>> temps;
        std::map<int, std::set<int>> trials;
        for (const auto& o : obs) {
            detail::require(o.L >= 2 && o.T > 0.0, "ising_scaling_analysis: invalid observation");
            temps[o.L].insert(o.T);
            trials[o.L].insert(o.trial);
        }
        for (const auto& [L, ts] : temps) {
            auto& g = grids[L];
            g.temps.assign(ts.begin(), ts.end());
            g.trial_ids.assign(trials[L].begin(), trials[L].end());
            for (int t : g.trial_ids) g.mi[t].assign(g.temps.size(), std::numeric_limits<double>::quiet_NaN());
        }
        for (const auto& o : obs) {
            auto& g = grids[o.L];
            const auto k = static_cast<std::size_t>(std::lower_bound(g.temps.begin(), g.temps.end(), o.T) - g.temps.begin());
            g.mi[o.trial][k] = o.mi_bits;
        }
    }
    if (grids.size() < 3) throw InvalidInput("ising_scaling_analysis: need at least 3 system sizes");
    for (const auto& [L, g] : grids) {
        if (g.temps.size() < 3) throw InvalidInput("ising_scaling_analysis: L=" + std::to_string(L) + " has fewer than 3 temperatures");
        if (!(g.temps.front() < kIsingTc && g.temps.back() > kIsingTc))
            throw InvalidInput("ising_scaling_analysis: temperature grid for L=" + std::to_string(L) + " does not span T_c");
    }

    IsingAnalysis out;
    ScalingFit& fit = out.fit;
    fit.bootstrap = n_bootstrap;
    std::vector<double> log_l, inv_l, imax, dtmax;
    for (const auto& [L, g] : grids) {
        SizePeak p;
        p.L = L;
        p.trials = static_cast<int>(g.trial_ids.size());
        std::tie(p.t_max, p.i_max) = detail::peak_of_trials(g, g.trial_ids);
        fit.sizes.push_back(p);
        log_l.push_back(std::log2(static_cast<double>(L)));
        inv_l.push_back(1.0 / L);
        imax.push_back(p.i_max);
        dtmax.push_back(p.t_max - kIsingTc);
    }
    std::tie(fit.a, fit.b) = fit_line(log_l, imax);
    fit.c = fit_through_origin(inv_l, dtmax);

    Rng rng(seed);
    std::vector<std::vector<double>> boot_i(fit.sizes.size()), boot_t(fit.sizes.size());
    std::vector<double> boot_a, boot_b, boot_c;
    for (int b = 0; b < n_bootstrap; ++b) {
        std::vector<double> bi, bt;
        std::size_t s = 0;
        for (const auto& [L, g] : grids) {
            std::vector<int> pick(g.trial_ids.size());
            for (auto& t : pick) t = g.trial_ids[rng.uniform_index(g.trial_ids.size())];
            const auto [tm, im] = detail::peak_of_trials(g, pick);
            boot_i[s].push_back(im);
            boot_t[s].push_back(tm);
            bi.push_back(im);
            bt.push_back(tm - kIsingTc);
            ++s;
        }
        const auto [a, bb] = fit_line(log_l, bi);
        boot_a.push_back(a);
        boot_b.push_back(bb);
        boot_c.push_back(fit_through_origin(inv_l, bt));
    }
    for (std::size_t s = 0; s < fit.sizes.size(); ++s) {
        fit.sizes[s].i_max_std = detail::stddev(boot_i[s], &fit.sizes[s].i_max_mean);
        fit.sizes[s].t_max_std = detail::stddev(boot_t[s], &fit.sizes[s].t_max_mean);
    }
    fit.a_std = detail::stddev(boot_a);
    fit.b_std = detail::stddev(boot_b);
    fit.c_std = detail::stddev(boot_c);

    std::map<std::pair<int, double>, std::vector<const IsingObservation*>> cells;
    for (const auto& o : obs) cells[{o.L, o.T}].push_back(&o);
    for (const auto& [key, list] : cells) {
        CollapseRow r;
        r.L = key.first;
        r.T = key.second;
        r.x = r.L * (r.T / kIsingTc - 1.0);
        double mi = 0.0, d = 0.0;
        int nd = 0;
        for (const auto* o : list) {
            mi += o->mi_bits;
            if (std::isfinite(o->d_eff_sv)) {
                d += o->d_eff_sv;
                ++nd;
            }
        }
        r.mi_bits = mi / static_cast<double>(list.size());
        r.suppressed = r.mi_bits < threshold_bits || nd == 0;
        if (!r.suppressed) r.d_eff = d / nd;
        out.collapse.push_back(r);
    }
    out.collapse_residual = collapse_residual(out.collapse);
    return out;
}

}  // namespace dimest
