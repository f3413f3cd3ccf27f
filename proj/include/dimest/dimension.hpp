#pragma once

// Effective dimension from the cross-covariance spectrum of trained encoders.

#include <cmath>
#include <string>
#include <variant>
#include <vector>

#include "dimest/critics.hpp"
#include "dimest/error.hpp"
#include "dimest/ndmath.hpp"

namespace dimest {

/// Centred (1/(n-1)) cross-covariance of two embeddings.
inline Matrix cross_covariance(const Matrix& zx, const Matrix& zy) {
    if (zx.rows() < 2 || zy.rows() != zx.rows()) throw InvalidInput("cross_covariance: need n >= 2 aligned rows");
    return cross_cov(zx, zy);
}

struct PrSv {};
struct PrEig {};
struct PrEntropy {};
struct PrAlpha {
    double alpha = 0.5;
};

using PrMetric = std::variant<PrSv, PrEig, PrEntropy, PrAlpha>;

/// Participation-ratio family over a nonnegative spectrum:
/// SV (sum s)^2 / sum s^2, Eig (sum s^2)^2 / sum s^4,
/// Entropy exp(-sum p log p) with p = s / sum s, Alpha (sum s^a)^2 / sum s^{2a}.
inline double d_eff(const Vector& spectrum, const PrMetric& metric = PrSv{}) {
    detail::require(all_finite(spectrum), "d_eff: non-finite spectrum");
    if ((spectrum.array() < 0.0).any()) throw InvalidInput("d_eff: negative singular value");
    if (!(spectrum.maxCoeff() > 0.0)) throw DegenerateSpectrum("d_eff: spectrum is identically zero");
    // Rescaling first keeps high powers in range.
    const Eigen::ArrayXd s = spectrum.array() / spectrum.maxCoeff();
    auto pr = [&](double a) {
        const Eigen::ArrayXd sa = (s > 0.0).select(s.pow(a), 0.0);
        return sa.sum() * sa.sum() / sa.square().sum();
    };
    if (std::holds_alternative<PrSv>(metric)) return pr(1.0);
    if (std::holds_alternative<PrEig>(metric)) return pr(2.0);
    if (const auto* a = std::get_if<PrAlpha>(&metric)) {
        detail::require(a->alpha > 0.0, "d_eff: alpha must be > 0");
        return pr(a->alpha);
    }
    const Eigen::ArrayXd p = s / s.sum();
    double h = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i)
        if (p(i) > 0.0) h -= p(i) * std::log(p(i));
    return std::exp(h);
}

struct SpectrumReport {
    Vector singular_values;
    double d_eff_sv = 0.0;
    double d_eff_eig = 0.0;
    double d_eff_entropy = 0.0;
    double d_eff_alpha = 0.0;
    double alpha = 0.5;
    Eigen::Index n_samples_used = 0;
    Eigen::Index kz = 0;
    bool suppressed = false;      ///< MI below the reliability threshold
    bool small_margin = false;    ///< k_z - d_eff < 4

    [[nodiscard]] std::vector<std::string> warnings() const {
        std::vector<std::string> w;
        if (suppressed) w.emplace_back("mi_below_reliability_threshold");
        if (small_margin) w.emplace_back("kz_minus_deff_below_4");
        return w;
    }
};

inline constexpr double kDeffReliabilityBits = 0.5;
inline constexpr double kDeffMarginWarning = 4.0;

inline SpectrumReport spectrum_report(const Vector& sv, Eigen::Index n_used, double alpha = 0.5) {
    SpectrumReport r;
    r.singular_values = sv;
    r.alpha = alpha;
    r.n_samples_used = n_used;
    r.kz = sv.size();
    r.d_eff_sv = d_eff(sv, PrSv{});
    r.d_eff_eig = d_eff(sv, PrEig{});
    r.d_eff_entropy = d_eff(sv, PrEntropy{});
    r.d_eff_alpha = d_eff(sv, PrAlpha{alpha});
    r.small_margin = static_cast<double>(r.kz) - r.d_eff_sv < kDeffMarginWarning;
    return r;
}

/// Spectrum of the encoder cross-covariance on (x, y). `mi_bits` below the
/// reliability threshold marks the report as suppressed; values are still filled.
inline SpectrumReport one_shot_dimension(const CriticModel& m, const Matrix& x, const Matrix& y, double mi_bits,
                                         double alpha = 0.5, double threshold_bits = kDeffReliabilityBits) {
    auto [gx, gy] = embed(m, x, y);
    SpectrumReport r = spectrum_report(singular_values(cross_covariance(gx, gy)), x.rows(), alpha);
    r.suppressed = mi_bits < threshold_bits;
    return r;
}

}  // namespace dimest
