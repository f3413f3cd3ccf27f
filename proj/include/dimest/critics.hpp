#pragma once

// Critic architectures T(x, y) evaluated on all N x N pairs of a batch, the
// symmetrized InfoNCE objective, and the analytic Gaussian critic.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "dimest/autonet.hpp"
#include "dimest/error.hpp"
#include "dimest/ndmath.hpp"

namespace dimest {

enum class CriticFamily { Separable, Concatenated, Hybrid, SeparableAugmented };

inline const char* to_string(CriticFamily f) {
    switch (f) {
        case CriticFamily::Separable: return "separable";
        case CriticFamily::Concatenated: return "concatenated";
        case CriticFamily::Hybrid: return "hybrid";
        case CriticFamily::SeparableAugmented: return "separable_augmented";
    }
    return "?";
}

inline CriticFamily critic_family_from_string(const std::string& s) {
    if (s == "separable") return CriticFamily::Separable;
    if (s == "concatenated") return CriticFamily::Concatenated;
    if (s == "hybrid") return CriticFamily::Hybrid;
    if (s == "separable_augmented") return CriticFamily::SeparableAugmented;
    throw InvalidInput("unknown critic family '" + s + "'");
}

/// Layer widths for a critic. Defaults follow the reference architecture:
/// encoders K -> 128 -> 128 -> k_z, hybrid head 2 k_z -> 64 -> 1.
struct CriticArch {
    Eigen::Index input_x = 0;
    Eigen::Index input_y = 0;
    Eigen::Index kz = 8;
    std::vector<Eigen::Index> encoder_hidden{128, 128};
    std::vector<Eigen::Index> head_hidden{64};
    std::vector<Eigen::Index> concat_hidden{256, 256};
    bool siamese = false;
};

/// Fixed per-column affine map (x - shift) / scale applied before a network.
/// Empty means identity. Not trained.
struct InputScaler {
    Vector shift;
    Vector scale;

    [[nodiscard]] bool empty() const noexcept { return shift.size() == 0; }

    [[nodiscard]] Matrix apply(const Matrix& x) const {
        if (empty()) return x;
        detail::require(x.cols() == shift.size(), "InputScaler: width mismatch");
        return (x.rowwise() - shift.transpose()).array().rowwise() / scale.transpose().array();
    }

    /// Column mean and standard deviation of `x`; constant columns keep unit scale.
    static InputScaler fit(const Matrix& x) {
        detail::require(x.rows() >= 2, "InputScaler::fit: need at least 2 rows");
        InputScaler s;
        s.shift = column_mean(x);
        s.scale = column_variance(x).array().sqrt();
        for (Eigen::Index j = 0; j < s.scale.size(); ++j)
            if (!(s.scale(j) > 1e-12)) s.scale(j) = 1.0;
        return s;
    }
};

struct CriticModel {
    CriticFamily family = CriticFamily::Hybrid;
    MlpParams enc_x;             ///< K_X -> k_z (unused for Concatenated)
    MlpParams enc_y;             ///< K_Y -> k_z (unused when siamese)
    std::optional<MlpParams> head;  ///< Hybrid: 2 k_z -> 1; Concatenated: K_X + K_Y -> 1
    Matrix head_bilinear;        ///< optional k_z x k_z term g_x^T B g_y added to a hybrid head
    Matrix gamma_x;              ///< SeparableAugmented only
    Matrix gamma_y;
    InputScaler scale_x;
    InputScaler scale_y;
    bool siamese = false;

    [[nodiscard]] Eigen::Index kz() const {
        return family == CriticFamily::Concatenated ? 0 : enc_x.out_dim();
    }
    [[nodiscard]] const MlpParams& encoder_y() const { return siamese ? enc_x : enc_y; }

    /// Trainable parameter arrays in a fixed order (matches CriticGrads::blocks).
    std::vector<std::span<double>> blocks() {
        std::vector<std::span<double>> out;
        auto append = [&](std::vector<std::span<double>> b) { out.insert(out.end(), b.begin(), b.end()); };
        if (family != CriticFamily::Concatenated) {
            append(enc_x.blocks());
            if (!siamese) append(enc_y.blocks());
        }
        if (head) append(head->blocks());
        if (head_bilinear.size() > 0)
            out.emplace_back(head_bilinear.data(), static_cast<std::size_t>(head_bilinear.size()));
        if (family == CriticFamily::SeparableAugmented) {
            out.emplace_back(gamma_x.data(), static_cast<std::size_t>(gamma_x.size()));
            out.emplace_back(gamma_y.data(), static_cast<std::size_t>(gamma_y.size()));
        }
        return out;
    }

    [[nodiscard]] std::size_t parameter_count() const {
        std::size_t n = 0;
        if (family != CriticFamily::Concatenated) n += enc_x.parameter_count() + (siamese ? 0 : enc_y.parameter_count());
        if (head) n += head->parameter_count();
        n += static_cast<std::size_t>(head_bilinear.size() + gamma_x.size() + gamma_y.size());
        return n;
    }
};

struct CriticGrads {
    ParamGrads enc_x;
    ParamGrads enc_y;
    ParamGrads head;
    Matrix head_bilinear;
    Matrix gamma_x;
    Matrix gamma_y;

    std::vector<std::span<double>> blocks(const CriticModel& m) {
        std::vector<std::span<double>> out;
        auto append = [&](std::vector<std::span<double>> b) { out.insert(out.end(), b.begin(), b.end()); };
        if (m.family != CriticFamily::Concatenated) {
            append(enc_x.blocks());
            if (!m.siamese) append(enc_y.blocks());
        }
        if (m.head) append(head.blocks());
        if (m.head_bilinear.size() > 0)
            out.emplace_back(head_bilinear.data(), static_cast<std::size_t>(head_bilinear.size()));
        if (m.family == CriticFamily::SeparableAugmented) {
            out.emplace_back(gamma_x.data(), static_cast<std::size_t>(gamma_x.size()));
            out.emplace_back(gamma_y.data(), static_cast<std::size_t>(gamma_y.size()));
        }
        return out;
    }
};

inline CriticModel make_critic(Rng& rng, CriticFamily family, const CriticArch& arch) {
    detail::require(arch.input_x >= 1 && arch.input_y >= 1, "make_critic: input widths must be >= 1");
    detail::require(arch.kz >= 1, "make_critic: k_z must be >= 1");
    if (arch.siamese) detail::require(arch.input_x == arch.input_y, "make_critic: siamese encoders need equal input widths");
    CriticModel m;
    m.family = family;
    m.siamese = arch.siamese && family != CriticFamily::Concatenated;
    auto sizes = [](Eigen::Index in, const std::vector<Eigen::Index>& hidden, Eigen::Index out) {
        std::vector<Eigen::Index> s{in};
        s.insert(s.end(), hidden.begin(), hidden.end());
        s.push_back(out);
        return s;
    };
    if (family == CriticFamily::Concatenated) {
        m.head = init_mlp(rng, sizes(arch.input_x + arch.input_y, arch.concat_hidden, 1), Activation::LeakyReLU,
                          Init::XavierUniform);
        return m;
    }
    m.enc_x = init_mlp(rng, sizes(arch.input_x, arch.encoder_hidden, arch.kz), Activation::LeakyReLU, Init::XavierUniform);
    if (!m.siamese)
        m.enc_y = init_mlp(rng, sizes(arch.input_y, arch.encoder_hidden, arch.kz), Activation::LeakyReLU, Init::XavierUniform);
    if (family == CriticFamily::Hybrid)
        m.head = init_mlp(rng, sizes(2 * arch.kz, arch.head_hidden, 1), Activation::LeakyReLU, Init::XavierUniform);
    if (family == CriticFamily::SeparableAugmented) {
        m.gamma_x = Matrix::Zero(arch.kz, arch.kz);
        m.gamma_y = Matrix::Zero(arch.kz, arch.kz);
    }
    return m;
}

// ---------------------------------------------------------------------------
// Pairwise evaluation
// ---------------------------------------------------------------------------

namespace detail {

// Network applied to every concatenation [p_i, q_j]. The first layer is split
// as W1 [p; q] = W1p p + W1q q, so the N^2 pre-activations are sums of two
// N-row projections. A net with one hidden layer and a scalar output (the
// hybrid head) is evaluated in a fused loop that never stores the N^2 x H
// activations; deeper nets go through the generic tape.
struct PairwiseCache {
    Eigen::Index n = 0;
    bool fused = false;
    Matrix pa;           // fused: N x H, p W1p^T + b1
    Matrix qb;           // fused: N x H, q W1q^T
    Matrix pre;          // generic: N^2 x h1 first-layer pre-activation
    MlpParams rest;      // generic: layers 2.. of the network
    std::optional<Tape> rest_tape;
};

inline MlpParams tail_layers(const MlpParams& net) {
    MlpParams rest;
    rest.activation = net.activation;
    rest.layers.assign(net.layers.begin() + 1, net.layers.end());
    return rest;
}

inline bool fusable(const MlpParams& net) {
    return net.layers.size() == 2 && net.layers[1].weight.rows() == 1;
}

using ArrayRow = Eigen::Array<double, 1, Eigen::Dynamic>;

// Kernels over rows of length H; Eigen arrays keep the inner loops vectorised.
inline void fused_forward(const Matrix& pa, const Matrix& qb, const Matrix& w2, double b2, Matrix& t, Activation act) {
    const Eigen::Index n = pa.rows();
    const Eigen::Index h = pa.cols();
    const ArrayRow w = w2.row(0).array();
    ArrayRow z(h);
    for (Eigen::Index i = 0; i < n; ++i) {
        const ArrayRow ai = pa.row(i).array();
        for (Eigen::Index j = 0; j < n; ++j) {
            z = ai + qb.row(j).array();
            switch (act) {
                case Activation::LeakyReLU: z = z.max(kLeakySlope * z); break;
                case Activation::Softplus: z = z.unaryExpr([](double v) { return softplus(v); }); break;
                case Activation::Identity: break;
            }
            t(i, j) = (w * z).sum() + b2;
        }
    }
}

inline void fused_backward(const Matrix& pa, const Matrix& qb, const Matrix& w2, const Matrix& g, Matrix& da,
                           Matrix& db, Matrix& dw2, Activation act) {
    const Eigen::Index n = pa.rows();
    const Eigen::Index h = pa.cols();
    const ArrayRow w = w2.row(0).array();
    ArrayRow z(h);
    ArrayRow slope(h);
    ArrayRow dai(h);
    ArrayRow dwacc = ArrayRow::Zero(h);
    for (Eigen::Index i = 0; i < n; ++i) {
        const ArrayRow ai = pa.row(i).array();
        dai.setZero();
        for (Eigen::Index j = 0; j < n; ++j) {
            const double gij = g(i, j);
            z = ai + qb.row(j).array();
            switch (act) {
                case Activation::LeakyReLU:
                    slope = (z > 0.0).select(ArrayRow::Ones(h), ArrayRow::Constant(h, kLeakySlope));
                    z *= slope;
                    break;
                case Activation::Softplus:
                    slope = z.unaryExpr([](double v) { return sigmoid(v); });
                    z = z.unaryExpr([](double v) { return softplus(v); });
                    break;
                case Activation::Identity:
                    slope.setOnes();
                    break;
            }
            dwacc += gij * z;
            slope *= gij * w;
            dai += slope;
            db.row(j).array() += slope;
        }
        da.row(i) = dai.matrix();
    }
    dw2.row(0) = dwacc.matrix();
}

inline Matrix pairwise_forward(const MlpParams& net, const Matrix& p, const Matrix& q, PairwiseCache& cache) {
    const Eigen::Index n = p.rows();
    const Eigen::Index a = p.cols();
    const auto& w1 = net.layers.front().weight;
    const auto& b1 = net.layers.front().bias;
    Matrix pa = p * w1.leftCols(a).transpose();
    pa.rowwise() += b1.transpose();
    Matrix qb = q * w1.rightCols(q.cols()).transpose();
    cache.n = n;
    cache.fused = fusable(net);
    if (cache.fused) {
        Matrix t(n, n);
        fused_forward(pa, qb, net.layers[1].weight, net.layers[1].bias(0), t, net.activation);
        cache.pa = std::move(pa);
        cache.qb = std::move(qb);
        return t;
    }
    const Eigen::Index h = w1.rows();
    Matrix pre(n * n, h);
    for (Eigen::Index i = 0; i < n; ++i) pre.middleRows(i * n, n) = qb.rowwise() + pa.row(i);
    Matrix out;
    if (net.layers.size() == 1) {
        out = std::move(pre);
        cache.pre.resize(0, 0);
    } else {
        Matrix hid = pre;
        activate_inplace(hid, net.activation);
        cache.pre = std::move(pre);
        cache.rest = tail_layers(net);
        auto fr = forward(cache.rest, hid);
        cache.rest_tape = std::move(fr.tape);
        out = std::move(fr.output);
    }
    // N^2 x 1 in (i, j) row-major order is exactly the N x N score layout.
    return Eigen::Map<Matrix>(out.data(), n, n);
}

struct PairwiseGrads {
    ParamGrads net;
    Matrix grad_p;
    Matrix grad_q;
};

inline PairwiseGrads pairwise_backward(const MlpParams& net, PairwiseCache& cache, const Matrix& p, const Matrix& q,
                                       const Matrix& grad_t) {
    const Eigen::Index n = cache.n;
    const Eigen::Index a = p.cols();
    const auto& w1 = net.layers.front().weight;
    const Eigen::Index h = w1.rows();
    PairwiseGrads g;
    g.net = ParamGrads::zeros_like(net);
    Matrix da = Matrix::Zero(n, h);
    Matrix db = Matrix::Zero(n, h);
    if (cache.fused) {
        if (cache.pa.rows() != n) throw ContractViolation("pairwise_backward: cache already consumed");
        fused_backward(cache.pa, cache.qb, net.layers[1].weight, grad_t, da, db, g.net.layers[1].weight, net.activation);
        g.net.layers[1].bias(0) = grad_t.sum();
        cache.pa.resize(0, 0);
        cache.qb.resize(0, 0);
    } else {
        Matrix dpre;
        Matrix gflat = Eigen::Map<const Matrix>(grad_t.data(), n * n, 1);
        if (net.layers.size() == 1) {
            dpre = std::move(gflat);
        } else {
            auto br = backward(cache.rest, *cache.rest_tape, gflat, true);
            for (std::size_t l = 0; l < br.grads.layers.size(); ++l) g.net.layers[l + 1] = std::move(br.grads.layers[l]);
            dpre = std::move(br.grad_input);
            activation_backward_inplace(dpre, cache.pre, net.activation);
            cache.pre.resize(0, 0);
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            auto blk = dpre.middleRows(i * n, n);
            da.row(i) = blk.colwise().sum();
            db += blk;
        }
    }
    auto& gw1 = g.net.layers.front().weight;
    gw1.leftCols(a) = da.transpose() * p;
    gw1.rightCols(q.cols()) = db.transpose() * q;
    g.net.layers.front().bias = da.colwise().sum().transpose();
    g.grad_p = da * w1.leftCols(a);
    g.grad_q = db * w1.rightCols(q.cols());
    return g;
}

}  // namespace detail

/// Scores t[i][j] = T(x_i, y_j) for one batch plus everything needed to
/// back-propagate through them.
struct ScoreMatrix {
    Matrix t;

    // Cached intermediates; consumed by score_backward.
    std::optional<Tape> tape_x;
    std::optional<Tape> tape_y;
    Matrix gx;
    Matrix gy;
    Matrix xb;
    Matrix yb;
    detail::PairwiseCache pair;
};

inline ScoreMatrix score_matrix(const CriticModel& m, const Matrix& x_raw, const Matrix& y_raw, bool record = true) {
    detail::require(x_raw.rows() == y_raw.rows(), "score_matrix: batch sizes differ");
    detail::require(x_raw.rows() >= 1, "score_matrix: empty batch");
    const Matrix xb = m.scale_x.apply(x_raw);
    const Matrix yb = m.scale_y.apply(y_raw);
    ScoreMatrix s;
    if (m.family == CriticFamily::Concatenated) {
        detail::require(m.head.has_value(), "score_matrix: concatenated critic without network");
        detail::require(xb.cols() + yb.cols() == m.head->in_dim(), "score_matrix: input widths do not match network");
        s.t = detail::pairwise_forward(*m.head, xb, yb, s.pair);
        if (record) {
            s.xb = xb;
            s.yb = yb;
        }
        return s;
    }
    detail::require(xb.cols() == m.enc_x.in_dim(), "score_matrix: x width does not match encoder");
    detail::require(yb.cols() == m.encoder_y().in_dim(), "score_matrix: y width does not match encoder");
    if (record) {
        auto fx = forward(m.enc_x, xb);
        auto fy = forward(m.encoder_y(), yb);
        s.gx = std::move(fx.output);
        s.gy = std::move(fy.output);
        s.tape_x = std::move(fx.tape);
        s.tape_y = std::move(fy.tape);
    } else {
        s.gx = predict(m.enc_x, xb);
        s.gy = predict(m.encoder_y(), yb);
    }
    switch (m.family) {
        case CriticFamily::Separable:
            s.t = s.gx * s.gy.transpose();
            break;
        case CriticFamily::SeparableAugmented: {
            const Vector qx = ((s.gx * m.gamma_x).array() * s.gx.array()).rowwise().sum();
            const Vector qy = ((s.gy * m.gamma_y).array() * s.gy.array()).rowwise().sum();
            s.t = s.gx * s.gy.transpose();
            s.t.colwise() += qx;
            s.t.rowwise() += qy.transpose();
            break;
        }
        case CriticFamily::Hybrid:
            detail::require(m.head.has_value(), "score_matrix: hybrid critic without head");
            s.t = detail::pairwise_forward(*m.head, s.gx, s.gy, s.pair);
            if (m.head_bilinear.size() > 0) s.t += s.gx * m.head_bilinear * s.gy.transpose();
            break;
        case CriticFamily::Concatenated:
            break;
    }
    return s;
}

/// Gradients of a scalar loss w.r.t. all critic parameters, given dL/dt.
inline CriticGrads score_backward(const CriticModel& m, ScoreMatrix& s, const Matrix& grad_t) {
    const Eigen::Index n = s.t.rows();
    detail::require(grad_t.rows() == n && grad_t.cols() == n, "score_backward: gradient shape mismatch");
    CriticGrads g;
    if (m.family == CriticFamily::Concatenated) {
        auto pg = detail::pairwise_backward(*m.head, s.pair, s.xb, s.yb, grad_t);
        g.head = std::move(pg.net);
        return g;
    }
    if (!s.tape_x || !s.tape_y) throw ContractViolation("score_backward: scores were computed without recording");
    Matrix dgx;
    Matrix dgy;
    switch (m.family) {
        case CriticFamily::Separable:
            dgx = grad_t * s.gy;
            dgy = grad_t.transpose() * s.gx;
            break;
        case CriticFamily::SeparableAugmented: {
            const Vector rs = grad_t.rowwise().sum();
            const Vector cs = grad_t.colwise().sum().transpose();
            const Matrix symx = m.gamma_x + m.gamma_x.transpose();
            const Matrix symy = m.gamma_y + m.gamma_y.transpose();
            dgx = grad_t * s.gy + rs.asDiagonal() * (s.gx * symx);
            dgy = grad_t.transpose() * s.gx + cs.asDiagonal() * (s.gy * symy);
            g.gamma_x = s.gx.transpose() * rs.asDiagonal() * s.gx;
            g.gamma_y = s.gy.transpose() * cs.asDiagonal() * s.gy;
            break;
        }
        case CriticFamily::Hybrid: {
            auto pg = detail::pairwise_backward(*m.head, s.pair, s.gx, s.gy, grad_t);
            g.head = std::move(pg.net);
            dgx = std::move(pg.grad_p);
            dgy = std::move(pg.grad_q);
            if (m.head_bilinear.size() > 0) {
                dgx += grad_t * s.gy * m.head_bilinear.transpose();
                dgy += grad_t.transpose() * s.gx * m.head_bilinear;
                g.head_bilinear = s.gx.transpose() * grad_t * s.gy;
            }
            break;
        }
        case CriticFamily::Concatenated:
            break;
    }
    auto bx = backward(m.enc_x, *s.tape_x, dgx);
    auto by = backward(m.encoder_y(), *s.tape_y, dgy);
    if (m.siamese) {
        g.enc_x = std::move(bx.grads);
        g.enc_x += by.grads;
    } else {
        g.enc_x = std::move(bx.grads);
        g.enc_y = std::move(by.grads);
    }
    return g;
}

/// Encoder embeddings (g^X(x), g^Y(y)) without recording.
inline std::pair<Matrix, Matrix> embed(const CriticModel& m, const Matrix& x, const Matrix& y) {
    if (m.family == CriticFamily::Concatenated) throw InvalidInput("embed: concatenated critic has no encoders");
    return {predict(m.enc_x, m.scale_x.apply(x)), predict(m.encoder_y(), m.scale_y.apply(y))};
}

/// Standardize each view's columns using statistics of (x, y). Siamese critics
/// share one encoder, so both views get the pooled statistics.
inline void fit_input_scaling(CriticModel& m, const Matrix& x, const Matrix& y) {
    if (m.siamese) {
        Matrix both(x.rows() + y.rows(), x.cols());
        both << x, y;
        m.scale_x = InputScaler::fit(both);
        m.scale_y = m.scale_x;
        return;
    }
    m.scale_x = InputScaler::fit(x);
    m.scale_y = InputScaler::fit(y);
}

// ---------------------------------------------------------------------------
// Symmetrized InfoNCE
// ---------------------------------------------------------------------------

struct InfoNceResult {
    double nats = 0.0;
    Matrix grad;  ///< d(-estimate)/dt, i.e. the descent direction's negative

    [[nodiscard]] double bits() const { return nats / std::numbers::ln2; }
};

/// (1/2N) [sum_i log(e^{t_ii} / mean_j e^{t_ij}) + sum_j log(e^{t_jj} / mean_i e^{t_ij})],
/// computed with max-shifted log-sum-exp along rows and columns.
inline InfoNceResult symm_infonce(const Matrix& t, bool want_grad = true) {
    const Eigen::Index n = t.rows();
    if (n < 2 || t.cols() != n) throw InvalidInput("symm_infonce: need a square score matrix with N >= 2");
    if (!all_finite(t)) throw NumericalError("symm_infonce: non-finite scores");
    const double log_n = std::log(static_cast<double>(n));

    const Vector rmax = t.rowwise().maxCoeff();
    const Vector cmax = t.colwise().maxCoeff().transpose();
    Matrix er = (t.colwise() - rmax).array().exp();
    Matrix ec = (t.rowwise() - cmax.transpose()).array().exp();
    const Vector rsum = er.rowwise().sum();
    const Vector csum = ec.colwise().sum().transpose();

    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double row_lse = rmax(i) + std::log(rsum(i));
        const double col_lse = cmax(i) + std::log(csum(i));
        acc += (t(i, i) - row_lse + log_n) + (t(i, i) - col_lse + log_n);
    }
    InfoNceResult r;
    r.nats = acc / (2.0 * static_cast<double>(n));
    if (want_grad) {
        // d estimate / d t_ij = (2 delta_ij - softmax_row_i(j) - softmax_col_j(i)) / 2N
        er.array().colwise() /= rsum.array();
        ec.array().rowwise() /= csum.transpose().array();
        r.grad = (er + ec) / (2.0 * static_cast<double>(n));
        r.grad.diagonal().array() -= 1.0 / static_cast<double>(n);
    }
    return r;
}

// ---------------------------------------------------------------------------
// Analytic Gaussian critic
// ---------------------------------------------------------------------------

/// Joint covariance of (X, Y) in block form.
struct GaussianBlocks {
    Matrix sxx;
    Matrix sxy;
    Matrix syy;
};

/// Optimal critic log p(x,y)/(p(x)p(y)) for a zero-mean jointly Gaussian pair,
/// with both the canonical-coordinate and the quadratic-form evaluation.
class GaussianCritic {
public:
    explicit GaussianCritic(GaussianBlocks b) : b_(std::move(b)) {
        const auto kx = b_.sxx.rows();
        const auto ky = b_.syy.rows();
        detail::require(b_.sxx.cols() == kx && b_.syy.cols() == ky && b_.sxy.rows() == kx && b_.sxy.cols() == ky,
                        "GaussianCritic: inconsistent block shapes");
        Matrix full(kx + ky, kx + ky);
        full << b_.sxx, b_.sxy, b_.sxy.transpose(), b_.syy;
        Eigen::LLT<Eigen::MatrixXd> llt(full);
        if (llt.info() != Eigen::Success) throw InvalidInput("GaussianCritic: covariance is not positive definite");
        full_inv_ = llt.solve(Eigen::MatrixXd::Identity(kx + ky, kx + ky));
        sxx_inv_ = Eigen::LLT<Eigen::MatrixXd>(b_.sxx).solve(Eigen::MatrixXd::Identity(kx, kx));
        syy_inv_ = Eigen::LLT<Eigen::MatrixXd>(b_.syy).solve(Eigen::MatrixXd::Identity(ky, ky));

        wx_ = spd_power(b_.sxx, -0.5);
        wy_ = spd_power(b_.syy, -0.5);
        Svd d = svd(wx_ * b_.sxy * wy_);
        rho_ = d.S;
        px_ = d.U.transpose() * wx_;
        py_ = d.V.transpose() * wy_;
    }

    [[nodiscard]] const Vector& canonical_correlations() const { return rho_; }

    [[nodiscard]] std::pair<Vector, Vector> canonical_coords(const Vector& x, const Vector& y) const {
        return {px_ * x, py_ * y};
    }

    /// sum_i [rho_i/(1-rho_i^2) u_i v_i - rho_i^2/(2(1-rho_i^2)) (u_i^2 + v_i^2)]
    [[nodiscard]] double canonical(const Vector& x, const Vector& y) const {
        auto [u, v] = canonical_coords(x, y);
        double t = 0.0;
        for (Eigen::Index i = 0; i < rho_.size(); ++i) {
            const double r = rho_(i);
            const double d = 1.0 - r * r;
            t += r / d * u(i) * v(i) - 0.5 * r * r / d * (u(i) * u(i) + v(i) * v(i));
        }
        return t;
    }

    /// 1/2 [x^T Sxx^{-1} x + y^T Syy^{-1} y - z^T Sigma^{-1} z], z = [x; y]
    [[nodiscard]] double quadratic(const Vector& x, const Vector& y) const {
        Vector z(x.size() + y.size());
        z << x, y;
        return 0.5 * (x.dot(sxx_inv_ * x) + y.dot(syy_inv_ * y) - z.dot(full_inv_ * z));
    }

    /// MI in bits, -1/2 sum log2(1 - rho_i^2).
    [[nodiscard]] double mi_bits() const {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < rho_.size(); ++i) acc += -0.5 * std::log2(1.0 - rho_(i) * rho_(i));
        return acc;
    }

private:
    GaussianBlocks b_;
    Eigen::MatrixXd full_inv_;
    Eigen::MatrixXd sxx_inv_;
    Eigen::MatrixXd syy_inv_;
    Matrix wx_;
    Matrix wy_;
    Vector rho_;
    Matrix px_;
    Matrix py_;
};

inline double optimal_gaussian_critic(const GaussianBlocks& sigma, const Vector& x, const Vector& y) {
    return GaussianCritic(sigma).canonical(x, y);
}

/// Degenerate (K+2)-dimensional separable embedding of the optimal Gaussian
/// critic in canonical coordinates: g^X . g^Y equals the canonical critic.
inline std::pair<Vector, Vector> k_plus_2_encoders(const Vector& rhos, const Vector& u, const Vector& v) {
    const Eigen::Index k = rhos.size();
    detail::require(u.size() == k && v.size() == k, "k_plus_2_encoders: dimension mismatch");
    Vector gx = Vector::Zero(k + 2);
    Vector gy = Vector::Zero(k + 2);
    double nx = 0.0;
    double ny = 0.0;
    for (Eigen::Index i = 0; i < k; ++i) {
        const double r = rhos(i);
        if (!(std::abs(r) < 1.0)) throw InvalidInput("k_plus_2_encoders: |rho| must be < 1");
        const double d = 1.0 - r * r;
        const double s = std::sqrt(std::abs(r) / d);
        gx(i) = s * u(i);
        gy(i) = (r < 0.0 ? -s : s) * v(i);
        nx += -r * r / (2.0 * d) * u(i) * u(i);
        ny += -r * r / (2.0 * d) * v(i) * v(i);
    }
    gx(k) = nx;
    gx(k + 1) = 1.0;
    gy(k) = 1.0;
    gy(k + 1) = ny;
    return {gx, gy};
}

}  // namespace dimest
