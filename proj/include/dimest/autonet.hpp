#pragma once

// Fixed-topology feed-forward networks with exact reverse-mode gradients and
// an Adam optimizer. Weights are stored out x in; a batch of inputs is a
// row-major (batch x in) matrix and y = x W^T + b.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "dimest/error.hpp"
#include "dimest/ndmath.hpp"

namespace dimest {

enum class Activation : std::uint32_t { LeakyReLU = 0, Softplus = 1, Identity = 2 };
enum class Init { XavierUniform, XavierNormal };

inline constexpr double kLeakySlope = 0.01;

inline const char* to_string(Activation a) {
    switch (a) {
        case Activation::LeakyReLU: return "leaky_relu";
        case Activation::Softplus: return "softplus";
        case Activation::Identity: return "identity";
    }
    return "?";
}

struct Layer {
    Matrix weight;  ///< out x in
    Vector bias;    ///< out
};

struct MlpParams {
    std::vector<Layer> layers;
    Activation activation = Activation::LeakyReLU;

    [[nodiscard]] Eigen::Index in_dim() const { return layers.front().weight.cols(); }
    [[nodiscard]] Eigen::Index out_dim() const { return layers.back().weight.rows(); }
    [[nodiscard]] std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
        return n;
    }
    /// Flat views over every parameter array, in layer order (weight, bias).
    std::vector<std::span<double>> blocks() {
        std::vector<std::span<double>> out;
        for (auto& l : layers) {
            out.emplace_back(l.weight.data(), static_cast<std::size_t>(l.weight.size()));
            out.emplace_back(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
        }
        return out;
    }

    bool operator==(const MlpParams& o) const {
        if (activation != o.activation || layers.size() != o.layers.size()) return false;
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const auto& a = layers[i];
            const auto& b = o.layers[i];
            if (a.weight.rows() != b.weight.rows() || a.weight.cols() != b.weight.cols()) return false;
            if (a.weight != b.weight || a.bias != b.bias) return false;
        }
        return true;
    }
};

/// Gradients with the same layout as MlpParams.
struct ParamGrads {
    std::vector<Layer> layers;

    static ParamGrads zeros_like(const MlpParams& p) {
        ParamGrads g;
        for (const auto& l : p.layers)
            g.layers.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()), Vector::Zero(l.bias.size())});
        return g;
    }
    ParamGrads& operator+=(const ParamGrads& o) {
        for (std::size_t i = 0; i < layers.size(); ++i) {
            layers[i].weight += o.layers[i].weight;
            layers[i].bias += o.layers[i].bias;
        }
        return *this;
    }
    std::vector<std::span<double>> blocks() {
        std::vector<std::span<double>> out;
        for (auto& l : layers) {
            out.emplace_back(l.weight.data(), static_cast<std::size_t>(l.weight.size()));
            out.emplace_back(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
        }
        return out;
    }
};

namespace detail {

inline double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline void activate_inplace(Matrix& m, Activation a) {
    switch (a) {
        case Activation::LeakyReLU:
            m = m.cwiseMax(kLeakySlope * m);
            break;
        case Activation::Softplus: {
            // max(x, 0) + log1p(e^{-|x|}); log1p(e) = log(u) + (e - (u - 1)) / u with
            // u = 1 + e recovers the rounding lost in u and vectorises.
            using RowArray = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
            const RowArray e = (-m.array().abs()).exp();
            const RowArray u = 1.0 + e;
            m = (m.array().max(0.0) + u.log() + (e - (u - 1.0)) / u).matrix();
            break;
        }
        case Activation::Identity:
            break;
    }
}

/// grad *= act'(pre), elementwise.
inline void activation_backward_inplace(Matrix& grad, const Matrix& pre, Activation a) {
    switch (a) {
        case Activation::LeakyReLU:
            grad = (pre.array() > 0.0).select(grad, kLeakySlope * grad);
            break;
        case Activation::Softplus: {
            using RowArray = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
            const RowArray e = (-pre.array().abs()).exp();
            grad.array() *= (pre.array() >= 0.0).select(1.0 / (1.0 + e), e / (1.0 + e));
            break;
        }
        case Activation::Identity:
            break;
    }
}

}  // namespace detail

/// Xavier-initialised network with zero biases.
/// Gain 1: uniform bound sqrt(6/(fan_in+fan_out)), normal std sqrt(2/(fan_in+fan_out)).
inline MlpParams init_mlp(Rng& rng, std::span<const Eigen::Index> sizes, Activation act, Init init) {
    if (sizes.size() < 2) throw InvalidInput("init_mlp: need at least one layer (two sizes)");
    for (auto s : sizes)
        if (s < 1) throw InvalidInput("init_mlp: layer sizes must be >= 1");
    MlpParams p;
    p.activation = act;
    for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
        const Eigen::Index fan_in = sizes[i];
        const Eigen::Index fan_out = sizes[i + 1];
        const double denom = static_cast<double>(fan_in + fan_out);
        Layer l{Matrix(fan_out, fan_in), Vector::Zero(fan_out)};
        if (init == Init::XavierUniform) {
            const double bound = std::sqrt(6.0 / denom);
            for (Eigen::Index k = 0; k < l.weight.size(); ++k) l.weight.data()[k] = rng.uniform(-bound, bound);
        } else {
            const double sd = std::sqrt(2.0 / denom);
            for (Eigen::Index k = 0; k < l.weight.size(); ++k) l.weight.data()[k] = sd * rng.normal();
        }
        p.layers.push_back(std::move(l));
    }
    return p;
}

inline MlpParams init_mlp(Rng& rng, std::initializer_list<Eigen::Index> sizes, Activation act, Init init) {
    std::vector<Eigen::Index> v(sizes);
    return init_mlp(rng, std::span<const Eigen::Index>(v), act, init);
}

struct ForwardResult;
struct BackwardResult;
class Tape;
inline ForwardResult forward(const MlpParams& p, const Matrix& x);
inline BackwardResult backward(const MlpParams& p, Tape& tape, const Matrix& grad_out, bool want_input_grad = false);

/// Activations recorded by one forward pass; consumed by exactly one backward pass.
class Tape {
public:
    Tape() = default;

    [[nodiscard]] bool consumed() const noexcept { return consumed_; }
    [[nodiscard]] Eigen::Index batch() const { return inputs_.empty() ? 0 : inputs_.front().rows(); }

private:
    friend ForwardResult forward(const MlpParams&, const Matrix&);
    friend BackwardResult backward(const MlpParams&, Tape&, const Matrix&, bool);

    std::vector<Matrix> inputs_;  // input to layer l
    std::vector<Matrix> pre_;     // pre-activation of layer l (hidden layers only)
    bool consumed_ = false;
};

struct ForwardResult {
    Matrix output;
    Tape tape;
};

inline ForwardResult forward(const MlpParams& p, const Matrix& x) {
    if (p.layers.empty()) throw InvalidInput("forward: network has no layers");
    if (x.cols() != p.in_dim())
        throw InvalidInput("forward: input has " + std::to_string(x.cols()) + " columns, network expects " +
                           std::to_string(p.in_dim()));
    ForwardResult r;
    Matrix h = x;
    const std::size_t n = p.layers.size();
    for (std::size_t l = 0; l < n; ++l) {
        const auto& layer = p.layers[l];
        Matrix z = h * layer.weight.transpose();
        z.rowwise() += layer.bias.transpose();
        r.tape.inputs_.push_back(std::move(h));
        if (l + 1 < n) {
            r.tape.pre_.push_back(z);
            detail::activate_inplace(z, p.activation);
        }
        h = std::move(z);
    }
    r.output = std::move(h);
    return r;
}

/// Forward pass without recording a tape.
inline Matrix predict(const MlpParams& p, const Matrix& x) {
    if (p.layers.empty()) throw InvalidInput("predict: network has no layers");
    if (x.cols() != p.in_dim()) throw InvalidInput("predict: input width mismatch");
    Matrix h = x;
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        Matrix z = h * p.layers[l].weight.transpose();
        z.rowwise() += p.layers[l].bias.transpose();
        if (l + 1 < p.layers.size()) detail::activate_inplace(z, p.activation);
        h = std::move(z);
    }
    return h;
}

struct BackwardResult {
    ParamGrads grads;
    Matrix grad_input;  ///< empty unless requested
};

/// Reverse pass: d(loss)/d(params) given d(loss)/d(output).
inline BackwardResult backward(const MlpParams& p, Tape& tape, const Matrix& grad_out, bool want_input_grad) {
    if (tape.consumed_) throw ContractViolation("backward: tape already consumed");
    if (tape.inputs_.size() != p.layers.size()) throw ContractViolation("backward: tape does not match network");
    if (grad_out.rows() != tape.batch() || grad_out.cols() != p.out_dim())
        throw InvalidInput("backward: cotangent shape mismatch");
    tape.consumed_ = true;

    BackwardResult r;
    r.grads.layers.resize(p.layers.size());
    Matrix g = grad_out;
    for (std::size_t l = p.layers.size(); l-- > 0;) {
        const auto& layer = p.layers[l];
        r.grads.layers[l].weight = g.transpose() * tape.inputs_[l];
        r.grads.layers[l].bias = g.colwise().sum().transpose();
        if (l == 0 && !want_input_grad) break;
        Matrix gin = g * layer.weight;
        if (l > 0) detail::activation_backward_inplace(gin, tape.pre_[l - 1], p.activation);
        g = std::move(gin);
    }
    if (want_input_grad) r.grad_input = std::move(g);
    // Release the recorded activations.
    tape.inputs_.clear();
    tape.pre_.clear();
    return r;
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamConfig {
    double lr = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Bias-corrected Adam over an arbitrary list of parameter blocks.
class AdamState {
public:
    AdamState() = default;
    explicit AdamState(AdamConfig cfg) : cfg_(cfg) {}

    [[nodiscard]] std::uint64_t step() const noexcept { return step_; }
    [[nodiscard]] const AdamConfig& config() const noexcept { return cfg_; }

    void update(std::span<const std::span<double>> params, std::span<const std::span<double>> grads) {
        if (params.size() != grads.size()) throw InvalidInput("adam_step: block count mismatch");
        if (m_.empty()) {
            for (const auto& b : params) {
                m_.emplace_back(b.size(), 0.0);
                v_.emplace_back(b.size(), 0.0);
            }
        }
        if (m_.size() != params.size()) throw InvalidInput("adam_step: state does not match parameters");
        ++step_;
        const double t = static_cast<double>(step_);
        const double c1 = 1.0 - std::pow(cfg_.beta1, t);
        const double c2 = 1.0 - std::pow(cfg_.beta2, t);
        for (std::size_t b = 0; b < params.size(); ++b) {
            auto pb = params[b];
            auto gb = grads[b];
            if (pb.size() != gb.size() || pb.size() != m_[b].size())
                throw InvalidInput("adam_step: block shape mismatch");
            auto& mb = m_[b];
            auto& vb = v_[b];
            for (std::size_t i = 0; i < pb.size(); ++i) {
                const double g = gb[i];
                mb[i] = cfg_.beta1 * mb[i] + (1.0 - cfg_.beta1) * g;
                vb[i] = cfg_.beta2 * vb[i] + (1.0 - cfg_.beta2) * g * g;
                const double mhat = mb[i] / c1;
                const double vhat = vb[i] / c2;
                pb[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
            }
        }
    }

private:
    AdamConfig cfg_{};
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    std::uint64_t step_ = 0;
};

inline void adam_step(MlpParams& params, ParamGrads& grads, AdamState& state) {
    if (grads.layers.size() != params.layers.size()) throw InvalidInput("adam_step: layer count mismatch");
    auto pb = params.blocks();
    auto gb = grads.blocks();
    std::vector<std::span<double>> gconst(gb.begin(), gb.end());
    state.update(pb, gconst);
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------
//
// Binary layout, little-endian:
//   char[4] "DMLP", u32 version (=1), u32 activation, u32 layer_count,
//   per layer: u64 rows (fan_out), u64 cols (fan_in),
//              rows*cols f64 weights (row-major), rows f64 biases.

namespace detail {

template <class T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
T read_pod(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw InvalidInput("checkpoint: truncated stream");
    return v;
}

}  // namespace detail

inline void write_mlp(std::ostream& os, const MlpParams& p) {
    os.write("DMLP", 4);
    detail::write_pod<std::uint32_t>(os, 1);
    detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(p.activation));
    detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(p.layers.size()));
    for (const auto& l : p.layers) {
        detail::write_pod<std::uint64_t>(os, static_cast<std::uint64_t>(l.weight.rows()));
        detail::write_pod<std::uint64_t>(os, static_cast<std::uint64_t>(l.weight.cols()));
        os.write(reinterpret_cast<const char*>(l.weight.data()), static_cast<std::streamsize>(l.weight.size() * 8));
        os.write(reinterpret_cast<const char*>(l.bias.data()), static_cast<std::streamsize>(l.bias.size() * 8));
    }
}

inline MlpParams read_mlp(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "DMLP", 4) != 0) throw InvalidInput("checkpoint: bad magic");
    if (detail::read_pod<std::uint32_t>(is) != 1) throw InvalidInput("checkpoint: unsupported version");
    const auto act = detail::read_pod<std::uint32_t>(is);
    if (act > 2) throw InvalidInput("checkpoint: unknown activation");
    MlpParams p;
    p.activation = static_cast<Activation>(act);
    const auto n = detail::read_pod<std::uint32_t>(is);
    for (std::uint32_t i = 0; i < n; ++i) {
        const auto rows = static_cast<Eigen::Index>(detail::read_pod<std::uint64_t>(is));
        const auto cols = static_cast<Eigen::Index>(detail::read_pod<std::uint64_t>(is));
        Layer l{Matrix(rows, cols), Vector(rows)};
        is.read(reinterpret_cast<char*>(l.weight.data()), static_cast<std::streamsize>(l.weight.size() * 8));
        is.read(reinterpret_cast<char*>(l.bias.data()), static_cast<std::streamsize>(l.bias.size() * 8));
        if (!is) throw InvalidInput("checkpoint: truncated payload");
        if (!p.layers.empty() && p.layers.back().weight.rows() != cols)
            throw InvalidInput("checkpoint: layer shapes do not compose");
        p.layers.push_back(std::move(l));
    }
    return p;
}

inline void save_mlp(const std::string& path, const MlpParams& p) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InvalidInput("cannot open " + path);
    write_mlp(os, p);
}

inline MlpParams load_mlp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InvalidInput("cannot open " + path);
    return read_mlp(is);
}

}  // namespace dimest
