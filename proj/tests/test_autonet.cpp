#include <catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "dimest/autonet.hpp"

using namespace dimest;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Scalar loss <C, f(x)> so that d(loss)/d(output) = C.
double probe_loss(const MlpParams& p, const Matrix& x, const Matrix& c) {
    return (predict(p, x).array() * c.array()).sum();
}

double max_rel_grad_error(MlpParams p, const Matrix& x, const Matrix& c) {
    auto fr = forward(p, x);
    const auto br = backward(p, fr.tape, c);
    double worst = 0.0;
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        auto check = [&](double& param, double analytic) {
            const double h = 1e-6 * std::max(1.0, std::abs(param));
            const double keep = param;
            param = keep + h;
            const double up = probe_loss(p, x, c);
            param = keep - h;
            const double down = probe_loss(p, x, c);
            param = keep;
            const double numeric = (up - down) / (2.0 * h);
            worst = std::max(worst, std::abs(numeric - analytic) / std::max(1.0, std::abs(numeric)));
        };
        auto& layer = p.layers[l];
        for (Eigen::Index i = 0; i < layer.weight.size(); ++i)
            check(layer.weight.data()[i], br.grads.layers[l].weight.data()[i]);
        for (Eigen::Index i = 0; i < layer.bias.size(); ++i) check(layer.bias(i), br.grads.layers[l].bias(i));
    }
    return worst;
}

}  // namespace

TEST_CASE("parameter gradients match central differences") {
    Rng rng(2024);
    for (Activation act : {Activation::Softplus, Activation::LeakyReLU, Activation::Identity}) {
        for (int net = 0; net < 5; ++net) {
            MlpParams p = init_mlp(rng, {3, 7, 5, 2}, act, net % 2 ? Init::XavierNormal : Init::XavierUniform);
            for (auto& l : p.layers) l.bias = 0.1 * standard_normal(rng, l.bias.size(), 1);
            const Matrix x = standard_normal(rng, 6, 3);
            const Matrix c = standard_normal(rng, 6, 2);
            INFO(to_string(act) << " net " << net);
            CHECK(max_rel_grad_error(p, x, c) <= 1e-6);
        }
    }
}

TEST_CASE("input gradient matches central differences") {
    Rng rng(5);
    const MlpParams p = init_mlp(rng, {4, 8, 3}, Activation::Softplus, Init::XavierUniform);
    Matrix x = standard_normal(rng, 5, 4);
    const Matrix c = standard_normal(rng, 5, 3);
    auto fr = forward(p, x);
    const auto br = backward(p, fr.tape, c, true);
    REQUIRE(br.grad_input.rows() == 5);
    REQUIRE(br.grad_input.cols() == 4);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double keep = x.data()[i];
        x.data()[i] = keep + 1e-6;
        const double up = probe_loss(p, x, c);
        x.data()[i] = keep - 1e-6;
        const double down = probe_loss(p, x, c);
        x.data()[i] = keep;
        CHECK_THAT(br.grad_input.data()[i], WithinAbs((up - down) / 2e-6, 1e-7));
    }
}

TEST_CASE("forward output equals predict") {
    Rng rng(9);
    const MlpParams p = init_mlp(rng, {2, 16, 16, 4}, Activation::LeakyReLU, Init::XavierUniform);
    const Matrix x = standard_normal(rng, 10, 2);
    CHECK(forward(p, x).output == predict(p, x));
}

TEST_CASE("backward contract errors") {
    Rng rng(1);
    const MlpParams p = init_mlp(rng, {2, 3, 1}, Activation::LeakyReLU, Init::XavierUniform);
    const Matrix x = standard_normal(rng, 4, 2);
    auto fr = forward(p, x);
    CHECK_THROWS_AS(backward(p, fr.tape, Matrix::Ones(3, 1)), InvalidInput);
    backward(p, fr.tape, Matrix::Ones(4, 1));
    CHECK(fr.tape.consumed());
    CHECK_THROWS_AS(backward(p, fr.tape, Matrix::Ones(4, 1)), ContractViolation);
    CHECK_THROWS_AS(forward(p, Matrix::Ones(4, 3)), InvalidInput);
    CHECK_THROWS_AS(predict(MlpParams{}, x), InvalidInput);
}

TEST_CASE("init_mlp shapes, zero biases and Xavier scale") {
    Rng rng(3);
    const MlpParams u = init_mlp(rng, {100, 300, 50}, Activation::LeakyReLU, Init::XavierUniform);
    REQUIRE(u.layers.size() == 2);
    CHECK(u.layers[0].weight.rows() == 300);
    CHECK(u.layers[0].weight.cols() == 100);
    CHECK(u.parameter_count() == 100 * 300 + 300 + 300 * 50 + 50);
    CHECK(u.layers[1].bias.isZero());
    const double bound = std::sqrt(6.0 / 400.0);
    CHECK(u.layers[0].weight.cwiseAbs().maxCoeff() <= bound);
    // Uniform on [-b, b] has variance b^2 / 3 = 2 / (fan_in + fan_out).
    const double var_u = u.layers[0].weight.array().square().mean();
    CHECK_THAT(var_u, WithinRel(2.0 / 400.0, 0.02));

    const MlpParams g = init_mlp(rng, {100, 300}, Activation::LeakyReLU, Init::XavierNormal);
    CHECK_THAT(g.layers[0].weight.array().square().mean(), WithinRel(2.0 / 400.0, 0.02));

    CHECK_THROWS_AS(init_mlp(rng, {4}, Activation::LeakyReLU, Init::XavierUniform), InvalidInput);
    CHECK_THROWS_AS(init_mlp(rng, {4, 0, 2}, Activation::LeakyReLU, Init::XavierUniform), InvalidInput);
}

TEST_CASE("softplus is accurate in both tails") {
    Matrix m(1, 5);
    m << -800.0, -30.0, 0.0, 30.0, 800.0;
    detail::activate_inplace(m, Activation::Softplus);
    CHECK_THAT(m(0, 0), WithinAbs(0.0, 1e-300));
    CHECK_THAT(m(0, 1), WithinRel(std::exp(-30.0), 1e-12));
    CHECK_THAT(m(0, 2), WithinRel(std::log(2.0), 1e-15));
    CHECK_THAT(m(0, 3), WithinRel(30.0 + std::exp(-30.0), 1e-15));
    CHECK(m(0, 4) == 800.0);
    CHECK_THAT(detail::softplus(-30.0), WithinRel(std::exp(-30.0), 1e-12));
}

TEST_CASE("first Adam step moves each parameter by lr against the gradient sign") {
    Rng rng(4);
    MlpParams p = init_mlp(rng, {2, 3}, Activation::Identity, Init::XavierUniform);
    const MlpParams before = p;
    ParamGrads g = ParamGrads::zeros_like(p);
    g.layers[0].weight << 1.0, -2.0, 0.5, -0.1, 3.0, -7.0;
    g.layers[0].bias << 0.2, -0.2, 1.0;
    AdamState st(AdamConfig{.lr = 0.01});
    adam_step(p, g, st);
    CHECK(st.step() == 1);
    for (Eigen::Index i = 0; i < 6; ++i) {
        const double moved = p.layers[0].weight.data()[i] - before.layers[0].weight.data()[i];
        CHECK_THAT(moved, WithinAbs(-0.01 * std::copysign(1.0, g.layers[0].weight.data()[i]), 1e-8));
    }
}

TEST_CASE("Adam minimises a quadratic") {
    std::vector<double> w{5.0, -3.0};
    std::vector<double> grad(2);
    AdamState st(AdamConfig{.lr = 0.05});
    for (int it = 0; it < 3000; ++it) {
        grad[0] = 2.0 * (w[0] - 1.0);
        grad[1] = 20.0 * (w[1] + 0.5);
        std::vector<std::span<double>> pb{std::span<double>(w)};
        std::vector<std::span<double>> gb{std::span<double>(grad)};
        st.update(pb, gb);
    }
    CHECK_THAT(w[0], WithinAbs(1.0, 1e-3));
    CHECK_THAT(w[1], WithinAbs(-0.5, 1e-3));
}

TEST_CASE("Adam rejects mismatched blocks") {
    std::vector<double> a(3), b(2);
    AdamState st;
    std::vector<std::span<double>> pb{std::span<double>(a)};
    std::vector<std::span<double>> gb{std::span<double>(b)};
    CHECK_THROWS_AS(st.update(pb, gb), InvalidInput);
    std::vector<std::span<double>> two{std::span<double>(a), std::span<double>(a)};
    CHECK_THROWS_AS(st.update(pb, two), InvalidInput);
}

TEST_CASE("checkpoint round trip preserves every bit") {
    Rng rng(8);
    MlpParams p = init_mlp(rng, {3, 5, 2}, Activation::Softplus, Init::XavierNormal);
    p.layers[1].bias << 1e-300, -0.1;
    std::stringstream ss;
    write_mlp(ss, p);
    const MlpParams q = read_mlp(ss);
    CHECK(q == p);
    const Matrix x = standard_normal(rng, 4, 3);
    CHECK(predict(p, x) == predict(q, x));
}

TEST_CASE("checkpoint reader rejects corrupt streams") {
    Rng rng(8);
    const MlpParams p = init_mlp(rng, {3, 5, 2}, Activation::LeakyReLU, Init::XavierUniform);
    std::stringstream ss;
    write_mlp(ss, p);
    const std::string bytes = ss.str();

    std::stringstream bad_magic("XMLP" + bytes.substr(4));
    CHECK_THROWS_AS(read_mlp(bad_magic), InvalidInput);
    std::stringstream truncated(bytes.substr(0, bytes.size() - 9));
    CHECK_THROWS_AS(read_mlp(truncated), InvalidInput);
    std::string bad_act = bytes;
    bad_act[8] = 7;
    std::stringstream act_stream(bad_act);
    CHECK_THROWS_AS(read_mlp(act_stream), InvalidInput);
    CHECK_THROWS_AS(load_mlp("/nonexistent/dir/net.bin"), InvalidInput);
}

TEST_CASE("single linear layers and activation values") {
    MlpParams id;
    id.activation = Activation::Identity;
    id.layers.push_back({Matrix::Identity(3, 3), Vector::Zero(3)});
    Rng rng(2);
    const Matrix x = standard_normal(rng, 4, 3);
    CHECK(predict(id, x) == x);

    Matrix v(1, 2);
    v << -1.0, 0.0;
    detail::activate_inplace(v, Activation::LeakyReLU);
    CHECK(v(0, 0) == -0.01);
    Matrix s = Matrix::Zero(1, 1);
    detail::activate_inplace(s, Activation::Softplus);
    CHECK_THAT(s(0, 0), WithinAbs(0.6931471805599453, 1e-15));
}

TEST_CASE("summed output of a linear net gives the batch size as bias gradient") {
    Rng rng(6);
    const MlpParams p = init_mlp(rng, {3, 2}, Activation::Identity, Init::XavierUniform);
    const Matrix x = standard_normal(rng, 7, 3);
    auto fr = forward(p, x);
    const auto br = backward(p, fr.tape, Matrix::Ones(7, 2));
    CHECK(br.grads.layers[0].bias == Vector::Constant(2, 7.0));
    CHECK(br.grads.layers[0].weight.row(0).transpose().isApprox(x.colwise().sum().transpose(), 1e-14));
}

TEST_CASE("zero cotangent gives zero gradients and a zero-gradient Adam step is a no-op") {
    Rng rng(7);
    MlpParams p = init_mlp(rng, {3, 4, 2}, Activation::LeakyReLU, Init::XavierUniform);
    auto fr = forward(p, standard_normal(rng, 5, 3));
    auto br = backward(p, fr.tape, Matrix::Zero(5, 2));
    for (const auto& l : br.grads.layers) {
        CHECK(l.weight.isZero());
        CHECK(l.bias.isZero());
    }
    const MlpParams before = p;
    AdamState st;
    adam_step(p, br.grads, st);
    CHECK(p == before);
}
