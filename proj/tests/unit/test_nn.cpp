#include "ninn/nn/activation.hpp"
#include "ninn/nn/resnet.hpp"

#include "../test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace ninn;
using namespace ninn::nn;

namespace {

// Straight-line scalar re-implementation of the forward pass, kept independent
// of the Eigen expressions in the library.
double sigma_ref(double x, double eps) {
    if (std::abs(x) > eps) return x > 0 ? x : 0.0;
    return x * x / (4 * eps) + x / 2 + eps / 4;
}

std::vector<double> forward_ref(const ResNetParams& net, const std::vector<double>& y0) {
    const int n = net.width();
    std::vector<double> y(n);
    for (int r = 0; r < n; ++r) {
        double a = net.opening.bias[r];
        for (std::size_t c = 0; c < y0.size(); ++c) a += net.opening.weights(r, static_cast<Eigen::Index>(c)) * y0[c];
        y[r] = sigma_ref(a, net.activation.epsilon);
    }
    for (const auto& h : net.hidden) {
        std::vector<double> next(n);
        for (int r = 0; r < n; ++r) {
            double a = h.bias[r];
            for (int c = 0; c < n; ++c) a += h.weights(r, c) * y[static_cast<std::size_t>(c)];
            next[r] = y[r] + net.tau * sigma_ref(a, net.activation.epsilon);
        }
        y = next;
    }
    std::vector<double> out(static_cast<std::size_t>(net.output_dim()), 0.0);
    for (int r = 0; r < net.output_dim(); ++r)
        for (int c = 0; c < n; ++c) out[r] += net.closing(r, c) * y[static_cast<std::size_t>(c)];
    return out;
}

}  // namespace

TEST_CASE("activation branches") {
    const ActivationSpec spec{0.1};
    CHECK(activation(0.2, spec) == doctest::Approx(0.2));
    CHECK(activation(0.0, spec) == doctest::Approx(0.025).epsilon(1e-15));
    CHECK(activation(-0.2, spec) == 0.0);
    CHECK(activation_derivative(0.0, spec) == 0.5);
    CHECK(activation_derivative(1.0, spec) == 1.0);
    CHECK(activation_derivative(-1.0, spec) == 0.0);
}

TEST_CASE("activation is C1 at both seams") {
    for (double eps : {1e-3, 0.1, 2.5}) {
        const ActivationSpec spec{eps};
        // Quadratic branch evaluated exactly at the seam against the outer branches.
        const double quad_hi = eps * eps / (4 * eps) + eps / 2 + eps / 4;
        const double quad_lo = eps * eps / (4 * eps) - eps / 2 + eps / 4;
        CHECK(quad_hi == doctest::Approx(eps).epsilon(1e-15));
        CHECK(std::abs(quad_lo) <= 1e-15 * eps);
        CHECK(activation_derivative(eps, spec) == doctest::Approx(1.0));
        CHECK(activation_derivative(-eps, spec) == doctest::Approx(0.0));
        const double h = eps * 1e-9;
        CHECK(std::abs(activation(eps + h, spec) - activation(eps - h, spec)) < 3 * h);
        CHECK(std::abs(activation(-eps + h, spec) - activation(-eps - h, spec)) < 3 * h);
    }
}

TEST_CASE("activation_spec rejects non-positive epsilon") {
    CHECK_THROWS_AS(ActivationSpec{0.0}.validate(), std::invalid_argument);
    CHECK_THROWS_AS(ActivationSpec{-1.0}.validate(), std::invalid_argument);
}

TEST_CASE("forward with tau = 0 collapses the residual chain") {
    std::mt19937_64 rng(1);
    auto net = testing::random_net(3, 2, 5, 6, rng);
    net.tau = 1e-300;  // validate() wants tau > 0; residual updates vanish below rounding
    const Vector y0 = testing::random_vector(3, rng);
    const Vector expected = net.closing * activation(net.opening.weights * y0 + net.opening.bias, net.activation);
    const auto result = forward(net, y0);
    CHECK((result.output - expected).norm() <= 1e-15 * expected.norm());
}

TEST_CASE("forward with zero hidden layers accumulates sigma(0) per layer") {
    std::mt19937_64 rng(2);
    const int depth = 6;
    auto net = testing::random_net(2, 1, depth, 4, rng);
    for (auto& h : net.hidden) {
        h.weights.setZero();
        h.bias.setZero();
    }
    net.tau = 1.0;
    const Vector y0 = testing::random_vector(2, rng);
    const double eps = net.activation.epsilon;
    const Vector y1 = activation(net.opening.weights * y0 + net.opening.bias, net.activation);
    const Vector expected = net.closing * (y1 + Vector::Constant(4, (depth - 2) * eps / 4));
    CHECK(forward(net, y0).output[0] == doctest::Approx(expected[0]).epsilon(1e-14));
}

TEST_CASE("forward matches the straight-line oracle") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const int d = 1 + trial % 4;
        const int depth = 3 + trial % 5;
        auto net = testing::random_net(d, 1 + trial % 3, depth, 2 + trial % 7, rng, 0.8);
        const Vector y0 = testing::random_vector(d, rng, 2.0);
        const auto ref = forward_ref(net, std::vector<double>(y0.data(), y0.data() + d));
        const auto out = forward(net, y0).output;
        for (Eigen::Index r = 0; r < out.size(); ++r)
            CHECK(std::abs(out[r] - ref[static_cast<std::size_t>(r)]) <= 1e-14 * std::max(1.0, std::abs(ref[r])));
    }
}

TEST_CASE("trace is consistent with the recurrence") {
    std::mt19937_64 rng(4);
    auto net = testing::random_net(3, 1, 7, 5, rng);
    const auto result = forward(net, testing::random_vector(3, rng));
    REQUIRE(result.trace.states.size() == 6);
    for (int l = 1; l <= net.depth() - 2; ++l) {
        const Vector again = residual_layer(net, l, result.trace.states[static_cast<std::size_t>(l - 1)]);
        CHECK(again == result.trace.states[static_cast<std::size_t>(l)]);
    }
    CHECK(closing_layer(net, result.trace.states.back()) == result.output);
}

TEST_CASE("forward reports the diverging layer") {
    std::mt19937_64 rng(5);
    auto net = testing::random_net(2, 1, 5, 3, rng);
    net.hidden[1].bias[0] = std::numeric_limits<double>::infinity();
    try {
        (void)forward(net, Vector::Ones(2));
        FAIL("expected divergence");
    } catch (const DivergenceError& e) {
        CHECK(e.layer() == 2);
    }
}

TEST_CASE("forward is continuous in tau") {
    std::mt19937_64 rng(6);
    auto net = testing::random_net(3, 1, 6, 5, rng);
    const Vector y0 = testing::random_vector(3, rng);
    auto at = [&](double tau) {
        auto copy = net;
        copy.tau = tau;
        return forward(copy, y0).output;
    };
    const Vector base = at(1e-300);
    double previous = std::numeric_limits<double>::infinity();
    for (double tau : {1e-1, 1e-2, 1e-3}) {
        const double gap = (at(tau) - base).norm();
        CHECK(gap < previous);
        previous = gap;
    }
    CHECK(previous < 1e-2);
}

TEST_CASE("backprop with zero upstream is zero") {
    std::mt19937_64 rng(7);
    auto net = testing::random_net(3, 2, 5, 4, rng);
    const auto g = backprop(net, testing::random_vector(3, rng), Vector::Zero(2));
    CHECK(g.params.norm() == 0.0);
    CHECK(g.input.norm() == 0.0);
}

TEST_CASE("backprop matches the hand-derived scalar gradient") {
    // d = n = d_star = 1, L = 3: y1 = s(w0 x + b0), y2 = y1 + tau s(w1 y1 + b1), y3 = c y2.
    auto net = ResNetParams::zeros(1, 1, 3, 1, 0.7, ActivationSpec{0.5});
    const double w0 = 0.8, b0 = 0.1, w1 = -0.6, b1 = 0.3, c = 1.7, x = 0.4;
    net.opening.weights(0, 0) = w0;
    net.opening.bias[0] = b0;
    net.hidden[0].weights(0, 0) = w1;
    net.hidden[0].bias[0] = b1;
    net.closing(0, 0) = c;
    const double eps = 0.5, tau = 0.7;
    auto s = [&](double v) { return sigma_ref(v, eps); };
    auto ds = [&](double v) { return std::abs(v) > eps ? (v > 0 ? 1.0 : 0.0) : v / (2 * eps) + 0.5; };
    const double a0 = w0 * x + b0, y1 = s(a0), a1 = w1 * y1 + b1, y2 = y1 + tau * s(a1);
    const double dy2_dy1 = 1 + tau * ds(a1) * w1;
    const double expected_w0 = c * dy2_dy1 * ds(a0) * x;
    const double expected_b0 = c * dy2_dy1 * ds(a0);
    const double expected_w1 = c * tau * ds(a1) * y1;
    const double expected_b1 = c * tau * ds(a1);
    const double expected_c = y2;
    const double expected_x = c * dy2_dy1 * ds(a0) * w0;

    const auto g = backprop(net, Vector::Constant(1, x), Vector::Ones(1));
    REQUIRE(g.params.size() == 5);
    CHECK(g.params[0] == doctest::Approx(expected_w0).epsilon(1e-14));
    CHECK(g.params[1] == doctest::Approx(expected_b0).epsilon(1e-14));
    CHECK(g.params[2] == doctest::Approx(expected_w1).epsilon(1e-14));
    CHECK(g.params[3] == doctest::Approx(expected_b1).epsilon(1e-14));
    CHECK(g.params[4] == doctest::Approx(expected_c).epsilon(1e-14));
    CHECK(g.input[0] == doctest::Approx(expected_x).epsilon(1e-14));
}

TEST_CASE("backprop directional derivatives match central differences") {
    std::mt19937_64 rng(8);
    int checked = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const int d = 1 + trial % 4;
        const int d_star = 1 + trial % 2;
        auto net = testing::random_net(d, d_star, 3 + trial % 4, 2 + trial % 9, rng, 0.7);
        const Vector y0 = testing::random_vector(d, rng, 1.5);
        const Vector up = testing::random_vector(d_star, rng);
        const auto g = backprop(net, y0, up);
        const Vector theta = net.flatten();
        const Vector dir = testing::random_vector(theta.size(), rng);
        const Vector dx = testing::random_vector(d, rng);
        const double h = 1e-6 * std::max(1.0, theta.cwiseAbs().maxCoeff());

        auto value = [&](const Vector& th, const Vector& x) {
            auto copy = net;
            copy.assign(th);
            return up.dot(forward(copy, x).output);
        };
        const double fd_p = (value(theta + h * dir, y0) - value(theta - h * dir, y0)) / (2 * h);
        const double fd_x = (value(theta, y0 + h * dx) - value(theta, y0 - h * dx)) / (2 * h);
        const double ad_p = g.params.dot(dir);
        const double ad_x = g.input.dot(dx);
        CHECK(std::abs(fd_p - ad_p) <= 1e-5 * std::max({std::abs(ad_p), std::abs(fd_p), 1e-8}));
        CHECK(std::abs(fd_x - ad_x) <= 1e-5 * std::max({std::abs(ad_x), std::abs(fd_x), 1e-8}));
        ++checked;
    }
    CHECK(checked == 100);
}

TEST_CASE("batch forward and gradient agree with per-sample calls") {
    std::mt19937_64 rng(9);
    auto net = testing::random_net(3, 1, 5, 6, rng);
    Matrix inputs(3, 7);
    for (int c = 0; c < 7; ++c) inputs.col(c) = testing::random_vector(3, rng);
    const Matrix out = forward_batch(net, inputs);
    Vector summed = Vector::Zero(static_cast<Eigen::Index>(net.parameter_count()));
    for (int c = 0; c < 7; ++c) {
        CHECK(out(0, c) == doctest::Approx(forward(net, inputs.col(c)).output[0]).epsilon(1e-14));
        summed += backprop(net, inputs.col(c), Vector::Ones(1)).params;
    }
    const auto batch = backprop_batch(net, inputs, [](const Matrix& o) { return Matrix::Ones(o.rows(), o.cols()); });
    CHECK((batch.params - summed).norm() <= 1e-12 * summed.norm());
}

TEST_CASE("flatten and assign are inverse") {
    std::mt19937_64 rng(10);
    auto net = testing::random_net(4, 2, 6, 3, rng);
    const Vector flat = net.flatten();
    auto other = ResNetParams::zeros(4, 2, 6, 3);
    other.assign(flat);
    CHECK(other.flatten() == flat);
    CHECK_THROWS_AS(other.assign(Vector::Zero(3)), DimensionError);
}

TEST_CASE("default tau is 1/(L-2)") {
    CHECK(ResNetParams::zeros(2, 1, 6, 4).tau == doctest::Approx(0.25));
    CHECK_THROWS_AS((void)ResNetParams::zeros(2, 1, 2, 4), std::invalid_argument);
}

TEST_CASE("validate catches shape errors") {
    auto net = ResNetParams::zeros(2, 1, 4, 3);
    net.validate();
    auto bad = net;
    bad.hidden[0].weights = Matrix::Zero(3, 2);
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = net;
    bad.closing = Matrix::Zero(1, 4);
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = net;
    bad.tau = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("system_forward shapes and stencils") {
    std::mt19937_64 rng(11);
    auto sys = testing::random_system(3, 4, 5, rng);
    sys.validate();
    CHECK(system_forward(sys, testing::random_vector(3, rng)).size() == 3);

    const auto l96 = ResNetSystem::lorenz96_stencils(40);
    CHECK(l96[0] == std::vector<int>{38, 39, 0, 1});
    CHECK(l96[1] == std::vector<int>{39, 0, 1, 2});
    CHECK(l96[39] == std::vector<int>{37, 38, 39, 0});
    CHECK_THROWS_AS((void)ResNetSystem::lorenz96_stencils(3), std::invalid_argument);
}

TEST_CASE("duplicated nets on duplicated components give duplicated outputs") {
    std::mt19937_64 rng(12);
    const auto net = testing::random_net(2, 1, 5, 4, rng);
    ResNetSystem sys;
    sys.state_dim = 4;
    sys.nets = {net, net, net, net};
    sys.stencils = {{0, 1}, {2, 3}, {0, 1}, {2, 3}};
    Vector u(4);
    u << 0.3, -0.7, 0.3, -0.7;
    const Vector out = system_forward(sys, u);
    CHECK(out[0] == out[1]);
    CHECK(out[0] == out[2]);
    CHECK(out[0] == out[3]);
}

TEST_CASE("system_forward tags divergence with the component") {
    std::mt19937_64 rng(13);
    auto sys = testing::random_system(3, 4, 3, rng);
    sys.nets[2].closing(0, 0) = std::numeric_limits<double>::quiet_NaN();
    try {
        (void)system_forward(sys, Vector::Ones(3));
        FAIL("expected divergence");
    } catch (const DivergenceError& e) {
        CHECK(e.component() == 2);
    }
}

TEST_CASE("system validation") {
    std::mt19937_64 rng(14);
    auto sys = testing::random_system(3, 4, 3, rng);
    auto bad = sys;
    bad.stencils[1] = {0, 1, 5};
    CHECK_THROWS_AS(bad.validate(), DimensionError);
    bad = sys;
    bad.nets.pop_back();
    CHECK_THROWS_AS(bad.validate(), DimensionError);
    bad = sys;
    bad.nets[0] = testing::random_net(3, 1, 5, 3, rng);
    CHECK_THROWS_AS(bad.validate(), DimensionError);
}
