#include "connlatent/nn.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace connlatent;

namespace {

// central finite difference of a scalar function of one parameter entry
template <class Loss>
double central_diff(double& param, const Loss& loss, double h = 1e-6) {
    const double saved = param;
    param = saved + h;
    const double up = loss();
    param = saved - h;
    const double down = loss();
    param = saved;
    return (up - down) / (2.0 * h);
}

}  // namespace

TEST(Forward, ZeroNetworkGivesZeros) {
    Net net(1);
    net[0].weights = Matrix::Zero(3, 4);
    net[0].bias = Vector::Zero(3);
    net[0].activation = Activation::identity;
    const auto tape = net_forward(net, Matrix::Random(5, 4));
    EXPECT_TRUE((tape.output().array() == 0.0).all());
}

TEST(Forward, ReluClampsNegative) {
    Net net(1);
    net[0].weights = Matrix::Identity(2, 2);
    net[0].bias = Vector::Zero(2);
    net[0].activation = Activation::relu;
    Matrix x(1, 2);
    x << -1.0, 2.0;
    const auto tape = net_forward(net, x);
    EXPECT_DOUBLE_EQ(tape.output()(0, 0), 0.0);
    EXPECT_DOUBLE_EQ(tape.output()(0, 1), 2.0);
}

TEST(Forward, ShapeContract) {
    Rng rng(3);
    const Net net = make_mlp(7, {5}, 4, Activation::identity, rng);
    const auto tape = net_forward(net, Matrix::Random(3, 7));
    EXPECT_EQ(tape.output().rows(), 3);
    EXPECT_EQ(tape.output().cols(), 4);
    EXPECT_THROW(net_forward(net, Matrix::Random(3, 6)), ShapeError);
}

TEST(Backward, LinearLayerSumLossGradient) {
    // identity layer, loss = sum of outputs: dW row r = column sums of X
    Net net(1);
    net[0].weights = Matrix::Identity(3, 3);
    net[0].bias = Vector::Zero(3);
    net[0].activation = Activation::identity;
    Matrix x(4, 3);
    x << 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12;
    const auto tape = net_forward(net, x);
    const auto grads = net_backward(net, tape, Matrix::Ones(4, 3));
    const Vector colsum = x.colwise().sum();
    for (Index r = 0; r < 3; ++r)
        for (Index c = 0; c < 3; ++c) EXPECT_DOUBLE_EQ(grads.weights[0](r, c), colsum(c));
    for (Index r = 0; r < 3; ++r) EXPECT_DOUBLE_EQ(grads.bias[0](r), 4.0);
}

TEST(Backward, ReluAtZeroUsesZeroSubgradient) {
    Net net(1);
    net[0].weights = Matrix::Identity(1, 1);
    net[0].bias = Vector::Zero(1);
    net[0].activation = Activation::relu;
    Matrix x(1, 1);
    x << 0.0;
    const auto tape = net_forward(net, x);
    const auto grads = net_backward(net, tape, Matrix::Ones(1, 1));
    EXPECT_DOUBLE_EQ(grads.weights[0](0, 0), 0.0);
    EXPECT_DOUBLE_EQ(grads.input(0, 0), 0.0);
}

TEST(Backward, MatchesFiniteDifferencesOnRandomNet) {
    Rng rng(17);
    Net net = make_mlp(6, {8, 5}, 3, Activation::identity, rng);
    Matrix x(4, 6);
    for (Index r = 0; r < x.rows(); ++r)
        for (Index c = 0; c < x.cols(); ++c) x(r, c) = rng.normal();
    Matrix w(4, 3);
    for (Index r = 0; r < w.rows(); ++r)
        for (Index c = 0; c < w.cols(); ++c) w(r, c) = rng.normal();

    const auto loss = [&]() { return net_forward(net, x).output().cwiseProduct(w).sum(); };
    const auto tape = net_forward(net, x);
    const auto grads = net_backward(net, tape, w);

    Rng pick(99);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t layer = pick.uniform_int(net.size());
        auto& weights = net[layer].weights;
        const Index r = static_cast<Index>(pick.uniform_int(static_cast<std::uint64_t>(weights.rows())));
        const Index c = static_cast<Index>(pick.uniform_int(static_cast<std::uint64_t>(weights.cols())));
        const double fd = central_diff(weights(r, c), loss);
        const double analytic = grads.weights[layer](r, c);
        const double rel = std::abs(analytic - fd) / std::max({std::abs(analytic), std::abs(fd), 1e-4});
        EXPECT_LT(rel, 1e-6) << "layer " << layer << " (" << r << "," << c << ")";
    }
}

TEST(Backward, GradChecksEveryDvaeLayerShape) {
    // the layer geometries the default DVAE uses, scaled down in width
    const std::vector<std::tuple<Index, Index, Activation>> configs = {
        {20, 16, Activation::relu},   // trunk front
        {16, 8, Activation::relu},    // trunk back / decoder hidden
        {8, 5, Activation::identity}, // heads
        {5, 8, Activation::relu},     // decoder front
        {8, 20, Activation::identity} // decoder output
    };
    Rng rng(23);
    for (const auto& [in, out, act] : configs) {
        Net net = {make_layer(in, out, act, rng)};
        Matrix x(3, in);
        for (Index r = 0; r < x.rows(); ++r)
            for (Index c = 0; c < x.cols(); ++c) x(r, c) = rng.normal();
        Matrix w(3, out);
        for (Index r = 0; r < w.rows(); ++r)
            for (Index c = 0; c < w.cols(); ++c) w(r, c) = rng.normal();

        const auto loss = [&]() { return net_forward(net, x).output().cwiseProduct(w).sum(); };
        const auto grads = net_backward(net, net_forward(net, x), w);
        for (int trial = 0; trial < 40; ++trial) {
            const Index r = static_cast<Index>(rng.uniform_int(static_cast<std::uint64_t>(out)));
            const Index c = static_cast<Index>(rng.uniform_int(static_cast<std::uint64_t>(in)));
            const double fd = central_diff(net[0].weights(r, c), loss);
            const double analytic = grads.weights[0](r, c);
            const double rel = std::abs(analytic - fd) / std::max({std::abs(analytic), std::abs(fd), 1e-4});
            EXPECT_LT(rel, 1e-6);
        }
    }
}

TEST(Forward, DeterministicForIdenticalInputs) {
    Rng rng(4);
    const Net net = make_mlp(10, {6}, 2, Activation::identity, rng);
    const Matrix x = Matrix::Random(8, 10);
    const Matrix a = net_forward(net, x).output();
    const Matrix b = net_forward(net, x).output();
    EXPECT_TRUE((a.array() == b.array()).all());
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
    Rng rng(6);
    Net net = make_mlp(3, {4}, 2, Activation::identity, rng);
    const Net before = net;
    AdamState opt = make_adam(net, {});
    NetGradients grads;
    for (const auto& layer : net) {
        grads.weights.push_back(Matrix::Zero(layer.out_dim(), layer.in_dim()));
        grads.bias.push_back(Vector::Zero(layer.out_dim()));
    }
    adam_step(opt, net, grads);
    for (std::size_t l = 0; l < net.size(); ++l)
        EXPECT_TRUE((net[l].weights.array() == before[l].weights.array()).all());
}

TEST(Adam, FirstStepMovesByLearningRateAgainstGradientSign) {
    Net net(1);
    net[0].weights = Matrix::Zero(1, 2);
    net[0].bias = Vector::Zero(1);
    net[0].activation = Activation::identity;
    AdamState opt = make_adam(net, {0.01, 0.9, 0.999, 1e-8});
    NetGradients grads;
    grads.weights.push_back((Matrix(1, 2) << 3.0, -0.5).finished());
    grads.bias.push_back(Vector::Zero(1));
    adam_step(opt, net, grads);
    EXPECT_NEAR(net[0].weights(0, 0), -0.01, 1e-6);
    EXPECT_NEAR(net[0].weights(0, 1), 0.01, 1e-6);
}

TEST(Adam, ConvergesOnScalarQuadratic) {
    // f(w) = w^2 from w=1 with lr=0.05
    Net net(1);
    net[0].weights = Matrix::Constant(1, 1, 1.0);
    net[0].bias = Vector::Zero(1);
    net[0].activation = Activation::identity;
    AdamState opt = make_adam(net, {0.05, 0.9, 0.999, 1e-8});
    for (int step = 0; step < 200; ++step) {
        NetGradients grads;
        grads.weights.push_back(Matrix::Constant(1, 1, 2.0 * net[0].weights(0, 0)));
        grads.bias.push_back(Vector::Zero(1));
        adam_step(opt, net, grads);
    }
    EXPECT_LT(std::abs(net[0].weights(0, 0)), 0.1);
}

TEST(Adam, NonFiniteGradientIsTrainError) {
    Rng rng(8);
    Net net = make_mlp(2, {}, 1, Activation::identity, rng);
    AdamState opt = make_adam(net, {});
    NetGradients grads;
    grads.weights.push_back(Matrix::Constant(1, 2, std::numeric_limits<double>::quiet_NaN()));
    grads.bias.push_back(Vector::Zero(1));
    EXPECT_THROW(adam_step(opt, net, grads), TrainError);
}

TEST(NetIo, RoundTripIsBitExact) {
    Rng rng(14);
    const Net net = make_mlp(9, {4, 3}, 2, Activation::identity, rng);
    std::stringstream buffer;
    save_net(buffer, net);
    const Net back = load_net(buffer);
    ASSERT_EQ(back.size(), net.size());
    for (std::size_t l = 0; l < net.size(); ++l) {
        EXPECT_EQ(back[l].activation, net[l].activation);
        EXPECT_TRUE((back[l].weights.array() == net[l].weights.array()).all());
        EXPECT_TRUE((back[l].bias.array() == net[l].bias.array()).all());
    }
}
