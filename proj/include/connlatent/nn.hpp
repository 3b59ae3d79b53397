#pragma once

#include "connlatent/common.hpp"
#include "connlatent/io.hpp"
#include "connlatent/rng.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace connlatent {

enum class Activation : std::uint8_t { relu = 0, identity = 1 };

struct DenseLayer {
    Matrix weights;  // out x in
    Vector bias;     // out
    Activation activation = Activation::identity;

    Index in_dim() const { return weights.cols(); }
    Index out_dim() const { return weights.rows(); }
};

using Net = std::vector<DenseLayer>;

// He-style fan-in initialization for relu layers, Glorot-style for linear
// ones, multiplied by `scale`. Scales well below 1 start the network close
// to zero, which steers early training toward the dominant data directions
// before sample-specific detail can be memorized.
inline DenseLayer make_layer(Index in, Index out, Activation act, Rng& rng, double scale = 1.0) {
    DenseLayer layer;
    layer.weights.resize(out, in);
    const double std_dev = scale * (act == Activation::relu ? std::sqrt(2.0 / static_cast<double>(in))
                                                            : std::sqrt(1.0 / static_cast<double>(in)));
    for (Index r = 0; r < out; ++r)
        for (Index c = 0; c < in; ++c) layer.weights(r, c) = std_dev * rng.normal();
    layer.bias = Vector::Zero(out);
    layer.activation = act;
    return layer;
}

inline Net make_mlp(Index in, const std::vector<Index>& hidden, Index out, Activation out_act, Rng& rng) {
    Net net;
    Index prev = in;
    for (Index h : hidden) {
        net.push_back(make_layer(prev, h, Activation::relu, rng));
        prev = h;
    }
    net.push_back(make_layer(prev, out, out_act, rng));
    return net;
}

// Forward pass over a batch (rows = samples) recording the intermediates
// needed for exact reverse-mode gradients.
struct ForwardTape {
    Matrix input;
    std::vector<Matrix> pre;   // preactivations per layer
    std::vector<Matrix> post;  // activations per layer

    const Matrix& output() const { return post.back(); }
};

inline Matrix apply_activation(const Matrix& pre, Activation act) {
    if (act == Activation::relu) return pre.cwiseMax(0.0);
    return pre;
}

inline ForwardTape net_forward(const Net& net, const Matrix& x) {
    if (net.empty()) throw ShapeError("network has no layers");
    if (x.cols() != net.front().in_dim())
        throw ShapeError("input width " + std::to_string(x.cols()) + " does not match layer input dim " +
                         std::to_string(net.front().in_dim()));
    ForwardTape tape;
    tape.input = x;
    tape.pre.reserve(net.size());
    tape.post.reserve(net.size());
    const Matrix* current = &tape.input;
    for (const auto& layer : net) {
        if (current->cols() != layer.in_dim()) throw ShapeError("inconsistent layer dimensions");
        Matrix pre = (*current) * layer.weights.transpose();
        pre.rowwise() += layer.bias.transpose();
        tape.pre.push_back(std::move(pre));
        tape.post.push_back(apply_activation(tape.pre.back(), layer.activation));
        current = &tape.post.back();
    }
    return tape;
}

struct NetGradients {
    std::vector<Matrix> weights;
    std::vector<Vector> bias;
    Matrix input;  // gradient with respect to the net input

    void accumulate(const NetGradients& other) {
        for (std::size_t l = 0; l < weights.size(); ++l) {
            weights[l] += other.weights[l];
            bias[l] += other.bias[l];
        }
    }
};

// Exact reverse-mode gradients of a scalar loss given d(loss)/d(output).
// relu uses subgradient 0 at exactly 0.
inline NetGradients net_backward(const Net& net, const ForwardTape& tape, const Matrix& output_grad) {
    if (tape.post.size() != net.size()) throw ShapeError("tape does not match network");
    if (output_grad.rows() != tape.output().rows() || output_grad.cols() != tape.output().cols())
        throw ShapeError("loss gradient shape does not match forward output");

    NetGradients grads;
    grads.weights.resize(net.size());
    grads.bias.resize(net.size());

    Matrix delta = output_grad;
    for (std::size_t l = net.size(); l-- > 0;) {
        if (net[l].activation == Activation::relu)
            delta = delta.cwiseProduct((tape.pre[l].array() > 0.0).cast<double>().matrix());
        const Matrix& layer_input = l == 0 ? tape.input : tape.post[l - 1];
        grads.weights[l].noalias() = delta.transpose() * layer_input;
        grads.bias[l] = delta.colwise().sum();
        if (l > 0) delta = delta * net[l].weights;
        else grads.input.noalias() = delta * net[l].weights;
    }
    return grads;
}

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    AdamConfig cfg;
    long step = 0;
    std::vector<Matrix> m_w, v_w;
    std::vector<Vector> m_b, v_b;
};

inline AdamState make_adam(const Net& net, const AdamConfig& cfg) {
    AdamState state;
    state.cfg = cfg;
    for (const auto& layer : net) {
        state.m_w.push_back(Matrix::Zero(layer.out_dim(), layer.in_dim()));
        state.v_w.push_back(Matrix::Zero(layer.out_dim(), layer.in_dim()));
        state.m_b.push_back(Vector::Zero(layer.out_dim()));
        state.v_b.push_back(Vector::Zero(layer.out_dim()));
    }
    return state;
}

// Bias-corrected adaptive-moment update applied in place.
inline void adam_step(AdamState& state, Net& net, const NetGradients& grads) {
    if (grads.weights.size() != net.size()) throw ShapeError("gradient count does not match network");
    for (std::size_t l = 0; l < net.size(); ++l) {
        if (!grads.weights[l].allFinite() || !grads.bias[l].allFinite())
            throw TrainError("non-finite gradient in layer " + std::to_string(l));
    }
    state.step += 1;
    const auto& cfg = state.cfg;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t l = 0; l < net.size(); ++l) {
        state.m_w[l] = cfg.beta1 * state.m_w[l] + (1.0 - cfg.beta1) * grads.weights[l];
        state.v_w[l] = cfg.beta2 * state.v_w[l] + (1.0 - cfg.beta2) * grads.weights[l].cwiseAbs2();
        state.m_b[l] = cfg.beta1 * state.m_b[l] + (1.0 - cfg.beta1) * grads.bias[l];
        state.v_b[l] = cfg.beta2 * state.v_b[l] + (1.0 - cfg.beta2) * grads.bias[l].cwiseAbs2();

        net[l].weights.array() -= cfg.learning_rate * (state.m_w[l].array() / bc1) /
                                  ((state.v_w[l].array() / bc2).sqrt() + cfg.epsilon);
        net[l].bias.array() -= cfg.learning_rate * (state.m_b[l].array() / bc1) /
                               ((state.v_b[l].array() / bc2).sqrt() + cfg.epsilon);
    }
}

inline constexpr char kNetMagic[9] = "NNET0001";

inline void save_net(std::ostream& out, const Net& net) {
    out.write(kNetMagic, 8);
    detail::write_u64_le(out, net.size());
    for (const auto& layer : net) {
        detail::write_u64_le(out, static_cast<std::uint64_t>(layer.in_dim()));
        detail::write_u64_le(out, static_cast<std::uint64_t>(layer.out_dim()));
        out.put(static_cast<char>(layer.activation));
        for (Index r = 0; r < layer.out_dim(); ++r)
            for (Index c = 0; c < layer.in_dim(); ++c) detail::write_f64_le(out, layer.weights(r, c));
        for (Index r = 0; r < layer.out_dim(); ++r) detail::write_f64_le(out, layer.bias(r));
    }
}

inline void save_net(const std::string& path, const Net& net) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    save_net(out, net);
    if (!out) throw DataError("short write to '" + path + "'");
}

inline Net load_net(std::istream& in) {
    char magic[8] = {};
    in.read(magic, 8);
    if (in.gcount() != 8 || std::memcmp(magic, kNetMagic, 8) != 0)
        throw ParseError("stream is not a serialized network");
    const std::uint64_t count = detail::read_u64_le(in);
    Net net;
    net.reserve(count);
    for (std::uint64_t l = 0; l < count; ++l) {
        const Index in_dim = static_cast<Index>(detail::read_u64_le(in));
        const Index out_dim = static_cast<Index>(detail::read_u64_le(in));
        const int act = in.get();
        if (act != 0 && act != 1) throw ParseError("unknown activation code in network stream");
        DenseLayer layer;
        layer.activation = static_cast<Activation>(act);
        layer.weights.resize(out_dim, in_dim);
        layer.bias.resize(out_dim);
        for (Index r = 0; r < out_dim; ++r)
            for (Index c = 0; c < in_dim; ++c) layer.weights(r, c) = detail::read_f64_le(in);
        for (Index r = 0; r < out_dim; ++r) layer.bias(r) = detail::read_f64_le(in);
        net.push_back(std::move(layer));
    }
    if (!in) throw ParseError("truncated network stream");
    return net;
}

inline Net load_net(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    return load_net(in);
}

}  // namespace connlatent
