#pragma once

#include "connlatent/common.hpp"
#include "connlatent/nn.hpp"
#include "connlatent/rng.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

namespace connlatent {

struct DvaeTrainConfig {
    int epochs = 300;
    int batch_size = 64;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
    std::vector<Index> hidden_dims = {512, 128};
    Index latent_dim = 5;
    double noise_variance = 0.1;
    // weight-init multiplier; small values make early training favor the
    // dominant data directions over memorizing individual samples, which is
    // what keeps the latents informative on held-out subjects when n << V
    double init_scale = 0.1;
};

// Encoder trunk with twin linear heads for (mu, log sigma^2), mirrored
// decoder. Hidden layers are relu, outputs linear.
struct DvaeModel {
    Net encoder_trunk;
    Net mu_head;
    Net logvar_head;
    Net decoder;
    Index latent_dim = 0;
    double noise_variance = 0.0;
    Index input_dim = 0;
};

inline DvaeModel make_dvae(Index input_dim, const DvaeTrainConfig& cfg, Rng& rng) {
    if (cfg.latent_dim < 1) throw ConfigError("latent_dim must be at least 1");
    if (cfg.noise_variance < 0.0) throw ConfigError("noise_variance must be nonnegative");
    DvaeModel model;
    model.latent_dim = cfg.latent_dim;
    model.noise_variance = cfg.noise_variance;
    model.input_dim = input_dim;

    Index prev = input_dim;
    for (Index h : cfg.hidden_dims) {
        model.encoder_trunk.push_back(make_layer(prev, h, Activation::relu, rng, cfg.init_scale));
        prev = h;
    }
    if (model.encoder_trunk.empty()) throw ConfigError("encoder needs at least one hidden layer");
    model.mu_head.push_back(make_layer(prev, cfg.latent_dim, Activation::identity, rng, cfg.init_scale));
    model.logvar_head.push_back(make_layer(prev, cfg.latent_dim, Activation::identity, rng, cfg.init_scale));

    prev = cfg.latent_dim;
    for (auto it = cfg.hidden_dims.rbegin(); it != cfg.hidden_dims.rend(); ++it) {
        model.decoder.push_back(make_layer(prev, *it, Activation::relu, rng, cfg.init_scale));
        prev = *it;
    }
    model.decoder.push_back(make_layer(prev, input_dim, Activation::identity, rng, cfg.init_scale));
    return model;
}

struct ElboTerms {
    double loss = 0.0;
    double recon = 0.0;
    double kl = 0.0;
};

struct DvaeGradients {
    NetGradients encoder_trunk;
    NetGradients mu_head;
    NetGradients logvar_head;
    NetGradients decoder;
};

// Negative ELBO for one batch with an explicit reparameterization sample
// `eps` (n x latent): z = mu + exp(logvar/2) * eps. The encoder consumes the
// noisy inputs, reconstruction is measured against the clean ones.
//   recon = mean over batch of  0.5 * ||x_clean - decode(z)||^2
//   kl    = mean over batch of  0.5 * sum_d (mu^2 + exp(logvar) - 1 - logvar)
// Pass `grads` to also compute exact reverse-mode parameter gradients.
inline ElboTerms elbo_loss(const DvaeModel& model, const Matrix& x_clean, const Matrix& x_noisy,
                           const Matrix& eps, DvaeGradients* grads = nullptr) {
    const Index n = x_clean.rows();
    if (x_noisy.rows() != n || x_noisy.cols() != x_clean.cols())
        throw ShapeError("clean and noisy batches must have identical shape");
    if (x_clean.cols() != model.input_dim) throw ShapeError("batch width does not match model input_dim");
    if (eps.rows() != n || eps.cols() != model.latent_dim)
        throw ShapeError("noise sample must be batch x latent_dim");

    const ForwardTape trunk_tape = net_forward(model.encoder_trunk, x_noisy);
    const ForwardTape mu_tape = net_forward(model.mu_head, trunk_tape.output());
    const ForwardTape lv_tape = net_forward(model.logvar_head, trunk_tape.output());
    const Matrix& mu = mu_tape.output();
    const Matrix& logvar = lv_tape.output();

    const Matrix std_dev = (0.5 * logvar.array()).exp().matrix();
    const Matrix z = mu + std_dev.cwiseProduct(eps);
    const ForwardTape dec_tape = net_forward(model.decoder, z);

    const Matrix diff = dec_tape.output() - x_clean;
    const double inv_n = 1.0 / static_cast<double>(n);

    ElboTerms terms;
    terms.recon = 0.5 * inv_n * diff.squaredNorm();
    terms.kl = 0.5 * inv_n *
               (mu.array().square() + logvar.array().exp() - 1.0 - logvar.array()).sum();
    terms.loss = terms.recon + terms.kl;
    if (!std::isfinite(terms.loss)) throw TrainError("non-finite DVAE loss");

    if (grads) {
        const Matrix d_xrec = inv_n * diff;
        grads->decoder = net_backward(model.decoder, dec_tape, d_xrec);
        const Matrix& dz = grads->decoder.input;

        const Matrix d_mu = dz + inv_n * mu;
        const Matrix d_logvar = 0.5 * dz.cwiseProduct(eps).cwiseProduct(std_dev) +
                                0.5 * inv_n * (logvar.array().exp() - 1.0).matrix();
        grads->mu_head = net_backward(model.mu_head, mu_tape, d_mu);
        grads->logvar_head = net_backward(model.logvar_head, lv_tape, d_logvar);

        const Matrix d_trunk = grads->mu_head.input + grads->logvar_head.input;
        grads->encoder_trunk = net_backward(model.encoder_trunk, trunk_tape, d_trunk);
    }
    return terms;
}

struct LatentFeatures {
    Matrix mu;      // n x latent_dim
    Matrix logvar;  // n x latent_dim

    // Classifier input [mu || logvar], width 2 * latent_dim.
    Matrix concat() const {
        Matrix out(mu.rows(), mu.cols() + logvar.cols());
        out.leftCols(mu.cols()) = mu;
        out.rightCols(logvar.cols()) = logvar;
        return out;
    }
};

// Encoder run on clean inputs; no noise, no sampling.
inline LatentFeatures extract(const DvaeModel& model, const Matrix& features) {
    if (features.cols() != model.input_dim) throw ShapeError("feature width does not match model input_dim");
    const ForwardTape trunk_tape = net_forward(model.encoder_trunk, features);
    LatentFeatures out;
    out.mu = net_forward(model.mu_head, trunk_tape.output()).output();
    out.logvar = net_forward(model.logvar_head, trunk_tape.output()).output();
    return out;
}

struct DvaeTrainResult {
    DvaeModel model;
    std::vector<ElboTerms> curve;  // one entry per epoch
};

// Minibatch training with fresh Gaussian input noise per minibatch and the
// clean inputs as reconstruction targets. Deterministic given cfg.seed.
inline DvaeTrainResult train_dvae(const Matrix& features, const DvaeTrainConfig& cfg) {
    const Index n = features.rows();
    if (cfg.epochs < 1) throw ConfigError("epochs must be at least 1");
    if (cfg.batch_size < 1) throw ConfigError("batch_size must be at least 1");
    if (n < cfg.batch_size) throw TrainError("fewer samples than batch_size");

    Rng root(derive_seed(cfg.seed, 11));
    Rng init_rng = root.stream(0);

    DvaeTrainResult result;
    result.model = make_dvae(features.cols(), cfg, init_rng);
    DvaeModel& model = result.model;

    const AdamConfig adam_cfg{cfg.learning_rate, 0.9, 0.999, 1e-8};
    AdamState opt_trunk = make_adam(model.encoder_trunk, adam_cfg);
    AdamState opt_mu = make_adam(model.mu_head, adam_cfg);
    AdamState opt_lv = make_adam(model.logvar_head, adam_cfg);
    AdamState opt_dec = make_adam(model.decoder, adam_cfg);

    const double noise_std = std::sqrt(cfg.noise_variance);
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng epoch_rng = root.stream(static_cast<std::uint64_t>(epoch) + 1);
        epoch_rng.shuffle(order);

        ElboTerms epoch_sum;
        int batches = 0;
        for (Index start = 0; start < n; start += cfg.batch_size) {
            const Index size = std::min<Index>(cfg.batch_size, n - start);
            Matrix x_clean(size, features.cols());
            for (Index r = 0; r < size; ++r)
                x_clean.row(r) = features.row(order[static_cast<std::size_t>(start + r)]);

            Matrix x_noisy = x_clean;
            if (noise_std > 0.0) {
                for (Index r = 0; r < size; ++r)
                    for (Index c = 0; c < x_noisy.cols(); ++c) x_noisy(r, c) += noise_std * epoch_rng.normal();
            }
            Matrix eps(size, model.latent_dim);
            for (Index r = 0; r < size; ++r)
                for (Index c = 0; c < model.latent_dim; ++c) eps(r, c) = epoch_rng.normal();

            DvaeGradients grads;
            ElboTerms terms;
            try {
                terms = elbo_loss(model, x_clean, x_noisy, eps, &grads);
                adam_step(opt_trunk, model.encoder_trunk, grads.encoder_trunk);
                adam_step(opt_mu, model.mu_head, grads.mu_head);
                adam_step(opt_lv, model.logvar_head, grads.logvar_head);
                adam_step(opt_dec, model.decoder, grads.decoder);
            } catch (const TrainError& e) {
                throw TrainError(std::string(e.what()) + " (epoch " + std::to_string(epoch) + ", batch " +
                                 std::to_string(batches) + ")");
            }
            epoch_sum.loss += terms.loss;
            epoch_sum.recon += terms.recon;
            epoch_sum.kl += terms.kl;
            ++batches;
        }
        result.curve.push_back({epoch_sum.loss / batches, epoch_sum.recon / batches, epoch_sum.kl / batches});
    }
    return result;
}

inline constexpr char kDvaeMagic[9] = "DVAE0001";

inline void save_dvae(const DvaeModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    out.write(kDvaeMagic, 8);
    detail::write_u64_le(out, static_cast<std::uint64_t>(model.latent_dim));
    detail::write_f64_le(out, model.noise_variance);
    detail::write_u64_le(out, static_cast<std::uint64_t>(model.input_dim));
    save_net(out, model.encoder_trunk);
    save_net(out, model.mu_head);
    save_net(out, model.logvar_head);
    save_net(out, model.decoder);
    if (!out) throw DataError("short write to '" + path + "'");
}

inline DvaeModel load_dvae(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    char magic[8] = {};
    in.read(magic, 8);
    if (in.gcount() != 8 || std::memcmp(magic, kDvaeMagic, 8) != 0)
        throw ParseError("'" + path + "' is not a DVAE model file");
    DvaeModel model;
    model.latent_dim = static_cast<Index>(detail::read_u64_le(in));
    model.noise_variance = detail::read_f64_le(in);
    model.input_dim = static_cast<Index>(detail::read_u64_le(in));
    model.encoder_trunk = load_net(in);
    model.mu_head = load_net(in);
    model.logvar_head = load_net(in);
    model.decoder = load_net(in);
    return model;
}

inline void write_loss_curve(const std::string& path, const std::vector<ElboTerms>& curve) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    out << "epoch,loss,recon,kl\n";
    for (std::size_t e = 0; e < curve.size(); ++e)
        out << e << ',' << fmt_double(curve[e].loss, 10) << ',' << fmt_double(curve[e].recon, 10) << ','
            << fmt_double(curve[e].kl, 10) << '\n';
}

}  // namespace connlatent
