#include "wtal/oe.hpp"

#include <cmath>
#include <string>

#include "wtal/errors.hpp"
#include "wtal/init.hpp"

namespace wtal {

Matrix sinusoidal_encoding(std::size_t t_rows, std::size_t width) {
    if (width % 2 != 0) {
        throw ConfigError("sinusoidal_encoding: width must be even, got " +
                          std::to_string(width));
    }
    Matrix p(t_rows, width);
    for (std::size_t i = 0; i < t_rows; ++i) {
        for (std::size_t k = 0; k < width / 2; ++k) {
            const double rate =
                std::pow(10000.0, -2.0 * static_cast<double>(k) / static_cast<double>(width));
            const double angle = static_cast<double>(i) * rate;
            p.at(i, 2 * k) = std::sin(angle);
            p.at(i, 2 * k + 1) = std::cos(angle);
        }
    }
    return p;
}

Matrix outlier_position_embedding(const std::vector<double>& e, std::size_t width) {
    for (std::size_t i = 0; i < e.size(); ++i) {
        if (e[i] < 0.0) {
            throw ArgumentError("outlier_position_embedding: negative score at token " +
                                std::to_string(i));
        }
    }
    Matrix p = sinusoidal_encoding(e.size(), width);
    double mean = 0.0;
    for (double v : e) mean += v;
    mean /= static_cast<double>(e.size());
    for (std::size_t i = 0; i < e.size(); ++i) {
        const double scale = 1.0 + e[i] / (mean + 1e-8);
        for (std::size_t j = 0; j < width; ++j) p.at(i, j) *= scale;
    }
    return p;
}

Var outlier_position_embedding(Tape& tape, Var e, std::size_t width) {
    const Matrix& ev = tape.value(e);
    if (ev.cols() != 1) throw ArgumentError("outlier_position_embedding: e must be T x 1");
    Var base = tape.leaf(sinusoidal_encoding(ev.rows(), width));
    Var norm = tape.add_const(tape.mean(e), 1e-8);
    Var scaled = tape.add_const(tape.div_scalar(e, norm), 1.0);
    return tape.row_scale(base, scaled);
}

double reconstruction_loss(const Matrix& f, const Matrix& recon) {
    if (!f.same_shape(recon)) throw ArgumentError("reconstruction_loss: shape mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double d = f[i] - recon[i];
        acc += d * d;
    }
    return acc;
}

OeModel::OeModel(const OeConfig& config, RngStream& rng) : cfg_(config) {
    if (cfg_.input_dim == 0) throw ConfigError("oe: input_dim must be set");
    if (cfg_.hidden >= cfg_.input_dim) {
        throw ConfigError("oe: hidden width " + std::to_string(cfg_.hidden) +
                          " must stay below input dim " + std::to_string(cfg_.input_dim));
    }
    if (cfg_.embed_dim % 2 != 0) throw ConfigError("oe: embed_dim must be even");
    enc_w_ = params_.add("oe.enc_w", glorot_uniform(cfg_.input_dim, cfg_.hidden, rng));
    enc_b_ = params_.add("oe.enc_b", Matrix(1, cfg_.hidden));
    dec_w_ = params_.add("oe.dec_w", glorot_uniform(cfg_.hidden, cfg_.input_dim, rng));
    dec_b_ = params_.add("oe.dec_b", Matrix(1, cfg_.input_dim));
    pos_scale_ = params_.add("oe.pos_scale", Matrix::full(1, cfg_.embed_dim, cfg_.pos_scale_init));
}

OeModel::Forward OeModel::forward(Tape& tape, const std::vector<Var>& vars, Var input) const {
    const Matrix& x = tape.value(input);
    if (x.cols() != cfg_.input_dim) {
        throw ConfigError("oe: input width " + std::to_string(x.cols()) +
                          " does not match model dim " + std::to_string(cfg_.input_dim));
    }
    Var hidden = tape.tanh_act(tape.add_row(tape.matmul(input, vars[enc_w_]), vars[enc_b_]));
    Var recon = tape.add_row(tape.matmul(hidden, vars[dec_w_]), vars[dec_b_]);
    Var diff = tape.sub(input, recon);
    Var err = tape.scale(tape.row_sum(tape.mul(diff, diff)),
                         1.0 / static_cast<double>(cfg_.input_dim));
    return Forward{recon, err};
}

Var OeModel::position_embedding(Tape& tape, const std::vector<Var>& vars,
                                Var token_error) const {
    Var emb = outlier_position_embedding(tape, token_error, cfg_.embed_dim);
    return tape.col_scale(emb, vars[pos_scale_]);
}

std::pair<Matrix, std::vector<double>> OeModel::reconstruct(const Matrix& features) const {
    Tape tape;
    std::vector<Var> vars = params_.leaves(tape);
    Var input = tape.leaf(features);
    Forward fwd = forward(tape, vars, input);
    const Matrix& err = tape.value(fwd.token_error);
    std::vector<double> e(err.rows());
    for (std::size_t i = 0; i < err.rows(); ++i) e[i] = err.at(i, 0);
    return {tape.value(fwd.recon), std::move(e)};
}

double oe_train_step(const std::vector<const FeatureSequence*>& batch, OeModel& model,
                     AdamState& opt) {
    if (batch.empty()) throw ArgumentError("oe_train_step: empty batch");
    for (const FeatureSequence* seq : batch) {
        if (seq->label != Label::typical) {
            throw DataError("oe_train_step: atypical sequence '" + seq->id +
                            "' in a typical-only batch");
        }
    }
    Tape tape;
    std::vector<Var> vars = model.params().leaves(tape);
    std::vector<Var> item_losses;
    for (const FeatureSequence* seq : batch) {
        Var input = tape.leaf(seq->features);
        OeModel::Forward fwd = model.forward(tape, vars, input);
        Var diff = tape.sub(input, fwd.recon);
        item_losses.push_back(tape.sum(tape.mul(diff, diff)));
    }
    Var loss = tape.scale(tape.sum(tape.concat_rows(item_losses)),
                          1.0 / static_cast<double>(batch.size()));
    tape.backward(loss);
    model.params().zero_grads();
    model.params().accumulate_grads(tape, vars);
    adam_step(model.params(), opt);
    model.params().zero_grads();
    return tape.scalar(loss);
}

}  // namespace wtal
