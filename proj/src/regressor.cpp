#include "wtal/regressor.hpp"

#include <string>

#include "wtal/errors.hpp"
#include "wtal/init.hpp"

namespace wtal {

Var tcn_layer(Tape& tape, Var tokens, Var weights, Var bias) {
    const Matrix& x = tape.value(tokens);
    const Matrix& w = tape.value(weights);
    if (w.rows() != 3 * x.cols()) {
        throw ConfigError("tcn_layer: weight rows " + std::to_string(w.rows()) +
                          " do not match 3 * " + std::to_string(x.cols()) + " input channels");
    }
    Var window = tape.im2col_k3(tokens);
    return tape.softplus(tape.add_row(tape.matmul(window, weights), bias));
}

void RegressorConfig::validate() const {
    if (input_dim == 0) throw ConfigError("regressor: input_dim must be set");
    if (embed_dim == 0) throw ConfigError("regressor: embed_dim must be set");
    if (tcn_channels.empty()) throw ConfigError("regressor: need at least one TCN layer");
    if (num_classes < 2) throw ConfigError("regressor: need at least two classes");
}

RegressorModel::RegressorModel(const RegressorConfig& config, RngStream& rng) : cfg_(config) {
    cfg_.validate();
    std::size_t in_ch = cfg_.input_dim;
    for (std::size_t i = 0; i < cfg_.tcn_channels.size(); ++i) {
        const std::size_t out_ch = cfg_.tcn_channels[i];
        tcn_w_.push_back(params_.add("reg.tcn" + std::to_string(i) + "_w",
                                     glorot_uniform(3 * in_ch, out_ch, rng)));
        tcn_b_.push_back(params_.add("reg.tcn" + std::to_string(i) + "_b", Matrix(1, out_ch)));
        in_ch = out_ch;
    }
    std::size_t width = in_ch + cfg_.embed_dim;  // fusion by concatenation
    for (std::size_t i = 0; i < cfg_.mlp_hidden.size(); ++i) {
        const std::size_t out_w = cfg_.mlp_hidden[i];
        mlp_w_.push_back(params_.add("reg.mlp" + std::to_string(i) + "_w",
                                     glorot_uniform(width, out_w, rng)));
        mlp_b_.push_back(params_.add("reg.mlp" + std::to_string(i) + "_b", Matrix(1, out_w)));
        width = out_w;
    }
    const std::size_t out_w = static_cast<std::size_t>(cfg_.num_classes - 1);
    mlp_w_.push_back(params_.add("reg.head_w", glorot_uniform(width, out_w, rng)));
    mlp_b_.push_back(params_.add("reg.head_b", Matrix(1, out_w)));
}

Var RegressorModel::forward(Tape& tape, const std::vector<Var>& vars, Var features,
                            Var embedding) const {
    const Matrix& f = tape.value(features);
    const Matrix& e = tape.value(embedding);
    if (f.cols() != cfg_.input_dim) {
        throw ConfigError("regressor: feature width " + std::to_string(f.cols()) +
                          " does not match configured " + std::to_string(cfg_.input_dim));
    }
    if (e.cols() != cfg_.embed_dim || e.rows() != f.rows()) {
        throw ConfigError("regressor: embedding must be T x " + std::to_string(cfg_.embed_dim));
    }
    Var h = features;
    for (std::size_t i = 0; i < tcn_w_.size(); ++i) {
        h = tcn_layer(tape, h, vars[tcn_w_[i]], vars[tcn_b_[i]]);
    }
    Var fused = tape.concat_cols({h, embedding});
    Var z = fused;
    for (std::size_t i = 0; i < mlp_w_.size(); ++i) {
        z = tape.add_row(tape.matmul(z, vars[mlp_w_[i]]), vars[mlp_b_[i]]);
        if (i + 1 < mlp_w_.size()) z = tape.softplus(z);
    }
    return tape.col_max(z);  // video-level logits, 1 x (K-1)
}

SeverityPrediction RegressorModel::predict(const Matrix& features,
                                            const Matrix& embedding) const {
    Tape tape;
    std::vector<Var> vars = params_.leaves(tape);
    Var logits = forward(tape, vars, tape.leaf(features), tape.leaf(embedding));
    const Matrix& z = tape.value(logits);
    std::vector<double> values(z.cols());
    for (std::size_t k = 0; k < z.cols(); ++k) values[k] = z.at(0, k);
    CornPrediction corn = corn_predict(values);
    SeverityPrediction out;
    out.predicted_class = corn.predicted_class;
    out.cumulative_probs = std::move(corn.cumulative_probs);
    out.logits = std::move(values);
    return out;
}

}  // namespace wtal
