#include "wtal/detector.hpp"

#include <string>

#include "wtal/errors.hpp"
#include "wtal/init.hpp"

namespace wtal {

DetectorModel::DetectorModel(const DetectorConfig& config, RngStream& rng) : cfg_(config) {
    if (cfg_.input_dim == 0) throw ConfigError("detector: input_dim must be set");
    if (cfg_.hidden1 == 0 || cfg_.hidden2 == 0) {
        throw ConfigError("detector: hidden widths must be positive");
    }
    w1_ = params_.add("det.w1", glorot_uniform(cfg_.input_dim, cfg_.hidden1, rng));
    b1_ = params_.add("det.b1", Matrix(1, cfg_.hidden1));
    w2_ = params_.add("det.w2", glorot_uniform(cfg_.hidden1, cfg_.hidden2, rng));
    b2_ = params_.add("det.b2", Matrix(1, cfg_.hidden2));
    // Zero-init head: every token starts at score 0.5, so the two pseudo-label
    // error terms start balanced and the ranking hinge drives early training.
    w3_ = params_.add("det.w3", Matrix(cfg_.hidden2, 1));
    b3_ = params_.add("det.b3", Matrix(1, 1));
}

DetectorModel::Forward DetectorModel::forward(Tape& tape, const std::vector<Var>& vars,
                                              Var features) const {
    const Matrix& x = tape.value(features);
    if (x.cols() != cfg_.input_dim) {
        throw ConfigError("detector: input width " + std::to_string(x.cols()) +
                          " does not match configured " + std::to_string(cfg_.input_dim));
    }
    Var h1 = tape.softplus(tape.add_row(tape.matmul(features, vars[w1_]), vars[b1_]));
    Var embedding = tape.softplus(tape.add_row(tape.matmul(h1, vars[w2_]), vars[b2_]));
    Var logits = tape.add_row(tape.matmul(embedding, vars[w3_]), vars[b3_]);
    Var scores = tape.sigmoid(logits);
    return Forward{scores, embedding};
}

}  // namespace wtal
