#pragma once

#include <vector>

#include "wtal/adam.hpp"
#include "wtal/losses.hpp"
#include "wtal/matrix.hpp"
#include "wtal/rng.hpp"
#include "wtal/tape.hpp"

namespace wtal {

// Kernel-3 temporal convolution with symmetric zero padding and a softplus
// nonlinearity; length-preserving. weights: (3 * C_in) x C_out laid out as
// [tap -1 | tap 0 | tap +1] blocks, bias: 1 x C_out.
Var tcn_layer(Tape& tape, Var tokens, Var weights, Var bias);

struct SeverityPrediction {
    int predicted_class = 0;
    std::vector<double> cumulative_probs;
    std::vector<double> logits;
};

struct RegressorConfig {
    std::size_t input_dim = 0;                         // D
    std::size_t embed_dim = 128;                       // detector embedding width
    std::vector<std::size_t> tcn_channels{512, 256, 128};
    std::vector<std::size_t> mlp_hidden{128, 64};
    int num_classes = 4;                               // K

    void validate() const;
};

// Severity head: temporal convolutions downsample the raw features in
// channel space, the result is fused with the frozen detector embedding,
// a per-token MLP emits K-1 rank logits and a temporal max-pool reduces
// them to the video-level logits.
class RegressorModel {
public:
    RegressorModel(const RegressorConfig& config, RngStream& rng);

    const RegressorConfig& config() const { return cfg_; }
    ParamSet& params() { return params_; }
    const ParamSet& params() const { return params_; }

    // features: T x D, embedding: T x embed_dim; returns 1 x (K-1) logits.
    Var forward(Tape& tape, const std::vector<Var>& vars, Var features, Var embedding) const;

    SeverityPrediction predict(const Matrix& features, const Matrix& embedding) const;

private:
    RegressorConfig cfg_;
    ParamSet params_;
    std::vector<std::size_t> tcn_w_, tcn_b_, mlp_w_, mlp_b_;
};

}  // namespace wtal
