#pragma once

#include <vector>

#include "wtal/adam.hpp"
#include "wtal/feature_io.hpp"
#include "wtal/matrix.hpp"
#include "wtal/rng.hpp"
#include "wtal/tape.hpp"

namespace wtal {

// Plain sinusoidal positional encoding, alternating sin/cos channel pairs.
// width must be even.
Matrix sinusoidal_encoding(std::size_t t_rows, std::size_t width);

// Position embedding modulated by per-token outlier scores: row i carries
// the sinusoidal code scaled by (1 + e_i / (mean(e) + 1e-8)).
Matrix outlier_position_embedding(const std::vector<double>& e, std::size_t width);
Var outlier_position_embedding(Tape& tape, Var e, std::size_t width);  // e: T x 1

// Squared Frobenius residual, the per-item reconstruction objective.
double reconstruction_loss(const Matrix& f, const Matrix& recon);

struct OeConfig {
    std::size_t input_dim = 0;   // D
    std::size_t hidden = 256;    // bottleneck width, must stay below D
    std::size_t embed_dim = 128; // position-embedding width (the CTST model dim)
    double pos_scale_init = 0.1; // starting value of the learnable channel scale
};

// Per-token bottleneck autoencoder trained on typical sequences only. Its
// per-token reconstruction error feeds the outlier position embedding, and a
// learnable per-channel scale shapes that embedding.
class OeModel {
public:
    OeModel(const OeConfig& config, RngStream& rng);

    const OeConfig& config() const { return cfg_; }
    ParamSet& params() { return params_; }
    const ParamSet& params() const { return params_; }

    struct Forward {
        Var recon;           // T x D
        Var token_error;     // T x 1, mean squared residual per token
    };
    Forward forward(Tape& tape, const std::vector<Var>& vars, Var input) const;

    // Scaled outlier position embedding for the transformer input, T x embed_dim.
    Var position_embedding(Tape& tape, const std::vector<Var>& vars, Var token_error) const;

    // Value-level forward: (reconstruction, per-token error).
    std::pair<Matrix, std::vector<double>> reconstruct(const Matrix& features) const;

private:
    OeConfig cfg_;
    ParamSet params_;
    std::size_t enc_w_, enc_b_, dec_w_, dec_b_, pos_scale_;
};

// One reconstruction-loss Adam step over a batch of typical sequences.
// Loss is the batch mean of per-item squared residual sums.
double oe_train_step(const std::vector<const FeatureSequence*>& batch, OeModel& model,
                     AdamState& opt);

}  // namespace wtal
