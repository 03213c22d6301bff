#pragma once

#include <string>
#include <vector>

#include "wtal/adam.hpp"
#include "wtal/matrix.hpp"
#include "wtal/rng.hpp"
#include "wtal/tape.hpp"

namespace wtal {

struct CtstConfig {
    std::size_t input_dim = 0;   // D
    std::size_t model_dim = 128; // m, per-level token width
    std::size_t levels = 3;      // n
    std::size_t heads = 4;
    std::size_t ffn_dim = 0;     // 0 -> 4 * model_dim

    std::size_t effective_ffn() const { return ffn_dim == 0 ? 4 * model_dim : ffn_dim; }
    std::size_t output_dim() const { return levels * model_dim; }
    void validate() const;
};

// Pre-norm transformer block: x + MHA(LN(x)), then x + FFN(LN(x)).
// Shape-preserving over the token axis.
class AttentionBlock {
public:
    AttentionBlock(std::size_t dim, std::size_t heads, std::size_t ffn_dim, ParamSet& params,
                   const std::string& prefix, RngStream& rng);

    // probs, when given, receives one L x L attention weight matrix per head.
    Var forward(Tape& tape, const std::vector<Var>& vars, Var tokens,
                std::vector<Var>* probs = nullptr) const;

private:
    std::size_t dim_, heads_, ffn_dim_;
    std::size_t ln1_g_, ln1_b_, wq_, bq_, wk_, wv_, bv_, wo_, bo_;
    std::size_t ln2_g_, ln2_b_, ff1_w_, ff1_b_, ff2_w_, ff2_b_;
};

// Average-pool consecutive token pairs; an odd tail row passes through.
Var temporal_downsample(Tape& tape, Var tokens);
Matrix temporal_downsample(const Matrix& tokens);

// Nearest-neighbor repetition up to target_rows; row i copies input row
// floor(i * L' / target).
Var temporal_upsample(Tape& tape, Var tokens, std::size_t target_rows);
Matrix temporal_upsample(const Matrix& tokens, std::size_t target_rows);

// Multi-level temporal pyramid. Level 1 attends at full resolution; each
// further level attends over the downsampled previous level. Level outputs
// are upsampled back to T and concatenated in level order -> T x (n * m).
class CtstModel {
public:
    CtstModel(const CtstConfig& config, RngStream& rng);

    const CtstConfig& config() const { return cfg_; }
    ParamSet& params() { return params_; }
    const ParamSet& params() const { return params_; }

    // tokens: T x D raw features; pos_embedding: T x m outlier embedding.
    Var forward(Tape& tape, const std::vector<Var>& vars, Var tokens, Var pos_embedding) const;

private:
    CtstConfig cfg_;
    ParamSet params_;
    std::size_t proj_w_, proj_b_;
    std::vector<AttentionBlock> blocks_;
};

}  // namespace wtal
