#pragma once

#include <vector>

#include "wtal/adam.hpp"
#include "wtal/matrix.hpp"
#include "wtal/rng.hpp"
#include "wtal/tape.hpp"

namespace wtal {

// Per-segment anomaly scores in (0, 1); rows of S.
using TokenScores = std::vector<double>;

struct DetectorConfig {
    std::size_t input_dim = 0;  // n * m cross-scale width
    std::size_t hidden1 = 256;
    std::size_t hidden2 = 128;  // the exposed embedding width
};

// Three fully-connected layers applied per token: input -> hidden1 ->
// hidden2 -> 1, with a sigmoid on the final neuron. Rows never mix, so the
// score of token i depends only on row i of the input. The post-activation
// hidden2 output is exposed as the embedding consumed by the severity head.
class DetectorModel {
public:
    DetectorModel(const DetectorConfig& config, RngStream& rng);

    const DetectorConfig& config() const { return cfg_; }
    ParamSet& params() { return params_; }
    const ParamSet& params() const { return params_; }

    struct Forward {
        Var scores;     // T x 1, strictly inside (0, 1)
        Var embedding;  // T x hidden2
    };
    Forward forward(Tape& tape, const std::vector<Var>& vars, Var features) const;

private:
    DetectorConfig cfg_;
    ParamSet params_;
    std::size_t w1_, b1_, w2_, b2_, w3_, b3_;
};

}  // namespace wtal
