#pragma once

#include <string>
#include <vector>

#include "wtal/matrix.hpp"
#include "wtal/tape.hpp"

namespace wtal {

// One named trainable tensor plus its gradient accumulator.
struct Param {
    std::string name;
    Matrix value;
    Matrix grad;
};

// Ordered collection of uniquely named parameters. Models register their
// tensors here; the optimizer and the checkpoint writer iterate in order.
class ParamSet {
public:
    std::size_t add(const std::string& name, Matrix value);

    std::size_t size() const { return params_.size(); }
    Param& operator[](std::size_t i) { return params_[i]; }
    const Param& operator[](std::size_t i) const { return params_[i]; }
    Param* find(const std::string& name);
    const Param* find(const std::string& name) const;

    void zero_grads();

    // Register every parameter as a tape leaf, in order.
    std::vector<Var> leaves(Tape& tape) const;
    // Add tape gradients of those leaves into the stored grads.
    void accumulate_grads(const Tape& tape, const std::vector<Var>& vars);

private:
    std::vector<Param> params_;
};

struct AdamHyper {
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// First/second moment buffers for one ParamSet, plus the shared step counter.
class AdamState {
public:
    AdamState() = default;
    AdamState(const ParamSet& params, AdamHyper hyper);

    const AdamHyper& hyper() const { return hyper_; }
    long step_count() const { return t_; }
    const Matrix& first_moment(std::size_t i) const { return m_[i]; }
    const Matrix& second_moment(std::size_t i) const { return v_[i]; }

    friend void adam_step(ParamSet& params, AdamState& state);

private:
    std::vector<Matrix> m_;
    std::vector<Matrix> v_;
    long t_ = 0;
    AdamHyper hyper_;
};

// Standard bias-corrected Adam update. Gradients are left untouched; the
// caller zeroes them between steps.
void adam_step(ParamSet& params, AdamState& state);

}  // namespace wtal
