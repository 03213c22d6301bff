#include "wtal/adam.hpp"

#include <cmath>

#include "wtal/errors.hpp"

namespace wtal {

std::size_t ParamSet::add(const std::string& name, Matrix value) {
    if (find(name) != nullptr) {
        throw ConfigError("param set: duplicate name '" + name + "'");
    }
    Matrix grad(value.rows(), value.cols());
    params_.push_back(Param{name, std::move(value), std::move(grad)});
    return params_.size() - 1;
}

Param* ParamSet::find(const std::string& name) {
    for (auto& p : params_) {
        if (p.name == name) return &p;
    }
    return nullptr;
}

const Param* ParamSet::find(const std::string& name) const {
    for (const auto& p : params_) {
        if (p.name == name) return &p;
    }
    return nullptr;
}

void ParamSet::zero_grads() {
    for (auto& p : params_) p.grad.fill(0.0);
}

std::vector<Var> ParamSet::leaves(Tape& tape) const {
    std::vector<Var> vars;
    vars.reserve(params_.size());
    for (const auto& p : params_) vars.push_back(tape.leaf(p.value));
    return vars;
}

void ParamSet::accumulate_grads(const Tape& tape, const std::vector<Var>& vars) {
    if (vars.size() != params_.size()) {
        throw ConfigError("param set: var list does not match parameters");
    }
    for (std::size_t i = 0; i < params_.size(); ++i) {
        const Matrix& g = tape.grad(vars[i]);
        if (!g.same_shape(params_[i].grad)) {
            throw ConfigError("param set: grad shape mismatch for '" + params_[i].name + "'");
        }
        for (std::size_t k = 0; k < g.size(); ++k) params_[i].grad[k] += g[k];
    }
}

AdamState::AdamState(const ParamSet& params, AdamHyper hyper) : hyper_(hyper) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        m_.emplace_back(params[i].value.rows(), params[i].value.cols());
        v_.emplace_back(params[i].value.rows(), params[i].value.cols());
    }
}

void adam_step(ParamSet& params, AdamState& state) {
    if (state.m_.size() != params.size()) {
        throw ConfigError("adam: state does not match parameter count");
    }
    state.t_ += 1;
    const AdamHyper& hp = state.hyper_;
    const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(state.t_));
    const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(state.t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Param& p = params[i];
        Matrix& m = state.m_[i];
        Matrix& v = state.v_[i];
        if (!m.same_shape(p.value) || !p.grad.same_shape(p.value)) {
            throw ConfigError("adam: shape mismatch for '" + p.name + "'");
        }
        for (std::size_t k = 0; k < p.value.size(); ++k) {
            const double g = p.grad[k];
            m[k] = hp.beta1 * m[k] + (1.0 - hp.beta1) * g;
            v[k] = hp.beta2 * v[k] + (1.0 - hp.beta2) * g * g;
            const double mhat = m[k] / bc1;
            const double vhat = v[k] / bc2;
            p.value[k] -= hp.lr * mhat / (std::sqrt(vhat) + hp.eps);
        }
    }
}

}  // namespace wtal
