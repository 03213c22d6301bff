#include "wtal/ctst.hpp"

#include <cmath>

#include "wtal/errors.hpp"
#include "wtal/init.hpp"

namespace wtal {

void CtstConfig::validate() const {
    if (input_dim == 0) throw ConfigError("ctst: input_dim must be set");
    if (levels < 1) throw ConfigError("ctst: need at least one level");
    if (model_dim == 0 || model_dim % 2 != 0) {
        throw ConfigError("ctst: model_dim must be even and positive");
    }
    if (heads == 0 || model_dim % heads != 0) {
        throw ConfigError("ctst: model_dim must divide evenly into heads");
    }
}

AttentionBlock::AttentionBlock(std::size_t dim, std::size_t heads, std::size_t ffn_dim,
                               ParamSet& params, const std::string& prefix, RngStream& rng)
    : dim_(dim), heads_(heads), ffn_dim_(ffn_dim) {
    if (heads == 0 || dim % heads != 0) {
        throw ConfigError("attention: dim must divide evenly into heads");
    }
    ln1_g_ = params.add(prefix + ".ln1_g", Matrix::full(1, dim, 1.0));
    ln1_b_ = params.add(prefix + ".ln1_b", Matrix(1, dim));
    wq_ = params.add(prefix + ".wq", glorot_uniform(dim, dim, rng));
    bq_ = params.add(prefix + ".bq", Matrix(1, dim));
    // No key bias: a per-query constant added to every score row cancels
    // inside the softmax, leaving the parameter without gradient.
    wk_ = params.add(prefix + ".wk", glorot_uniform(dim, dim, rng));
    wv_ = params.add(prefix + ".wv", glorot_uniform(dim, dim, rng));
    bv_ = params.add(prefix + ".bv", Matrix(1, dim));
    wo_ = params.add(prefix + ".wo", glorot_uniform(dim, dim, rng));
    bo_ = params.add(prefix + ".bo", Matrix(1, dim));
    ln2_g_ = params.add(prefix + ".ln2_g", Matrix::full(1, dim, 1.0));
    ln2_b_ = params.add(prefix + ".ln2_b", Matrix(1, dim));
    ff1_w_ = params.add(prefix + ".ff1_w", glorot_uniform(dim, ffn_dim, rng));
    ff1_b_ = params.add(prefix + ".ff1_b", Matrix(1, ffn_dim));
    ff2_w_ = params.add(prefix + ".ff2_w", glorot_uniform(ffn_dim, dim, rng));
    ff2_b_ = params.add(prefix + ".ff2_b", Matrix(1, dim));
}

Var AttentionBlock::forward(Tape& tape, const std::vector<Var>& vars, Var tokens,
                            std::vector<Var>* probs) const {
    const Matrix& x = tape.value(tokens);
    if (x.cols() != dim_) {
        throw ConfigError("attention: token width " + std::to_string(x.cols()) +
                          " does not match block dim " + std::to_string(dim_));
    }
    const std::size_t head_dim = dim_ / heads_;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));

    Var normed = tape.layer_norm(tokens, vars[ln1_g_], vars[ln1_b_]);
    Var q = tape.add_row(tape.matmul(normed, vars[wq_]), vars[bq_]);
    Var k = tape.matmul(normed, vars[wk_]);
    Var v = tape.add_row(tape.matmul(normed, vars[wv_]), vars[bv_]);

    std::vector<Var> head_outputs;
    head_outputs.reserve(heads_);
    for (std::size_t h = 0; h < heads_; ++h) {
        Var qh = tape.slice_cols(q, h * head_dim, head_dim);
        Var kh = tape.slice_cols(k, h * head_dim, head_dim);
        Var vh = tape.slice_cols(v, h * head_dim, head_dim);
        Var scores = tape.scale(tape.matmul(qh, tape.transpose(kh)), inv_sqrt);
        Var weights = tape.row_softmax(scores);
        if (probs != nullptr) probs->push_back(weights);
        head_outputs.push_back(tape.matmul(weights, vh));
    }
    Var context = heads_ == 1 ? head_outputs[0] : tape.concat_cols(head_outputs);
    Var attended = tape.add_row(tape.matmul(context, vars[wo_]), vars[bo_]);
    Var after_attn = tape.add(tokens, attended);

    Var normed2 = tape.layer_norm(after_attn, vars[ln2_g_], vars[ln2_b_]);
    Var ff = tape.softplus(tape.add_row(tape.matmul(normed2, vars[ff1_w_]), vars[ff1_b_]));
    Var ff_out = tape.add_row(tape.matmul(ff, vars[ff2_w_]), vars[ff2_b_]);
    return tape.add(after_attn, ff_out);
}

Var temporal_downsample(Tape& tape, Var tokens) {
    return tape.downsample_pairs(tokens);
}

Matrix temporal_downsample(const Matrix& tokens) {
    Tape tape;
    return tape.value(tape.downsample_pairs(tape.leaf(tokens)));
}

Var temporal_upsample(Tape& tape, Var tokens, std::size_t target_rows) {
    if (tape.value(tokens).rows() > target_rows) {
        throw ArgumentError("temporal_upsample: input longer than target");
    }
    return tape.upsample_nearest(tokens, target_rows);
}

Matrix temporal_upsample(const Matrix& tokens, std::size_t target_rows) {
    Tape tape;
    return tape.value(temporal_upsample(tape, tape.leaf(tokens), target_rows));
}

CtstModel::CtstModel(const CtstConfig& config, RngStream& rng) : cfg_(config) {
    cfg_.validate();
    proj_w_ = params_.add("ctst.proj_w", glorot_uniform(cfg_.input_dim, cfg_.model_dim, rng));
    proj_b_ = params_.add("ctst.proj_b", Matrix(1, cfg_.model_dim));
    blocks_.reserve(cfg_.levels);
    for (std::size_t level = 0; level < cfg_.levels; ++level) {
        blocks_.emplace_back(cfg_.model_dim, cfg_.heads, cfg_.effective_ffn(), params_,
                             "ctst.l" + std::to_string(level), rng);
    }
}

Var CtstModel::forward(Tape& tape, const std::vector<Var>& vars, Var tokens,
                       Var pos_embedding) const {
    const Matrix& x = tape.value(tokens);
    if (x.cols() != cfg_.input_dim) {
        throw ConfigError("ctst: token width " + std::to_string(x.cols()) +
                          " does not match input dim " + std::to_string(cfg_.input_dim));
    }
    if (tape.value(pos_embedding).rows() != x.rows() ||
        tape.value(pos_embedding).cols() != cfg_.model_dim) {
        throw ConfigError("ctst: position embedding must be T x model_dim");
    }
    const std::size_t t_rows = x.rows();

    Var projected = tape.add_row(tape.matmul(tokens, vars[proj_w_]), vars[proj_b_]);
    Var level_input = tape.add(projected, pos_embedding);

    std::vector<Var> level_outputs;
    level_outputs.reserve(cfg_.levels);
    for (std::size_t level = 0; level < cfg_.levels; ++level) {
        if (level > 0) level_input = tape.downsample_pairs(level_input);
        Var out = blocks_[level].forward(tape, vars, level_input);
        level_outputs.push_back(tape.value(out).rows() == t_rows
                                    ? out
                                    : tape.upsample_nearest(out, t_rows));
        level_input = out;
    }
    return cfg_.levels == 1 ? level_outputs[0] : tape.concat_cols(level_outputs);
}

}  // namespace wtal
