#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "wtal/matrix.hpp"

namespace wtal {

struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Reverse-mode tape over Matrix values. Forward calls record a node per op;
// backward() sweeps the node list in reverse, accumulating gradients.
// A tape is built per training step (or per forward pass) and discarded.
class Tape {
public:
    Var leaf(Matrix value);

    Var matmul(Var a, Var b);
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);                 // elementwise
    Var add_row(Var a, Var row);           // row: 1 x m broadcast over rows
    Var scale(Var a, double c);
    Var add_const(Var a, double c);

    Var tanh_act(Var a);
    Var softplus(Var a);
    Var sigmoid(Var a);
    Var relu(Var a);                       // subgradient 0 at the kink
    Var abs(Var a);                        // subgradient 0 at 0

    Var row_softmax(Var a);
    Var layer_norm(Var a, Var gain, Var bias, double eps = 1e-5);

    Var transpose(Var a);
    Var slice_cols(Var a, std::size_t first, std::size_t width);
    Var concat_cols(const std::vector<Var>& parts);
    Var concat_rows(const std::vector<Var>& parts);

    Var row_sum(Var a);                    // L x m -> L x 1
    Var sum(Var a);                        // -> 1 x 1
    Var mean(Var a);                       // -> 1 x 1
    Var col_max(Var a);                    // T x C -> 1 x C, ties -> lowest row

    Var downsample_pairs(Var a);           // avg consecutive row pairs, odd tail kept
    Var upsample_nearest(Var a, std::size_t target_rows);
    Var im2col_k3(Var a);                  // T x C -> T x 3C, zero-padded window

    Var row_scale(Var a, Var s);           // s: L x 1, scales row i by s[i]
    Var col_scale(Var a, Var g);           // g: 1 x m, scales column j by g[j]
    Var div_scalar(Var a, Var s);          // s: 1 x 1
    Var gather_rows(Var a, std::vector<std::size_t> rows);

    const Matrix& value(Var v) const { return nodes_[v.id].value; }
    double scalar(Var v) const;
    const Matrix& grad(Var v) const;

    void backward(Var root);
    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Matrix value;
        std::function<void(Tape&, int)> back;  // (tape, own id)
    };
    std::vector<Node> nodes_;
    std::vector<Matrix> grads_;
    std::vector<char> active_;

    Var push(Matrix value, std::function<void(Tape&, int)> back);
    Matrix& grad_buf(int id);
    void check(Var v) const;
};

}  // namespace wtal
