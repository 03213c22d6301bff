#include "wtal/tape.hpp"

#include <cmath>
#include <string>

#include "wtal/errors.hpp"

namespace wtal {

namespace {

double sigmoid_stable(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

double softplus_stable(double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x)));
}

}  // namespace

Var Tape::push(Matrix value, std::function<void(Tape&, int)> back) {
    nodes_.push_back(Node{std::move(value), std::move(back)});
    return Var{static_cast<int>(nodes_.size()) - 1};
}

void Tape::check(Var v) const {
    if (!v.valid() || v.id >= static_cast<int>(nodes_.size())) {
        throw ArgumentError("tape: invalid var");
    }
}

Matrix& Tape::grad_buf(int id) {
    if (grads_[id].empty()) {
        grads_[id] = Matrix(nodes_[id].value.rows(), nodes_[id].value.cols());
    }
    active_[id] = 1;
    return grads_[id];
}

double Tape::scalar(Var v) const {
    check(v);
    const Matrix& m = nodes_[v.id].value;
    if (m.size() != 1) throw ArgumentError("tape: scalar() on non 1x1 value");
    return m[0];
}

const Matrix& Tape::grad(Var v) const {
    check(v);
    if (grads_.empty()) throw ArgumentError("tape: grad() before backward()");
    return grads_[v.id];
}

void Tape::backward(Var root) {
    check(root);
    if (nodes_[root.id].value.size() != 1) {
        throw ArgumentError("tape: backward root must be 1x1");
    }
    grads_.assign(nodes_.size(), Matrix());
    active_.assign(nodes_.size(), 0);
    grad_buf(root.id)[0] = 1.0;
    for (int id = root.id; id >= 0; --id) {
        if (!active_[id] || !nodes_[id].back) continue;
        nodes_[id].back(*this, id);
    }
    // Leaves never touched by the sweep still expose a zero grad.
    for (std::size_t id = 0; id < nodes_.size(); ++id) {
        if (grads_[id].empty()) {
            grads_[id] = Matrix(nodes_[id].value.rows(), nodes_[id].value.cols());
        }
    }
}

Var Tape::leaf(Matrix value) {
    return push(std::move(value), nullptr);
}

Var Tape::matmul(Var a, Var b) {
    check(a); check(b);
    const Matrix& av = value(a);
    const Matrix& bv = value(b);
    if (av.cols() != bv.rows()) throw ArgumentError("tape: matmul shape mismatch");
    Matrix out(av.rows(), bv.cols());
    gemm(false, false, 1.0, av, bv, 0.0, out);
    int ai = a.id, bi = b.id;
    return push(std::move(out), [ai, bi](Tape& t, int self) {
        const Matrix& g = t.grads_[self];
        gemm(false, true, 1.0, g, t.nodes_[bi].value, 1.0, t.grad_buf(ai));
        gemm(true, false, 1.0, t.nodes_[ai].value, g, 1.0, t.grad_buf(bi));
    });
}

Var Tape::add(Var a, Var b) {
    check(a); check(b);
    const Matrix& av = value(a);
    const Matrix& bv = value(b);
    if (!av.same_shape(bv)) throw ArgumentError("tape: add shape mismatch");
    Matrix out = av;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
    int ai = a.id, bi = b.id;
    return push(std::move(out), [ai, bi](Tape& t, int self) {
        const Matrix& g = t.grads_[self];
        Matrix& ga = t.grad_buf(ai);
        Matrix& gb = t.grad_buf(bi);
        for (std::size_t i = 0; i < g.size(); ++i) {
            ga[i] += g[i];
            gb[i] += g[i];
        }
    });
}

Var Tape::sub(Var a, Var b) {
    check(a); check(b);
    const Matrix& av = value(a);
    const Matrix& bv = value(b);
    if (!av.same_shape(bv)) throw ArgumentError("tape: sub shape mismatch");
    Matrix out = av;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
    int ai = a.id, bi = b.id;
    return push(std::move(out), [ai, bi](Tape& t, int self) {
        const Matrix& g = t.grads_[self];
        Matrix& ga = t.grad_buf(ai);
        Matrix& gb = t.grad_buf(bi);
        for (std::size_t i = 0; i < g.size(); ++i) {
            ga[i] += g[i];
            gb[i] -= g[i];
        }
    });
}

Var Tape::mul(Var a, Var b) {
    check(a); check(b);
    const Matrix& av = value(a);
    const Matrix& bv = value(b);
    if (!av.same_shape(bv)) throw ArgumentError("tape: mul shape mismatch");
    Matrix out = av;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
    int ai = a.id, bi = b.id;
    return push(std::move(out), [ai, bi](Tape& t, int self) {
        const Matrix& g = t.grads_[self];
        const Matrix& av2 = t.nodes_[ai].value;
        const Matrix& bv2 = t.nodes_[bi].value;
        Matrix& ga = t.grad_buf(ai);
        Matrix& gb = t.grad_buf(bi);
        for (std::size_t i = 0; i < g.size(); ++i) {
            ga[i] += g[i] * bv2[i];
            gb[i] += g[i] * av2[i];
        }
    });
}

Var Tape::add_row(Var a, Var row) {
    check(a); check(row);
    const Matrix& av = value(a);
    const Matrix& rv = value(row);
    if (rv.rows() != 1 || rv.cols() != av.cols()) {
        throw ArgumentError("tape: add_row wants 1 x cols row");
    }
    Matrix out = av;
    for (std::size_t i = 0; i < av.rows(); ++i)
        for (std::size_t j = 0; j < av.cols(); ++j) out.at(i, j) += rv[j];
    int ai = a.id, ri = row.id;
    return push(std::move(out), [ai, ri](Tape& t, int self) {
        const Matrix& g = t.grads_[self];
        Matrix& ga = t.grad_buf(ai);
        Matrix& gr = t.grad_buf(ri);
        for (std::size_t i = 0; i < g.rows(); ++i)
            for (std::size_t j = 0; j < g.cols(); ++j) {
                ga.at(i, j) += g.at(i, j);
                gr[j] += g.at(i, j);
            }
    });
}

Var Tape::scale(Var a, double c) {
    check(a);
    Matrix out = value(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= c;
    int ai = a.id;
    return push(std::move(out), [ai, c](Tape& t, int self) {
        const Matrix& g = t.grads_[self];
        Matrix& ga = t.grad_buf(ai);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += c * g[i];
    });
}

Var Tape::add_const(Var a, double c) {
    check(a);
    Matrix out = value(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += c;
    int ai = a.id;
    return push(std::move(out), [ai](Tape& t, int self) {
        const Matrix& g = t.grads_[self];
        Matrix& ga = t.grad_buf(ai);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
}

Var Tape::tanh_act(Var a) {
    check(a);
    Matrix out = value(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
    int ai = a.id;
    int self_hint = static_cast<int>(nodes_.size());
    return push(std::move(out), [ai, self_hint](Tape& t, int self) {
        const Matrix& g = t.grads_[self];
        const Matrix& y = t.nodes_[self_hint].value;
        Matrix& ga = t.grad_buf(ai);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
    });
}

Var Tape::softplus(Var a) {
    check(a);
    Matrix out = value(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = softplus_stable(out[i]);
    int ai = a.id;
    return push(std::move(out), [ai](Tape& t, int self) {
        const Matrix& g = t.grads_[self];
        const Matrix& x = t.nodes_[ai].value;
        Matrix& ga = t.grad_buf(ai);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * sigmoid_stable(x[i]);
    });
}

Var Tape::sigmoid(Var a) {
    check(a);
    Matrix out = value(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = sigmoid_stable(out[i]);
    int ai = a.id;
    int self_hint = static_cast<int>(nodes_.size());
    return push(std::move(out), [ai, self_hint](Tape& t, int self) {
        const Matrix& g = t.grads_[self];
        const Matrix& y = t.nodes_[self_hint].value;
        Matrix& ga = t.grad_buf(ai);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
    });
}

Var Tape::relu(Var a) {
    check(a);
    Matrix out = value(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(0.0, out[i]);
    int ai = a.id;
    return push(std::move(out), [ai](Tape& t, int self) {
        const Matrix& g = t.grads_[self];
        const Matrix& x = t.nodes_[ai].value;
        Matrix& ga = t.grad_buf(ai);
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (x[i] > 0.0) ga[i] += g[i];
        }
    });
}

Var Tape::abs(Var a) {
    check(a);
    Matrix out = value(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::fabs(out[i]);
    int ai = a.id;
    return push(std::move(out), [ai](Tape& t, int self) {
        const Matrix& g = t.grads_[self];
        const Matrix& x = t.nodes_[ai].value;
        Matrix& ga = t.grad_buf(ai);
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (x[i] > 0.0) ga[i] += g[i];
            else if (x[i] < 0.0) ga[i] -= g[i];
        }
    });
}

Var Tape::row_softmax(Var a) {
    check(a);
    const Matrix& x = value(a);
    Matrix out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        double mx = x.at(i, 0);
        for (std::size_t j = 1; j < x.cols(); ++j) mx = std::max(mx, x.at(i, j));
        double denom = 0.0;
        for (std::size_t j = 0; j < x.cols(); ++j) {
            out.at(i, j) = std::exp(x.at(i, j) - mx);
            denom += out.at(i, j);
        }
        for (std::size_t j = 0; j < x.cols(); ++j) out.at(i, j) /= denom;
    }
    int ai = a.id;
    int self_hint = static_cast<int>(nodes_.size());
    return push(std::move(out), [ai, self_hint](Tape& t, int self) {
        const Matrix& g = t.grads_[self];
        const Matrix& y = t.nodes_[self_hint].value;
        Matrix& ga = t.grad_buf(ai);
        for (std::size_t i = 0; i < g.rows(); ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < g.cols(); ++j) dot += g.at(i, j) * y.at(i, j);
            for (std::size_t j = 0; j < g.cols(); ++j)
                ga.at(i, j) += y.at(i, j) * (g.at(i, j) - dot);
        }
    });
}

Var Tape::layer_norm(Var a, Var gain, Var bias, double eps) {
    check(a); check(gain); check(bias);
    const Matrix& x = value(a);
    const Matrix& gv = value(gain);
    const Matrix& bv = value(bias);
    if (gv.rows() != 1 || gv.cols() != x.cols() || bv.rows() != 1 || bv.cols() != x.cols()) {
        throw ArgumentError("tape: layer_norm gain/bias must be 1 x cols");
    }
    const std::size_t n = x.cols();
    Matrix xhat(x.rows(), n);
    std::vector<double> inv_std(x.rows());
    Matrix out(x.rows(), n);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        double mu = 0.0;
        for (std::size_t j = 0; j < n; ++j) mu += x.at(i, j);
        mu /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            double d = x.at(i, j) - mu;
            var += d * d;
        }
        var /= static_cast<double>(n);
        double is = 1.0 / std::sqrt(var + eps);
        inv_std[i] = is;
        for (std::size_t j = 0; j < n; ++j) {
            xhat.at(i, j) = (x.at(i, j) - mu) * is;
            out.at(i, j) = gv[j] * xhat.at(i, j) + bv[j];
        }
    }
    int ai = a.id, gi = gain.id, bi = bias.id;
    return push(std::move(out),
                [ai, gi, bi, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& t, int self) {
        const Matrix& g = t.grads_[self];
        const Matrix& gv2 = t.nodes_[gi].value;
        Matrix& ga = t.grad_buf(ai);
        Matrix& gg = t.grad_buf(gi);
        Matrix& gb = t.grad_buf(bi);
        const std::size_t n = g.cols();
        for (std::size_t i = 0; i < g.rows(); ++i) {
            double mean_gdy = 0.0, mean_gdy_xhat = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                double gdy = g.at(i, j) * gv2[j];
                mean_gdy += gdy;
                mean_gdy_xhat += gdy * xhat.at(i, j);
                gg[j] += g.at(i, j) * xhat.at(i, j);
                gb[j] += g.at(i, j);
            }
            mean_gdy /= static_cast<double>(n);
            mean_gdy_xhat /= static_cast<double>(n);
            for (std::size_t j = 0; j < n; ++j) {
                double gdy = g.at(i, j) * gv2[j];
                ga.at(i, j) += inv_std[i] * (gdy - mean_gdy - xhat.at(i, j) * mean_gdy_xhat);
            }
        }
    });
}

Var Tape::transpose(Var a) {
    check(a);
    const Matrix& x = value(a);
    Matrix out(x.cols(), x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) out.at(j, i) = x.at(i, j);
    int ai = a.id;
    return push(std::move(out), [ai](Tape& t, int self) {
        const Matrix& g = t.grads_[self];
        Matrix& ga = t.grad_buf(ai);
        for (std::size_t i = 0; i < g.rows(); ++i)
            for (std::size_t j = 0; j < g.cols(); ++j) ga.at(j, i) += g.at(i, j);
    });
}

Var Tape::slice_cols(Var a, std::size_t first, std::size_t width) {
    check(a);
    const Matrix& x = value(a);
    if (first + width > x.cols()) throw ArgumentError("tape: slice_cols out of range");
    Matrix out(x.rows(), width);
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < width; ++j) out.at(i, j) = x.at(i, first + j);
    int ai = a.id;
    return push(std::move(out), [ai, first, width](Tape& t, int self) {
        const Matrix& g = t.grads_[self];
        Matrix& ga = t.grad_buf(ai);
        for (std::size_t i = 0; i < g.rows(); ++i)
            for (std::size_t j = 0; j < width; ++j) ga.at(i, first + j) += g.at(i, j);
    });
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw ArgumentError("tape: concat_cols of nothing");
    std::size_t rows = value(parts[0]).rows();
    std::size_t cols = 0;
    for (Var p : parts) {
        check(p);
        if (value(p).rows() != rows) throw ArgumentError("tape: concat_cols row mismatch");
        cols += value(p).cols();
    }
    Matrix out(rows, cols);
    std::vector<int> ids;
    std::vector<std::size_t> offsets;
    std::size_t off = 0;
    for (Var p : parts) {
        const Matrix& x = value(p);
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < x.cols(); ++j) out.at(i, off + j) = x.at(i, j);
        ids.push_back(p.id);
        offsets.push_back(off);
        off += x.cols();
    }
    return push(std::move(out), [ids, offsets](Tape& t, int self) {
        const Matrix& g = t.grads_[self];
        for (std::size_t k = 0; k < ids.size(); ++k) {
            Matrix& ga = t.grad_buf(ids[k]);
            for (std::size_t i = 0; i < ga.rows(); ++i)
                for (std::size_t j = 0; j < ga.cols(); ++j)
                    ga.at(i, j) += g.at(i, offsets[k] + j);
        }
    });
}

Var Tape::concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw ArgumentError("tape: concat_rows of nothing");
    std::size_t cols = value(parts[0]).cols();
    std::size_t rows = 0;
    for (Var p : parts) {
        check(p);
        if (value(p).cols() != cols) throw ArgumentError("tape: concat_rows col mismatch");
        rows += value(p).rows();
    }
    Matrix out(rows, cols);
    std::vector<int> ids;
    std::vector<std::size_t> offsets;
    std::size_t off = 0;
    for (Var p : parts) {
        const Matrix& x = value(p);
        for (std::size_t i = 0; i < x.rows(); ++i)
            for (std::size_t j = 0; j < cols; ++j) out.at(off + i, j) = x.at(i, j);
        ids.push_back(p.id);
        offsets.push_back(off);
        off += x.rows();
    }
    return push(std::move(out), [ids, offsets](Tape& t, int self) {
        const Matrix& g = t.grads_[self];
        for (std::size_t k = 0; k < ids.size(); ++k) {
            Matrix& ga = t.grad_buf(ids[k]);
            for (std::size_t i = 0; i < ga.rows(); ++i)
                for (std::size_t j = 0; j < ga.cols(); ++j)
                    ga.at(i, j) += g.at(offsets[k] + i, j);
        }
    });
}

Var Tape::row_sum(Var a) {
    check(a);
    const Matrix& x = value(a);
    Matrix out(x.rows(), 1);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < x.cols(); ++j) acc += x.at(i, j);
        out.at(i, 0) = acc;
    }
    int ai = a.id;
    return push(std::move(out), [ai](Tape& t, int self) {
        const Matrix& g = t.grads_[self];
        Matrix& ga = t.grad_buf(ai);
        for (std::size_t i = 0; i < ga.rows(); ++i)
            for (std::size_t j = 0; j < ga.cols(); ++j) ga.at(i, j) += g.at(i, 0);
    });
}

Var Tape::sum(Var a) {
    check(a);
    const Matrix& x = value(a);
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += x[i];
    int ai = a.id;
    return push(Matrix(1, 1, {acc}), [ai](Tape& t, int self) {
        double g = t.grads_[self][0];
        Matrix& ga = t.grad_buf(ai);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
    });
}

Var Tape::mean(Var a) {
    check(a);
    const Matrix& x = value(a);
    if (x.size() == 0) throw ArgumentError("tape: mean of empty matrix");
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += x[i];
    double inv = 1.0 / static_cast<double>(x.size());
    int ai = a.id;
    return push(Matrix(1, 1, {acc * inv}), [ai, inv](Tape& t, int self) {
        double g = t.grads_[self][0] * inv;
        Matrix& ga = t.grad_buf(ai);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
    });
}

Var Tape::col_max(Var a) {
    check(a);
    const Matrix& x = value(a);
    if (x.rows() == 0) throw ArgumentError("tape: col_max of empty matrix");
    Matrix out(1, x.cols());
    std::vector<std::size_t> arg(x.cols(), 0);
    for (std::size_t j = 0; j < x.cols(); ++j) {
        double best = x.at(0, j);
        for (std::size_t i = 1; i < x.rows(); ++i) {
            if (x.at(i, j) > best) {  // strict: ties resolve to the lowest row
                best = x.at(i, j);
                arg[j] = i;
            }
        }
        out.at(0, j) = best;
    }
    int ai = a.id;
    return push(std::move(out), [ai, arg = std::move(arg)](Tape& t, int self) {
        const Matrix& g = t.grads_[self];
        Matrix& ga = t.grad_buf(ai);
        for (std::size_t j = 0; j < g.cols(); ++j) ga.at(arg[j], j) += g.at(0, j);
    });
}

Var Tape::downsample_pairs(Var a) {
    check(a);
    const Matrix& x = value(a);
    const std::size_t rows = x.rows();
    const std::size_t out_rows = (rows + 1) / 2;
    Matrix out(out_rows, x.cols());
    for (std::size_t i = 0; i < out_rows; ++i) {
        std::size_t r0 = 2 * i;
        if (r0 + 1 < rows) {
            for (std::size_t j = 0; j < x.cols(); ++j)
                out.at(i, j) = 0.5 * (x.at(r0, j) + x.at(r0 + 1, j));
        } else {
            for (std::size_t j = 0; j < x.cols(); ++j) out.at(i, j) = x.at(r0, j);
        }
    }
    int ai = a.id;
    return push(std::move(out), [ai, rows](Tape& t, int self) {
        const Matrix& g = t.grads_[self];
        Matrix& ga = t.grad_buf(ai);
        for (std::size_t i = 0; i < g.rows(); ++i) {
            std::size_t r0 = 2 * i;
            if (r0 + 1 < rows) {
                for (std::size_t j = 0; j < g.cols(); ++j) {
                    ga.at(r0, j) += 0.5 * g.at(i, j);
                    ga.at(r0 + 1, j) += 0.5 * g.at(i, j);
                }
            } else {
                for (std::size_t j = 0; j < g.cols(); ++j) ga.at(r0, j) += g.at(i, j);
            }
        }
    });
}

Var Tape::upsample_nearest(Var a, std::size_t target_rows) {
    check(a);
    const Matrix& x = value(a);
    if (x.rows() > target_rows) {
        throw ArgumentError("tape: upsample_nearest target smaller than input");
    }
    Matrix out(target_rows, x.cols());
    std::vector<std::size_t> src(target_rows);
    for (std::size_t i = 0; i < target_rows; ++i) {
        src[i] = (i * x.rows()) / target_rows;
        for (std::size_t j = 0; j < x.cols(); ++j) out.at(i, j) = x.at(src[i], j);
    }
    int ai = a.id;
    return push(std::move(out), [ai, src = std::move(src)](Tape& t, int self) {
        const Matrix& g = t.grads_[self];
        Matrix& ga = t.grad_buf(ai);
        for (std::size_t i = 0; i < g.rows(); ++i)
            for (std::size_t j = 0; j < g.cols(); ++j) ga.at(src[i], j) += g.at(i, j);
    });
}

Var Tape::im2col_k3(Var a) {
    check(a);
    const Matrix& x = value(a);
    const std::size_t rows = x.rows(), c = x.cols();
    Matrix out(rows, 3 * c);
    for (std::size_t i = 0; i < rows; ++i) {
        for (int k = -1; k <= 1; ++k) {
            std::size_t off = static_cast<std::size_t>(k + 1) * c;
            long src = static_cast<long>(i) + k;
            if (src < 0 || src >= static_cast<long>(rows)) continue;  // zero pad
            for (std::size_t j = 0; j < c; ++j)
                out.at(i, off + j) = x.at(static_cast<std::size_t>(src), j);
        }
    }
    int ai = a.id;
    return push(std::move(out), [ai, rows, c](Tape& t, int self) {
        const Matrix& g = t.grads_[self];
        Matrix& ga = t.grad_buf(ai);
        for (std::size_t i = 0; i < rows; ++i) {
            for (int k = -1; k <= 1; ++k) {
                std::size_t off = static_cast<std::size_t>(k + 1) * c;
                long src = static_cast<long>(i) + k;
                if (src < 0 || src >= static_cast<long>(rows)) continue;
                for (std::size_t j = 0; j < c; ++j)
                    ga.at(static_cast<std::size_t>(src), j) += g.at(i, off + j);
            }
        }
    });
}

Var Tape::row_scale(Var a, Var s) {
    check(a); check(s);
    const Matrix& x = value(a);
    const Matrix& sv = value(s);
    if (sv.cols() != 1 || sv.rows() != x.rows()) {
        throw ArgumentError("tape: row_scale wants rows x 1 scale");
    }
    Matrix out = x;
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) out.at(i, j) *= sv.at(i, 0);
    int ai = a.id, si = s.id;
    return push(std::move(out), [ai, si](Tape& t, int self) {
        const Matrix& g = t.grads_[self];
        const Matrix& x2 = t.nodes_[ai].value;
        const Matrix& sv2 = t.nodes_[si].value;
        Matrix& ga = t.grad_buf(ai);
        Matrix& gs = t.grad_buf(si);
        for (std::size_t i = 0; i < g.rows(); ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < g.cols(); ++j) {
                ga.at(i, j) += g.at(i, j) * sv2.at(i, 0);
                acc += g.at(i, j) * x2.at(i, j);
            }
            gs.at(i, 0) += acc;
        }
    });
}

Var Tape::col_scale(Var a, Var g) {
    check(a); check(g);
    const Matrix& x = value(a);
    const Matrix& gv = value(g);
    if (gv.rows() != 1 || gv.cols() != x.cols()) {
        throw ArgumentError("tape: col_scale wants 1 x cols scale");
    }
    Matrix out = x;
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) out.at(i, j) *= gv[j];
    int ai = a.id, gi = g.id;
    return push(std::move(out), [ai, gi](Tape& t, int self) {
        const Matrix& gr = t.grads_[self];
        const Matrix& x2 = t.nodes_[ai].value;
        const Matrix& gv2 = t.nodes_[gi].value;
        Matrix& ga = t.grad_buf(ai);
        Matrix& gg = t.grad_buf(gi);
        for (std::size_t i = 0; i < gr.rows(); ++i)
            for (std::size_t j = 0; j < gr.cols(); ++j) {
                ga.at(i, j) += gr.at(i, j) * gv2[j];
                gg[j] += gr.at(i, j) * x2.at(i, j);
            }
    });
}

Var Tape::gather_rows(Var a, std::vector<std::size_t> rows) {
    check(a);
    const Matrix& x = value(a);
    Matrix out(rows.size(), x.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= x.rows()) throw ArgumentError("tape: gather_rows index out of range");
        for (std::size_t j = 0; j < x.cols(); ++j) out.at(i, j) = x.at(rows[i], j);
    }
    int ai = a.id;
    return push(std::move(out), [ai, rows = std::move(rows)](Tape& t, int self) {
        const Matrix& g = t.grads_[self];
        Matrix& ga = t.grad_buf(ai);
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t j = 0; j < g.cols(); ++j) ga.at(rows[i], j) += g.at(i, j);
    });
}

Var Tape::div_scalar(Var a, Var s) {
    check(a); check(s);
    const Matrix& x = value(a);
    const Matrix& sv = value(s);
    if (sv.size() != 1) throw ArgumentError("tape: div_scalar wants 1 x 1 divisor");
    double d = sv[0];
    Matrix out = x;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] /= d;
    int ai = a.id, si = s.id;
    return push(std::move(out), [ai, si, d](Tape& t, int self) {
        const Matrix& g = t.grads_[self];
        const Matrix& x2 = t.nodes_[ai].value;
        Matrix& ga = t.grad_buf(ai);
        Matrix& gs = t.grad_buf(si);
        double acc = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            ga[i] += g[i] / d;
            acc += g[i] * x2[i];
        }
        gs[0] -= acc / (d * d);
    });
}

}  // namespace wtal
