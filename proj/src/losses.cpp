#include "wtal/losses.hpp"

#include <cmath>
#include <string>

#include "wtal/errors.hpp"

namespace wtal {

namespace {

double softplus_stable(double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x)));
}

double sigmoid_stable(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

void LossConfig::validate() const {
    if (lambda1 < 0.0 || lambda2 < 0.0) {
        throw ConfigError("loss: lambda weights must be non-negative");
    }
    if (sref_policy == SrefPolicy::fixed && (sref_value <= 0.0 || sref_value >= 1.0)) {
        throw ConfigError("loss: fixed S_ref must lie strictly inside (0, 1)");
    }
    if (hinge_agg == HingeAgg::topk && topk == 0) {
        throw ConfigError("loss: top-k hinge needs k >= 1");
    }
}

namespace {

// Indices of the k largest entries, ties resolved toward lower indices.
std::vector<std::size_t> topk_indices(const std::vector<double>& values, std::size_t k) {
    k = std::min(k, values.size());
    std::vector<std::size_t> order(values.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
    order.resize(k);
    return order;
}

std::vector<double> column_values(const Matrix& m) {
    std::vector<double> v(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) v[i] = m.at(i, 0);
    return v;
}

}  // namespace

double topk_ranking_hinge(const std::vector<double>& s_atypical,
                          const std::vector<double>& s_typical, std::size_t k) {
    if (k == 0) throw ArgumentError("topk_ranking_hinge: k must be >= 1");
    if (s_atypical.empty() || s_typical.empty()) {
        throw ArgumentError("topk_ranking_hinge: empty score vector");
    }
    auto mean_topk = [k](const std::vector<double>& s) {
        std::vector<std::size_t> idx = topk_indices(s, k);
        double acc = 0.0;
        for (std::size_t i : idx) acc += s[i];
        return acc / static_cast<double>(idx.size());
    };
    return std::max(0.0, 1.0 - mean_topk(s_atypical) + mean_topk(s_typical));
}

Var topk_ranking_hinge(Tape& tape, Var s_atypical, Var s_typical, std::size_t k) {
    if (k == 0) throw ArgumentError("topk_ranking_hinge: k must be >= 1");
    const Matrix& sa = tape.value(s_atypical);
    const Matrix& st = tape.value(s_typical);
    if (sa.cols() != 1 || st.cols() != 1 || sa.rows() == 0 || st.rows() == 0) {
        throw ArgumentError("topk_ranking_hinge: score vars must be T x 1");
    }
    // Selection is a constant of the current values; gradients flow into the
    // selected entries only (subgradient of the top-k mean).
    Var top_a = tape.mean(tape.gather_rows(s_atypical, topk_indices(column_values(sa), k)));
    Var top_t = tape.mean(tape.gather_rows(s_typical, topk_indices(column_values(st), k)));
    Var margin = tape.add_const(tape.sub(top_t, top_a), 1.0);
    return tape.relu(margin);
}

double ranking_hinge(const std::vector<double>& s_atypical,
                     const std::vector<double>& s_typical) {
    if (s_atypical.size() != s_typical.size()) {
        throw ArgumentError("ranking_hinge: score vectors must share T (" +
                            std::to_string(s_atypical.size()) + " vs " +
                            std::to_string(s_typical.size()) + ")");
    }
    double sum_a = 0.0, sum_t = 0.0;
    for (double v : s_atypical) sum_a += v;
    for (double v : s_typical) sum_t += v;
    return std::max(0.0, 1.0 - sum_a + sum_t);
}

Var ranking_hinge(Tape& tape, Var s_atypical, Var s_typical) {
    const Matrix& sa = tape.value(s_atypical);
    const Matrix& st = tape.value(s_typical);
    if (sa.cols() != 1 || st.cols() != 1 || sa.rows() != st.rows()) {
        throw ArgumentError("ranking_hinge: score vars must be matching T x 1");
    }
    Var margin = tape.add_const(tape.sub(tape.sum(s_typical), tape.sum(s_atypical)), 1.0);
    return tape.relu(margin);
}

std::vector<int> pseudo_labels(const std::vector<double>& scores, double s_ref) {
    std::vector<int> labels(scores.size(), 0);
    for (std::size_t i = 0; i < scores.size(); ++i) {
        labels[i] = scores[i] > s_ref ? 1 : 0;  // exact tie counts as typical
    }
    return labels;
}

double resolve_sref(const std::vector<double>& scores, const LossConfig& config) {
    if (config.sref_policy == SrefPolicy::fixed) return config.sref_value;
    double mean = 0.0;
    for (double v : scores) mean += v;
    return scores.empty() ? 0.5 : mean / static_cast<double>(scores.size());
}

double err(const std::vector<double>& scores, ScoreKind kind, const LossConfig& config) {
    if (scores.empty()) throw ArgumentError("err: empty score vector");
    double acc = 0.0;
    if (kind == ScoreKind::typical) {
        for (double v : scores) acc += v * v;
    } else {
        const double s_ref = resolve_sref(scores, config);
        std::vector<int> labels = pseudo_labels(scores, s_ref);
        for (std::size_t i = 0; i < scores.size(); ++i) {
            const double d = scores[i] - static_cast<double>(labels[i]);
            acc += d * d;
        }
    }
    return acc / static_cast<double>(scores.size());
}

Var err(Tape& tape, Var scores, ScoreKind kind, const LossConfig& config) {
    const Matrix& s = tape.value(scores);
    if (s.cols() != 1 || s.rows() == 0) throw ArgumentError("err: scores must be T x 1");
    if (kind == ScoreKind::typical) {
        return tape.mean(tape.mul(scores, scores));
    }
    std::vector<double> values(s.rows());
    for (std::size_t i = 0; i < s.rows(); ++i) values[i] = s.at(i, 0);
    const double s_ref = resolve_sref(values, config);
    std::vector<int> labels = pseudo_labels(values, s_ref);
    Matrix target(s.rows(), 1);
    for (std::size_t i = 0; i < s.rows(); ++i) target.at(i, 0) = labels[i];
    // Pseudo-labels are held constant; gradient flows through the residual only.
    Var diff = tape.sub(scores, tape.leaf(std::move(target)));
    return tape.mean(tape.mul(diff, diff));
}

double self_rectifying_loss(const std::vector<double>& s_atypical,
                            const std::vector<double>& s_typical, const LossConfig& config) {
    config.validate();
    const double hinge = config.hinge_agg == HingeAgg::sum
                             ? ranking_hinge(s_atypical, s_typical)
                             : topk_ranking_hinge(s_atypical, s_typical, config.topk);
    const double err_t = err(s_typical, ScoreKind::typical, config);
    const double err_a = err(s_atypical, ScoreKind::autistic, config);
    const double balance = config.mode == BalanceMode::difference
                               ? std::fabs(err_t - err_a)
                               : err_t + err_a;
    return config.lambda1 * hinge + config.lambda2 * balance;
}

Var self_rectifying_loss(Tape& tape, Var s_atypical, Var s_typical, const LossConfig& config) {
    config.validate();
    Var hinge = config.hinge_agg == HingeAgg::sum
                    ? ranking_hinge(tape, s_atypical, s_typical)
                    : topk_ranking_hinge(tape, s_atypical, s_typical, config.topk);
    Var err_t = err(tape, s_typical, ScoreKind::typical, config);
    Var err_a = err(tape, s_atypical, ScoreKind::autistic, config);
    Var balance = config.mode == BalanceMode::difference
                      ? tape.abs(tape.sub(err_t, err_a))
                      : tape.add(err_t, err_a);
    return tape.add(tape.scale(hinge, config.lambda1), tape.scale(balance, config.lambda2));
}

namespace {

// Shared mask/target construction for the conditional tasks.
struct CornTasks {
    Matrix mask;     // N x (K-1), 1 where the sample enters the task
    Matrix target;   // N x (K-1), 1[label >= k]
    double included = 0.0;
};

CornTasks corn_tasks(std::size_t n, const std::vector<int>& labels, int num_classes) {
    if (num_classes < 2) throw ConfigError("corn: need at least two classes");
    if (labels.size() != n) throw ArgumentError("corn: label count mismatch");
    const std::size_t tasks = static_cast<std::size_t>(num_classes - 1);
    CornTasks out{Matrix(n, tasks), Matrix(n, tasks), 0.0};
    for (std::size_t i = 0; i < n; ++i) {
        const int label = labels[i];
        if (label < 0 || label >= num_classes) {
            throw DataError("corn: label " + std::to_string(label) + " outside 0.." +
                            std::to_string(num_classes - 1));
        }
        for (std::size_t k = 1; k <= tasks; ++k) {
            if (label >= static_cast<int>(k) - 1) {
                out.mask.at(i, k - 1) = 1.0;
                out.target.at(i, k - 1) = label >= static_cast<int>(k) ? 1.0 : 0.0;
                out.included += 1.0;
            }
        }
    }
    return out;
}

}  // namespace

double corn_loss(const Matrix& logits, const std::vector<int>& labels, int num_classes) {
    if (logits.rows() == 0) throw ArgumentError("corn_loss: empty batch");
    if (logits.cols() != static_cast<std::size_t>(num_classes - 1)) {
        throw ArgumentError("corn_loss: logits must be N x (K-1)");
    }
    CornTasks tasks = corn_tasks(logits.rows(), labels, num_classes);
    double total = 0.0;
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        for (std::size_t k = 0; k < logits.cols(); ++k) {
            if (tasks.mask.at(i, k) == 0.0) continue;
            const double z = logits.at(i, k);
            total += softplus_stable(z) - tasks.target.at(i, k) * z;
        }
    }
    return tasks.included > 0.0 ? total / tasks.included : 0.0;
}

Var corn_loss(Tape& tape, Var logits, const std::vector<int>& labels, int num_classes) {
    const Matrix& z = tape.value(logits);
    if (z.rows() == 0) throw ArgumentError("corn_loss: empty batch");
    if (z.cols() != static_cast<std::size_t>(num_classes - 1)) {
        throw ArgumentError("corn_loss: logits must be N x (K-1)");
    }
    CornTasks tasks = corn_tasks(z.rows(), labels, num_classes);
    Var target = tape.leaf(tasks.target);
    Var mask = tape.leaf(tasks.mask);
    Var bce = tape.sub(tape.softplus(logits), tape.mul(target, logits));
    Var masked = tape.mul(mask, bce);
    const double denom = tasks.included > 0.0 ? tasks.included : 1.0;
    return tape.scale(tape.sum(masked), 1.0 / denom);
}

CornPrediction corn_predict(const std::vector<double>& logits) {
    CornPrediction out;
    out.cumulative_probs.resize(logits.size());
    double running = 1.0;
    for (std::size_t k = 0; k < logits.size(); ++k) {
        running *= sigmoid_stable(logits[k]);
        out.cumulative_probs[k] = running;
        if (running > 0.5) out.predicted_class += 1;
    }
    return out;
}

}  // namespace wtal
