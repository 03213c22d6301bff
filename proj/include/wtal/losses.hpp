#pragma once

#include <vector>

#include "wtal/matrix.hpp"
#include "wtal/tape.hpp"

namespace wtal {

enum class ScoreKind { typical, autistic };
enum class BalanceMode { difference, sum };
enum class SrefPolicy { fixed, per_video_mean };

// Aggregation of the per-token scores inside the training hinge. `sum` is
// the written form; `topk` ranks the k strongest tokens of each video
// against each other (k = 1 is the classic MIL max), which localizes
// instead of broadcasting a video-level offset.
enum class HingeAgg { sum, topk };

struct LossConfig {
    double lambda1 = 1.0;                       // ranking hinge weight
    double lambda2 = 1.0;                       // error-balancing weight
    SrefPolicy sref_policy = SrefPolicy::fixed;
    double sref_value = 0.5;                    // used when policy is fixed
    BalanceMode mode = BalanceMode::difference;
    HingeAgg hinge_agg = HingeAgg::sum;
    std::size_t topk = 1;                       // used when hinge_agg is topk

    void validate() const;
};

// max(0, 1 - sum(S_a) + sum(S_t)); both score vectors must share T.
double ranking_hinge(const std::vector<double>& s_atypical,
                     const std::vector<double>& s_typical);
Var ranking_hinge(Tape& tape, Var s_atypical, Var s_typical);  // T x 1 vars

// max(0, 1 - mean(top-k S_a) + mean(top-k S_t)); k clamps to T.
double topk_ranking_hinge(const std::vector<double>& s_atypical,
                          const std::vector<double>& s_typical, std::size_t k);
Var topk_ranking_hinge(Tape& tape, Var s_atypical, Var s_typical, std::size_t k);

// Pseudo-label thresholds used by the self-rectifying term: scores above
// s_ref count as autistic, ties resolve to typical.
std::vector<int> pseudo_labels(const std::vector<double>& scores, double s_ref);

double resolve_sref(const std::vector<double>& scores, const LossConfig& config);

// Mean squared residual to pseudo-labels: typical videos target all-zero
// labels; autistic videos target the thresholded labels.
double err(const std::vector<double>& scores, ScoreKind kind, const LossConfig& config);
Var err(Tape& tape, Var scores, ScoreKind kind, const LossConfig& config);

// lambda1 * hinge + lambda2 * |err_t - err_a|   (difference mode)
// lambda1 * hinge + lambda2 * (err_t + err_a)   (sum mode)
double self_rectifying_loss(const std::vector<double>& s_atypical,
                            const std::vector<double>& s_typical, const LossConfig& config);
Var self_rectifying_loss(Tape& tape, Var s_atypical, Var s_typical, const LossConfig& config);

// CORN ordinal loss over K-1 conditional binary tasks. logits: N x (K-1),
// labels in 0..K-1. Task k (1-based) covers samples with label >= k-1 and
// targets 1[label >= k]; the total BCE is divided by the number of included
// (sample, task) pairs. An empty task contributes nothing.
double corn_loss(const Matrix& logits, const std::vector<int>& labels, int num_classes);
Var corn_loss(Tape& tape, Var logits, const std::vector<int>& labels, int num_classes);

struct CornPrediction {
    int predicted_class = 0;
    std::vector<double> cumulative_probs;  // P(y > k), non-increasing in k
};

// Chained conditional probabilities: P(y > k) = prod_{j<=k+1} sigmoid(z_j);
// the class counts how many stay above 0.5.
CornPrediction corn_predict(const std::vector<double>& logits);

}  // namespace wtal
