#pragma once

#include <optional>
#include <string>
#include <vector>

#include "wtal/checkpoint.hpp"
#include "wtal/ctst.hpp"
#include "wtal/detector.hpp"
#include "wtal/losses.hpp"
#include "wtal/manifest.hpp"
#include "wtal/metrics.hpp"
#include "wtal/oe.hpp"
#include "wtal/regressor.hpp"

namespace wtal {

// Architecture of the weak-detection stage: outlier embedder, cross-scale
// transformer and per-token detector.
struct StackConfig {
    std::size_t input_dim = 0;   // D, filled from the data when 0
    std::size_t t_tokens = 32;
    std::size_t model_dim = 128;
    std::size_t levels = 3;
    std::size_t heads = 4;
    std::size_t ffn_dim = 0;     // 0 -> 4 * model_dim
    std::size_t oe_hidden = 256;
    std::size_t det_hidden1 = 256;
    std::size_t det_hidden2 = 128;
    double pos_scale_init = 0.1;

    std::string to_json() const;
    static StackConfig from_json(const std::string& text);
};

// OE + CTST + detector, jointly trainable; the unit the phase-1 checkpoint
// stores and phase 2 / inference load back.
class DetectorStack {
public:
    DetectorStack(const StackConfig& config, RngStream& rng);

    const StackConfig& config() const { return cfg_; }
    OeModel& oe() { return oe_; }
    CtstModel& ctst() { return ctst_; }
    DetectorModel& detector() { return det_; }
    const OeModel& oe() const { return oe_; }
    const CtstModel& ctst() const { return ctst_; }
    const DetectorModel& detector() const { return det_; }

    std::vector<const ParamSet*> param_sets() const;
    std::vector<ParamSet*> param_sets();

    struct Vars {
        std::vector<Var> oe, ctst, det;
    };
    Vars vars(Tape& tape) const;

    struct Forward {
        Var scores;       // T x 1
        Var embedding;    // T x det_hidden2
        Var token_error;  // T x 1 reconstruction error
        Var recon;        // T x D
    };
    Forward forward(Tape& tape, const Vars& vars, Var input) const;

    struct Output {
        TokenScores scores;
        Matrix embedding;
        std::vector<double> token_error;
    };
    Output run(const Matrix& features) const;

private:
    StackConfig cfg_;
    OeModel oe_;
    CtstModel ctst_;
    DetectorModel det_;
};

struct TrainConfig {
    StackConfig stack;
    double lr_detector = 0.001;
    std::size_t epochs_detector = 4000;
    double lr_regressor = 0.0001;
    std::size_t epochs_regressor = 40;
    std::size_t batch = 8;
    LossConfig loss;
    RegressorConfig regressor;
    std::size_t oe_pretrain_epochs = 0;  // reconstruction-only warmup
    bool freeze_oe = false;              // keep OE fixed during joint training
    std::uint64_t seed = 0;

    void validate() const;
};

struct TrainResult {
    std::string checkpoint_path;
    std::string loss_csv_path;
    double final_loss = 0.0;
};

// Phase 1: joint OE reconstruction + self-rectifying detector training over
// (F_O, F_M) batches; one epoch pairs every atypical train sequence with a
// typical partner once.
TrainResult train_detector(const Manifest& manifest, const TrainConfig& config,
                           const std::string& out_dir);

// Phase 2: regressor training on frozen detector embeddings; detector
// parameters are never written.
TrainResult train_regressor(const Manifest& manifest, const std::string& detector_ckpt,
                            const TrainConfig& config, const std::string& out_dir);

struct InferResult {
    std::string id;
    TokenScores scores;
    std::vector<double> token_error;
    double embedding_density = 0.0;
    std::optional<SeverityPrediction> severity;
};

InferResult infer(const std::string& feature_path, const std::string& detector_ckpt,
                  const std::optional<std::string>& regressor_ckpt);

struct EvalOptions {
    Split split = Split::test;
    std::size_t workers = 1;
    std::string heatmap_dir;      // empty -> no export
    int short_burst_max = 2;      // run-length bounds for per-duration AUC
    int long_burst_min = 8;
};

struct PerVideoEval {
    std::string id;
    Label label = Label::typical;
    std::optional<int> severity;
    std::optional<int> predicted;
    double density = 0.0;
    double mean_score = 0.0;
    TokenScores scores;
};

struct EvalReport {
    std::optional<double> frame_auc;
    std::optional<double> auc_short;
    std::optional<double> auc_long;
    std::optional<SeverityMetrics> severity;
    std::vector<std::vector<long>> confusion_counts;
    std::vector<PerVideoEval> videos;

    std::string to_json() const;
};

EvalReport evaluate(const Manifest& manifest, const std::string& detector_ckpt,
                    const std::optional<std::string>& regressor_ckpt,
                    const EvalOptions& options);

// Resampled-to-T sequences of one split.
std::vector<FeatureSequence> load_split(const Manifest& manifest, Split split,
                                        std::size_t t_tokens);

}  // namespace wtal
