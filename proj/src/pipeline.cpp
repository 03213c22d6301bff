#include "wtal/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "wtal/errors.hpp"
#include "wtal/synth.hpp"

namespace wtal {

namespace fs = std::filesystem;
using nlohmann::json;

std::string StackConfig::to_json() const {
    json j;
    j["kind"] = "detector";
    j["input_dim"] = input_dim;
    j["t_tokens"] = t_tokens;
    j["model_dim"] = model_dim;
    j["levels"] = levels;
    j["heads"] = heads;
    j["ffn_dim"] = ffn_dim;
    j["oe_hidden"] = oe_hidden;
    j["det_hidden1"] = det_hidden1;
    j["det_hidden2"] = det_hidden2;
    j["pos_scale_init"] = pos_scale_init;
    return j.dump();
}

StackConfig StackConfig::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw CheckpointError(std::string("stack config: ") + e.what());
    }
    if (j.value("kind", "") != "detector") {
        throw CheckpointError("stack config: expected kind 'detector'");
    }
    StackConfig c;
    c.input_dim = j.at("input_dim").get<std::size_t>();
    c.t_tokens = j.at("t_tokens").get<std::size_t>();
    c.model_dim = j.at("model_dim").get<std::size_t>();
    c.levels = j.at("levels").get<std::size_t>();
    c.heads = j.at("heads").get<std::size_t>();
    c.ffn_dim = j.at("ffn_dim").get<std::size_t>();
    c.oe_hidden = j.at("oe_hidden").get<std::size_t>();
    c.det_hidden1 = j.at("det_hidden1").get<std::size_t>();
    c.det_hidden2 = j.at("det_hidden2").get<std::size_t>();
    c.pos_scale_init = j.at("pos_scale_init").get<double>();
    return c;
}

namespace {

OeConfig make_oe_config(const StackConfig& c) {
    OeConfig oc;
    oc.input_dim = c.input_dim;
    oc.hidden = c.oe_hidden;
    oc.embed_dim = c.model_dim;
    oc.pos_scale_init = c.pos_scale_init;
    return oc;
}

CtstConfig make_ctst_config(const StackConfig& c) {
    CtstConfig cc;
    cc.input_dim = c.input_dim;
    cc.model_dim = c.model_dim;
    cc.levels = c.levels;
    cc.heads = c.heads;
    cc.ffn_dim = c.ffn_dim;
    return cc;
}

DetectorConfig make_detector_config(const StackConfig& c) {
    DetectorConfig dc;
    dc.input_dim = c.levels * c.model_dim;
    dc.hidden1 = c.det_hidden1;
    dc.hidden2 = c.det_hidden2;
    return dc;
}

void write_csv_value(std::ofstream& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << buf;
}

std::string provenance_json(std::uint64_t seed, std::size_t epochs, double lr,
                            const std::vector<double>& losses) {
    json j;
    j["seed"] = seed;
    j["epochs"] = epochs;
    j["lr"] = lr;
    const std::size_t tail = std::min<std::size_t>(losses.size(), 16);
    j["loss_tail"] = std::vector<double>(losses.end() - static_cast<long>(tail), losses.end());
    return j.dump();
}

}  // namespace

DetectorStack::DetectorStack(const StackConfig& config, RngStream& rng)
    : cfg_(config),
      oe_(make_oe_config(config), rng),
      ctst_(make_ctst_config(config), rng),
      det_(make_detector_config(config), rng) {}

std::vector<const ParamSet*> DetectorStack::param_sets() const {
    return {&oe_.params(), &ctst_.params(), &det_.params()};
}

std::vector<ParamSet*> DetectorStack::param_sets() {
    return {&oe_.params(), &ctst_.params(), &det_.params()};
}

DetectorStack::Vars DetectorStack::vars(Tape& tape) const {
    return Vars{oe_.params().leaves(tape), ctst_.params().leaves(tape),
                det_.params().leaves(tape)};
}

DetectorStack::Forward DetectorStack::forward(Tape& tape, const Vars& vars, Var input) const {
    OeModel::Forward oe_fwd = oe_.forward(tape, vars.oe, input);
    Var pos = oe_.position_embedding(tape, vars.oe, oe_fwd.token_error);
    Var cross = ctst_.forward(tape, vars.ctst, input, pos);
    DetectorModel::Forward det_fwd = det_.forward(tape, vars.det, cross);
    return Forward{det_fwd.scores, det_fwd.embedding, oe_fwd.token_error, oe_fwd.recon};
}

DetectorStack::Output DetectorStack::run(const Matrix& features) const {
    Tape tape;
    Vars v = vars(tape);
    Var input = tape.leaf(features);
    Forward fwd = forward(tape, v, input);
    Output out;
    const Matrix& s = tape.value(fwd.scores);
    out.scores.resize(s.rows());
    for (std::size_t i = 0; i < s.rows(); ++i) out.scores[i] = s.at(i, 0);
    out.embedding = tape.value(fwd.embedding);
    const Matrix& e = tape.value(fwd.token_error);
    out.token_error.resize(e.rows());
    for (std::size_t i = 0; i < e.rows(); ++i) out.token_error[i] = e.at(i, 0);
    return out;
}

void TrainConfig::validate() const {
    if (lr_detector <= 0.0 || lr_regressor <= 0.0) throw ConfigError("train: lr must be positive");
    if (epochs_detector == 0 || epochs_regressor == 0) {
        throw ConfigError("train: epochs must be positive");
    }
    if (batch == 0) throw ConfigError("train: batch must be positive");
    loss.validate();
}

std::vector<FeatureSequence> load_split(const Manifest& manifest, Split split,
                                        std::size_t t_tokens) {
    std::vector<FeatureSequence> out;
    for (std::size_t i : manifest.select(split)) {
        FeatureSequence seq = manifest.load_sequence(i);
        if (seq.features.rows() != t_tokens) {
            seq.features = temporal_resample(seq.features, t_tokens);
        }
        out.push_back(std::move(seq));
    }
    return out;
}

TrainResult train_detector(const Manifest& manifest, const TrainConfig& config,
                           const std::string& out_dir) {
    config.validate();
    fs::create_directories(out_dir);

    std::vector<FeatureSequence> train = load_split(manifest, Split::train, config.stack.t_tokens);
    std::vector<std::size_t> typical, atypical;
    for (std::size_t i = 0; i < train.size(); ++i) {
        (train[i].label == Label::typical ? typical : atypical).push_back(i);
    }
    if (typical.empty()) throw DataError("train_detector: no typical train sequences");
    if (atypical.empty()) {
        throw DataError("train_detector: no atypical train sequences, cannot form S_a");
    }

    StackConfig stack_cfg = config.stack;
    if (stack_cfg.input_dim == 0) stack_cfg.input_dim = train[0].features.cols();
    for (const auto& seq : train) {
        if (seq.features.cols() != stack_cfg.input_dim) {
            throw DataError("train_detector: sequence '" + seq.id + "' has width " +
                            std::to_string(seq.features.cols()) + ", expected " +
                            std::to_string(stack_cfg.input_dim));
        }
    }

    RngStream init_rng(config.seed, 0);
    DetectorStack stack(stack_cfg, init_rng);
    AdamHyper hyper;
    hyper.lr = config.lr_detector;
    AdamState oe_opt(stack.oe().params(), hyper);
    AdamState ctst_opt(stack.ctst().params(), hyper);
    AdamState det_opt(stack.detector().params(), hyper);

    const std::string csv_path = (fs::path(out_dir) / "detector_loss.csv").string();
    std::ofstream csv(csv_path, std::ios::trunc);
    if (!csv) throw DataError("train_detector: cannot write '" + csv_path + "'");
    csv << "step,epoch,recon,rank,total\n";

    // Reconstruction-only warmup on typical sequences, if requested.
    RngStream warmup_rng(config.seed, 4);
    for (std::size_t epoch = 0; epoch < config.oe_pretrain_epochs; ++epoch) {
        std::vector<std::size_t> order = typical;
        warmup_rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += config.batch) {
            std::vector<const FeatureSequence*> batch;
            for (std::size_t i = start; i < std::min(start + config.batch, order.size()); ++i) {
                batch.push_back(&train[order[i]]);
            }
            oe_train_step(batch, stack.oe(), oe_opt);
        }
    }

    RngStream order_rng(config.seed, 1);
    const std::size_t pairs_per_step = std::max<std::size_t>(1, config.batch / 2);
    std::vector<double> epoch_losses;
    std::size_t step = 0;
    std::size_t fo_cursor = 0;
    std::vector<std::size_t> fo_order = typical;
    order_rng.shuffle(fo_order);

    for (std::size_t epoch = 0; epoch < config.epochs_detector; ++epoch) {
        // One pass over pairings: every atypical sequence once, each matched
        // with a typical partner.
        std::vector<std::size_t> atyp_order = atypical;
        order_rng.shuffle(atyp_order);
        std::vector<std::size_t> typ_order = typical;
        order_rng.shuffle(typ_order);
        double epoch_total = 0.0;
        std::size_t epoch_steps = 0;

        for (std::size_t start = 0; start < atyp_order.size(); start += pairs_per_step) {
            const std::size_t end = std::min(start + pairs_per_step, atyp_order.size());
            Tape tape;
            DetectorStack::Vars vars = stack.vars(tape);

            // F_O: typical-only reconstruction batch.
            std::vector<Var> recon_losses;
            for (std::size_t b = 0; b < config.batch; ++b) {
                if (fo_cursor >= fo_order.size()) {
                    fo_cursor = 0;
                    order_rng.shuffle(fo_order);
                }
                const FeatureSequence& seq = train[fo_order[fo_cursor++]];
                Var input = tape.leaf(seq.features);
                OeModel::Forward oe_fwd = stack.oe().forward(tape, vars.oe, input);
                Var diff = tape.sub(input, oe_fwd.recon);
                recon_losses.push_back(tape.sum(tape.mul(diff, diff)));
            }
            Var recon_loss = tape.scale(tape.sum(tape.concat_rows(recon_losses)),
                                        1.0 / static_cast<double>(recon_losses.size()));

            // F_M: per pair, detector scores of the atypical and typical member.
            std::vector<Var> pair_losses;
            for (std::size_t p = start; p < end; ++p) {
                const FeatureSequence& atyp = train[atyp_order[p]];
                const FeatureSequence& typ = train[typ_order[p % typ_order.size()]];
                DetectorStack::Forward fa = stack.forward(tape, vars, tape.leaf(atyp.features));
                DetectorStack::Forward ft = stack.forward(tape, vars, tape.leaf(typ.features));
                pair_losses.push_back(
                    self_rectifying_loss(tape, fa.scores, ft.scores, config.loss));
            }
            Var rank_loss = tape.scale(tape.sum(tape.concat_rows(pair_losses)),
                                       1.0 / static_cast<double>(pair_losses.size()));

            Var total = config.freeze_oe ? rank_loss : tape.add(recon_loss, rank_loss);
            tape.backward(total);

            for (ParamSet* ps : stack.param_sets()) ps->zero_grads();
            if (!config.freeze_oe) stack.oe().params().accumulate_grads(tape, vars.oe);
            stack.ctst().params().accumulate_grads(tape, vars.ctst);
            stack.detector().params().accumulate_grads(tape, vars.det);
            if (!config.freeze_oe) adam_step(stack.oe().params(), oe_opt);
            adam_step(stack.ctst().params(), ctst_opt);
            adam_step(stack.detector().params(), det_opt);
            for (ParamSet* ps : stack.param_sets()) ps->zero_grads();

            const double total_v = tape.scalar(total);
            csv << step << "," << epoch << ",";
            write_csv_value(csv, tape.scalar(recon_loss));
            csv << ",";
            write_csv_value(csv, tape.scalar(rank_loss));
            csv << ",";
            write_csv_value(csv, total_v);
            csv << "\n";
            epoch_total += total_v;
            epoch_steps += 1;
            step += 1;
        }
        epoch_losses.push_back(epoch_total / static_cast<double>(std::max<std::size_t>(1, epoch_steps)));
    }

    Checkpoint ckpt;
    ckpt.arch_json = stack_cfg.to_json();
    ckpt.provenance_json =
        provenance_json(config.seed, config.epochs_detector, config.lr_detector, epoch_losses);
    ckpt.tensors = snapshot_params(std::as_const(stack).param_sets());

    TrainResult result;
    result.checkpoint_path = (fs::path(out_dir) / "detector.ckpt").string();
    result.loss_csv_path = csv_path;
    result.final_loss = epoch_losses.empty() ? 0.0 : epoch_losses.back();
    save_checkpoint(result.checkpoint_path, ckpt);
    return result;
}

namespace {

DetectorStack load_stack(const Checkpoint& ckpt) {
    StackConfig cfg = StackConfig::from_json(ckpt.arch_json);
    RngStream rng(0, 0);  // parameters are overwritten right below
    DetectorStack stack(cfg, rng);
    std::vector<ParamSet*> sets = stack.param_sets();
    restore_params(ckpt, sets);
    return stack;
}

std::string regressor_arch_json(const RegressorConfig& cfg, std::uint64_t detector_hash) {
    json j;
    j["kind"] = "regressor";
    j["input_dim"] = cfg.input_dim;
    j["embed_dim"] = cfg.embed_dim;
    j["tcn_channels"] = cfg.tcn_channels;
    j["mlp_hidden"] = cfg.mlp_hidden;
    j["num_classes"] = cfg.num_classes;
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(detector_hash));
    j["detector_arch_hash"] = buf;
    return j.dump();
}

RegressorConfig regressor_config_from_json(const std::string& text,
                                           std::string* detector_hash_hex) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw CheckpointError(std::string("regressor config: ") + e.what());
    }
    if (j.value("kind", "") != "regressor") {
        throw CheckpointError("regressor config: expected kind 'regressor'");
    }
    RegressorConfig cfg;
    cfg.input_dim = j.at("input_dim").get<std::size_t>();
    cfg.embed_dim = j.at("embed_dim").get<std::size_t>();
    cfg.tcn_channels = j.at("tcn_channels").get<std::vector<std::size_t>>();
    cfg.mlp_hidden = j.at("mlp_hidden").get<std::vector<std::size_t>>();
    cfg.num_classes = j.at("num_classes").get<int>();
    if (detector_hash_hex != nullptr) {
        *detector_hash_hex = j.at("detector_arch_hash").get<std::string>();
    }
    return cfg;
}

std::string hash_hex(std::uint64_t hash) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

}  // namespace

TrainResult train_regressor(const Manifest& manifest, const std::string& detector_ckpt,
                            const TrainConfig& config, const std::string& out_dir) {
    config.validate();
    fs::create_directories(out_dir);

    Checkpoint det_ckpt = load_checkpoint(detector_ckpt);
    DetectorStack stack = load_stack(det_ckpt);

    std::vector<FeatureSequence> train =
        load_split(manifest, Split::train, stack.config().t_tokens);
    if (train.empty()) throw DataError("train_regressor: empty train split");
    for (const auto& seq : train) {
        if (!seq.severity.has_value()) {
            throw DataError("train_regressor: sequence '" + seq.id +
                            "' is missing a severity label");
        }
    }

    RegressorConfig reg_cfg = config.regressor;
    if (reg_cfg.input_dim == 0) reg_cfg.input_dim = train[0].features.cols();
    reg_cfg.embed_dim = stack.config().det_hidden2;
    for (const auto& seq : train) {
        const int k = reg_cfg.num_classes;
        if (*seq.severity >= k) {
            throw DataError("train_regressor: severity " + std::to_string(*seq.severity) +
                            " outside 0.." + std::to_string(k - 1));
        }
    }

    // Frozen detector: compute embeddings once, up front.
    std::vector<Matrix> embeddings;
    embeddings.reserve(train.size());
    for (const auto& seq : train) embeddings.push_back(stack.run(seq.features).embedding);

    RngStream init_rng(config.seed, 2);
    RegressorModel model(reg_cfg, init_rng);
    AdamHyper hyper;
    hyper.lr = config.lr_regressor;
    AdamState opt(model.params(), hyper);

    const std::string csv_path = (fs::path(out_dir) / "regressor_loss.csv").string();
    std::ofstream csv(csv_path, std::ios::trunc);
    if (!csv) throw DataError("train_regressor: cannot write '" + csv_path + "'");
    csv << "step,epoch,corn\n";

    RngStream order_rng(config.seed, 3);
    std::vector<double> epoch_losses;
    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < config.epochs_regressor; ++epoch) {
        std::vector<std::size_t> order(train.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        order_rng.shuffle(order);
        double epoch_total = 0.0;
        std::size_t epoch_steps = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch) {
            const std::size_t end = std::min(start + config.batch, order.size());
            Tape tape;
            std::vector<Var> vars = model.params().leaves(tape);
            std::vector<Var> logit_rows;
            std::vector<int> labels;
            for (std::size_t i = start; i < end; ++i) {
                const FeatureSequence& seq = train[order[i]];
                logit_rows.push_back(model.forward(tape, vars, tape.leaf(seq.features),
                                                   tape.leaf(embeddings[order[i]])));
                labels.push_back(*seq.severity);
            }
            Var logits = logit_rows.size() == 1 ? logit_rows[0] : tape.concat_rows(logit_rows);
            Var loss = corn_loss(tape, logits, labels, reg_cfg.num_classes);
            tape.backward(loss);
            model.params().zero_grads();
            model.params().accumulate_grads(tape, vars);
            adam_step(model.params(), opt);
            model.params().zero_grads();

            const double loss_v = tape.scalar(loss);
            csv << step << "," << epoch << ",";
            write_csv_value(csv, loss_v);
            csv << "\n";
            epoch_total += loss_v;
            epoch_steps += 1;
            step += 1;
        }
        epoch_losses.push_back(epoch_total / static_cast<double>(std::max<std::size_t>(1, epoch_steps)));
    }

    Checkpoint ckpt;
    ckpt.arch_json = regressor_arch_json(reg_cfg, det_ckpt.arch_hash());
    ckpt.provenance_json =
        provenance_json(config.seed, config.epochs_regressor, config.lr_regressor, epoch_losses);
    ckpt.tensors = snapshot_params({&model.params()});

    TrainResult result;
    result.checkpoint_path = (fs::path(out_dir) / "regressor.ckpt").string();
    result.loss_csv_path = csv_path;
    result.final_loss = epoch_losses.empty() ? 0.0 : epoch_losses.back();
    save_checkpoint(result.checkpoint_path, ckpt);
    return result;
}

namespace {

struct LoadedRegressor {
    RegressorModel model;
    RegressorConfig config;
};

LoadedRegressor load_regressor(const std::string& path, std::uint64_t detector_hash) {
    Checkpoint ckpt = load_checkpoint(path);
    std::string recorded_hash;
    RegressorConfig cfg = regressor_config_from_json(ckpt.arch_json, &recorded_hash);
    if (recorded_hash != hash_hex(detector_hash)) {
        throw CheckpointError("regressor checkpoint was trained against detector config " +
                              recorded_hash + ", got " + hash_hex(detector_hash));
    }
    RngStream rng(0, 0);
    RegressorModel model(cfg, rng);
    std::vector<ParamSet*> sets{&model.params()};
    restore_params(ckpt, sets);
    return LoadedRegressor{std::move(model), std::move(cfg)};
}

}  // namespace

InferResult infer(const std::string& feature_path, const std::string& detector_ckpt,
                  const std::optional<std::string>& regressor_ckpt) {
    Checkpoint det_ckpt = load_checkpoint(detector_ckpt);
    DetectorStack stack = load_stack(det_ckpt);

    FeatureSequence seq = load_feature_file(feature_path);
    if (seq.features.rows() != stack.config().t_tokens) {
        seq.features = temporal_resample(seq.features, stack.config().t_tokens);
    }
    if (seq.features.cols() != stack.config().input_dim) {
        throw DataError("infer: feature width " + std::to_string(seq.features.cols()) +
                        " does not match checkpoint input dim " +
                        std::to_string(stack.config().input_dim));
    }

    DetectorStack::Output out = stack.run(seq.features);
    InferResult result;
    result.id = seq.id;
    result.scores = std::move(out.scores);
    result.token_error = std::move(out.token_error);
    result.embedding_density = embedding_density(out.embedding);

    if (regressor_ckpt.has_value()) {
        LoadedRegressor reg = load_regressor(*regressor_ckpt, det_ckpt.arch_hash());
        result.severity = reg.model.predict(seq.features, out.embedding);
    }
    return result;
}

std::string EvalReport::to_json() const {
    json j;
    j["frame_auc"] = frame_auc.has_value() ? json(*frame_auc) : json(nullptr);
    j["auc_short"] = auc_short.has_value() ? json(*auc_short) : json(nullptr);
    j["auc_long"] = auc_long.has_value() ? json(*auc_long) : json(nullptr);
    if (severity.has_value()) {
        j["severity"] = {{"accuracy", severity->accuracy},
                         {"mae", severity->mae},
                         {"mse", severity->mse}};
    } else {
        j["severity"] = nullptr;
    }
    j["confusion"] = confusion_counts;
    j["num_videos"] = videos.size();
    json vids = json::array();
    for (const auto& v : videos) {
        json rec;
        rec["id"] = v.id;
        rec["label"] = to_string(v.label);
        rec["severity"] = v.severity.has_value() ? json(*v.severity) : json(nullptr);
        rec["predicted"] = v.predicted.has_value() ? json(*v.predicted) : json(nullptr);
        rec["density"] = v.density;
        rec["mean_score"] = v.mean_score;
        rec["scores"] = v.scores;
        vids.push_back(std::move(rec));
    }
    j["videos"] = std::move(vids);
    return j.dump(2);
}

EvalReport evaluate(const Manifest& manifest, const std::string& detector_ckpt,
                    const std::optional<std::string>& regressor_ckpt,
                    const EvalOptions& options) {
    Checkpoint det_ckpt = load_checkpoint(detector_ckpt);
    DetectorStack stack = load_stack(det_ckpt);

    std::optional<LoadedRegressor> regressor;
    if (regressor_ckpt.has_value()) {
        regressor.emplace(load_regressor(*regressor_ckpt, det_ckpt.arch_hash()));
    }

    const std::vector<std::size_t> indices = manifest.select(options.split);
    if (indices.empty()) {
        throw DataError("evaluate: split '" + to_string(options.split) + "' is empty");
    }

    struct VideoWork {
        FeatureSequence seq;
        std::vector<int> mask;     // empty when no ground truth available
        DetectorStack::Output out;
        std::optional<SeverityPrediction> pred;
    };
    std::vector<VideoWork> work(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        work[i].seq = manifest.load_sequence(indices[i]);
        if (work[i].seq.features.rows() != stack.config().t_tokens) {
            work[i].seq.features =
                temporal_resample(work[i].seq.features, stack.config().t_tokens);
        }
        const std::string mask_path = mask_path_for(manifest, indices[i]);
        if (fs::exists(mask_path)) {
            std::vector<int> mask = load_mask(mask_path);
            if (mask.size() != stack.config().t_tokens) {
                throw DataError("evaluate: mask length " + std::to_string(mask.size()) +
                                " does not match T=" + std::to_string(stack.config().t_tokens) +
                                " for '" + work[i].seq.id + "'");
            }
            work[i].mask = std::move(mask);
        }
    }

    // Per-video forward passes are independent; stripe them across workers.
    const std::size_t workers = std::max<std::size_t>(1, options.workers);
    auto process = [&](std::size_t begin, std::size_t stride) {
        for (std::size_t i = begin; i < work.size(); i += stride) {
            work[i].out = stack.run(work[i].seq.features);
            if (regressor.has_value()) {
                work[i].pred =
                    regressor->model.predict(work[i].seq.features, work[i].out.embedding);
            }
        }
    };
    if (workers == 1) {
        process(0, 1);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(process, w, workers);
        for (auto& th : pool) th.join();
    }

    EvalReport report;
    std::vector<double> all_scores;
    std::vector<int> all_labels;
    std::vector<double> short_scores, long_scores;  // positives by burst duration
    std::vector<double> neg_scores;
    std::vector<int> sev_pred, sev_truth;

    for (std::size_t i = 0; i < work.size(); ++i) {
        VideoWork& v = work[i];
        PerVideoEval rec;
        rec.id = v.seq.id;
        rec.label = v.seq.label;
        rec.severity = v.seq.severity;
        rec.density = embedding_density(v.out.embedding);
        rec.scores = v.out.scores;
        double mean = 0.0;
        for (double s : v.out.scores) mean += s;
        rec.mean_score = v.out.scores.empty() ? 0.0 : mean / static_cast<double>(v.out.scores.size());

        if (!v.mask.empty()) {
            // Run lengths classify each positive token's burst duration.
            std::vector<int> run_len(v.mask.size(), 0);
            std::size_t t = 0;
            while (t < v.mask.size()) {
                if (v.mask[t] == 0) {
                    ++t;
                    continue;
                }
                std::size_t end = t;
                while (end < v.mask.size() && v.mask[end] == 1) ++end;
                for (std::size_t k = t; k < end; ++k) run_len[k] = static_cast<int>(end - t);
                t = end;
            }
            for (std::size_t k = 0; k < v.mask.size(); ++k) {
                all_scores.push_back(v.out.scores[k]);
                all_labels.push_back(v.mask[k]);
                if (v.mask[k] == 1) {
                    if (run_len[k] <= options.short_burst_max) {
                        short_scores.push_back(v.out.scores[k]);
                    } else if (run_len[k] >= options.long_burst_min) {
                        long_scores.push_back(v.out.scores[k]);
                    }
                } else {
                    neg_scores.push_back(v.out.scores[k]);
                }
            }
        }

        if (v.pred.has_value()) {
            rec.predicted = v.pred->predicted_class;
            if (v.seq.severity.has_value()) {
                sev_pred.push_back(v.pred->predicted_class);
                sev_truth.push_back(*v.seq.severity);
            }
        }

        if (!options.heatmap_dir.empty()) {
            fs::create_directories(options.heatmap_dir);
            export_heatmap(v.out.embedding,
                           (fs::path(options.heatmap_dir) / v.seq.id).string());
        }
        report.videos.push_back(std::move(rec));
    }

    bool has_pos = false, has_neg = false;
    for (int l : all_labels) (l == 1 ? has_pos : has_neg) = true;
    if (has_pos && has_neg) {
        report.frame_auc = frame_auc(all_scores, all_labels);
        auto duration_auc = [&](const std::vector<double>& pos) -> std::optional<double> {
            if (pos.empty() || neg_scores.empty()) return std::nullopt;
            std::vector<double> scores = pos;
            scores.insert(scores.end(), neg_scores.begin(), neg_scores.end());
            std::vector<int> labels(pos.size(), 1);
            labels.resize(scores.size(), 0);
            return frame_auc(scores, labels);
        };
        report.auc_short = duration_auc(short_scores);
        report.auc_long = duration_auc(long_scores);
    }

    if (!sev_pred.empty()) {
        report.severity = severity_metrics(sev_pred, sev_truth);
        const int k = regressor.has_value() ? regressor->config.num_classes : 4;
        report.confusion_counts = confusion(sev_pred, sev_truth, k);
    }
    return report;
}

}  // namespace wtal
