// Command-line surface: dataset synthesis, the two training phases,
// evaluation and single-video inference. JSON config files provide defaults;
// explicit flags override them; the effective configuration is echoed to the
// output directory for provenance.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "wtal/errors.hpp"
#include "wtal/pipeline.hpp"
#include "wtal/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 7;
};

json load_config_file(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw wtal::ConfigError("cannot open config file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw wtal::ConfigError("config file '" + path + "': " + e.what());
    }
    if (!j.is_object()) throw wtal::ConfigError("config file must hold a JSON object");
    return j;
}

// Flags beat config-file values; config-file values beat defaults.
template <typename T>
void overlay(const CLI::Option* opt, const json& cfg, const std::string& key, T& target) {
    if (opt != nullptr && opt->count() > 0) return;
    if (cfg.contains(key)) {
        try {
            target = cfg.at(key).get<T>();
        } catch (const json::exception& e) {
            throw wtal::ConfigError("config key '" + key + "': " + e.what());
        }
    }
}

void echo_config(const std::string& out_dir, const json& effective) {
    fs::create_directories(out_dir);
    std::ofstream out(fs::path(out_dir) / "effective_config.json", std::ios::trunc);
    out << effective.dump(2) << "\n";
}

wtal::LossConfig parse_loss(double lambda1, double lambda2, const std::string& sref,
                            const std::string& mode) {
    wtal::LossConfig loss;
    loss.lambda1 = lambda1;
    loss.lambda2 = lambda2;
    if (sref == "mean") {
        loss.sref_policy = wtal::SrefPolicy::per_video_mean;
    } else {
        loss.sref_policy = wtal::SrefPolicy::fixed;
        try {
            loss.sref_value = std::stod(sref);
        } catch (const std::exception&) {
            throw wtal::ConfigError("--sref expects a number or 'mean', got '" + sref + "'");
        }
    }
    if (mode == "diff") {
        loss.mode = wtal::BalanceMode::difference;
    } else if (mode == "sum") {
        loss.mode = wtal::BalanceMode::sum;
    } else {
        throw wtal::ConfigError("--loss-mode expects 'diff' or 'sum', got '" + mode + "'");
    }
    loss.validate();
    return loss;
}

// Named presets: "paper" keeps the published defaults, "desk" shrinks the
// model and the schedule to something that trains in minutes on a laptop.
void apply_preset(const std::string& preset, wtal::TrainConfig& cfg,
                  bool epochs_detector_set, bool epochs_regressor_set, bool model_dim_set,
                  bool oe_hidden_set, bool lr_set) {
    if (preset.empty() || preset == "paper") return;
    if (preset != "desk") throw wtal::ConfigError("unknown preset '" + preset + "'");
    if (!epochs_detector_set) cfg.epochs_detector = 300;
    if (!epochs_regressor_set) cfg.epochs_regressor = 40;
    if (!model_dim_set) cfg.stack.model_dim = 64;
    if (!oe_hidden_set) cfg.stack.oe_hidden = 0;  // auto: min(256, D/2)
    if (!lr_set) cfg.lr_detector = 0.001;
}

int run(int argc, char** argv) {
    CLI::App app{"Weakly-supervised temporal anomaly detection and severity assessment"};
    app.require_subcommand(1);

    // ---- synth ----------------------------------------------------------
    auto* synth = app.add_subcommand("synth", "Generate a synthetic feature dataset");
    CommonArgs synth_args;
    wtal::SynthConfig synth_cfg;
    std::vector<int> train_per_level{synth_cfg.train_per_level.begin(),
                                     synth_cfg.train_per_level.end()};
    std::vector<int> test_per_level{synth_cfg.test_per_level.begin(),
                                    synth_cfg.test_per_level.end()};
    synth->add_option("--config", synth_args.config_path, "JSON config file");
    synth->add_option("--out", synth_args.out_dir, "Output directory")->required();
    auto* synth_seed = synth->add_option("--seed", synth_args.seed, "RNG seed");
    auto* synth_t = synth->add_option("--t-tokens", synth_cfg.t_tokens, "Tokens per video");
    auto* synth_d = synth->add_option("--dims", synth_cfg.dims, "Feature dimensionality");
    auto* synth_mu = synth->add_option("--mu", synth_cfg.burst_shift, "Anomalous mean shift");
    auto* synth_sigma = synth->add_option("--sigma", synth_cfg.noise_sigma, "Noise sigma");
    auto* synth_train =
        synth->add_option("--train-per-level", train_per_level, "Train videos per level")
            ->delimiter(',')
            ->expected(4);
    auto* synth_test =
        synth->add_option("--test-per-level", test_per_level, "Test videos per level")
            ->delimiter(',')
            ->expected(4);

    // ---- shared training options ----------------------------------------
    auto add_train_options = [](CLI::App* cmd, CommonArgs& args, std::string& manifest,
                                wtal::TrainConfig& cfg, std::string& preset, double& lambda1,
                                double& lambda2, std::string& sref, std::string& loss_mode) {
        cmd->add_option("--config", args.config_path, "JSON config file");
        cmd->add_option("--manifest", manifest, "Dataset manifest")->required();
        cmd->add_option("--out", args.out_dir, "Output directory")->required();
        struct Opts {
            CLI::Option* seed;
            CLI::Option* epochs;
            CLI::Option* lr;
            CLI::Option* batch;
            CLI::Option* lambda1;
            CLI::Option* lambda2;
            CLI::Option* sref;
            CLI::Option* loss_mode;
            CLI::Option* levels;
            CLI::Option* model_dim;
            CLI::Option* heads;
            CLI::Option* oe_hidden;
            CLI::Option* t_tokens;
            CLI::Option* preset;
        } opts{};
        opts.seed = cmd->add_option("--seed", args.seed, "RNG seed");
        opts.lambda1 = cmd->add_option("--lambda1", lambda1, "Ranking hinge weight");
        opts.lambda2 = cmd->add_option("--lambda2", lambda2, "Error-balancing weight");
        opts.sref = cmd->add_option("--sref", sref, "Pseudo-label threshold: number or 'mean'");
        opts.loss_mode = cmd->add_option("--loss-mode", loss_mode, "diff|sum");
        opts.levels = cmd->add_option("--levels", cfg.stack.levels, "Pyramid levels");
        opts.model_dim = cmd->add_option("--model-dim", cfg.stack.model_dim, "Token width m");
        opts.heads = cmd->add_option("--heads", cfg.stack.heads, "Attention heads");
        opts.oe_hidden =
            cmd->add_option("--oe-hidden", cfg.stack.oe_hidden, "Autoencoder bottleneck (0=auto)");
        opts.t_tokens = cmd->add_option("--t-tokens", cfg.stack.t_tokens, "Tokens per video");
        opts.batch = cmd->add_option("--batch", cfg.batch, "Batch size");
        opts.preset = cmd->add_option("--preset", preset, "desk|paper");
        return opts;
    };

    // ---- train-detector ---------------------------------------------------
    auto* traind = app.add_subcommand("train-detector", "Phase 1: joint weak training");
    CommonArgs traind_args;
    std::string traind_manifest, traind_preset;
    wtal::TrainConfig traind_cfg;
    double traind_l1 = 1.0, traind_l2 = 1.0;
    std::string traind_sref = "0.5", traind_mode = "diff";
    auto traind_opts = add_train_options(traind, traind_args, traind_manifest, traind_cfg,
                                         traind_preset, traind_l1, traind_l2, traind_sref,
                                         traind_mode);
    auto* traind_epochs =
        traind->add_option("--epochs", traind_cfg.epochs_detector, "Training epochs");
    auto* traind_lr = traind->add_option("--lr", traind_cfg.lr_detector, "Learning rate");
    auto* traind_pre = traind->add_option("--oe-pretrain", traind_cfg.oe_pretrain_epochs,
                                          "Reconstruction-only warmup epochs");
    auto* traind_freeze =
        traind->add_flag("--freeze-oe", traind_cfg.freeze_oe, "Freeze OE during joint training");

    // ---- train-regressor --------------------------------------------------
    auto* trainr = app.add_subcommand("train-regressor", "Phase 2: severity head");
    CommonArgs trainr_args;
    std::string trainr_manifest, trainr_preset, trainr_detector;
    wtal::TrainConfig trainr_cfg;
    double trainr_l1 = 1.0, trainr_l2 = 1.0;
    std::string trainr_sref = "0.5", trainr_mode = "diff";
    auto trainr_opts = add_train_options(trainr, trainr_args, trainr_manifest, trainr_cfg,
                                         trainr_preset, trainr_l1, trainr_l2, trainr_sref,
                                         trainr_mode);
    trainr->add_option("--detector", trainr_detector, "Detector checkpoint")->required();
    auto* trainr_epochs =
        trainr->add_option("--epochs", trainr_cfg.epochs_regressor, "Training epochs");
    auto* trainr_lr = trainr->add_option("--lr", trainr_cfg.lr_regressor, "Learning rate");
    auto* trainr_classes =
        trainr->add_option("--classes", trainr_cfg.regressor.num_classes, "Severity classes K");

    // ---- eval ---------------------------------------------------------------
    auto* evalc = app.add_subcommand("eval", "Evaluate checkpoints over a manifest split");
    CommonArgs eval_args;
    std::string eval_manifest, eval_detector, eval_regressor, eval_split = "test";
    bool eval_heatmaps = false;
    std::size_t eval_workers = 1;
    evalc->add_option("--config", eval_args.config_path, "JSON config file");
    evalc->add_option("--manifest", eval_manifest, "Dataset manifest")->required();
    evalc->add_option("--detector", eval_detector, "Detector checkpoint")->required();
    evalc->add_option("--regressor", eval_regressor, "Regressor checkpoint");
    evalc->add_option("--out", eval_args.out_dir, "Output directory")->required();
    evalc->add_option("--split", eval_split, "train|test");
    auto* eval_workers_opt = evalc->add_option("--workers", eval_workers, "Parallel video workers");
    evalc->add_flag("--export-heatmaps", eval_heatmaps, "Write per-video embedding heatmaps");

    // ---- infer ---------------------------------------------------------------
    auto* inferc = app.add_subcommand("infer", "Score a single feature file");
    std::string infer_features, infer_detector, infer_regressor, infer_out;
    inferc->add_option("--features", infer_features, "Feature file")->required();
    inferc->add_option("--detector", infer_detector, "Detector checkpoint")->required();
    inferc->add_option("--regressor", infer_regressor, "Regressor checkpoint");
    inferc->add_option("--out", infer_out, "Output JSON path (default stdout)");

    CLI11_PARSE(app, argc, argv);

    if (synth->parsed()) {
        json cfg = load_config_file(synth_args.config_path);
        overlay(synth_seed, cfg, "seed", synth_args.seed);
        overlay(synth_t, cfg, "t_tokens", synth_cfg.t_tokens);
        overlay(synth_d, cfg, "dims", synth_cfg.dims);
        overlay(synth_mu, cfg, "mu", synth_cfg.burst_shift);
        overlay(synth_sigma, cfg, "sigma", synth_cfg.noise_sigma);
        overlay(synth_train, cfg, "train_per_level", train_per_level);
        overlay(synth_test, cfg, "test_per_level", test_per_level);
        if (train_per_level.size() != 4 || test_per_level.size() != 4) {
            throw wtal::ConfigError("per-level counts must list exactly 4 values");
        }
        for (int i = 0; i < 4; ++i) {
            synth_cfg.train_per_level[static_cast<std::size_t>(i)] = train_per_level[i];
            synth_cfg.test_per_level[static_cast<std::size_t>(i)] = test_per_level[i];
        }
        synth_cfg.seed = synth_args.seed;
        wtal::SynthResult result = wtal::synth_dataset(synth_cfg, synth_args.out_dir);
        json eff{{"command", "synth"},
                 {"seed", synth_cfg.seed},
                 {"t_tokens", synth_cfg.t_tokens},
                 {"dims", synth_cfg.dims},
                 {"mu", synth_cfg.burst_shift},
                 {"sigma", synth_cfg.noise_sigma},
                 {"train_per_level", train_per_level},
                 {"test_per_level", test_per_level}};
        echo_config(synth_args.out_dir, eff);
        std::cout << "wrote " << result.manifest.entries.size() << " videos under "
                  << synth_args.out_dir << "\n";
        return 0;
    }

    auto finish_train_config = [&](wtal::TrainConfig& cfg, CommonArgs& args, auto& opts,
                                   std::string& preset, double& l1, double& l2,
                                   std::string& sref, std::string& mode,
                                   CLI::Option* epochs_opt, CLI::Option* lr_opt,
                                   bool detector_phase) {
        json file_cfg = load_config_file(args.config_path);
        overlay(opts.seed, file_cfg, "seed", args.seed);
        overlay(opts.lambda1, file_cfg, "lambda1", l1);
        overlay(opts.lambda2, file_cfg, "lambda2", l2);
        overlay(opts.sref, file_cfg, "sref", sref);
        overlay(opts.loss_mode, file_cfg, "loss_mode", mode);
        overlay(opts.levels, file_cfg, "levels", cfg.stack.levels);
        overlay(opts.model_dim, file_cfg, "model_dim", cfg.stack.model_dim);
        overlay(opts.heads, file_cfg, "heads", cfg.stack.heads);
        overlay(opts.oe_hidden, file_cfg, "oe_hidden", cfg.stack.oe_hidden);
        overlay(opts.t_tokens, file_cfg, "t_tokens", cfg.stack.t_tokens);
        overlay(opts.batch, file_cfg, "batch", cfg.batch);
        overlay(opts.preset, file_cfg, "preset", preset);
        if (detector_phase) {
            overlay(epochs_opt, file_cfg, "epochs", cfg.epochs_detector);
            overlay(lr_opt, file_cfg, "lr", cfg.lr_detector);
        } else {
            overlay(epochs_opt, file_cfg, "epochs", cfg.epochs_regressor);
            overlay(lr_opt, file_cfg, "lr", cfg.lr_regressor);
        }
        const bool epochs_set = epochs_opt->count() > 0 || file_cfg.contains("epochs");
        const bool lr_set = lr_opt->count() > 0 || file_cfg.contains("lr");
        const bool dim_set = opts.model_dim->count() > 0 || file_cfg.contains("model_dim");
        const bool oe_set = opts.oe_hidden->count() > 0 || file_cfg.contains("oe_hidden");
        apply_preset(preset, cfg, detector_phase && epochs_set, !detector_phase && epochs_set,
                     dim_set, oe_set, lr_set);
        cfg.loss = parse_loss(l1, l2, sref, mode);
        cfg.seed = args.seed;
    };

    if (traind->parsed()) {
        finish_train_config(traind_cfg, traind_args, traind_opts, traind_preset, traind_l1,
                            traind_l2, traind_sref, traind_mode, traind_epochs, traind_lr, true);
        json file_cfg = load_config_file(traind_args.config_path);
        overlay(traind_pre, file_cfg, "oe_pretrain", traind_cfg.oe_pretrain_epochs);
        overlay(traind_freeze, file_cfg, "freeze_oe", traind_cfg.freeze_oe);
        wtal::Manifest manifest = wtal::Manifest::load(traind_manifest);
        json eff{{"command", "train-detector"},
                 {"manifest", traind_manifest},
                 {"seed", traind_cfg.seed},
                 {"epochs", traind_cfg.epochs_detector},
                 {"lr", traind_cfg.lr_detector},
                 {"batch", traind_cfg.batch},
                 {"lambda1", traind_cfg.loss.lambda1},
                 {"lambda2", traind_cfg.loss.lambda2},
                 {"sref", traind_sref},
                 {"loss_mode", traind_mode},
                 {"levels", traind_cfg.stack.levels},
                 {"model_dim", traind_cfg.stack.model_dim},
                 {"heads", traind_cfg.stack.heads},
                 {"oe_hidden", traind_cfg.stack.oe_hidden},
                 {"t_tokens", traind_cfg.stack.t_tokens},
                 {"oe_pretrain", traind_cfg.oe_pretrain_epochs},
                 {"freeze_oe", traind_cfg.freeze_oe},
                 {"preset", traind_preset.empty() ? "paper" : traind_preset}};
        echo_config(traind_args.out_dir, eff);
        wtal::TrainResult result =
            wtal::train_detector(manifest, traind_cfg, traind_args.out_dir);
        std::cout << "checkpoint: " << result.checkpoint_path << "\n"
                  << "loss curve: " << result.loss_csv_path << "\n"
                  << "final epoch loss: " << result.final_loss << "\n";
        return 0;
    }

    if (trainr->parsed()) {
        finish_train_config(trainr_cfg, trainr_args, trainr_opts, trainr_preset, trainr_l1,
                            trainr_l2, trainr_sref, trainr_mode, trainr_epochs, trainr_lr, false);
        overlay(trainr_classes, load_config_file(trainr_args.config_path), "classes",
                trainr_cfg.regressor.num_classes);
        wtal::Manifest manifest = wtal::Manifest::load(trainr_manifest);
        json eff{{"command", "train-regressor"},
                 {"manifest", trainr_manifest},
                 {"detector", trainr_detector},
                 {"seed", trainr_cfg.seed},
                 {"epochs", trainr_cfg.epochs_regressor},
                 {"lr", trainr_cfg.lr_regressor},
                 {"batch", trainr_cfg.batch},
                 {"classes", trainr_cfg.regressor.num_classes}};
        echo_config(trainr_args.out_dir, eff);
        wtal::TrainResult result = wtal::train_regressor(manifest, trainr_detector, trainr_cfg,
                                                         trainr_args.out_dir);
        std::cout << "checkpoint: " << result.checkpoint_path << "\n"
                  << "loss curve: " << result.loss_csv_path << "\n"
                  << "final epoch loss: " << result.final_loss << "\n";
        return 0;
    }

    if (evalc->parsed()) {
        json file_cfg = load_config_file(eval_args.config_path);
        overlay(eval_workers_opt, file_cfg, "workers", eval_workers);
        wtal::Manifest manifest = wtal::Manifest::load(eval_manifest);
        wtal::EvalOptions options;
        options.split = wtal::split_from_string(eval_split);
        options.workers = eval_workers;
        if (eval_heatmaps) {
            options.heatmap_dir = (fs::path(eval_args.out_dir) / "heatmaps").string();
        }
        std::optional<std::string> reg;
        if (!eval_regressor.empty()) reg = eval_regressor;
        wtal::EvalReport report = wtal::evaluate(manifest, eval_detector, reg, options);

        fs::create_directories(eval_args.out_dir);
        json eff{{"command", "eval"},
                 {"manifest", eval_manifest},
                 {"detector", eval_detector},
                 {"regressor", eval_regressor},
                 {"split", eval_split},
                 {"workers", eval_workers}};
        echo_config(eval_args.out_dir, eff);
        const std::string report_path = (fs::path(eval_args.out_dir) / "report.json").string();
        std::ofstream out(report_path, std::ios::trunc);
        out << report.to_json() << "\n";
        if (!report.confusion_counts.empty()) {
            std::ofstream cm(fs::path(eval_args.out_dir) / "confusion.csv", std::ios::trunc);
            for (const auto& row : report.confusion_counts) {
                for (std::size_t j = 0; j < row.size(); ++j) {
                    if (j > 0) cm << ',';
                    cm << row[j];
                }
                cm << '\n';
            }
        }
        std::cout << "report: " << report_path << "\n";
        if (report.frame_auc.has_value()) std::cout << "frame AUC: " << *report.frame_auc << "\n";
        if (report.severity.has_value()) {
            std::cout << "severity accuracy: " << report.severity->accuracy
                      << " MAE: " << report.severity->mae << " MSE: " << report.severity->mse
                      << "\n";
        }
        return 0;
    }

    if (inferc->parsed()) {
        std::optional<std::string> reg;
        if (!infer_regressor.empty()) reg = infer_regressor;
        wtal::InferResult result = wtal::infer(infer_features, infer_detector, reg);
        json j;
        j["id"] = result.id;
        j["scores"] = result.scores;
        j["token_error"] = result.token_error;
        j["embedding_density"] = result.embedding_density;
        if (result.severity.has_value()) {
            j["severity"] = {{"class", result.severity->predicted_class},
                             {"rank_probs", result.severity->cumulative_probs},
                             {"logits", result.severity->logits}};
        } else {
            j["severity"] = nullptr;
        }
        if (infer_out.empty()) {
            std::cout << j.dump(2) << "\n";
        } else {
            std::ofstream out(infer_out, std::ios::trunc);
            out << j.dump(2) << "\n";
        }
        return 0;
    }

    return 0;
}

json error_json(const std::string& type, const std::string& message) {
    json j;
    j["error"] = {{"type", type}, {"message", message}};
    return j;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const wtal::ConfigError& e) {
        std::cerr << error_json("config", e.what()).dump() << "\n";
        return 3;
    } catch (const wtal::DataError& e) {
        std::cerr << error_json("data", e.what()).dump() << "\n";
        return 2;
    } catch (const wtal::FormatError& e) {
        std::cerr << error_json("format", e.what()).dump() << "\n";
        return 4;
    } catch (const wtal::CheckpointError& e) {
        std::cerr << error_json("checkpoint", e.what()).dump() << "\n";
        return 5;
    } catch (const wtal::MetricError& e) {
        std::cerr << error_json("metric", e.what()).dump() << "\n";
        return 6;
    } catch (const wtal::ArgumentError& e) {
        std::cerr << error_json("argument", e.what()).dump() << "\n";
        return 7;
    } catch (const std::exception& e) {
        std::cerr << error_json("internal", e.what()).dump() << "\n";
        return 1;
    }
}
