#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>

#include "wtal/checkpoint.hpp"
#include "wtal/errors.hpp"
#include "wtal/grad_check.hpp"
#include "wtal/pipeline.hpp"
#include "wtal/synth.hpp"

using namespace wtal;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() /
               ("wtal_pipe_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str() const { return path.string(); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

// Small synthetic dataset + small stack so each training step is cheap.
SynthConfig small_synth(std::uint64_t seed) {
    SynthConfig cfg;
    cfg.train_per_level = {6, 2, 2, 2};
    cfg.test_per_level = {2, 1, 1, 1};
    cfg.t_tokens = 12;
    cfg.dims = 12;
    cfg.level_budget = {{{0, 0}, {1, 2}, {3, 4}, {5, 8}}};
    cfg.long_burst = {4, 6};
    cfg.seed = seed;
    return cfg;
}

TrainConfig small_train() {
    TrainConfig cfg;
    cfg.stack.t_tokens = 12;
    cfg.stack.model_dim = 8;
    cfg.stack.levels = 2;
    cfg.stack.heads = 2;
    cfg.stack.ffn_dim = 16;
    cfg.stack.oe_hidden = 4;
    cfg.stack.det_hidden1 = 16;
    cfg.stack.det_hidden2 = 8;
    cfg.epochs_detector = 40;
    cfg.epochs_regressor = 15;
    cfg.batch = 4;
    cfg.regressor.tcn_channels = {8, 8};
    cfg.regressor.mlp_hidden = {8};
    cfg.seed = 7;
    return cfg;
}

Matrix random_matrix(std::size_t rows, std::size_t cols, RngStream& rng, double scale = 1.0) {
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = scale * (2.0 * rng.uniform() - 1.0);
    return m;
}

}  // namespace

TEST_CASE("checkpoint save-load-save round-trips byte-exactly") {
    TempDir dir("ckpt");
    RngStream rng(1, 0);
    Checkpoint ckpt;
    ckpt.arch_json = R"({"kind":"detector","t_tokens":12})";
    ckpt.provenance_json = R"({"seed":7})";
    ckpt.tensors.emplace_back("a.w", random_matrix(3, 4, rng));
    ckpt.tensors.emplace_back("a.b", random_matrix(1, 4, rng));

    const std::string p1 = (dir.path / "one.ckpt").string();
    const std::string p2 = (dir.path / "two.ckpt").string();
    save_checkpoint(p1, ckpt);
    Checkpoint loaded = load_checkpoint(p1);
    CHECK(loaded.arch_json == ckpt.arch_json);
    CHECK(loaded.provenance_json == ckpt.provenance_json);
    save_checkpoint(p2, loaded);
    CHECK(slurp(p1) == slurp(p2));
}

TEST_CASE("checkpoint hash mismatch and truncation are checkpoint errors") {
    TempDir dir("ckpt2");
    RngStream rng(2, 0);
    Checkpoint ckpt;
    ckpt.arch_json = R"({"kind":"detector"})";
    ckpt.provenance_json = "{}";
    ckpt.tensors.emplace_back("w", random_matrix(2, 2, rng));
    const std::string p = (dir.path / "x.ckpt").string();
    save_checkpoint(p, ckpt);

    std::string bytes = slurp(p);
    // flip one byte inside the stored arch json
    std::string tampered = bytes;
    tampered[8 + 4 + 8 + 4 + 3] ^= 0x1;
    std::ofstream(p, std::ios::binary | std::ios::trunc)
        .write(tampered.data(), static_cast<std::streamsize>(tampered.size()));
    CHECK_THROWS_AS(load_checkpoint(p), CheckpointError);

    std::ofstream(p, std::ios::binary | std::ios::trunc)
        .write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    CHECK_THROWS_AS(load_checkpoint(p), CheckpointError);
}

TEST_CASE("restore_params enforces name and shape agreement") {
    RngStream rng(3, 0);
    Checkpoint ckpt;
    ckpt.arch_json = "{}";
    ckpt.tensors.emplace_back("w", random_matrix(2, 2, rng));

    ParamSet missing;
    missing.add("other", Matrix(2, 2));
    std::vector<ParamSet*> sets{&missing};
    CHECK_THROWS_AS(restore_params(ckpt, sets), CheckpointError);

    ParamSet wrong_shape;
    wrong_shape.add("w", Matrix(3, 2));
    std::vector<ParamSet*> sets2{&wrong_shape};
    CHECK_THROWS_AS(restore_params(ckpt, sets2), CheckpointError);
}

TEST_CASE("full detector stack passes grad_check through the joint loss") {
    for (std::uint64_t trial = 0; trial < 3; ++trial) {
        StackConfig cfg;
        cfg.input_dim = 16;
        cfg.t_tokens = 8;
        cfg.model_dim = 6;
        cfg.levels = 2;
        cfg.heads = 2;
        cfg.ffn_dim = 8;
        cfg.oe_hidden = 3;
        cfg.det_hidden1 = 8;
        cfg.det_hidden2 = 6;
        RngStream init(40 + trial, 0);
        DetectorStack stack(cfg, init);

        RngStream rng(50 + trial, 0);
        Matrix f_typ = random_matrix(8, 16, rng);
        Matrix f_atyp = random_matrix(8, 16, rng);
        LossConfig loss;

        // One combined set so grad_check probes every parameter in the stack.
        ParamSet all;
        for (const ParamSet* ps : std::as_const(stack).param_sets()) {
            for (std::size_t i = 0; i < ps->size(); ++i) {
                all.add((*ps)[i].name, (*ps)[i].value);
            }
        }
        auto fn = [&](ParamSet& p, bool want_grad) {
            // copy probe values back into the stack
            std::size_t cursor = 0;
            for (ParamSet* ps : stack.param_sets()) {
                for (std::size_t i = 0; i < ps->size(); ++i) {
                    (*ps)[i].value = p[cursor++].value;
                }
            }
            Tape tape;
            DetectorStack::Vars vars = stack.vars(tape);
            Var input_t = tape.leaf(f_typ);
            OeModel::Forward oe_t = stack.oe().forward(tape, vars.oe, input_t);
            Var diff = tape.sub(input_t, oe_t.recon);
            Var recon_loss = tape.sum(tape.mul(diff, diff));
            DetectorStack::Forward fa = stack.forward(tape, vars, tape.leaf(f_atyp));
            DetectorStack::Forward ft = stack.forward(tape, vars, input_t);
            Var total = tape.add(recon_loss,
                                 self_rectifying_loss(tape, fa.scores, ft.scores, loss));
            const double v = tape.scalar(total);
            if (want_grad) {
                tape.backward(total);
                std::size_t at = 0;
                for (ParamSet* ps : stack.param_sets()) {
                    const std::vector<Var>& vs = ps == &stack.oe().params() ? vars.oe
                                                : ps == &stack.ctst().params() ? vars.ctst
                                                                               : vars.det;
                    for (std::size_t i = 0; i < ps->size(); ++i) {
                        const Matrix& g = tape.grad(vs[i]);
                        for (std::size_t k = 0; k < g.size(); ++k) p[at].grad[k] += g[k];
                        ++at;
                    }
                }
            }
            return v;
        };
        auto report = grad_check(all, fn, 1e-5, 40, 60 + trial);
        CAPTURE(report.worst_param);
        CHECK(report.max_rel_err < 1e-4);
    }
}

TEST_CASE("toy two-video training lowers the joint loss") {
    TempDir dir("toy");
    SynthConfig scfg;
    scfg.train_per_level = {1, 0, 0, 1};
    scfg.test_per_level = {0, 0, 0, 0};
    scfg.t_tokens = 12;
    scfg.dims = 8;
    scfg.level_budget = {{{0, 0}, {1, 2}, {3, 4}, {5, 8}}};
    scfg.long_burst = {4, 6};
    scfg.seed = 5;
    SynthResult res = synth_dataset(scfg, dir.str());

    TrainConfig cfg = small_train();
    cfg.stack.model_dim = 6;
    cfg.stack.oe_hidden = 3;
    cfg.epochs_detector = 200;
    cfg.batch = 2;
    TrainResult result = train_detector(res.manifest, cfg, (dir.path / "run").string());
    CHECK(fs::exists(result.checkpoint_path));

    // First and last total-loss entries from the curve.
    std::ifstream csv(result.loss_csv_path);
    std::string line;
    std::getline(csv, line);  // header
    double first_total = 0.0, last_total = 0.0;
    bool have_first = false;
    while (std::getline(csv, line)) {
        const auto pos = line.rfind(',');
        REQUIRE(pos != std::string::npos);
        last_total = std::stod(line.substr(pos + 1));
        if (!have_first) {
            first_total = last_total;
            have_first = true;
        }
    }
    REQUIRE(have_first);
    CHECK(last_total < first_total);
}

TEST_CASE("zero loss weights leave the detector parameters untouched") {
    TempDir dir("zerolam");
    SynthResult res = synth_dataset(small_synth(11), dir.str());
    TrainConfig cfg = small_train();
    cfg.loss.lambda1 = 0.0;
    cfg.loss.lambda2 = 0.0;
    cfg.epochs_detector = 5;

    // Reference stack with the same init seed: detector params must stay at init.
    std::vector<FeatureSequence> train = load_split(res.manifest, Split::train, 12);
    StackConfig stack_cfg = cfg.stack;
    stack_cfg.input_dim = 12;
    RngStream init(cfg.seed, 0);
    DetectorStack reference(stack_cfg, init);

    TrainResult result = train_detector(res.manifest, cfg, (dir.path / "run").string());
    Checkpoint ckpt = load_checkpoint(result.checkpoint_path);

    for (const char* name : {"det.w1", "det.b1", "det.w2", "det.b2", "det.w3", "det.b3"}) {
        const Matrix* stored = ckpt.find(name);
        REQUIRE(stored != nullptr);
        const Param* ref = reference.detector().params().find(name);
        REQUIRE(ref != nullptr);
        for (std::size_t i = 0; i < stored->size(); ++i) {
            CHECK((*stored)[i] == static_cast<double>(static_cast<float>(ref->value[i])));
        }
    }
    // while the OE kept learning from the reconstruction term
    const Matrix* enc = ckpt.find("oe.enc_w");
    const Param* enc_ref = reference.oe().params().find("oe.enc_w");
    bool oe_moved = false;
    for (std::size_t i = 0; i < enc->size(); ++i) {
        if ((*enc)[i] != static_cast<double>(static_cast<float>(enc_ref->value[i]))) {
            oe_moved = true;
            break;
        }
    }
    CHECK(oe_moved);
}

TEST_CASE("same seed trains to bit-identical checkpoints and loss curves") {
    TempDir dir("det2x");
    SynthResult res = synth_dataset(small_synth(13), dir.str());
    TrainConfig cfg = small_train();
    cfg.epochs_detector = 10;
    TrainResult a = train_detector(res.manifest, cfg, (dir.path / "a").string());
    TrainResult b = train_detector(res.manifest, cfg, (dir.path / "b").string());
    CHECK(slurp(a.checkpoint_path) == slurp(b.checkpoint_path));
    CHECK(slurp(a.loss_csv_path) == slurp(b.loss_csv_path));
}

TEST_CASE("regressor training freezes the detector and reduces corn loss") {
    TempDir dir("reg");
    SynthResult res = synth_dataset(small_synth(17), dir.str());
    TrainConfig cfg = small_train();
    cfg.epochs_detector = 8;
    cfg.epochs_regressor = 20;
    TrainResult det = train_detector(res.manifest, cfg, (dir.path / "det").string());

    const std::string det_bytes_before = slurp(det.checkpoint_path);
    TrainResult reg = train_regressor(res.manifest, det.checkpoint_path, cfg,
                                      (dir.path / "reg").string());
    CHECK(slurp(det.checkpoint_path) == det_bytes_before);
    CHECK(fs::exists(reg.checkpoint_path));

    // Epoch-average corn loss trends down on this shrunken smoke setup; the
    // documented-scale curve oracle (<= 3 upticks) runs in the acceptance
    // suite against the full-size toy set.
    std::ifstream csv(reg.loss_csv_path);
    std::string line;
    std::getline(csv, line);
    std::vector<double> by_epoch;
    std::vector<int> counts;
    while (std::getline(csv, line)) {
        const auto c1 = line.find(',');
        const auto c2 = line.find(',', c1 + 1);
        const std::size_t epoch = std::stoul(line.substr(c1 + 1, c2 - c1 - 1));
        const double loss = std::stod(line.substr(c2 + 1));
        if (epoch >= by_epoch.size()) {
            by_epoch.resize(epoch + 1, 0.0);
            counts.resize(epoch + 1, 0);
        }
        by_epoch[epoch] += loss;
        counts[epoch] += 1;
    }
    REQUIRE(by_epoch.size() == cfg.epochs_regressor);
    for (std::size_t e = 0; e < by_epoch.size(); ++e) by_epoch[e] /= counts[e];
    CHECK(by_epoch.back() < by_epoch.front());
}

TEST_CASE("regressor training demands severity labels") {
    TempDir dir("regmiss");
    SynthResult res = synth_dataset(small_synth(19), dir.str());
    TrainConfig cfg = small_train();
    cfg.epochs_detector = 3;
    TrainResult det = train_detector(res.manifest, cfg, (dir.path / "det").string());

    Manifest stripped = res.manifest;
    for (auto& e : stripped.entries) e.severity.reset();
    CHECK_THROWS_AS(
        train_regressor(stripped, det.checkpoint_path, cfg, (dir.path / "reg").string()),
        DataError);
}

TEST_CASE("training without atypical videos cannot form score pairs") {
    TempDir dir("noatyp");
    SynthConfig scfg = small_synth(23);
    scfg.train_per_level = {5, 0, 0, 0};
    SynthResult res = synth_dataset(scfg, dir.str());
    TrainConfig cfg = small_train();
    CHECK_THROWS_AS(train_detector(res.manifest, cfg, (dir.path / "run").string()), DataError);
}

TEST_CASE("infer is deterministic, resamples and checks checkpoint compatibility") {
    TempDir dir("infer");
    SynthResult res = synth_dataset(small_synth(29), dir.str());
    TrainConfig cfg = small_train();
    cfg.epochs_detector = 5;
    cfg.epochs_regressor = 5;
    TrainResult det = train_detector(res.manifest, cfg, (dir.path / "det").string());
    TrainResult reg = train_regressor(res.manifest, det.checkpoint_path, cfg,
                                      (dir.path / "reg").string());

    const std::string feat = res.manifest.resolve_path(res.manifest.entries[0]);
    InferResult a = infer(feat, det.checkpoint_path, reg.checkpoint_path);
    InferResult b = infer(feat, det.checkpoint_path, reg.checkpoint_path);
    CHECK(a.scores == b.scores);
    CHECK(a.embedding_density == b.embedding_density);
    REQUIRE(a.severity.has_value());
    CHECK(a.severity->predicted_class == b.severity->predicted_class);
    for (double s : a.scores) {
        CHECK(s > 0.0);
        CHECK(s < 1.0);
    }

    // longer raw sequence resamples down to the stack length
    RngStream rng(6, 0);
    FeatureSequence longer;
    longer.id = "longer";
    longer.features = random_matrix(30, 12, rng, 0.3);
    const std::string longer_path = (dir.path / "longer.wtf").string();
    write_feature_file(longer_path, longer);
    InferResult c = infer(longer_path, det.checkpoint_path, std::nullopt);
    CHECK(c.scores.size() == 12);
    CHECK_FALSE(c.severity.has_value());

    // a regressor trained against a different detector is rejected
    TrainConfig other = cfg;
    other.seed = 1234;
    other.stack.model_dim = 12;  // different architecture, different hash
    TrainResult det2 = train_detector(res.manifest, other, (dir.path / "det2").string());
    CHECK_THROWS_AS(infer(feat, det2.checkpoint_path, reg.checkpoint_path), CheckpointError);
}

TEST_CASE("evaluate produces a full report and parallel workers change nothing") {
    TempDir dir("eval");
    SynthResult res = synth_dataset(small_synth(31), dir.str());
    TrainConfig cfg = small_train();
    cfg.epochs_detector = 8;
    cfg.epochs_regressor = 5;
    TrainResult det = train_detector(res.manifest, cfg, (dir.path / "det").string());
    TrainResult reg = train_regressor(res.manifest, det.checkpoint_path, cfg,
                                      (dir.path / "reg").string());

    EvalOptions options;
    options.short_burst_max = 2;
    options.long_burst_min = 4;
    EvalReport report = evaluate(res.manifest, det.checkpoint_path, reg.checkpoint_path, options);
    CHECK(report.videos.size() == 5);
    REQUIRE(report.frame_auc.has_value());
    CHECK(*report.frame_auc >= 0.0);
    CHECK(*report.frame_auc <= 1.0);
    REQUIRE(report.severity.has_value());
    CHECK(report.confusion_counts.size() == 4);
    long total = 0;
    for (const auto& row : report.confusion_counts)
        for (long v : row) total += v;
    CHECK(total == 5);

    EvalOptions parallel = options;
    parallel.workers = 3;
    EvalReport report2 =
        evaluate(res.manifest, det.checkpoint_path, reg.checkpoint_path, parallel);
    CHECK(report.to_json() == report2.to_json());

    // JSON carries every required field
    const std::string json_text = report.to_json();
    for (const char* key : {"frame_auc", "auc_short", "auc_long", "severity", "confusion",
                            "videos", "mean_score", "density"}) {
        CAPTURE(key);
        CHECK(json_text.find(key) != std::string::npos);
    }
}

TEST_CASE("oe pretraining plus freeze keeps OE parameters fixed during joint training") {
    TempDir dir("freeze");
    SynthResult res = synth_dataset(small_synth(37), dir.str());
    TrainConfig cfg = small_train();
    cfg.epochs_detector = 5;
    cfg.oe_pretrain_epochs = 3;
    cfg.freeze_oe = true;

    TrainResult frozen = train_detector(res.manifest, cfg, (dir.path / "a").string());
    cfg.epochs_detector = 10;  // more joint epochs must not move the frozen OE
    TrainResult frozen_long = train_detector(res.manifest, cfg, (dir.path / "b").string());

    Checkpoint a = load_checkpoint(frozen.checkpoint_path);
    Checkpoint b = load_checkpoint(frozen_long.checkpoint_path);
    for (const char* name : {"oe.enc_w", "oe.enc_b", "oe.dec_w", "oe.dec_b"}) {
        const Matrix* ma = a.find(name);
        const Matrix* mb = b.find(name);
        REQUIRE(ma != nullptr);
        REQUIRE(mb != nullptr);
        for (std::size_t i = 0; i < ma->size(); ++i) CHECK((*ma)[i] == (*mb)[i]);
    }
}
