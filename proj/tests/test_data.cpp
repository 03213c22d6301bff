#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "wtal/errors.hpp"
#include "wtal/feature_io.hpp"
#include "wtal/manifest.hpp"
#include "wtal/rng.hpp"
#include "wtal/synth.hpp"

using namespace wtal;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() /
               ("wtal_test_" + tag + "_" + std::to_string(::getpid()));
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

FeatureSequence make_sequence(std::size_t t, std::size_t d, std::uint64_t seed) {
    RngStream rng(seed, 0);
    Matrix m(t, d);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = rng.normal();
    FeatureSequence seq;
    seq.id = "seq";
    seq.features = std::move(m);
    return seq;
}

}  // namespace

TEST_CASE("feature file round-trip is bit-exact") {
    TempDir dir("ftrt");
    FeatureSequence seq = make_sequence(7, 5, 3);
    const std::string p1 = (dir.path / "a.wtf").string();
    const std::string p2 = (dir.path / "b.wtf").string();
    write_feature_file(p1, seq);
    FeatureSequence loaded = load_feature_file(p1);
    CHECK(loaded.features.rows() == 7);
    CHECK(loaded.features.cols() == 5);
    write_feature_file(p2, loaded);
    CHECK(slurp(p1) == slurp(p2));
    // values survive modulo the f32 payload precision
    for (std::size_t i = 0; i < seq.features.size(); ++i) {
        CHECK(loaded.features[i] == static_cast<double>(static_cast<float>(seq.features[i])));
    }
}

TEST_CASE("feature file with wrong magic is a format error") {
    TempDir dir("ftmagic");
    const std::string p = (dir.path / "bad.wtf").string();
    std::ofstream out(p, std::ios::binary);
    out << "NOTMAGIC" << std::string(16, '\0');
    out.close();
    CHECK_THROWS_AS(load_feature_file(p), FormatError);
}

TEST_CASE("feature file truncation is a format error") {
    TempDir dir("fttrunc");
    FeatureSequence seq = make_sequence(4, 3, 5);
    const std::string p = (dir.path / "c.wtf").string();
    write_feature_file(p, seq);
    std::string bytes = slurp(p);
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 5));
    out.close();
    CHECK_THROWS_AS(load_feature_file(p), FormatError);
}

TEST_CASE("feature file size is header plus T*D*4 bytes") {
    TempDir dir("ftsize");
    FeatureSequence seq = make_sequence(32, 1408, 7);
    const std::string p = (dir.path / "big.wtf").string();
    write_feature_file(p, seq);
    CHECK(fs::file_size(p) == 20 + 32 * 1408 * 4);
}

TEST_CASE("writing non-finite features is rejected") {
    TempDir dir("ftnan");
    FeatureSequence seq = make_sequence(2, 2, 9);
    seq.features[1] = std::nan("");
    CHECK_THROWS_AS(write_feature_file((dir.path / "nan.wtf").string(), seq), ArgumentError);
}

TEST_CASE("temporal_resample averages pairs") {
    Matrix raw(4, 1, {1.0, 3.0, 5.0, 7.0});
    Matrix out = temporal_resample(raw, 2);
    CHECK(out.rows() == 2);
    CHECK(out.at(0, 0) == 2.0);
    CHECK(out.at(1, 0) == 6.0);
}

TEST_CASE("temporal_resample with equal lengths is the identity") {
    RngStream rng(13, 0);
    Matrix raw(5, 3);
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = rng.normal();
    Matrix out = temporal_resample(raw, 5);
    for (std::size_t i = 0; i < raw.size(); ++i) CHECK(out[i] == raw[i]);
}

TEST_CASE("temporal_resample floor-boundary bins") {
    Matrix raw(3, 1, {1.0, 2.0, 3.0});
    Matrix out = temporal_resample(raw, 2);
    CHECK(out.at(0, 0) == 1.0);  // bin {0}
    CHECK(out.at(1, 0) == 2.5);  // bin {1,2}
}

TEST_CASE("temporal_resample pads short inputs by edge replication") {
    Matrix raw(2, 1, {1.0, 5.0});
    Matrix out = temporal_resample(raw, 4);
    CHECK(out.rows() == 4);
    CHECK(out.at(0, 0) == 1.0);
    CHECK(out.at(1, 0) == 5.0);
    CHECK(out.at(2, 0) == 5.0);
    CHECK(out.at(3, 0) == 5.0);
}

TEST_CASE("temporal_resample rejects empty input") {
    CHECK_THROWS_AS(temporal_resample(Matrix(), 4), ArgumentError);
}

TEST_CASE("temporal_resample preserves the global mean on divisible lengths") {
    RngStream rng(17, 0);
    for (int trial = 0; trial < 5; ++trial) {
        const std::size_t target = 4 + static_cast<std::size_t>(trial);
        const std::size_t mult = 1 + static_cast<std::size_t>(rng.uniform_int(5));
        Matrix raw(target * mult, 3);
        for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = rng.normal();
        Matrix out = temporal_resample(raw, target);
        for (std::size_t j = 0; j < 3; ++j) {
            double mean_raw = 0.0, mean_out = 0.0;
            for (std::size_t i = 0; i < raw.rows(); ++i) mean_raw += raw.at(i, j);
            for (std::size_t i = 0; i < out.rows(); ++i) mean_out += out.at(i, j);
            mean_raw /= static_cast<double>(raw.rows());
            mean_out /= static_cast<double>(out.rows());
            CHECK(mean_out == doctest::Approx(mean_raw).epsilon(1e-12));
        }
    }
}

TEST_CASE("resample bin boundaries partition the raw rows") {
    RngStream rng(19, 0);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t t_raw = 1 + static_cast<std::size_t>(rng.uniform_int(40));
        const std::size_t t_target = 1 + static_cast<std::size_t>(rng.uniform_int(t_raw));
        std::vector<int> covered(t_raw, 0);
        for (std::size_t k = 0; k < t_target; ++k) {
            const std::size_t lo = (k * t_raw) / t_target;
            const std::size_t hi = ((k + 1) * t_raw) / t_target;
            CHECK(hi > lo);
            for (std::size_t i = lo; i < hi; ++i) covered[i] += 1;
        }
        for (std::size_t i = 0; i < t_raw; ++i) CHECK(covered[i] == 1);
    }
}

TEST_CASE("synth dataset honors masks, budgets and burst structure") {
    TempDir dir("synth1");
    SynthConfig cfg;
    cfg.train_per_level = {4, 4, 4, 4};
    cfg.test_per_level = {1, 1, 1, 1};
    cfg.seed = 21;
    SynthResult res = synth_dataset(cfg, dir.str());
    CHECK(res.manifest.entries.size() == 20);

    for (std::size_t i = 0; i < res.manifest.entries.size(); ++i) {
        const ManifestEntry& e = res.manifest.entries[i];
        std::vector<int> mask = load_mask(mask_path_for(res.manifest, i));
        REQUIRE(mask.size() == cfg.t_tokens);
        int total = 0;
        for (int b : mask) total += b;
        const int level = *e.severity;
        CHECK(total >= cfg.level_budget[static_cast<std::size_t>(level)][0]);
        CHECK(total <= cfg.level_budget[static_cast<std::size_t>(level)][1]);
        if (level == 0) {
            CHECK(total == 0);
            CHECK(e.label == Label::typical);
        } else {
            CHECK(e.label == Label::atypical);
        }
        // Runs come from short (1-2) or long (8-16) bursts only.
        std::size_t t = 0;
        while (t < mask.size()) {
            if (mask[t] == 0) {
                ++t;
                continue;
            }
            std::size_t end = t;
            while (end < mask.size() && mask[end] == 1) ++end;
            const std::size_t len = end - t;
            const bool is_short = len >= 1 && len <= 2;
            const bool is_long = len >= 8 && len <= 16;
            CHECK((is_short || is_long));
            t = end;
        }
    }
}

TEST_CASE("synth level-3 budget bound at T=32") {
    TempDir dir("synth2");
    SynthConfig cfg;
    cfg.train_per_level = {0, 0, 0, 10};
    cfg.test_per_level = {0, 0, 0, 0};
    cfg.seed = 5;
    SynthResult res = synth_dataset(cfg, dir.str());
    for (std::size_t i = 0; i < res.manifest.entries.size(); ++i) {
        std::vector<int> mask = load_mask(mask_path_for(res.manifest, i));
        int total = 0;
        for (int b : mask) total += b;
        CHECK(total >= 12);
        CHECK(total <= 20);
    }
}

TEST_CASE("synth mean shift matches the statistical oracle") {
    TempDir dir("synth3");
    SynthConfig cfg;
    cfg.train_per_level = {0, 0, 50, 50};
    cfg.test_per_level = {0, 0, 0, 0};
    cfg.seed = 33;
    SynthResult res = synth_dataset(cfg, dir.str());

    const std::size_t n_shift = (cfg.dims + 3) / 4;
    double weighted_diff = 0.0;
    double total_tokens = 0.0;
    for (std::size_t i = 0; i < res.manifest.entries.size(); ++i) {
        FeatureSequence seq = res.manifest.load_sequence(i);
        std::vector<int> mask = load_mask(mask_path_for(res.manifest, i));
        std::vector<double> mean_anom(cfg.dims, 0.0), mean_typ(cfg.dims, 0.0);
        double n_anom = 0.0, n_typ = 0.0;
        for (std::size_t t = 0; t < mask.size(); ++t) {
            for (std::size_t j = 0; j < cfg.dims; ++j) {
                (mask[t] == 1 ? mean_anom[j] : mean_typ[j]) += seq.features.at(t, j);
            }
            (mask[t] == 1 ? n_anom : n_typ) += 1.0;
        }
        if (n_anom == 0.0 || n_typ == 0.0) continue;
        std::vector<double> diff(cfg.dims);
        for (std::size_t j = 0; j < cfg.dims; ++j) {
            diff[j] = mean_anom[j] / n_anom - mean_typ[j] / n_typ;
        }
        // The shift dwarfs the walk/noise scale, so the top ceil(D/4) dims by
        // observed difference recover the per-video shifted subset.
        std::vector<double> sorted = diff;
        std::sort(sorted.begin(), sorted.end(), std::greater<double>());
        double mean_over_shifted = 0.0;
        for (std::size_t j = 0; j < n_shift; ++j) mean_over_shifted += sorted[j];
        mean_over_shifted /= static_cast<double>(n_shift);
        weighted_diff += mean_over_shifted * n_anom;
        total_tokens += n_anom;
    }
    REQUIRE(total_tokens >= 1000.0);
    CHECK(std::fabs(weighted_diff / total_tokens - cfg.burst_shift) <= 0.05);
}

TEST_CASE("synth with a fixed seed regenerates bit-identical trees") {
    TempDir dir_a("synth4a");
    TempDir dir_b("synth4b");
    SynthConfig cfg;
    cfg.train_per_level = {3, 2, 2, 2};
    cfg.test_per_level = {1, 1, 1, 1};
    cfg.seed = 7;
    synth_dataset(cfg, dir_a.str());
    synth_dataset(cfg, dir_b.str());
    std::size_t compared = 0;
    for (const auto& entry : fs::directory_iterator(dir_a.path)) {
        const fs::path other = dir_b.path / entry.path().filename();
        REQUIRE(fs::exists(other));
        CHECK(slurp(entry.path()) == slurp(other));
        ++compared;
    }
    CHECK(compared > 0);
}

TEST_CASE("synth budget above T is a config error") {
    SynthConfig cfg;
    cfg.t_tokens = 16;
    cfg.level_budget[3] = {12, 20};  // 20 > 16
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("sequence validation enforces severity-label consistency") {
    FeatureSequence seq = make_sequence(3, 2, 1);
    seq.label = Label::typical;
    seq.severity = 2;
    CHECK_THROWS_AS(seq.validate(), DataError);
    seq.severity = 0;
    CHECK_NOTHROW(seq.validate());
    seq.label = Label::atypical;
    CHECK_THROWS_AS(seq.validate(), DataError);
    seq.severity = 3;
    CHECK_NOTHROW(seq.validate());
}

TEST_CASE("manifest round-trips and rejects duplicates and missing files") {
    TempDir dir("mani");
    SynthConfig cfg;
    cfg.train_per_level = {2, 1, 1, 1};
    cfg.test_per_level = {1, 0, 0, 1};
    cfg.seed = 3;
    SynthResult res = synth_dataset(cfg, dir.str());

    Manifest loaded = Manifest::load(res.manifest_path);
    CHECK(loaded.entries.size() == res.manifest.entries.size());
    for (std::size_t i = 0; i < loaded.entries.size(); ++i) {
        CHECK(loaded.entries[i].id == res.manifest.entries[i].id);
        CHECK(loaded.entries[i].label == res.manifest.entries[i].label);
        CHECK(loaded.entries[i].split == res.manifest.entries[i].split);
    }

    Manifest dup = loaded;
    dup.entries.push_back(dup.entries[0]);
    const std::string dup_path = (dir.path / "dup.json").string();
    dup.save(dup_path);
    CHECK_THROWS_AS(Manifest::load(dup_path), DataError);

    Manifest missing = loaded;
    missing.entries[0].path = "nope.wtf";
    const std::string missing_path = (dir.path / "missing.json").string();
    missing.save(missing_path);
    CHECK_THROWS_AS(Manifest::load(missing_path), DataError);
}

TEST_CASE("make_batches draws F_O typical-only and F_M from the union") {
    TempDir dir("batch1");
    SynthConfig cfg;
    cfg.train_per_level = {10, 4, 3, 3};
    cfg.test_per_level = {0, 0, 0, 0};
    cfg.seed = 9;
    SynthResult res = synth_dataset(cfg, dir.str());

    RngStream rng(1, 0);
    BatchPair batch = make_batches(res.manifest, 4, BatchMode::any, rng);
    CHECK(batch.typical.size() == 4);
    CHECK(batch.mixed.size() == 4);
    for (std::size_t i : batch.typical) {
        CHECK(res.manifest.entries[i].label == Label::typical);
        CHECK(res.manifest.entries[i].split == Split::train);
    }
    for (std::size_t i : batch.mixed) {
        CHECK(res.manifest.entries[i].split == Split::train);
    }

    BatchPair paired = make_batches(res.manifest, 4, BatchMode::paired, rng);
    int n_typ = 0, n_atyp = 0;
    for (std::size_t i : paired.mixed) {
        (res.manifest.entries[i].label == Label::typical ? n_typ : n_atyp) += 1;
    }
    CHECK(n_typ == 2);
    CHECK(n_atyp == 2);
}

TEST_CASE("make_batches without typical sequences is a data error") {
    TempDir dir("batch2");
    SynthConfig cfg;
    cfg.train_per_level = {0, 3, 3, 3};
    cfg.test_per_level = {0, 0, 0, 0};
    cfg.seed = 11;
    SynthResult res = synth_dataset(cfg, dir.str());
    RngStream rng(1, 0);
    CHECK_THROWS_AS(make_batches(res.manifest, 2, BatchMode::any, rng), DataError);
}

TEST_CASE("make_batches is reproducible from the rng") {
    TempDir dir("batch3");
    SynthConfig cfg;
    cfg.train_per_level = {8, 3, 3, 2};
    cfg.test_per_level = {0, 0, 0, 0};
    cfg.seed = 13;
    SynthResult res = synth_dataset(cfg, dir.str());
    RngStream rng_a(5, 1), rng_b(5, 1);
    for (int i = 0; i < 5; ++i) {
        BatchPair a = make_batches(res.manifest, 4, BatchMode::any, rng_a);
        BatchPair b = make_batches(res.manifest, 4, BatchMode::any, rng_b);
        CHECK(a.typical == b.typical);
        CHECK(a.mixed == b.mixed);
    }
}
