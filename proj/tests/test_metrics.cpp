#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "wtal/errors.hpp"
#include "wtal/metrics.hpp"
#include "wtal/rng.hpp"

using namespace wtal;
namespace fs = std::filesystem;

namespace {

// Quadratic-time pairwise statistic, the defining form of the AUC.
double oracle_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    double credit = 0.0, pairs = 0.0;
    for (std::size_t p = 0; p < scores.size(); ++p) {
        if (labels[p] != 1) continue;
        for (std::size_t n = 0; n < scores.size(); ++n) {
            if (labels[n] != 0) continue;
            pairs += 1.0;
            if (scores[p] > scores[n]) {
                credit += 1.0;
            } else if (scores[p] == scores[n]) {
                credit += 0.5;
            }
        }
    }
    return credit / pairs;
}

}  // namespace

TEST_CASE("frame_auc worked examples") {
    CHECK(frame_auc({0.9, 0.8}, {1, 0}) == 1.0);
    CHECK(frame_auc({0.1, 0.9}, {1, 0}) == 0.0);
    CHECK(frame_auc({0.5, 0.5}, {1, 0}) == 0.5);
}

TEST_CASE("frame_auc rejects single-class input") {
    CHECK_THROWS_AS(frame_auc({0.1, 0.2}, {1, 1}), MetricError);
    CHECK_THROWS_AS(frame_auc({0.1, 0.2}, {0, 0}), MetricError);
}

TEST_CASE("frame_auc matches the pairwise oracle, with ties") {
    RngStream rng(1, 0);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 5 + rng.uniform_int(40);
        std::vector<double> scores(n);
        std::vector<int> labels(n);
        bool pos = false, neg = false;
        for (std::size_t i = 0; i < n; ++i) {
            // coarse grid forces duplicate scores
            scores[i] = static_cast<double>(rng.uniform_int(8)) / 8.0;
            labels[i] = static_cast<int>(rng.uniform_int(2));
            (labels[i] == 1 ? pos : neg) = true;
        }
        if (!pos || !neg) continue;
        CHECK(frame_auc(scores, labels) ==
              doctest::Approx(oracle_auc(scores, labels)).epsilon(1e-12));
    }
}

TEST_CASE("frame_auc is invariant under strictly monotone transforms") {
    RngStream rng(2, 0);
    std::vector<double> scores(30);
    std::vector<int> labels(30);
    for (std::size_t i = 0; i < 30; ++i) {
        scores[i] = rng.uniform();
        labels[i] = static_cast<int>(rng.uniform_int(2));
    }
    labels[0] = 1;
    labels[1] = 0;
    const double base = frame_auc(scores, labels);

    std::vector<double> cubed = scores, expd = scores;
    for (auto& v : cubed) v = v * v * v + 2.0 * v;
    for (auto& v : expd) v = std::exp(3.0 * v);
    CHECK(frame_auc(cubed, labels) == doctest::Approx(base).epsilon(1e-12));
    CHECK(frame_auc(expd, labels) == doctest::Approx(base).epsilon(1e-12));

    // complement symmetry
    std::vector<int> flipped = labels;
    for (auto& l : flipped) l = 1 - l;
    CHECK(frame_auc(scores, labels) + frame_auc(scores, flipped) ==
          doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("severity metrics worked examples") {
    SeverityMetrics perfect = severity_metrics({0, 1, 2, 3}, {0, 1, 2, 3});
    CHECK(perfect.accuracy == 1.0);
    CHECK(perfect.mae == 0.0);
    CHECK(perfect.mse == 0.0);

    SeverityMetrics half = severity_metrics({3, 0}, {3, 3});
    CHECK(half.accuracy == 0.5);
    CHECK(half.mae == 1.5);
    CHECK(half.mse == 4.5);

    SeverityMetrics worst = severity_metrics({0, 0, 0, 0}, {3, 3, 3, 3});
    CHECK(worst.accuracy == 0.0);
    CHECK(worst.mae == 3.0);
    CHECK(worst.mse == 9.0);

    CHECK_THROWS_AS(severity_metrics({1}, {1, 2}), ArgumentError);
}

TEST_CASE("severity metrics bounds on the ordinal scale") {
    RngStream rng(3, 0);
    const int k = 4;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 1 + rng.uniform_int(20);
        std::vector<int> pred(n), truth(n);
        for (std::size_t i = 0; i < n; ++i) {
            pred[i] = static_cast<int>(rng.uniform_int(k));
            truth[i] = static_cast<int>(rng.uniform_int(k));
        }
        SeverityMetrics m = severity_metrics(pred, truth);
        CHECK(m.mae >= 0.0);
        CHECK(m.mae <= static_cast<double>(k - 1));
        CHECK(m.mse >= 0.0);
        CHECK(m.mse <= static_cast<double>((k - 1) * (k - 1)));
        // integer errors are 0 or >= 1, so the squared mean dominates
        CHECK(m.mse >= m.mae);
    }
}

TEST_CASE("confusion matrix counts and identities") {
    auto perfect = confusion({0, 1, 2, 3}, {0, 1, 2, 3}, 4);
    for (int t = 0; t < 4; ++t)
        for (int p = 0; p < 4; ++p) {
            CHECK(perfect[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)] ==
                  (t == p ? 1 : 0));
        }

    auto single = confusion({1}, {2}, 4);
    CHECK(single[2][1] == 1);

    RngStream rng(4, 0);
    std::vector<int> pred(40), truth(40);
    for (std::size_t i = 0; i < 40; ++i) {
        pred[i] = static_cast<int>(rng.uniform_int(4));
        truth[i] = static_cast<int>(rng.uniform_int(4));
    }
    auto cm = confusion(pred, truth, 4);
    long total = 0, diag = 0;
    for (int t = 0; t < 4; ++t) {
        long row = 0;
        for (int p = 0; p < 4; ++p) {
            row += cm[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
        }
        long want = 0;
        for (int v : truth) {
            if (v == t) ++want;
        }
        CHECK(row == want);  // row sums equal per-class truth counts
        total += row;
        diag += cm[static_cast<std::size_t>(t)][static_cast<std::size_t>(t)];
    }
    CHECK(total == 40);
    SeverityMetrics m = severity_metrics(pred, truth);
    CHECK(m.accuracy == doctest::Approx(static_cast<double>(diag) / 40.0).epsilon(1e-15));

    CHECK_THROWS_AS(confusion({4}, {0}, 4), ArgumentError);
}

TEST_CASE("heatmap export: constant matrix, density and CSV round-trip") {
    fs::path dir = fs::temp_directory_path() / ("wtal_heat_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);

    Matrix constant = Matrix::full(4, 6, -1.25);
    const std::string prefix = (dir / "const").string();
    export_heatmap(constant, prefix);
    CHECK(embedding_density(constant) == 1.25);

    // PGM: all pixels share one gray level
    std::ifstream pgm(prefix + ".pgm", std::ios::binary);
    std::string magic, dims1, dims2, maxval;
    pgm >> magic >> dims1 >> dims2 >> maxval;
    CHECK(magic == "P5");
    CHECK(dims1 == "6");
    CHECK(dims2 == "4");
    pgm.get();  // single whitespace after header
    std::string pixels((std::istreambuf_iterator<char>(pgm)), std::istreambuf_iterator<char>());
    REQUIRE(pixels.size() == 24);
    for (char c : pixels) CHECK(c == pixels[0]);

    // CSV round-trips within printed precision
    RngStream rng(5, 0);
    Matrix e(3, 5);
    for (std::size_t i = 0; i < e.size(); ++i) e[i] = 2.0 * rng.uniform() - 1.0;
    const std::string prefix2 = (dir / "rand").string();
    export_heatmap(e, prefix2);
    std::ifstream csv(prefix2 + ".csv");
    std::string line;
    std::size_t row = 0;
    while (std::getline(csv, line)) {
        std::stringstream ss(line);
        std::string cell;
        std::size_t col = 0;
        while (std::getline(ss, cell, ',')) {
            CHECK(std::fabs(std::stod(cell) - e.at(row, col)) < 1e-9);
            ++col;
        }
        CHECK(col == 5);
        ++row;
    }
    CHECK(row == 3);
    fs::remove_all(dir);
}

TEST_CASE("spearman rank correlation") {
    CHECK(spearman_rho({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1.0));
    CHECK(spearman_rho({1, 2, 3, 4}, {40, 30, 20, 10}) == doctest::Approx(-1.0));
    // monotone in rank despite nonlinearity
    CHECK(spearman_rho({1, 2, 3, 4}, {0.1, 5.0, 5.5, 100.0}) == doctest::Approx(1.0));
    CHECK_THROWS_AS(spearman_rho({1, 1, 1}, {1, 2, 3}), MetricError);
    CHECK_THROWS_AS(spearman_rho({1}, {1}), ArgumentError);

    // ties share average ranks: hand-checked value
    const double rho = spearman_rho({1, 1, 2, 3}, {1, 2, 3, 4});
    CHECK(rho == doctest::Approx(0.9486832980505138).epsilon(1e-12));
}
