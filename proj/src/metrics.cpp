#include "wtal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "wtal/errors.hpp"

namespace wtal {

namespace {

// Average ranks (1-based), ties share the mean of their rank range.
std::vector<double> average_ranks(const std::vector<double>& values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

double frame_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw ArgumentError("frame_auc: length mismatch");
    std::size_t n_pos = 0, n_neg = 0;
    for (int l : labels) {
        if (l == 1) {
            ++n_pos;
        } else if (l == 0) {
            ++n_neg;
        } else {
            throw ArgumentError("frame_auc: labels must be 0/1");
        }
    }
    if (n_pos == 0 || n_neg == 0) {
        throw MetricError("frame_auc: needs both classes, got " + std::to_string(n_pos) +
                          " positives and " + std::to_string(n_neg) + " negatives");
    }
    // Rank-sum form of the pairwise statistic; ties get half credit through
    // average ranks.
    std::vector<double> ranks = average_ranks(scores);
    double rank_sum_pos = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == 1) rank_sum_pos += ranks[i];
    }
    const double np = static_cast<double>(n_pos);
    const double nn = static_cast<double>(n_neg);
    return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

SeverityMetrics severity_metrics(const std::vector<int>& predictions,
                                 const std::vector<int>& truths) {
    if (predictions.size() != truths.size() || predictions.empty()) {
        throw ArgumentError("severity_metrics: need equal non-empty prediction/truth lists");
    }
    SeverityMetrics m;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const double d = static_cast<double>(predictions[i] - truths[i]);
        if (predictions[i] == truths[i]) m.accuracy += 1.0;
        m.mae += std::fabs(d);
        m.mse += d * d;
    }
    const double n = static_cast<double>(predictions.size());
    m.accuracy /= n;
    m.mae /= n;
    m.mse /= n;
    return m;
}

std::vector<std::vector<long>> confusion(const std::vector<int>& predictions,
                                         const std::vector<int>& truths, int num_classes) {
    if (predictions.size() != truths.size()) throw ArgumentError("confusion: length mismatch");
    std::vector<std::vector<long>> counts(static_cast<std::size_t>(num_classes),
                                          std::vector<long>(static_cast<std::size_t>(num_classes), 0));
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const int t = truths[i];
        const int p = predictions[i];
        if (t < 0 || t >= num_classes || p < 0 || p >= num_classes) {
            throw ArgumentError("confusion: class outside 0.." + std::to_string(num_classes - 1));
        }
        counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)] += 1;
    }
    return counts;
}

double embedding_density(const Matrix& embedding) {
    if (embedding.size() == 0) throw ArgumentError("embedding_density: empty matrix");
    double acc = 0.0;
    for (std::size_t i = 0; i < embedding.size(); ++i) acc += std::fabs(embedding[i]);
    return acc / static_cast<double>(embedding.size());
}

void export_heatmap(const Matrix& embedding, const std::string& path_prefix) {
    if (!embedding.all_finite()) throw ArgumentError("export_heatmap: non-finite embedding");

    {
        std::ofstream csv(path_prefix + ".csv", std::ios::trunc);
        if (!csv) throw DataError("export_heatmap: cannot write '" + path_prefix + ".csv'");
        char buf[40];
        for (std::size_t i = 0; i < embedding.rows(); ++i) {
            for (std::size_t j = 0; j < embedding.cols(); ++j) {
                std::snprintf(buf, sizeof(buf), "%.17g", embedding.at(i, j));
                if (j > 0) csv << ',';
                csv << buf;
            }
            csv << '\n';
        }
    }

    double lo = embedding[0], hi = embedding[0];
    for (std::size_t i = 0; i < embedding.size(); ++i) {
        lo = std::min(lo, embedding[i]);
        hi = std::max(hi, embedding[i]);
    }
    const double span = hi - lo;
    std::ofstream pgm(path_prefix + ".pgm", std::ios::binary | std::ios::trunc);
    if (!pgm) throw DataError("export_heatmap: cannot write '" + path_prefix + ".pgm'");
    pgm << "P5\n" << embedding.cols() << " " << embedding.rows() << "\n255\n";
    for (std::size_t i = 0; i < embedding.size(); ++i) {
        const double unit = span > 0.0 ? (embedding[i] - lo) / span : 0.0;
        pgm.put(static_cast<char>(static_cast<int>(std::lround(unit * 255.0))));
    }
}

double spearman_rho(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2) {
        throw ArgumentError("spearman_rho: need two equal-length samples of size >= 2");
    }
    std::vector<double> ra = average_ranks(a);
    std::vector<double> rb = average_ranks(b);
    const double n = static_cast<double>(a.size());
    double mean = (n + 1.0) / 2.0;
    double num = 0.0, da = 0.0, db = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (ra[i] - mean) * (rb[i] - mean);
        da += (ra[i] - mean) * (ra[i] - mean);
        db += (rb[i] - mean) * (rb[i] - mean);
    }
    if (da == 0.0 || db == 0.0) {
        throw MetricError("spearman_rho: constant ranks, correlation undefined");
    }
    return num / std::sqrt(da * db);
}

}  // namespace wtal
