#pragma once

#include <string>
#include <vector>

#include "wtal/matrix.hpp"

namespace wtal {

// Rank-based (Mann-Whitney) ROC AUC with half credit on ties. Requires both
// classes present; labels are 0/1.
double frame_auc(const std::vector<double>& scores, const std::vector<int>& labels);

struct SeverityMetrics {
    double accuracy = 0.0;
    double mae = 0.0;
    double mse = 0.0;
};

// Accuracy / MAE / MSE over ordinal class predictions on the 0..K-1 scale.
SeverityMetrics severity_metrics(const std::vector<int>& predictions,
                                 const std::vector<int>& truths);

// K x K count matrix, rows = truth, cols = prediction.
std::vector<std::vector<long>> confusion(const std::vector<int>& predictions,
                                         const std::vector<int>& truths, int num_classes);

// Mean absolute embedding value, the scalar "density" summary of a heatmap.
double embedding_density(const Matrix& embedding);

// Writes <prefix>.csv (full precision) and <prefix>.pgm (8-bit grayscale,
// min-max normalized per matrix).
void export_heatmap(const Matrix& embedding, const std::string& path_prefix);

// Spearman rank correlation with average ranks on ties.
double spearman_rho(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace wtal
