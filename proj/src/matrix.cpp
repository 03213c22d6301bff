#include "wtal/matrix.hpp"

#include <cmath>
#include <string>

#include "wtal/errors.hpp"

namespace wtal {

Matrix::Matrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
    if (data_.size() != rows_ * cols_) {
        throw ArgumentError("matrix: data length " + std::to_string(data_.size()) +
                            " does not match " + std::to_string(rows_) + "x" +
                            std::to_string(cols_));
    }
}

Matrix Matrix::checked(std::size_t rows, std::size_t cols, std::vector<double> values) {
    Matrix m(rows, cols, std::move(values));
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (!std::isfinite(m[i])) {
            throw ArgumentError("matrix: non-finite entry at flat index " + std::to_string(i));
        }
    }
    return m;
}

Matrix Matrix::full(std::size_t rows, std::size_t cols, double value) {
    Matrix m(rows, cols);
    m.fill(value);
    return m;
}

bool Matrix::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

void Matrix::fill(double value) {
    for (double& v : data_) v = value;
}

void gemm(bool trans_a, bool trans_b, double alpha, const Matrix& a, const Matrix& b,
          double beta, Matrix& c) {
    const std::size_t m = trans_a ? a.cols() : a.rows();
    const std::size_t k = trans_a ? a.rows() : a.cols();
    const std::size_t kb = trans_b ? b.cols() : b.rows();
    const std::size_t n = trans_b ? b.rows() : b.cols();
    if (k != kb || c.rows() != m || c.cols() != n) {
        throw ArgumentError("gemm: shape mismatch");
    }
    if (beta == 0.0) {
        c.fill(0.0);
    } else if (beta != 1.0) {
        for (std::size_t i = 0; i < c.size(); ++i) c[i] *= beta;
    }
    if (!trans_a && !trans_b) {
        // C[i][j] += alpha * A[i][p] * B[p][j], p-inner keeps B rows contiguous
        for (std::size_t i = 0; i < m; ++i) {
            const double* arow = a.data() + i * k;
            double* crow = c.data() + i * n;
            for (std::size_t p = 0; p < k; ++p) {
                const double av = alpha * arow[p];
                const double* brow = b.data() + p * n;
                for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    } else if (!trans_a && trans_b) {
        // C[i][j] += alpha * A[i][p] * B[j][p], row-dot-row
        for (std::size_t i = 0; i < m; ++i) {
            const double* arow = a.data() + i * k;
            double* crow = c.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) {
                const double* brow = b.data() + j * k;
                double acc = 0.0;
                for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
                crow[j] += alpha * acc;
            }
        }
    } else if (trans_a && !trans_b) {
        // C[i][j] += alpha * A[p][i] * B[p][j]
        for (std::size_t p = 0; p < k; ++p) {
            const double* arow = a.data() + p * m;
            const double* brow = b.data() + p * n;
            for (std::size_t i = 0; i < m; ++i) {
                const double av = alpha * arow[i];
                double* crow = c.data() + i * n;
                for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    } else {
        for (std::size_t i = 0; i < m; ++i) {
            double* crow = c.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) {
                double acc = 0.0;
                for (std::size_t p = 0; p < k; ++p) acc += a.at(p, i) * b.at(j, p);
                crow[j] += alpha * acc;
            }
        }
    }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    Matrix c(a.rows(), b.cols());
    gemm(false, false, 1.0, a, b, 0.0, c);
    return c;
}

}  // namespace wtal
