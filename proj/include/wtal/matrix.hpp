#pragma once

#include <cstddef>
#include <vector>

namespace wtal {

// Dense row-major matrix of doubles. Everything in the model path (tokens,
// weights, gradients, scores) is one of these; vectors are T x 1 or 1 x C.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols);  // zero-filled
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

    // Checked construction: rejects NaN/Inf entries with the offending index.
    static Matrix checked(std::size_t rows, std::size_t cols, std::vector<double> values);
    static Matrix full(std::size_t rows, std::size_t cols, double value);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    const std::vector<double>& values() const { return data_; }

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }
    bool all_finite() const;
    void fill(double value);

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// C = alpha * op(A) * op(B) + beta * C, op controlled by trans flags.
// C must already have the result shape.
void gemm(bool trans_a, bool trans_b, double alpha, const Matrix& a, const Matrix& b,
          double beta, Matrix& c);

Matrix matmul(const Matrix& a, const Matrix& b);

}  // namespace wtal
