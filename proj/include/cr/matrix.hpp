#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace cr {

using Vector = std::vector<double>;

// Dense row-major matrix of doubles. Every public operation that produces a
// matrix checks the result for NaN/Inf and throws on violation; summation
// order in products is fixed (k-major, left to right) so results are
// bit-reproducible per seed.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    double* row_ptr(std::size_t i) { return data_.data() + i * cols_; }
    const double* row_ptr(std::size_t i) const { return data_.data() + i * cols_; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    std::string shape_str() const;
    bool all_finite() const;
    // Throws std::runtime_error naming `context` if any entry is NaN/Inf.
    void check_finite(const std::string& context) const;

    bool operator==(const Matrix& other) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// C = A * B. Throws a shape error naming both shapes on mismatch.
Matrix matmul(const Matrix& a, const Matrix& b);

// y = A * x for a plain vector.
Vector matvec(const Matrix& a, const Vector& x);

// y = A^T * x.
Vector matvec_transposed(const Matrix& a, const Vector& x);

Matrix transposed(const Matrix& a);

// Sum of squared entries.
double frobenius_norm_sq(const Matrix& m);
double frobenius_norm_sq(const Vector& v);

double dot(const Vector& a, const Vector& b);
double l2_norm(const Vector& v);

void check_finite(const Vector& v, const std::string& context);

}  // namespace cr
