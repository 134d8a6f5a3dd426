#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace deepstack {

/// Dense row-major matrix of doubles. Rows are examples wherever a matrix
/// holds data, so a minibatch is a contiguous block of rows.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(std::size_t n);
    static Matrix row_vector(std::span<const double> values);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    void fill(double value);

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// All binary operations throw ContractViolation on shape mismatch.

Matrix matmul(const Matrix& a, const Matrix& b);
/// aᵀ·b without materializing the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
/// a·bᵀ without materializing the transpose.
Matrix matmul_nt(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);

Matrix sigmoid(const Matrix& z);
double sigmoid(double z);

/// Adds a 1×cols row vector to every row of `m` in place.
void add_row_inplace(Matrix& m, const Matrix& row);
Matrix column_sums(const Matrix& m);
Matrix hadamard(const Matrix& a, const Matrix& b);
void axpy_inplace(Matrix& y, double alpha, const Matrix& x);

/// Rows of `m` selected by `indices`, in that order.
Matrix gather_rows(const Matrix& m, std::span<const std::size_t> indices);
Matrix slice_rows(const Matrix& m, std::size_t begin, std::size_t end);

double sum_squares(const Matrix& m);
bool all_finite(const Matrix& m);
double max_abs_diff(const Matrix& a, const Matrix& b);

} // namespace deepstack
