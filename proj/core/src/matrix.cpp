#include "deepstack/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "deepstack/errors.hpp"

namespace deepstack {

namespace {

std::string shape(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ContractViolation(std::string(op) + ": shape mismatch " + shape(a) + " vs " + shape(b));
    }
}

} // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) {
            throw ContractViolation("Matrix: ragged initializer list");
        }
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        m(i, i) = 1.0;
    }
    return m;
}

Matrix Matrix::row_vector(std::span<const double> values) {
    Matrix m(1, values.size());
    std::copy(values.begin(), values.end(), m.data_.begin());
    return m;
}

void Matrix::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw ContractViolation("matmul: inner dimension mismatch " + shape(a) + " * " + shape(b));
    }
    Matrix out(a.rows(), b.cols());
    const std::size_t inner = a.cols();
    const std::size_t n = b.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* out_row = out.row(i).data();
        const double* a_row = a.row(i).data();
        for (std::size_t k = 0; k < inner; ++k) {
            const double aik = a_row[k];
            if (aik == 0.0) {
                continue;
            }
            const double* b_row = b.row(k).data();
            for (std::size_t j = 0; j < n; ++j) {
                out_row[j] += aik * b_row[j];
            }
        }
    }
    return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) {
        throw ContractViolation("matmul_tn: row count mismatch " + shape(a) + " vs " + shape(b));
    }
    Matrix out(a.cols(), b.cols());
    const std::size_t n = b.cols();
    for (std::size_t k = 0; k < a.rows(); ++k) {
        const double* a_row = a.row(k).data();
        const double* b_row = b.row(k).data();
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double aki = a_row[i];
            if (aki == 0.0) {
                continue;
            }
            double* out_row = out.row(i).data();
            for (std::size_t j = 0; j < n; ++j) {
                out_row[j] += aki * b_row[j];
            }
        }
    }
    return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) {
        throw ContractViolation("matmul_nt: column count mismatch " + shape(a) + " vs " + shape(b));
    }
    Matrix out(a.rows(), b.rows());
    const std::size_t inner = a.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* a_row = a.row(i).data();
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const double* b_row = b.row(j).data();
            double acc = 0.0;
            for (std::size_t k = 0; k < inner; ++k) {
                acc += a_row[k] * b_row[k];
            }
            out(i, j) = acc;
        }
    }
    return out;
}

Matrix transpose(const Matrix& a) {
    Matrix out(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            out(j, i) = a(i, j);
        }
    }
    return out;
}

double sigmoid(double z) {
    // Branch on sign so exp() never overflows.
    if (z >= 0.0) {
        const double e = std::exp(-z);
        return 1.0 - e / (1.0 + e);
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

Matrix sigmoid(const Matrix& z) {
    Matrix out(z.rows(), z.cols());
    auto src = z.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < src.size(); ++i) {
        dst[i] = sigmoid(src[i]);
    }
    return out;
}

void add_row_inplace(Matrix& m, const Matrix& row) {
    if (row.rows() != 1 || row.cols() != m.cols()) {
        throw ContractViolation("add_row_inplace: expected 1x" + std::to_string(m.cols()) + " row, got " +
                                shape(row));
    }
    for (std::size_t i = 0; i < m.rows(); ++i) {
        auto r = m.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) {
            r[j] += row(0, j);
        }
    }
}

Matrix column_sums(const Matrix& m) {
    Matrix out(1, m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        auto r = m.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) {
            out(0, j) += r[j];
        }
    }
    return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "hadamard");
    Matrix out = a;
    auto dst = out.data();
    auto src = b.data();
    for (std::size_t i = 0; i < dst.size(); ++i) {
        dst[i] *= src[i];
    }
    return out;
}

void axpy_inplace(Matrix& y, double alpha, const Matrix& x) {
    require_same_shape(y, x, "axpy");
    auto dst = y.data();
    auto src = x.data();
    for (std::size_t i = 0; i < dst.size(); ++i) {
        dst[i] += alpha * src[i];
    }
}

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> indices) {
    Matrix out(indices.size(), m.cols());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= m.rows()) {
            throw ContractViolation("gather_rows: index " + std::to_string(indices[i]) + " out of range");
        }
        auto src = m.row(indices[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

Matrix slice_rows(const Matrix& m, std::size_t begin, std::size_t end) {
    if (begin > end || end > m.rows()) {
        throw ContractViolation("slice_rows: bad range");
    }
    Matrix out(end - begin, m.cols());
    auto src = m.data().subspan(begin * m.cols(), (end - begin) * m.cols());
    std::copy(src.begin(), src.end(), out.data().begin());
    return out;
}

double sum_squares(const Matrix& m) {
    double acc = 0.0;
    for (double v : m.data()) {
        acc += v * v;
    }
    return acc;
}

bool all_finite(const Matrix& m) {
    return std::all_of(m.data().begin(), m.data().end(), [](double v) { return std::isfinite(v); });
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "max_abs_diff");
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
    }
    return worst;
}

} // namespace deepstack
