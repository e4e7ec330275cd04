#pragma once
//
// matrix.hpp — the dense row-major double matrix that every algorithm consumes
// and produces, plus the handful of norms/reductions used across modules.
//
// Construction validates shape and finiteness once; afterwards a Matrix is a
// plain value type. Heavy linear algebra maps the storage into Eigen without
// copying (see linalg.cpp).
//

#include <cstddef>
#include <vector>

#include "lplr/errors.hpp"

namespace lplr {

struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data; // row-major, length rows*cols

    Matrix() = default;

    // Zero matrix of the given shape. Throws ArgumentError unless rows,cols >= 1.
    Matrix(std::size_t rows, std::size_t cols);

    // Takes ownership of row-major data; validates length and finiteness.
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    std::size_t size() const { return rows * cols; }
    bool same_shape(const Matrix& other) const { return rows == other.rows && cols == other.cols; }

    static Matrix identity(std::size_t n);

    // Re-checks the construction invariants (shape consistency, all entries finite).
    void validate(const char* what = "matrix") const;
};

// max_ij |A_ij|
double max_abs(const Matrix& a);

// max_i ||row i||_2 — the row-norm bound the theory-mode formulas call R.
double max_row_norm(const Matrix& a);

double frobenius_norm(const Matrix& a);

// sum of all entries (the <A, ones> inner product)
double entry_sum(const Matrix& a);

// <A, B> = sum_ij A_ij B_ij; shapes must match.
double dot(const Matrix& a, const Matrix& b);

// ||A - B||_F; shapes must match.
double frobenius_distance(const Matrix& a, const Matrix& b);

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
Matrix add(const Matrix& a, const Matrix& b);
Matrix subtract(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double factor);

} // namespace lplr
