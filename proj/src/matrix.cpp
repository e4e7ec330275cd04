#include "lplr/matrix.hpp"

#include <Eigen/Core>

#include <cmath>
#include <string>

namespace lplr {

namespace {

using EigenRowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const EigenRowMajor>;
using MutMap = Eigen::Map<EigenRowMajor>;

ConstMap map_of(const Matrix& a) {
    return ConstMap(a.data.data(), static_cast<Eigen::Index>(a.rows),
                    static_cast<Eigen::Index>(a.cols));
}

void require_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (!a.same_shape(b)) {
        throw ArgumentError(std::string(op) + ": shape mismatch (" + std::to_string(a.rows) + "x" +
                            std::to_string(a.cols) + " vs " + std::to_string(b.rows) + "x" +
                            std::to_string(b.cols) + ")");
    }
}

} // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols) : rows(rows), cols(cols) {
    if (rows == 0 || cols == 0) {
        throw ArgumentError("matrix dimensions must be at least 1x1, got " + std::to_string(rows) +
                            "x" + std::to_string(cols));
    }
    data.assign(rows * cols, 0.0);
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows(rows), cols(cols), data(std::move(values)) {
    validate("matrix");
}

Matrix Matrix::identity(std::size_t n) {
    Matrix eye(n, n);
    for (std::size_t i = 0; i < n; ++i) eye(i, i) = 1.0;
    return eye;
}

void Matrix::validate(const char* what) const {
    if (rows == 0 || cols == 0) {
        throw ArgumentError(std::string(what) + ": dimensions must be at least 1x1, got " +
                            std::to_string(rows) + "x" + std::to_string(cols));
    }
    if (data.size() != rows * cols) {
        throw ArgumentError(std::string(what) + ": payload holds " + std::to_string(data.size()) +
                            " values, shape needs " + std::to_string(rows * cols));
    }
    for (std::size_t idx = 0; idx < data.size(); ++idx) {
        if (!std::isfinite(data[idx])) {
            throw ArgumentError(std::string(what) + ": non-finite entry at (" +
                                std::to_string(idx / cols) + ", " + std::to_string(idx % cols) +
                                ")");
        }
    }
}

double max_abs(const Matrix& a) {
    a.validate();
    return map_of(a).cwiseAbs().maxCoeff();
}

double max_row_norm(const Matrix& a) {
    a.validate();
    return map_of(a).rowwise().norm().maxCoeff();
}

double frobenius_norm(const Matrix& a) {
    a.validate();
    return map_of(a).norm();
}

double entry_sum(const Matrix& a) {
    a.validate();
    return map_of(a).sum();
}

double dot(const Matrix& a, const Matrix& b) {
    require_shape(a, b, "dot");
    return map_of(a).cwiseProduct(map_of(b)).sum();
}

double frobenius_distance(const Matrix& a, const Matrix& b) {
    require_shape(a, b, "frobenius_distance");
    return (map_of(a) - map_of(b)).norm();
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) {
        throw ArgumentError("matmul: inner dimensions disagree (" + std::to_string(a.cols) +
                            " vs " + std::to_string(b.rows) + ")");
    }
    Matrix c(a.rows, b.cols);
    MutMap(c.data.data(), static_cast<Eigen::Index>(c.rows), static_cast<Eigen::Index>(c.cols)) =
        map_of(a) * map_of(b);
    return c;
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols, a.rows);
    MutMap(t.data.data(), static_cast<Eigen::Index>(t.rows), static_cast<Eigen::Index>(t.cols)) =
        map_of(a).transpose();
    return t;
}

Matrix add(const Matrix& a, const Matrix& b) {
    require_shape(a, b, "add");
    Matrix c(a.rows, a.cols);
    for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] = a.data[i] + b.data[i];
    return c;
}

Matrix subtract(const Matrix& a, const Matrix& b) {
    require_shape(a, b, "subtract");
    Matrix c(a.rows, a.cols);
    for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] = a.data[i] - b.data[i];
    return c;
}

Matrix scale(const Matrix& a, double factor) {
    Matrix c(a.rows, a.cols);
    for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] = a.data[i] * factor;
    return c;
}

} // namespace lplr
