#pragma once
//
// eigen_support.hpp — internal bridge between the row-major Matrix value type
// and Eigen. Not installed; implementation detail shared by the .cpp files.
//

#include <Eigen/Dense>

#include "lplr/matrix.hpp"

namespace lplr {
namespace detail {

using EigenRowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const EigenRowMajor>;
using MutMap = Eigen::Map<EigenRowMajor>;

inline ConstMap map_of(const Matrix& a) {
    return ConstMap(a.data.data(), static_cast<Eigen::Index>(a.rows),
                    static_cast<Eigen::Index>(a.cols));
}

inline MutMap map_of(Matrix& a) {
    return MutMap(a.data.data(), static_cast<Eigen::Index>(a.rows),
                  static_cast<Eigen::Index>(a.cols));
}

template <typename Derived>
Matrix from_eigen(const Eigen::MatrixBase<Derived>& expr) {
    Matrix out(static_cast<std::size_t>(expr.rows()), static_cast<std::size_t>(expr.cols()));
    map_of(out) = expr;
    return out;
}

// Thin SVD keeping every singular value (including zeros), so callers can
// take exact spectral tails and column slices past the numerical rank.
struct FullSvd {
    Eigen::MatrixXd u;     // n x min(n,d)
    Eigen::VectorXd sigma; // min(n,d), nonincreasing, >= 0
    Eigen::MatrixXd v;     // d x min(n,d)
};

// Throws ConvergenceError naming the shape if the decomposition fails.
FullSvd full_svd(const Matrix& a);

// Count of singular values above rank_tolerance * sigma_1 (0 for a zero matrix).
std::size_t numerical_rank(const Eigen::VectorXd& sigma, double rank_tolerance);

} // namespace detail
} // namespace lplr
