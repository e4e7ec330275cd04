#include "lplr/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "eigen_support.hpp"

namespace lplr {

using detail::from_eigen;
using detail::map_of;

namespace detail {

FullSvd full_svd(const Matrix& a) {
    a.validate("svd input");
    Eigen::BDCSVD<Eigen::MatrixXd> solver(map_of(a), Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (solver.info() != Eigen::Success) {
        throw ConvergenceError("svd failed to converge on a " + std::to_string(a.rows) + "x" +
                               std::to_string(a.cols) + " matrix");
    }
    return FullSvd{solver.matrixU(), solver.singularValues(), solver.matrixV()};
}

std::size_t numerical_rank(const Eigen::VectorXd& sigma, double rank_tolerance) {
    if (sigma.size() == 0 || sigma(0) <= 0.0) return 0;
    const double cutoff = rank_tolerance * sigma(0);
    std::size_t r = 0;
    while (r < static_cast<std::size_t>(sigma.size()) &&
           sigma(static_cast<Eigen::Index>(r)) > cutoff) {
        ++r;
    }
    return r;
}

} // namespace detail

using detail::numerical_rank;

namespace {

void require_rank_tolerance(double rank_tolerance) {
    if (!(rank_tolerance > 0.0) || !(rank_tolerance < 1.0)) {
        throw ArgumentError("rank tolerance must lie in (0, 1), got " +
                            std::to_string(rank_tolerance));
    }
}

} // namespace

SvdResult svd(const Matrix& a, double rank_tolerance) {
    require_rank_tolerance(rank_tolerance);
    detail::FullSvd full = detail::full_svd(a);
    const std::size_t r = numerical_rank(full.sigma, rank_tolerance);
    if (r == 0) {
        throw ArgumentError("svd: matrix is numerically zero (no singular value above tolerance)");
    }
    SvdResult out;
    out.u = from_eigen(full.u.leftCols(static_cast<Eigen::Index>(r)));
    out.v = from_eigen(full.v.leftCols(static_cast<Eigen::Index>(r)));
    out.singular_values.assign(full.sigma.data(), full.sigma.data() + r);
    out.rank = r;
    return out;
}

RankKResult best_rank_k(const Matrix& a, std::size_t k) {
    a.validate("best_rank_k input");
    const std::size_t kmax = std::min(a.rows, a.cols);
    if (k < 1 || k > kmax) {
        throw ArgumentError("best_rank_k: k must lie in [1, " + std::to_string(kmax) + "], got " +
                            std::to_string(k));
    }
    detail::FullSvd full = detail::full_svd(a);
    const Eigen::Index kk = static_cast<Eigen::Index>(k);
    RankKResult out;
    out.ak = from_eigen(full.u.leftCols(kk) * full.sigma.head(kk).asDiagonal() *
                        full.v.leftCols(kk).transpose());
    out.tail_energy = full.sigma.tail(full.sigma.size() - kk).squaredNorm();
    return out;
}

Matrix pinv(const Matrix& a, double rank_tolerance) {
    require_rank_tolerance(rank_tolerance);
    a.validate("pinv input");
    detail::FullSvd full = detail::full_svd(a);
    const std::size_t r = numerical_rank(full.sigma, rank_tolerance);
    if (r == 0) {
        // Zero matrix: the pseudo-inverse is the zero matrix of transposed shape.
        return Matrix(a.cols, a.rows);
    }
    const Eigen::Index rr = static_cast<Eigen::Index>(r);
    return from_eigen(full.v.leftCols(rr) * full.sigma.head(rr).cwiseInverse().asDiagonal() *
                      full.u.leftCols(rr).transpose());
}

namespace {

// Plain conjugate gradients on the (positive semidefinite) normal equations
// G x = b, from x = 0, stopping at ||G x - b|| <= tol * ||b||.
struct CgOutcome {
    Eigen::VectorXd x;
    bool converged = true;
    std::size_t iterations = 0;
};

CgOutcome conjugate_gradient(const Eigen::MatrixXd& g, const Eigen::VectorXd& b, double tol,
                             std::size_t max_iter) {
    CgOutcome out;
    out.x = Eigen::VectorXd::Zero(b.size());
    const double b_norm = b.norm();
    if (b_norm == 0.0) return out;

    Eigen::VectorXd r = b;
    Eigen::VectorXd p = r;
    double rs = r.squaredNorm();
    const double stop = tol * b_norm;

    while (out.iterations < max_iter && std::sqrt(rs) > stop) {
        const Eigen::VectorXd gp = g * p;
        const double curvature = p.dot(gp);
        if (!(curvature > 0.0)) break; // p in the (numerical) null space of G
        const double alpha = rs / curvature;
        out.x += alpha * p;
        r -= alpha * gp;
        const double rs_next = r.squaredNorm();
        p = r + (rs_next / rs) * p;
        rs = rs_next;
        ++out.iterations;
    }
    out.converged = std::sqrt(rs) <= stop;
    return out;
}

} // namespace

LstsqResult lstsq(const Matrix& phi, const Matrix& y, LstsqMethod method, double tol,
                  std::size_t max_iter) {
    phi.validate("lstsq design matrix");
    y.validate("lstsq response");
    if (phi.rows != y.rows) {
        throw ArgumentError("lstsq: design matrix has " + std::to_string(phi.rows) +
                            " rows but the response has " + std::to_string(y.rows));
    }

    if (method == LstsqMethod::closed_form) {
        return LstsqResult{matmul(pinv(phi), y), true, 0};
    }

    if (!(tol > 0.0)) {
        throw ArgumentError("lstsq: conjugate-gradient tolerance must be positive");
    }
    if (max_iter == 0) max_iter = 10 * phi.cols;

    const auto phi_map = map_of(phi);
    const Eigen::MatrixXd g = phi_map.transpose() * phi_map;
    const Eigen::MatrixXd rhs = phi_map.transpose() * map_of(y);

    LstsqResult out;
    out.x = Matrix(phi.cols, y.cols);
    auto x_map = map_of(out.x);
    for (Eigen::Index j = 0; j < rhs.cols(); ++j) {
        CgOutcome col = conjugate_gradient(g, rhs.col(j), tol, max_iter);
        x_map.col(j) = col.x;
        out.converged = out.converged && col.converged;
        out.iterations = std::max(out.iterations, col.iterations);
    }
    return out;
}

SpectrumStats spectrum_stats(const Matrix& a, std::size_t k, std::size_t m, double eps) {
    a.validate("spectrum_stats input");
    if (m < 1) throw ArgumentError("spectrum_stats: sketch size must be at least 1");
    if (!(eps > 0.0)) throw ArgumentError("spectrum_stats: eps must be positive");

    detail::FullSvd full = detail::full_svd(a);
    const std::size_t r = numerical_rank(full.sigma, kDefaultRankTolerance);
    if (r == 0) throw ArgumentError("spectrum_stats: matrix is numerically zero");
    if (k < 1 || k > r) {
        throw ArgumentError("spectrum_stats: k must lie in [1, rank=" + std::to_string(r) +
                            "], got " + std::to_string(k));
    }

    SpectrumStats stats;
    stats.row_norm_bound = max_row_norm(a);
    stats.gamma = static_cast<double>(a.cols) / static_cast<double>(m);

    // t = sqrt(2 log(32 n R^2 / eps) / m); the concentration regime assumes
    // the log argument exceeds 1 — clamp at t = 0 otherwise.
    const double r_bound = stats.row_norm_bound;
    const double log_arg =
        32.0 * static_cast<double>(a.rows) * r_bound * r_bound / eps;
    stats.t = log_arg > 1.0 ? std::sqrt(2.0 * std::log(log_arg) / static_cast<double>(m)) : 0.0;

    const double margin = std::sqrt(stats.gamma) - 1.0 - stats.t;
    if (!(margin > 0.0)) {
        throw ArgumentError("sketch aspect ratio too small for theory mode");
    }

    const double sigma_1 = full.sigma(0);
    const double sigma_r = full.sigma(static_cast<Eigen::Index>(r - 1));
    const double sigma_k = full.sigma(static_cast<Eigen::Index>(k - 1));
    // sigma_{k+1} below the rank cutoff is numerically zero.
    const double sigma_k1 = k < r ? full.sigma(static_cast<Eigen::Index>(k)) : 0.0;

    stats.kappa_A = sigma_1 / sigma_r;
    stats.kappa_Ak = sigma_1 / sigma_k;

    const double ratio = (std::sqrt(stats.gamma) + 1.0 + stats.t) / margin;
    const double denom = 1.0 - (sigma_k1 / sigma_k) * ratio;
    stats.kappa = denom > 0.0 ? std::min(stats.kappa_A, stats.kappa_Ak / denom) : stats.kappa_A;
    return stats;
}

} // namespace lplr
