#pragma once
//
// linalg.hpp — deterministic dense linear algebra: SVD, best rank-k
// truncation, Moore-Penrose pseudo-inverse, least squares (closed-form and
// conjugate-gradient), and the spectral statistics the theory-mode dynamic
// ranges are built from.
//

#include <cstddef>
#include <vector>

#include "lplr/matrix.hpp"

namespace lplr {

// Default relative cutoff below which singular values are treated as zero.
inline constexpr double kDefaultRankTolerance = 1e-12;

// Thin SVD truncated to the numerical rank r: A = U diag(sigma) V^T with
// U n-by-r, V d-by-r, sigma positive nonincreasing.
struct SvdResult {
    Matrix u;
    std::vector<double> singular_values;
    Matrix v;
    std::size_t rank = 0;
};

// Spectral quantities used by the theory-mode range/bit formulas:
//   t     = sqrt(2 log(32 n R^2 / eps) / m)
//   gamma = d / m
//   kappa = min{ kappa(A),
//                kappa(A_k) / (1 - (sigma_{k+1}/sigma_k) * (sqrt(gamma)+1+t)/(sqrt(gamma)-1-t)) },
// falling back to kappa(A) when that denominator is <= 0. R is the largest
// row 2-norm of A.
struct SpectrumStats {
    double kappa_A = 0.0;  // sigma_1 / sigma_r
    double kappa_Ak = 0.0; // sigma_1 / sigma_k
    double kappa = 0.0;
    double t = 0.0;
    double gamma = 0.0;
    double row_norm_bound = 0.0;
};

// Thin SVD with numerical-rank truncation: keeps sigma_i > rank_tolerance * sigma_1.
// Throws ConvergenceError (naming the shape) if the backend fails to converge.
SvdResult svd(const Matrix& a, double rank_tolerance = kDefaultRankTolerance);

// Best rank-k approximation and its squared Frobenius residual
// tail_energy = sum_{i>k} sigma_i^2 = ||A_k - A||_F^2.
struct RankKResult {
    Matrix ak;
    double tail_energy = 0.0;
};
RankKResult best_rank_k(const Matrix& a, std::size_t k);

// Moore-Penrose pseudo-inverse via SVD, inverting retained singular values only.
Matrix pinv(const Matrix& a, double rank_tolerance = kDefaultRankTolerance);

enum class LstsqMethod { closed_form, conjugate_gradient };

struct LstsqResult {
    Matrix x;
    bool converged = true; // false only when CG hit max_iter on some column
    std::size_t iterations = 0; // max over columns for CG, 0 for closed form
};

// argmin_X ||Phi X - Y||_F. closed_form returns the minimum-norm solution
// pinv(Phi) * Y; conjugate_gradient solves the normal equations
// Phi^T Phi X = Phi^T Y column by column to relative residual `tol`
// (default max_iter = 10 * Phi.cols). CG that stalls returns its best
// iterate with converged = false.
LstsqResult lstsq(const Matrix& phi, const Matrix& y,
                  LstsqMethod method = LstsqMethod::closed_form,
                  double tol = 1e-10, std::size_t max_iter = 0);

// Spectral statistics for an (A, k, m, eps) instance; see SpectrumStats.
// Requires k <= numerical rank, m >= 1, eps > 0, and the aspect-ratio guard
// sqrt(d/m) - 1 - t > 0 (otherwise throws ArgumentError — the sketch is too
// wide for the theory-mode formulas).
SpectrumStats spectrum_stats(const Matrix& a, std::size_t k, std::size_t m, double eps);

} // namespace lplr
