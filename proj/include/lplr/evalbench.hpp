#pragma once
//
// evalbench.hpp — evaluation and verification utilities:
//
//   * bit-budget parity accounting (equal-total-bits comparisons),
//   * error metrics and the closed-form factorization error ceiling,
//   * Monte-Carlo verifiers for the concentration results the algorithms
//     rely on (inverse-Wishart trace, dithered-quantizer equalization,
//     sketched least squares with a quantized response),
//   * a brute-force 3-NN classifier for embedding-quality checks,
//   * the modified Shepp-Logan phantom generator,
//   * a sweep driver producing Table-style (algorithm x budget x seed) grids.
//

#include <cstdint>
#include <string>
#include <vector>

#include "lplr/compress.hpp"
#include "lplr/matrix.hpp"

namespace lplr {

// ---------------------------------------------------------------------------
// Bit-budget parity
// ---------------------------------------------------------------------------

// A resolved equal-bits budget: factoring an n-by-d matrix into n-by-m and
// m-by-d factors at (B, B') bits per entry against a naive baseline spending
// B_nq bits on every entry.
struct ParityBudget {
    std::size_t n = 0, d = 0;
    int bits = 0;        // B, left factor
    int bits_second = 0; // B', right factor
    int bits_naive = 0;  // B_nq, entrywise baseline
    std::size_t m = 0;   // resolved sketch size / rank

    std::size_t factor_bits() const;   // B*n*m + B'*m*d
    std::size_t baseline_bits() const; // B_nq*n*d
    // factor_bits() <= baseline_bits() < bits at m+1
    bool holds() const;
};

// Largest m whose factor payload fits the naive budget:
// m = floor(B_nq*n*d / (B*n + B'*d)). Throws ArgumentError when the budget
// cannot fund even a rank-1 pair.
std::size_t parity_sketch_size(std::size_t n, std::size_t d, int bits, int bits_second,
                               int bits_naive);

ParityBudget parity_budget(std::size_t n, std::size_t d, int bits, int bits_second,
                           int bits_naive);

// ---------------------------------------------------------------------------
// Error metrics and bounds
// ---------------------------------------------------------------------------

// ||Ahat - A||_F / ||A||_F. Throws ArgumentError on shape mismatch or zero A.
double relative_fro_error(const Matrix& ahat, const Matrix& a);

// (1 + k/(m-k-1)) * ||A_k - A||_F^2 + eps — the expected squared-error
// ceiling for a rank-m sketched factorization measured against the best
// rank-k approximation. Requires m >= k + 2.
double thm1_bound(const Matrix& a, std::size_t k, std::size_t m, double eps);

// ---------------------------------------------------------------------------
// Monte-Carlo verifiers
// ---------------------------------------------------------------------------

// Estimates E Tr[(S^T S)^-1] for S (d-by-m, entries N(0, 1/m)) and compares
// against the closed form m^2/(d-m-1). Singular draws are resampled and
// counted. Requires d >= m + 2.
struct WishartCheck {
    double mc_estimate = 0.0;
    double theory = 0.0;
    double rel_dev = 0.0;       // |mc - theory| / theory
    std::size_t resampled = 0;  // singular draws replaced
};
WishartCheck verify_wishart_trace(std::size_t m, std::size_t d, std::size_t trials,
                                  std::uint64_t seed);

// Estimates E ||Q(Sx) - Sx||^2 for a fixed ||x|| = R, per-trial Gaussian
// S (m-by-d, variance 1/m), and the clipped dithered quantizer with clip
// t = R/sqrt(m) at B bits, then compares against the closed-form bound
// R^2/(2^B-1)^2 + R^2*sqrt(2)/sqrt(pi*e). `pass` is mc <= bound + 3 SE.
struct EqualizationCheck {
    double mc_error = 0.0;
    double bound = 0.0;
    double std_error = 0.0;
    bool pass = false;
};
EqualizationCheck verify_equalization(std::size_t d, std::size_t m, int bits, double r,
                                      std::size_t trials, std::uint64_t seed);

// Monte-Carlo check of the two-sided guarantee for sketched least squares
// with a quantized response: for Phi (ell-by-p, rank k), Y (ell-by-q), and
// per-trial G (m-by-ell, variance 1/m) with Xt = (G Phi)^+ Q(G Y),
//
//   ||Phi X* - Y||_F^2  <=  E ||Phi Xt - Y||_F^2
//                       <=  (m-1)/(m-k-1) ||Phi X* - Y||_F^2
//                            + q (D^2/4) (smax^2/smin^2) m^2/(ell-m-1)
//
// where D is the quantizer resolution at the per-trial range max|G Y| and
// smax/smin are the extreme nonzero singular values of Phi. Phi and Y are
// fixed from `seed`; each trial redraws G and the dither.
struct SketchedLsCheck {
    double lower = 0.0;     // ||Phi X* - Y||_F^2
    double mid_mean = 0.0;  // Monte-Carlo mean of ||Phi Xt - Y||_F^2
    double mid_se = 0.0;    // standard error of the mean
    double upper = 0.0;     // closed-form ceiling with the mean D^2
    bool pass_lower = false; // lower <= mid_mean + 3 SE
    bool pass_upper = false; // mid_mean <= upper + 3 SE
};
SketchedLsCheck verify_sketched_ls(std::size_t ell, std::size_t p, std::size_t q,
                                   std::size_t m, std::size_t k, int bits,
                                   std::size_t trials, std::uint64_t seed);

// ---------------------------------------------------------------------------
// k-nearest-neighbor harness
// ---------------------------------------------------------------------------

struct ClassMetrics {
    int label = 0;
    std::size_t support = 0; // true instances in the test set
    double precision = 0.0;  // 0/0 -> 0
    double recall = 0.0;
    double f1 = 0.0;
};

struct KnnResult {
    std::vector<int> predicted;
    bool scored = false;    // true when test labels were supplied
    double accuracy = 0.0;
    double weighted_f1 = 0.0; // sum_c (support_c / N) * F1_c
    std::vector<ClassMetrics> per_class;
};

// Brute-force Euclidean K-NN majority vote; ties broken by smallest summed
// distance, then smallest label. Accuracy/F1 are filled only when
// `test_labels` is non-null.
KnnResult knn_classify(const Matrix& train, const std::vector<int>& labels,
                       const Matrix& test, std::size_t k = 3,
                       const std::vector<int>* test_labels = nullptr);

// ---------------------------------------------------------------------------
// Phantom generator
// ---------------------------------------------------------------------------

// size-by-size modified Shepp-Logan phantom with values in [0, 1]: ten
// ellipses on the [-1,1]^2 grid, a pixel taking the sum of the intensities
// of the ellipses covering its center. Deterministic. Requires size >= 16.
Matrix shepp_logan(std::size_t size);

// ---------------------------------------------------------------------------
// Sweep driver
// ---------------------------------------------------------------------------

// One bit budget of a sweep grid. sketch_size = 0 resolves m (and k) through
// parity_sketch_size against bits_naive; a nonzero value pins it directly.
struct SweepBudget {
    int bits = 8;
    int bits_second = 8;
    int bits_naive = 1;
    std::size_t sketch_size = 0;
};

struct SweepRow {
    std::string algorithm;
    SweepBudget budget;
    std::size_t sketch_size = 0; // the resolved m / k
    std::uint64_t seed = 0;
    CompressionReport report;
};

// Per-(algorithm, budget) aggregate over the seed axis.
struct SweepSummary {
    std::string algorithm;
    SweepBudget budget;
    std::size_t sketch_size = 0;
    std::size_t seeds = 0;
    double mean_relative_error = 0.0;
    double stddev_relative_error = 0.0;
    double mean_seconds = 0.0;
    double stddev_seconds = 0.0;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::vector<SweepSummary> summaries;
};

// Runs every (algorithm, budget, seed) cell on A. `base` supplies the knobs
// not swept (range mode, solver, rotation, rounding); its algorithm, bit,
// size, and seed fields are overwritten per cell. Naive cells read the
// budget's bits_naive and ignore the factor bit pair.
SweepResult sweep(const Matrix& a, const std::vector<Algorithm>& algorithms,
                  const std::vector<SweepBudget>& budgets,
                  const std::vector<std::uint64_t>& seeds,
                  const CompressionConfig& base = CompressionConfig{});

} // namespace lplr
