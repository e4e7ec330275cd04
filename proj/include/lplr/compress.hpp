#pragma once
//
// compress.hpp — the compression algorithms.
//
//   lplr       : L = Q(A*S) for a Gaussian sketch S, R = Q'(W*) where
//                W* = argmin_W ||Q(A*S) W - A||_F. O(ndm) end to end.
//   lplr_svd   : same projection idea but the basis comes from the SVD:
//                L = Q((U Sigma)_k), optionally right-rotated by a k-by-k
//                Gaussian before quantizing (the default; it spreads energy
//                evenly across entries, shrinking the needed dynamic range).
//   dsvd       : quantize the truncated SVD factors directly, no projection:
//                L = Q((U Sigma)_k), R = Q'(V_k^T).
//   naive_quant: entrywise quantization of A itself at B_nq bits.
//
// Dynamic ranges are measured from the actual intermediates by default
// (never saturates); theory mode instead evaluates the closed-form ranges
// from the error analysis, in which case saturation is possible and triggers
// a seeded retry.
//

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lplr/linalg.hpp"
#include "lplr/matrix.hpp"
#include "lplr/quantize.hpp"

namespace lplr {

enum class Algorithm : std::uint8_t { lplr = 0, lplr_svd = 1, dsvd = 2, naive = 3 };

const char* algorithm_name(Algorithm algo);
Algorithm algorithm_from_name(const std::string& name); // accepts lplr|lsvd|dsvd|nq

enum class RangeMode : std::uint8_t { data_driven, theory };

struct CompressionConfig {
    Algorithm algorithm = Algorithm::lplr;
    std::size_t sketch_size = 0; // m; required by lplr
    std::size_t target_rank = 0; // k; required by lplr_svd and dsvd
    int bits = 8;                // B, left factor (or the naive budget B_nq)
    int bits_second = 8;         // B', right factor
    RangeMode range_mode = RangeMode::data_driven;
    double eps = 0.1;            // error tolerance driving the theory-mode formulas
    LstsqMethod solver = LstsqMethod::closed_form;
    double cg_tol = 1e-10;
    std::size_t cg_max_iter = 0; // 0 = 10 * columns
    bool lsvd_rotation = true;   // lplr_svd only: rotate the basis before quantizing
    bool normalize_shift = false;
    Rounding rounding = Rounding::dithered;
    std::uint64_t seed = 0;
    int max_retries = 10;

    void validate() const; // shape/bit/flag preconditions; throws ArgumentError
};

// Quantized factor pair L (n-by-m) and R (m-by-d), plus the optional affine
// correction alpha * (L R) + beta * ones fitted after quantization.
struct Factorization {
    QuantizedMatrix l;
    QuantizedMatrix r;
    Algorithm algorithm = Algorithm::lplr;
    std::optional<double> alpha;
    std::optional<double> beta;
    std::uint64_t seed = 0;
    int retry_count = 0;

    // B*n*m + B'*m*d, plus 128 when the affine pair is present.
    std::size_t payload_bits() const;
};

struct CompressionReport {
    std::string algorithm;
    std::size_t rows = 0, cols = 0;
    std::size_t sketch_size = 0;      // m or k actually used
    int bits = 0, bits_second = 0;
    std::size_t payload_bits = 0;
    std::size_t source_bits = 0;      // 64 * n * d
    double relative_error = 0.0;      // ||A_hat - A||_F / ||A||_F (0 when both vanish)
    double seconds_sketch = 0.0;      // sketch / SVD stage
    double seconds_quantize = 0.0;    // both quantization passes
    double seconds_solve = 0.0;       // least-squares stage
    double seconds_total = 0.0;
    int retry_count = 0;
    bool exact = false;               // zero-range short-circuit fired
    std::vector<std::string> saturation_log; // one line per retried attempt
    std::vector<std::string> warnings;

    double compression_ratio() const {
        return payload_bits == 0 ? 0.0
                                 : static_cast<double>(source_bits) / static_cast<double>(payload_bits);
    }
};

struct CompressionResult {
    Factorization factorization;
    CompressionReport report;
};

struct NaiveResult {
    QuantizedMatrix quantized;
    CompressionReport report;
    // Grid midpoint (min+max)/2; reconstruction adds it back after dequantizing.
    double shift = 0.0;
};

// Dynamic ranges (R_Q, R_Q') for the two quantizers of an (A, m) instance.
struct DynamicRanges {
    double r_q = 0.0;
    double r_qprime = 0.0;
};

CompressionResult lplr(const Matrix& a, const CompressionConfig& cfg);
CompressionResult lplr_svd(const Matrix& a, const CompressionConfig& cfg);
CompressionResult dsvd(const Matrix& a, const CompressionConfig& cfg);

// Entrywise baseline: each entry is rounded onto a uniform 2^bits_nq-point
// grid spanning [min(A), max(A)] (nearest rounding by default, matching how
// fixed-point data types quantize). Payload is bits_nq * n * d. The grid is
// stored as a symmetric quantizer around the range midpoint, returned in
// `shift`; for data symmetric about zero this reduces to a max|A| range.
NaiveResult naive_quant(const Matrix& a, int bits_nq, std::uint64_t seed,
                        Rounding rounding = Rounding::nearest);

// Dispatches on cfg.algorithm (naive uses cfg.bits as B_nq and wraps the
// result in a rank-d Factorization-shaped report).
CompressionResult compress(const Matrix& a, const CompressionConfig& cfg);

// Range selection for an (A, m) instance. data_driven draws the sketch from
// `seed` and measures max|A S| and max|W*| from those intermediates (the
// in-pipeline measurements quantize first and so never saturate); theory
// evaluates R * sqrt(2 log(16 R^2 n^2 m / eps) / m) and 2 kappa / (sqrt(gamma) - 1 - t).
DynamicRanges select_dynamic_ranges(const Matrix& a, std::size_t m, RangeMode mode, double eps,
                                    const SpectrumStats& stats, std::uint64_t seed = 0);

// dequantize(L) * dequantize(R), then the affine correction when present.
Matrix reconstruct(const Factorization& f);

// Closed-form argmin over (alpha, beta) of ||alpha Y + beta ones - X||_F.
// Degenerate Y (constant matrix) falls back to alpha = 0, beta = mean(X).
struct AffinePair {
    double alpha = 1.0;
    double beta = 0.0;
};
AffinePair normalize_shift(const Matrix& y, const Matrix& x);

// Advisory bit-budget thresholds from the error analysis: the factorization
// error stays within (1 + k/(m-k-1)) ||A_k - A||_F^2 + eps once
// B >= max{B1, B2} and B' >= bprime_min. `c` is the absolute constant from
// the subgaussian spectral bound, unspecified by the analysis (default 1).
struct BitThresholds {
    double b_min = 0.0;
    double b1 = 0.0;
    double b2 = 0.0;
    double bprime_min = 0.0;
};
BitThresholds bit_thresholds(const Matrix& a, std::size_t k, std::size_t m, double eps,
                             const SpectrumStats& stats, double c = 1.0);

} // namespace lplr
