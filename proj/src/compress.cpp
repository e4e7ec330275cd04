#include "lplr/compress.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <utility>

#include "eigen_support.hpp"
#include "lplr/rng.hpp"
#include "lplr/sketch.hpp"

namespace lplr {

namespace {

// Child-seed tags separating the independent randomness consumers of one
// compression attempt.
constexpr std::uint64_t kTagSketch = 1;
constexpr std::uint64_t kTagLeftDither = 2;
constexpr std::uint64_t kTagRightDither = 3;
constexpr std::uint64_t kTagRotation = 4;

class Stopwatch {
public:
    // Seconds since construction or the previous lap.
    double lap() {
        const auto now = std::chrono::steady_clock::now();
        const std::chrono::duration<double> elapsed = now - mark_;
        mark_ = now;
        return elapsed.count();
    }

private:
    std::chrono::steady_clock::time_point mark_ = std::chrono::steady_clock::now();
};

// All-midpoint placeholder for a stage whose input was exactly zero; the
// all_zero flag makes dequantize return exact zeros.
QuantizedMatrix zero_marker(std::size_t rows, std::size_t cols, int bits) {
    QuantizedMatrix q;
    q.rows = rows;
    q.cols = cols;
    q.spec = QuantizerSpec(1.0, bits);
    q.codes.assign(rows * cols, midpoint_code(bits));
    q.all_zero = true;
    return q;
}

// Quantizes one pipeline stage. theory_range > 0 pins the dynamic range (and
// may therefore saturate); otherwise the range is measured from x itself,
// which cannot saturate, and an exactly-zero input short-circuits to the
// zero marker.
QuantizedMatrix quantize_stage(const Matrix& x, int bits, double theory_range,
                               std::uint64_t seed, Rounding rounding, bool& exact_stage) {
    if (theory_range > 0.0) {
        return quantize_matrix(x, QuantizerSpec(theory_range, bits), seed, rounding);
    }
    const double measured = max_abs(x);
    if (measured == 0.0) {
        exact_stage = true;
        return zero_marker(x.rows, x.cols, bits);
    }
    return quantize_matrix(x, QuantizerSpec(measured, bits), seed, rounding);
}

struct AttemptOutcome {
    QuantizedMatrix l;
    QuantizedMatrix r;
};

// Runs `attempt` with the per-attempt derived seed, retrying on saturation up
// to cfg.max_retries times and logging every failed attempt. Saturation can
// only occur with pinned (theory-mode) ranges.
AttemptOutcome with_retries(const CompressionConfig& cfg, CompressionReport& report,
                            const std::function<AttemptOutcome(std::uint64_t)>& attempt) {
    for (int round = 0;; ++round) {
        const std::uint64_t seed =
            round == 0 ? cfg.seed : rng::derive_seed(cfg.seed, static_cast<std::uint64_t>(round));
        try {
            AttemptOutcome out = attempt(seed);
            report.retry_count = round;
            return out;
        } catch (const SaturationError& e) {
            report.saturation_log.push_back("attempt " + std::to_string(round + 1) + ": " +
                                            e.what());
            if (round >= cfg.max_retries) {
                throw SaturationError("quantizer saturation persisted through " +
                                          std::to_string(round + 1) + " attempts; last failure: " +
                                          e.what(),
                                      e.value, e.row, e.col);
            }
        }
    }
}

CompressionReport init_report(const Matrix& a, const CompressionConfig& cfg,
                              std::size_t resolved_size) {
    CompressionReport rep;
    rep.algorithm = algorithm_name(cfg.algorithm);
    rep.rows = a.rows;
    rep.cols = a.cols;
    rep.sketch_size = resolved_size;
    rep.bits = cfg.bits;
    rep.bits_second = cfg.algorithm == Algorithm::naive ? 0 : cfg.bits_second;
    rep.source_bits = 64 * a.rows * a.cols;
    return rep;
}

// Fills the error/payload fields once the factorization exists. Evaluation
// work is intentionally outside the timed stages.
void finalize_report(CompressionReport& rep, const Factorization& f, const Matrix& a) {
    rep.payload_bits = f.payload_bits();
    const Matrix recon = reconstruct(f);
    const double a_norm = frobenius_norm(a);
    rep.relative_error = a_norm == 0.0 ? 0.0 : frobenius_distance(recon, a) / a_norm;
}

// Fits the optional affine correction against A and stores it on f.
void apply_normalize_shift(Factorization& f, const Matrix& a) {
    const Matrix base = f.algorithm == Algorithm::naive
                            ? dequantize(f.l)
                            : matmul(dequantize(f.l), dequantize(f.r));
    const AffinePair pair = normalize_shift(base, a);
    f.alpha = pair.alpha;
    f.beta = pair.beta;
}

// sigma_1 and sigma_k of A via the exact SVD, for the SVD-family theory
// ranges. Throws if k exceeds the numerical rank (kappa(A_k) undefined).
std::pair<double, double> top_and_kth_sigma(const detail::FullSvd& full, std::size_t k) {
    const std::size_t r = detail::numerical_rank(full.sigma, kDefaultRankTolerance);
    if (k > r) {
        throw ArgumentError("theory-mode ranges need target rank <= numerical rank (" +
                            std::to_string(r) + "), got " + std::to_string(k));
    }
    return {full.sigma(0), full.sigma(static_cast<Eigen::Index>(k - 1))};
}

} // namespace

const char* algorithm_name(Algorithm algo) {
    switch (algo) {
        case Algorithm::lplr: return "lplr";
        case Algorithm::lplr_svd: return "lplr_svd";
        case Algorithm::dsvd: return "dsvd";
        case Algorithm::naive: return "naive";
    }
    throw ArgumentError("unknown algorithm id " + std::to_string(static_cast<int>(algo)));
}

Algorithm algorithm_from_name(const std::string& name) {
    if (name == "lplr") return Algorithm::lplr;
    if (name == "lplr_svd" || name == "lsvd") return Algorithm::lplr_svd;
    if (name == "dsvd") return Algorithm::dsvd;
    if (name == "naive" || name == "nq") return Algorithm::naive;
    throw ArgumentError("unknown algorithm '" + name + "' (expected lplr, lsvd, dsvd, or nq)");
}

void CompressionConfig::validate() const {
    if (bits < 1 || bits > 31) {
        throw ArgumentError("bit budget B must lie in [1, 31], got " + std::to_string(bits));
    }
    if (algorithm != Algorithm::naive && (bits_second < 1 || bits_second > 31)) {
        throw ArgumentError("bit budget B' must lie in [1, 31], got " +
                            std::to_string(bits_second));
    }
    if (algorithm == Algorithm::lplr) {
        if (sketch_size < 1) throw ArgumentError("lplr needs sketch_size >= 1");
        if (target_rank != 0) {
            throw ArgumentError("lplr takes sketch_size, not target_rank; leave target_rank 0");
        }
    } else if (algorithm == Algorithm::lplr_svd || algorithm == Algorithm::dsvd) {
        if (target_rank < 1) {
            throw ArgumentError(std::string(algorithm_name(algorithm)) +
                                " needs target_rank >= 1");
        }
        if (sketch_size != 0) {
            throw ArgumentError(std::string(algorithm_name(algorithm)) +
                                " takes target_rank, not sketch_size; leave sketch_size 0");
        }
    }
    if (max_retries < 0) throw ArgumentError("max_retries must be nonnegative");
    if (range_mode == RangeMode::theory && !(eps > 0.0)) {
        throw ArgumentError("theory-mode ranges need eps > 0");
    }
    if (solver == LstsqMethod::conjugate_gradient && !(cg_tol > 0.0)) {
        throw ArgumentError("conjugate-gradient tolerance must be positive");
    }
}

std::size_t Factorization::payload_bits() const {
    std::size_t bits = l.payload_bits();
    if (algorithm != Algorithm::naive) bits += r.payload_bits();
    if (alpha.has_value()) bits += 128;
    return bits;
}

CompressionResult lplr(const Matrix& a, const CompressionConfig& cfg) {
    a.validate("compression input");
    CompressionConfig c = cfg;
    c.algorithm = Algorithm::lplr;
    c.validate();
    const std::size_t m = c.sketch_size;

    CompressionReport rep = init_report(a, c, m);
    if (std::string w = SketchConfig{a.cols, m, 0}.warning(); !w.empty()) {
        rep.warnings.push_back(w);
    }

    // Theory mode pins both ranges up front from the spectral statistics; the
    // reference rank for those formulas is the largest the sketch supports.
    DynamicRanges pinned{};
    if (c.range_mode == RangeMode::theory) {
        if (m < 3) throw ArgumentError("theory-mode lplr needs sketch_size >= 3");
        const std::size_t rank = svd(a).rank;
        const std::size_t k = std::min(m - 2, rank);
        const SpectrumStats stats = spectrum_stats(a, k, m, c.eps);
        pinned = select_dynamic_ranges(a, m, RangeMode::theory, c.eps, stats, c.seed);
    }

    Stopwatch total;
    bool exact = false;
    AttemptOutcome out = with_retries(c, rep, [&](std::uint64_t seed) {
        Stopwatch sw;
        const Matrix s = gaussian_sketch({a.cols, m, rng::derive_seed(seed, kTagSketch)});
        const Matrix y = matmul(a, s);
        rep.seconds_sketch += sw.lap();

        bool stage_exact = false;
        QuantizedMatrix l = quantize_stage(y, c.bits, pinned.r_q,
                                           rng::derive_seed(seed, kTagLeftDither), c.rounding,
                                           stage_exact);
        rep.seconds_quantize += sw.lap();

        const Matrix basis = dequantize(l);
        LstsqResult w = lstsq(basis, a, c.solver, c.cg_tol, c.cg_max_iter);
        if (!w.converged) {
            rep.warnings.push_back("conjugate gradient hit its iteration cap; using best iterate");
        }
        rep.seconds_solve += sw.lap();

        QuantizedMatrix r = quantize_stage(w.x, c.bits_second, pinned.r_qprime,
                                           rng::derive_seed(seed, kTagRightDither), c.rounding,
                                           stage_exact);
        rep.seconds_quantize += sw.lap();
        exact = stage_exact;
        return AttemptOutcome{std::move(l), std::move(r)};
    });

    Factorization f;
    f.l = std::move(out.l);
    f.r = std::move(out.r);
    f.algorithm = Algorithm::lplr;
    f.seed = c.seed;
    f.retry_count = rep.retry_count;
    if (c.normalize_shift) apply_normalize_shift(f, a);
    rep.seconds_total = total.lap();
    rep.exact = exact;
    finalize_report(rep, f, a);
    return CompressionResult{std::move(f), std::move(rep)};
}

namespace {

// Shared body of the two SVD-seeded algorithms; `with_solve` distinguishes
// the least-squares variant from direct factor quantization.
CompressionResult svd_family(const Matrix& a, const CompressionConfig& cfg, bool with_solve) {
    a.validate("compression input");
    CompressionConfig c = cfg;
    c.algorithm = with_solve ? Algorithm::lplr_svd : Algorithm::dsvd;
    c.validate();
    const std::size_t k = c.target_rank;
    if (k > std::min(a.rows, a.cols)) {
        throw ArgumentError("target rank " + std::to_string(k) + " exceeds min(n, d) = " +
                            std::to_string(std::min(a.rows, a.cols)));
    }

    CompressionReport rep = init_report(a, c, k);

    Stopwatch total;
    Stopwatch sw;
    const detail::FullSvd full = detail::full_svd(a);
    const Eigen::Index kk = static_cast<Eigen::Index>(k);
    // Left basis carries the spectrum: (U Sigma)_k. The right factor of the
    // direct method is V_k^T.
    const Matrix scaled_u =
        detail::from_eigen(full.u.leftCols(kk) * full.sigma.head(kk).asDiagonal());
    const Matrix vt = detail::from_eigen(full.v.leftCols(kk).transpose());
    rep.seconds_sketch += sw.lap();

    // Theory-mode ranges for this family: sigma_1 for the left factor; for
    // the right factor, 1 covers the orthonormal V_k^T and 2 kappa(A_k)
    // covers the least-squares solution.
    double pinned_left = 0.0;
    double pinned_right = 0.0;
    if (c.range_mode == RangeMode::theory) {
        const auto [sigma_1, sigma_k] = top_and_kth_sigma(full, k);
        pinned_left = sigma_1;
        pinned_right = with_solve ? 2.0 * sigma_1 / sigma_k : 1.0;
    }

    const bool rotate = with_solve && c.lsvd_rotation;
    bool exact = false;
    AttemptOutcome out = with_retries(c, rep, [&](std::uint64_t seed) {
        Stopwatch attempt_sw;
        Matrix basis_input = scaled_u;
        if (rotate) {
            // k-by-k Gaussian with entry variance 1/k, redrawn per attempt:
            // spreads the spectral energy across entries before quantization.
            Matrix rot(k, k);
            const std::uint64_t rot_seed = rng::derive_seed(seed, kTagRotation);
            const double scale = 1.0 / std::sqrt(static_cast<double>(k));
            for (std::size_t i = 0; i < k; ++i) {
                for (std::size_t j = 0; j < k; ++j) {
                    rot(i, j) = scale * rng::normal(rot_seed, i, j);
                }
            }
            basis_input = matmul(scaled_u, rot);
        }
        rep.seconds_sketch += attempt_sw.lap();

        bool stage_exact = false;
        QuantizedMatrix l = quantize_stage(basis_input, c.bits, pinned_left,
                                           rng::derive_seed(seed, kTagLeftDither), c.rounding,
                                           stage_exact);
        rep.seconds_quantize += attempt_sw.lap();

        Matrix right_input = vt;
        if (with_solve) {
            LstsqResult w = lstsq(dequantize(l), a, c.solver, c.cg_tol, c.cg_max_iter);
            if (!w.converged) {
                rep.warnings.push_back(
                    "conjugate gradient hit its iteration cap; using best iterate");
            }
            right_input = std::move(w.x);
        }
        rep.seconds_solve += attempt_sw.lap();

        QuantizedMatrix r = quantize_stage(right_input, c.bits_second, pinned_right,
                                           rng::derive_seed(seed, kTagRightDither), c.rounding,
                                           stage_exact);
        rep.seconds_quantize += attempt_sw.lap();
        exact = stage_exact;
        return AttemptOutcome{std::move(l), std::move(r)};
    });

    Factorization f;
    f.l = std::move(out.l);
    f.r = std::move(out.r);
    f.algorithm = c.algorithm;
    f.seed = c.seed;
    f.retry_count = rep.retry_count;
    if (c.normalize_shift) apply_normalize_shift(f, a);
    rep.seconds_total = total.lap();
    rep.exact = exact;
    finalize_report(rep, f, a);
    return CompressionResult{std::move(f), std::move(rep)};
}

} // namespace

CompressionResult lplr_svd(const Matrix& a, const CompressionConfig& cfg) {
    return svd_family(a, cfg, /*with_solve=*/true);
}

CompressionResult dsvd(const Matrix& a, const CompressionConfig& cfg) {
    return svd_family(a, cfg, /*with_solve=*/false);
}

NaiveResult naive_quant(const Matrix& a, int bits_nq, std::uint64_t seed, Rounding rounding) {
    a.validate("compression input");
    if (bits_nq < 1 || bits_nq > 31) {
        throw ArgumentError("bit budget B must lie in [1, 31], got " + std::to_string(bits_nq));
    }

    CompressionConfig c;
    c.algorithm = Algorithm::naive;
    c.bits = bits_nq;
    c.seed = seed;
    CompressionReport rep = init_report(a, c, 0);

    // Grid spans [min, max] of the data: quantize around the midpoint so the
    // symmetric quantizer covers exactly the occupied value range.
    const auto [min_it, max_it] = std::minmax_element(a.data.begin(), a.data.end());
    const double mid = (*min_it + *max_it) / 2.0;
    const double half = (*max_it - *min_it) / 2.0;

    Stopwatch total;
    Stopwatch sw;
    QuantizedMatrix q;
    bool exact = false;
    if (half == 0.0) {
        q = zero_marker(a.rows, a.cols, bits_nq);
        exact = true;
    } else {
        Matrix centered = a;
        for (double& v : centered.data) v -= mid;
        q = quantize_matrix(centered, QuantizerSpec(half, bits_nq),
                            rng::derive_seed(seed, kTagLeftDither), rounding);
    }
    rep.seconds_quantize += sw.lap();
    rep.seconds_total = total.lap();

    rep.payload_bits = q.payload_bits();
    Matrix recon = dequantize(q);
    if (mid != 0.0) {
        for (double& v : recon.data) v += mid;
    }
    const double a_norm = frobenius_norm(a);
    const double dist = frobenius_distance(recon, a);
    rep.relative_error = a_norm == 0.0 ? 0.0 : dist / a_norm;
    rep.exact = exact || dist == 0.0;
    return NaiveResult{std::move(q), std::move(rep), mid};
}

CompressionResult compress(const Matrix& a, const CompressionConfig& cfg) {
    switch (cfg.algorithm) {
        case Algorithm::lplr: return lplr(a, cfg);
        case Algorithm::lplr_svd: return lplr_svd(a, cfg);
        case Algorithm::dsvd: return dsvd(a, cfg);
        case Algorithm::naive: break;
    }

    NaiveResult naive = naive_quant(a, cfg.bits, cfg.seed, cfg.rounding);
    Factorization f;
    f.l = std::move(naive.quantized);
    f.algorithm = Algorithm::naive;
    f.seed = cfg.seed;
    CompressionReport rep = std::move(naive.report);
    if (cfg.normalize_shift) {
        // The fitted affine subsumes the grid midpoint, so fit it on the raw
        // dequantized grid values.
        apply_normalize_shift(f, a);
        finalize_report(rep, f, a);
    } else if (naive.shift != 0.0) {
        f.alpha = 1.0;
        f.beta = naive.shift;
        finalize_report(rep, f, a);
    }
    return CompressionResult{std::move(f), std::move(rep)};
}

DynamicRanges select_dynamic_ranges(const Matrix& a, std::size_t m, RangeMode mode, double eps,
                                    const SpectrumStats& stats, std::uint64_t seed) {
    a.validate("select_dynamic_ranges input");
    if (m < 1) throw ArgumentError("select_dynamic_ranges: sketch size must be at least 1");

    DynamicRanges out;
    if (mode == RangeMode::data_driven) {
        // Measure the actual intermediates of a (dither-free) pipeline pass:
        // the sketch product and the least-squares solution against its
        // unquantized basis.
        const Matrix y = rangefinder(a, m, rng::derive_seed(seed, kTagSketch));
        out.r_q = max_abs(y);
        out.r_qprime = max_abs(matmul(pinv(y), a));
        return out;
    }

    if (!(eps > 0.0)) throw ArgumentError("theory-mode ranges need eps > 0");
    const double r_bound = stats.row_norm_bound;
    const double margin = std::sqrt(stats.gamma) - 1.0 - stats.t;
    if (!(margin > 0.0)) {
        throw ArgumentError("sketch aspect ratio too small for theory mode");
    }
    const double n = static_cast<double>(a.rows);
    const double log_arg = 16.0 * r_bound * r_bound * n * n * static_cast<double>(m) / eps;
    if (!(log_arg > 1.0)) {
        throw ArgumentError("theory-mode range formula degenerates: eps too large for this matrix");
    }
    out.r_q = r_bound * std::sqrt(2.0 * std::log(log_arg) / static_cast<double>(m));
    out.r_qprime = 2.0 * stats.kappa / margin;
    return out;
}

Matrix reconstruct(const Factorization& f) {
    Matrix out = f.algorithm == Algorithm::naive ? dequantize(f.l)
                                                 : matmul(dequantize(f.l), dequantize(f.r));
    if (f.alpha.has_value()) {
        const double alpha = *f.alpha;
        const double beta = f.beta.value_or(0.0);
        for (double& v : out.data) v = alpha * v + beta;
    }
    return out;
}

AffinePair normalize_shift(const Matrix& y, const Matrix& x) {
    if (!y.same_shape(x)) {
        throw ArgumentError("normalize_shift: shapes differ (" + std::to_string(y.rows) + "x" +
                            std::to_string(y.cols) + " vs " + std::to_string(x.rows) + "x" +
                            std::to_string(x.cols) + ")");
    }
    const double count = static_cast<double>(y.size());
    const double sum_y = entry_sum(y);
    const double sum_x = entry_sum(x);
    const double denom = dot(y, y) - sum_y * sum_y / count;
    if (denom <= 1e-14) {
        // Constant Y carries no signal to scale; shift to the mean of X.
        return AffinePair{0.0, sum_x / count};
    }
    AffinePair pair;
    pair.alpha = (dot(x, y) - sum_x * sum_y / count) / denom;
    pair.beta = (sum_x - pair.alpha * sum_y) / count;
    return pair;
}

BitThresholds bit_thresholds(const Matrix& a, std::size_t k, std::size_t m, double eps,
                             const SpectrumStats& stats, double c) {
    a.validate("bit_thresholds input");
    if (m < 1) throw ArgumentError("bit_thresholds: sketch size must be at least 1");
    if (!(eps > 0.0)) throw ArgumentError("bit_thresholds: eps must be positive");
    if (!(c > 0.0)) throw ArgumentError("bit_thresholds: the spectral constant must be positive");

    const detail::FullSvd full = detail::full_svd(a);
    const std::size_t r = detail::numerical_rank(full.sigma, kDefaultRankTolerance);
    if (r == 0) throw ArgumentError("bit_thresholds: matrix is numerically zero");
    if (k < 1 || k > r) {
        throw ArgumentError("bit_thresholds: k must lie in [1, rank=" + std::to_string(r) +
                            "], got " + std::to_string(k));
    }
    const double sigma_r = full.sigma(static_cast<Eigen::Index>(r - 1));
    const double sigma_k = full.sigma(static_cast<Eigen::Index>(k - 1));
    const double sigma_k1 = k < r ? full.sigma(static_cast<Eigen::Index>(k)) : 0.0;

    const double r_bound = stats.row_norm_bound;
    const double gamma = stats.gamma;
    const double t = stats.t;
    const double margin = std::sqrt(gamma) - 1.0 - t;
    if (!(margin > 0.0)) {
        throw ArgumentError("sketch aspect ratio too small for theory mode");
    }
    const double m_real = static_cast<double>(m);
    const double denom_b1 = gamma - 1.0 - 1.0 / m_real;
    if (!(denom_b1 > 0.0)) {
        throw ArgumentError("bit_thresholds: aspect ratio gamma must exceed 1 + 1/m");
    }

    const double n = static_cast<double>(a.rows);
    const double d = static_cast<double>(a.cols);
    const double log16 = std::log(16.0 * r_bound * r_bound * n * n * m_real / eps);
    if (!(log16 > 0.0)) {
        throw ArgumentError("bit_thresholds: eps too large for this matrix");
    }

    BitThresholds out;
    out.b1 = std::log2(2.0 * r_bound * stats.kappa_Ak * std::sqrt(2.0 * n) /
                           std::sqrt(eps * denom_b1) * std::sqrt(log16) +
                       1.0);

    const double spread = std::max(
        sigma_r, sigma_k - sigma_k1 * (std::sqrt(gamma) + 1.0 + t) / margin);
    out.b2 = std::log2(4.0 * c * r_bound / (spread * std::numbers::ln2) *
                           ((std::sqrt(gamma) + 1.0 + t / std::numbers::sqrt2) / margin) *
                           std::sqrt(2.0 * log16) +
                       1.0);

    out.bprime_min =
        std::log2(4.0 * r_bound * stats.kappa / margin * std::sqrt(n * d / eps) + 1.0);
    out.b_min = std::max(out.b1, out.b2);
    return out;
}

} // namespace lplr
