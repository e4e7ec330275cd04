//
// test_compress.cpp — the four compression algorithms, dynamic-range
// selection, the affine fit, bit-budget thresholds, retry policy, and the
// payload accounting and determinism contracts.
//

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "lplr/compress.hpp"
#include "lplr/evalbench.hpp"
#include "lplr/io.hpp"
#include "lplr/linalg.hpp"
#include "lplr/matrix.hpp"
#include "lplr/rng.hpp"
#include "lplr/sketch.hpp"

using namespace lplr;

namespace {

Matrix random_matrix(std::size_t n, std::size_t d, std::uint64_t seed) {
    Matrix a(n, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) a(i, j) = rng::normal(seed, i, j);
    return a;
}

Matrix random_rank_k(std::size_t n, std::size_t d, std::size_t k, std::uint64_t seed) {
    return matmul(random_matrix(n, k, seed), random_matrix(k, d, seed ^ 0x9e3779b9ULL));
}

Matrix embedded_diag(std::size_t n, std::size_t d, const std::vector<double>& diag) {
    Matrix a(n, d);
    for (std::size_t i = 0; i < diag.size(); ++i) a(i, i) = diag[i];
    return a;
}

double rel_error(const Matrix& approx, const Matrix& a) {
    return frobenius_distance(approx, a) / frobenius_norm(a);
}

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / name;
}

std::vector<char> file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

} // namespace

TEST_CASE("config validation rejects inconsistent sizing") {
    CompressionConfig cfg;
    cfg.algorithm = Algorithm::lplr;
    cfg.sketch_size = 0;
    CHECK_THROWS_AS(cfg.validate(), ArgumentError); // lplr needs m

    cfg.sketch_size = 4;
    cfg.target_rank = 3;
    CHECK_THROWS_AS(cfg.validate(), ArgumentError); // both set

    cfg.target_rank = 0;
    cfg.bits = 0;
    CHECK_THROWS_AS(cfg.validate(), ArgumentError); // bits out of range
    cfg.bits = 32;
    CHECK_THROWS_AS(cfg.validate(), ArgumentError);
    cfg.bits = 8;
    CHECK_NOTHROW(cfg.validate());

    CompressionConfig svd_cfg;
    svd_cfg.algorithm = Algorithm::dsvd;
    svd_cfg.sketch_size = 4; // dsvd takes target_rank instead
    svd_cfg.target_rank = 0;
    CHECK_THROWS_AS(svd_cfg.validate(), ArgumentError);
    svd_cfg.sketch_size = 0;
    svd_cfg.target_rank = 2;
    CHECK_NOTHROW(svd_cfg.validate());
}

TEST_CASE("algorithm names round-trip and accept the short aliases") {
    CHECK(algorithm_from_name("lplr") == Algorithm::lplr);
    CHECK(algorithm_from_name("lsvd") == Algorithm::lplr_svd);
    CHECK(algorithm_from_name("lplr_svd") == Algorithm::lplr_svd);
    CHECK(algorithm_from_name("dsvd") == Algorithm::dsvd);
    CHECK(algorithm_from_name("nq") == Algorithm::naive);
    CHECK(algorithm_from_name("naive") == Algorithm::naive);
    CHECK_THROWS_AS((void)algorithm_from_name("zip"), ArgumentError);
    CHECK(std::string(algorithm_name(Algorithm::dsvd)) == "dsvd");
}

TEST_CASE("a zero matrix compresses exactly via the zero-range short-circuit") {
    CompressionConfig cfg;
    cfg.algorithm = Algorithm::lplr;
    cfg.sketch_size = 3;
    const CompressionResult res = lplr::lplr(Matrix(12, 9), cfg);
    CHECK(res.report.exact);
    CHECK(res.report.relative_error == 0.0);
    CHECK(max_abs(reconstruct(res.factorization)) == 0.0);
    CHECK(res.factorization.l.all_zero);
}

TEST_CASE("low-rank inputs are recovered within the quantization floor") {
    for (std::uint64_t seed = 0; seed < 2; ++seed) {
        const Matrix a = random_rank_k(200, 200, 5, 100 + seed);
        CompressionConfig cfg;
        cfg.algorithm = Algorithm::lplr;
        cfg.sketch_size = 9;
        cfg.bits = 16;
        cfg.bits_second = 16;
        cfg.seed = seed;
        const CompressionResult res = lplr::lplr(a, cfg);
        CHECK(res.report.relative_error <= 0.01);
        CHECK(rel_error(reconstruct(res.factorization), a) ==
              doctest::Approx(res.report.relative_error).epsilon(1e-12));
    }
}

TEST_CASE("exact-rank recovery across random instances") {
    // Exactly rank-k inputs with m >= k+2 and 20-bit budgets reconstruct to
    // within 1e-3 relative error.
    for (std::uint64_t trial = 0; trial < 20; ++trial) {
        const std::size_t k = 1 + trial % 6;
        const std::size_t m = k + 2 + trial % 4;
        const Matrix a = random_rank_k(60, 50, k, 700 + trial);
        CompressionConfig cfg;
        cfg.algorithm = Algorithm::lplr;
        cfg.sketch_size = m;
        cfg.bits = 20;
        cfg.bits_second = 20;
        cfg.seed = trial;
        const CompressionResult res = lplr::lplr(a, cfg);
        CHECK(res.report.relative_error <= 1e-3);
    }
}

TEST_CASE("factor shapes and payload accounting are exact for every algorithm") {
    const Matrix a = random_matrix(20, 15, 9);

    CompressionConfig cfg;
    cfg.algorithm = Algorithm::lplr;
    cfg.sketch_size = 7;
    cfg.bits = 5;
    cfg.bits_second = 9;
    const CompressionResult lp = lplr::lplr(a, cfg);
    CHECK(lp.factorization.l.rows == 20);
    CHECK(lp.factorization.l.cols == 7);
    CHECK(lp.factorization.r.rows == 7);
    CHECK(lp.factorization.r.cols == 15);
    CHECK(lp.report.payload_bits == 5u * 20 * 7 + 9u * 7 * 15);
    CHECK(lp.report.source_bits == 64u * 20 * 15);

    CompressionConfig scfg;
    scfg.algorithm = Algorithm::lplr_svd;
    scfg.target_rank = 4;
    scfg.bits = 6;
    scfg.bits_second = 7;
    const CompressionResult ls = lplr_svd(a, scfg);
    CHECK(ls.factorization.l.cols == 4);
    CHECK(ls.factorization.r.rows == 4);
    CHECK(ls.report.payload_bits == 6u * 20 * 4 + 7u * 4 * 15);

    scfg.algorithm = Algorithm::dsvd;
    const CompressionResult ds = dsvd(a, scfg);
    CHECK(ds.report.payload_bits == 6u * 20 * 4 + 7u * 4 * 15);

    // Affine-corrected runs carry two extra doubles.
    cfg.normalize_shift = true;
    const CompressionResult shifted = lplr::lplr(a, cfg);
    CHECK(shifted.report.payload_bits == 5u * 20 * 7 + 9u * 7 * 15 + 128);
}

TEST_CASE("svd-seeded factorization of a known spectrum") {
    const Matrix a = embedded_diag(10, 10, {3.0, 2.0, 1.0});
    CompressionConfig cfg;
    cfg.algorithm = Algorithm::lplr_svd;
    cfg.target_rank = 3;
    cfg.bits = 20;
    cfg.bits_second = 20;
    cfg.lsvd_rotation = false;
    const CompressionResult base = lplr_svd(a, cfg);
    CHECK(base.report.relative_error <= 1e-4);

    cfg.lsvd_rotation = true;
    const CompressionResult rotated = lplr_svd(a, cfg);
    CHECK(rotated.factorization.l.cols == 3);
    CHECK(rotated.factorization.r.rows == 3);
    CHECK(rotated.report.relative_error <= 1e-3);

    CHECK_THROWS_AS((void)lplr_svd(a, [] {
                        CompressionConfig bad;
                        bad.algorithm = Algorithm::lplr_svd;
                        bad.target_rank = 11; // exceeds min(n, d)
                        return bad;
                    }()),
                    ArgumentError);
}

TEST_CASE("direct svd quantization approaches the best rank-k error") {
    const Matrix a = random_matrix(40, 30, 21);
    const RankKResult best = best_rank_k(a, 3);
    const double oracle = std::sqrt(best.tail_energy) / frobenius_norm(a);

    CompressionConfig cfg;
    cfg.algorithm = Algorithm::dsvd;
    cfg.target_rank = 3;
    cfg.bits = 30;
    cfg.bits_second = 30;
    const CompressionResult res = dsvd(a, cfg);
    CHECK(std::abs(res.report.relative_error - oracle) <= 1e-3);

    // At full rank the only error left is the (30-bit) quantization floor.
    cfg.target_rank = 30;
    CHECK(dsvd(a, cfg).report.relative_error <= 1e-6);
}

TEST_CASE("quantized projection beats quantizing the raw right factor") {
    // With the same quantized basis L, the same second-stage quantizer spec,
    // and the same dither seed, projecting A onto L's span before quantizing
    // is no worse than quantizing V_k^T directly, up to the quantizer's own
    // contribution 2 sqrt(m d) Delta' sigma_max(L).
    for (std::uint64_t trial = 0; trial < 50; ++trial) {
        const std::size_t n = 30, d = 25, k = 4;
        const Matrix a = random_matrix(n, d, 5000 + trial);
        const SvdResult s = svd(a);
        REQUIRE(s.rank >= k);

        Matrix scaled_u(n, k);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < k; ++j)
                scaled_u(i, j) = s.u(i, j) * s.singular_values[j];
        Matrix vt(k, d);
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < d; ++j) vt(i, j) = s.v(j, i);

        const QuantizedMatrix l =
            quantize_matrix(scaled_u, QuantizerSpec(max_abs(scaled_u), 8), trial);
        const Matrix basis = dequantize(l);

        const Matrix projected = matmul(pinv(basis), a);
        const double range = std::max(max_abs(projected), max_abs(vt));
        const QuantizerSpec second(range, 30);
        const std::uint64_t dither_seed = 777 + trial;
        const Matrix via_projection =
            matmul(basis, dequantize(quantize_matrix(projected, second, dither_seed)));
        const Matrix via_raw = matmul(basis, dequantize(quantize_matrix(vt, second, dither_seed)));

        const double sigma_max_l = svd(basis).singular_values[0];
        const double tolerance = 2.0 * std::sqrt(static_cast<double>(k * d)) *
                                     second.resolution() * sigma_max_l +
                                 1e-9;
        CHECK(frobenius_distance(via_projection, a) <=
              frobenius_distance(via_raw, a) + tolerance);
    }
}

TEST_CASE("entrywise baseline rounds onto the occupied value range") {
    // A grid-valued matrix whose values match the quantization grid exactly
    // survives the baseline untouched under both rounding modes.
    Matrix grid(2, 4);
    const QuantizerSpec probe(1.0, 2); // grid -1, -1/3, 1/3, 1
    for (std::size_t j = 0; j < 4; ++j) {
        grid(0, j) = probe.grid_value(static_cast<std::uint32_t>(j));
        grid(1, 3 - j) = probe.grid_value(static_cast<std::uint32_t>(j));
    }
    for (Rounding mode : {Rounding::nearest, Rounding::dithered}) {
        const NaiveResult res = naive_quant(grid, 2, 11, mode);
        CHECK(res.report.exact);
        CHECK(res.report.relative_error == 0.0);
        CHECK(res.shift == 0.0); // symmetric data keeps the grid centered
    }

    // Payload is exactly B_nq bits per entry.
    const NaiveResult res = naive_quant(grid, 2, 11);
    CHECK(res.report.payload_bits == 2u * grid.size());

    // Constant matrices short-circuit to the exact marker.
    const NaiveResult flat = naive_quant(Matrix(3, 3), 4, 0);
    CHECK(flat.report.exact);
    CHECK(flat.quantized.all_zero);
}

TEST_CASE("entrywise baseline centers an asymmetric value range") {
    // Data in [0, 1]: the grid spans exactly that interval, so the worst-case
    // nearest-rounding error is half a step of a 2^B-point grid over [0, 1].
    Matrix a(40, 40);
    for (std::size_t i = 0; i < 40; ++i)
        for (std::size_t j = 0; j < 40; ++j) a(i, j) = rng::uniform(31, i, j);
    a(0, 0) = 0.0;
    a(1, 1) = 1.0;

    CompressionConfig cfg;
    cfg.algorithm = Algorithm::naive;
    cfg.bits = 8;
    cfg.rounding = Rounding::nearest; // the config default is the dithered factor quantizer
    const CompressionResult res = compress(a, cfg);
    REQUIRE(res.factorization.alpha.has_value());
    CHECK(*res.factorization.alpha == 1.0);
    CHECK(*res.factorization.beta == doctest::Approx(0.5).epsilon(1e-12));

    const Matrix recon = reconstruct(res.factorization);
    const double step = 1.0 / 255.0;
    for (std::size_t idx = 0; idx < a.data.size(); ++idx)
        CHECK(std::abs(recon.data[idx] - a.data[idx]) <= step / 2.0 * (1.0 + 1e-12));

    // One-bit baseline on [0, 1] data keeps only the endpoints.
    cfg.bits = 1;
    const Matrix one_bit = reconstruct(compress(a, cfg).factorization);
    for (double v : one_bit.data) CHECK((v == doctest::Approx(0.0) || v == doctest::Approx(1.0)));
}

TEST_CASE("dispatching compressor applies the affine fit on request") {
    const Matrix a = random_matrix(25, 20, 77);
    CompressionConfig cfg;
    cfg.algorithm = Algorithm::lplr;
    cfg.sketch_size = 5;
    cfg.bits = 4;
    cfg.bits_second = 4;
    cfg.normalize_shift = true;
    const CompressionResult shifted = compress(a, cfg);
    REQUIRE(shifted.factorization.alpha.has_value());

    cfg.normalize_shift = false;
    const CompressionResult plain = compress(a, cfg);
    CHECK_FALSE(plain.factorization.alpha.has_value());
    // The fitted correction can only lower the Frobenius error.
    CHECK(shifted.report.relative_error <= plain.report.relative_error + 1e-12);
}

TEST_CASE("normalize_shift closed form") {
    const Matrix x = random_matrix(6, 5, 3);

    // Y = X: identity correction.
    const AffinePair same = normalize_shift(x, x);
    CHECK(same.alpha == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(same.beta == doctest::Approx(0.0).epsilon(1e-10));

    // Y = 2X + 3: inverting the affine map.
    Matrix y = x;
    for (double& v : y.data) v = 2.0 * v + 3.0;
    const AffinePair inv = normalize_shift(y, x);
    CHECK(inv.alpha == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(inv.beta == doctest::Approx(-1.5).epsilon(1e-10));

    // Constant Y carries no scale information.
    Matrix flat(6, 5);
    for (double& v : flat.data) v = 4.0;
    const AffinePair degenerate = normalize_shift(flat, x);
    CHECK(degenerate.alpha == 0.0);
    CHECK(degenerate.beta == doctest::Approx(entry_sum(x) / 30.0).epsilon(1e-12));

    CHECK_THROWS_AS((void)normalize_shift(x, Matrix(5, 6)), ArgumentError);

    // Optimality: no perturbed pair does better.
    const Matrix target = random_matrix(6, 5, 4);
    const AffinePair best = normalize_shift(x, target);
    auto objective = [&](double alpha, double beta) {
        double sum = 0.0;
        for (std::size_t idx = 0; idx < x.data.size(); ++idx) {
            const double diff = alpha * x.data[idx] + beta - target.data[idx];
            sum += diff * diff;
        }
        return sum;
    };
    const double best_val = objective(best.alpha, best.beta);
    for (std::uint64_t trial = 0; trial < 100; ++trial) {
        const double da = 0.1 * rng::normal(600, trial, 0);
        const double db = 0.1 * rng::normal(600, trial, 1);
        CHECK(best_val <= objective(best.alpha + da, best.beta + db) + 1e-9);
    }
}

TEST_CASE("data-driven dynamic ranges never saturate the pipeline") {
    const Matrix a = random_matrix(40, 30, 55);
    const SpectrumStats stats; // unused in data-driven mode
    const DynamicRanges ranges = select_dynamic_ranges(a, 6, RangeMode::data_driven, 0.1, stats, 5);
    CHECK(ranges.r_q > 0.0);
    CHECK(ranges.r_qprime > 0.0);

    // The full pipeline at those measured ranges runs without retries.
    CompressionConfig cfg;
    cfg.algorithm = Algorithm::lplr;
    cfg.sketch_size = 6;
    cfg.seed = 5;
    const CompressionResult res = lplr::lplr(a, cfg);
    CHECK(res.report.retry_count == 0);
    CHECK(res.report.saturation_log.empty());
}

TEST_CASE("theory-mode dynamic ranges match the closed forms") {
    // Identity input: unit row norms, unit spectrum, kappa = 1.
    const Matrix eye = Matrix::identity(400);
    const SpectrumStats stats = spectrum_stats(eye, 1, 25, 0.1);
    const DynamicRanges ranges = select_dynamic_ranges(eye, 25, RangeMode::theory, 0.1, stats);
    CHECK(ranges.r_q == doctest::Approx(1.2736397837479165).epsilon(1e-12));
    CHECK(ranges.r_qprime == doctest::Approx(0.9851923657129096).epsilon(1e-12));

    CHECK_THROWS_AS(
        (void)select_dynamic_ranges(eye, 0, RangeMode::data_driven, 0.1, stats), ArgumentError);
    CHECK_THROWS_AS(
        (void)select_dynamic_ranges(eye, 25, RangeMode::theory, 0.0, stats), ArgumentError);
}

TEST_CASE("pinned ranges that are too tight exhaust the retry budget") {
    // An eps large enough to shrink the pinned range below the sketch's
    // actual max entry makes every attempt saturate; the compressor must
    // retry with fresh sketches, log each failure, and finally raise.
    const Matrix eye = Matrix::identity(200);
    CompressionConfig cfg;
    cfg.algorithm = Algorithm::lplr;
    cfg.sketch_size = 5;
    cfg.bits = 8;
    cfg.bits_second = 8;
    cfg.range_mode = RangeMode::theory;
    cfg.eps = 3.0e6;
    cfg.max_retries = 2;
    try {
        (void)lplr::lplr(eye, cfg);
        FAIL("expected saturation to persist");
    } catch (const SaturationError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("3 attempts") != std::string::npos);
    }
}

TEST_CASE("bit thresholds match an independent evaluation and move sensibly") {
    const Matrix a = embedded_diag(100, 100, {6.0, 5.0, 4.0, 3.0, 2.0, 1.0});
    const SpectrumStats stats = spectrum_stats(a, 5, 10, 0.1);
    const BitThresholds th = bit_thresholds(a, 5, 10, 0.1, stats);
    CHECK(th.b1 == doctest::Approx(11.24363703875614).epsilon(1e-9));
    CHECK(th.b2 == doctest::Approx(11.223944418260967).epsilon(1e-9));
    CHECK(th.bprime_min == doctest::Approx(16.499413193037533).epsilon(1e-9));
    CHECK(th.b_min == doctest::Approx(std::max(th.b1, th.b2)).epsilon(1e-15));

    // Tighter eps demands more bits.
    const SpectrumStats tight_stats = spectrum_stats(a, 5, 10, 0.01);
    const BitThresholds tight = bit_thresholds(a, 5, 10, 0.01, tight_stats);
    CHECK(tight.b1 > th.b1);
    CHECK(tight.bprime_min > th.bprime_min);

    // k = rank: the spread floor falls back to sigma_r.
    const SpectrumStats full_stats = spectrum_stats(a, 6, 10, 0.1);
    CHECK_NOTHROW((void)bit_thresholds(a, 6, 10, 0.1, full_stats));
    CHECK_THROWS_AS((void)bit_thresholds(a, 7, 10, 0.1, full_stats), ArgumentError);
}

TEST_CASE("the closed-form ceiling dominates the measured mean error") {
    // Rank-deficient input: the expected squared factorization error of the
    // sketched pipeline stays below (1 + k/(m-k-1)) tail + eps once eps
    // absorbs the measured quantization floor.
    const Matrix a = random_rank_k(120, 120, 5, 1234);
    CompressionConfig cfg;
    cfg.algorithm = Algorithm::lplr;
    cfg.sketch_size = 10;
    cfg.bits = 20;
    cfg.bits_second = 20;

    double mean_sq = 0.0;
    const int seeds = 50;
    for (int s = 0; s < seeds; ++s) {
        cfg.seed = static_cast<std::uint64_t>(s);
        const CompressionResult res = lplr::lplr(a, cfg);
        const double abs_err = res.report.relative_error * frobenius_norm(a);
        mean_sq += abs_err * abs_err;
    }
    mean_sq /= seeds;

    const double bound = thm1_bound(a, 5, 10, 2.0 * mean_sq);
    CHECK(mean_sq <= bound);
}

TEST_CASE("identical inputs and configuration produce identical factorization bytes") {
    const Matrix a = random_matrix(18, 14, 2025);
    CompressionConfig cfg;
    cfg.algorithm = Algorithm::lplr;
    cfg.sketch_size = 4;
    cfg.bits = 6;
    cfg.bits_second = 5;
    cfg.seed = 31;
    cfg.normalize_shift = true;

    const CompressionResult first = compress(a, cfg);
    const CompressionResult second = compress(a, cfg);
    CHECK(first.factorization.l.codes == second.factorization.l.codes);
    CHECK(first.factorization.r.codes == second.factorization.r.codes);
    CHECK(first.factorization.l.spec.dynamic_range == second.factorization.l.spec.dynamic_range);

    const auto path_a = temp_file("det_a.lplr");
    const auto path_b = temp_file("det_b.lplr");
    save_factorization(path_a.string(), first.factorization);
    save_factorization(path_b.string(), second.factorization);
    CHECK(file_bytes(path_a) == file_bytes(path_b));
    std::filesystem::remove(path_a);
    std::filesystem::remove(path_b);

    // A different seed changes the sketch and with it the codes.
    cfg.seed = 32;
    const CompressionResult third = compress(a, cfg);
    CHECK(first.factorization.l.codes != third.factorization.l.codes);
}

TEST_CASE("reconstruct applies the affine correction after the product") {
    QuantizedMatrix l;
    l.rows = 2;
    l.cols = 1;
    l.spec = QuantizerSpec(1.0, 1); // grid {-1, +1}
    l.codes = {1, 0};               // values +1, -1
    QuantizedMatrix r;
    r.rows = 1;
    r.cols = 2;
    r.spec = QuantizerSpec(2.0, 1); // grid {-2, +2}
    r.codes = {1, 1};               // values +2, +2

    Factorization f;
    f.l = l;
    f.r = r;
    f.algorithm = Algorithm::lplr;
    const Matrix plain = reconstruct(f);
    CHECK(plain(0, 0) == 2.0);
    CHECK(plain(1, 1) == -2.0);

    f.alpha = 0.5;
    f.beta = 3.0;
    const Matrix affine = reconstruct(f);
    CHECK(affine(0, 0) == 4.0);  // 0.5 * 2 + 3
    CHECK(affine(1, 1) == 2.0);  // 0.5 * -2 + 3
}
