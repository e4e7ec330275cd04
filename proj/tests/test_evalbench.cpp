//
// test_evalbench.cpp — parity accounting, error metrics and the closed-form
// ceiling, the three Monte-Carlo verifiers, the 3-NN harness, the phantom
// generator, and the sweep driver.
//

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <vector>

#include "lplr/evalbench.hpp"
#include "lplr/matrix.hpp"
#include "lplr/rng.hpp"

using namespace lplr;

namespace {

Matrix random_matrix(std::size_t n, std::size_t d, std::uint64_t seed) {
    Matrix a(n, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) a(i, j) = rng::normal(seed, i, j);
    return a;
}

Matrix embedded_diag(std::size_t n, std::size_t d, const std::vector<double>& diag) {
    Matrix a(n, d);
    for (std::size_t i = 0; i < diag.size(); ++i) a(i, i) = diag[i];
    return a;
}

// Independent quadratic-time nearest-neighbor vote with the same tie rules:
// majority first, then smallest summed distance, then smallest label.
std::vector<int> reference_knn(const Matrix& train, const std::vector<int>& labels,
                               const Matrix& test, std::size_t k) {
    std::vector<int> predictions;
    const std::size_t votes = std::min(k, train.rows);
    for (std::size_t t = 0; t < test.rows; ++t) {
        std::vector<std::pair<double, std::size_t>> all(train.rows);
        for (std::size_t i = 0; i < train.rows; ++i) {
            double d2 = 0.0;
            for (std::size_t j = 0; j < train.cols; ++j) {
                const double diff = test(t, j) - train(i, j);
                d2 += diff * diff;
            }
            all[i] = {d2, i};
        }
        std::sort(all.begin(), all.end());
        std::map<int, std::pair<std::size_t, double>> tally;
        for (std::size_t v = 0; v < votes; ++v) {
            auto& entry = tally[labels[all[v].second]];
            entry.first += 1;
            entry.second += all[v].first;
        }
        int winner = tally.begin()->first;
        auto best = tally.begin()->second;
        for (const auto& [label, entry] : tally) {
            if (entry.first > best.first ||
                (entry.first == best.first && entry.second < best.second)) {
                winner = label;
                best = entry;
            }
        }
        predictions.push_back(winner);
    }
    return predictions;
}

} // namespace

TEST_CASE("parity sizes reproduce the frozen equal-budget reference grid") {
    // n = d = 1000, B = B' swept over the byte-aligned budgets, against the
    // one- and two-bit entrywise baselines.
    const std::size_t expected_1[] = {15, 17, 20, 25, 31, 41, 62};
    const std::size_t expected_2[] = {31, 35, 41, 50, 62, 83, 125};
    const int budgets[] = {32, 28, 24, 20, 16, 12, 8};
    for (int i = 0; i < 7; ++i) {
        CHECK(parity_sketch_size(1000, 1000, budgets[i], budgets[i], 1) == expected_1[i]);
        CHECK(parity_sketch_size(1000, 1000, budgets[i], budgets[i], 2) == expected_2[i]);
    }
    // Spot examples: equal-bits budgets at 8, 16, and 32 bits.
    CHECK(parity_sketch_size(1000, 1000, 8, 8, 1) == 62);
    CHECK(parity_sketch_size(1000, 1000, 16, 16, 2) == 62);
    CHECK(parity_sketch_size(1000, 1000, 32, 32, 1) == 15);
}

TEST_CASE("parity budgets satisfy the two-sided invariant on random tuples") {
    int valid = 0;
    for (std::uint64_t trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + static_cast<std::size_t>(rng::uniform(1, trial, 0) * 1999);
        const std::size_t d = 1 + static_cast<std::size_t>(rng::uniform(1, trial, 1) * 1999);
        const int b = 1 + static_cast<int>(rng::uniform(1, trial, 2) * 30.999);
        const int b2 = 1 + static_cast<int>(rng::uniform(1, trial, 3) * 30.999);
        const int bnq = 1 + static_cast<int>(rng::uniform(1, trial, 4) * 7.999);
        const std::size_t rank1_cost =
            static_cast<std::size_t>(b) * n + static_cast<std::size_t>(b2) * d;
        const std::size_t budget = static_cast<std::size_t>(bnq) * n * d;
        if (budget < rank1_cost) {
            CHECK_THROWS_AS((void)parity_sketch_size(n, d, b, b2, bnq), ArgumentError);
            continue;
        }
        const ParityBudget parity = parity_budget(n, d, b, b2, bnq);
        CHECK(parity.holds());
        CHECK(parity.factor_bits() <= parity.baseline_bits());
        const std::size_t next =
            static_cast<std::size_t>(b) * n * (parity.m + 1) +
            static_cast<std::size_t>(b2) * (parity.m + 1) * d;
        CHECK(parity.baseline_bits() < next);
        ++valid;
    }
    CHECK(valid > 500); // the sampler mostly draws fundable budgets
}

TEST_CASE("parity rejects an unfundable budget") {
    CHECK_THROWS_AS((void)parity_sketch_size(2, 2, 31, 31, 1), ArgumentError);
}

TEST_CASE("relative error metric") {
    const Matrix a = random_matrix(5, 4, 1);
    CHECK(relative_fro_error(a, a) == 0.0);
    CHECK(relative_fro_error(Matrix(5, 4), a) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(relative_fro_error(scale(a, 2.0), a) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS((void)relative_fro_error(a, Matrix(5, 4)), ArgumentError); // zero reference
    CHECK_THROWS_AS((void)relative_fro_error(a, random_matrix(4, 5, 2)), ArgumentError);
}

TEST_CASE("factorization error ceiling on a known spectrum") {
    // diag(3,2,1) in 10x10 at k=2, m=5: (1 + 2/2) * 1 + 0.01 = 2.01.
    const Matrix a = embedded_diag(10, 10, {3.0, 2.0, 1.0});
    CHECK(thm1_bound(a, 2, 5, 0.01) == doctest::Approx(2.01).epsilon(1e-12));

    // Growing the sketch can only lower the ceiling.
    CHECK(thm1_bound(a, 2, 10, 0.01) < thm1_bound(a, 2, 5, 0.01));

    // Exactly rank-k input: only the eps floor remains.
    const Matrix rank2 = embedded_diag(10, 10, {3.0, 2.0});
    CHECK(thm1_bound(rank2, 2, 5, 0.25) == doctest::Approx(0.25).epsilon(1e-10));

    CHECK_THROWS_AS((void)thm1_bound(a, 2, 3, 0.01), ArgumentError); // m <= k+1
}

TEST_CASE("inverse-covariance trace concentrates on the closed form") {
    const WishartCheck exact = verify_wishart_trace(2, 5, 100, 3);
    CHECK(exact.theory == 2.0); // 4 / (5 - 2 - 1)

    const WishartCheck mc = verify_wishart_trace(4, 20, 5000, 3);
    CHECK(mc.theory == doctest::Approx(16.0 / 15.0).epsilon(1e-15));
    CHECK(mc.rel_dev <= 0.05);

    const WishartCheck thin = verify_wishart_trace(1, 10, 3000, 4);
    CHECK(thin.theory == doctest::Approx(0.125).epsilon(1e-15));
    CHECK(thin.rel_dev <= 0.05);

    CHECK_THROWS_AS((void)verify_wishart_trace(5, 6, 100, 0), ArgumentError); // d < m+2
}

TEST_CASE("projection error equalization stays under its bound") {
    const EqualizationCheck check = verify_equalization(256, 32, 4, 1.0, 2000, 9);
    CHECK(check.bound ==
          doctest::Approx(1.0 / 225.0 + std::numbers::sqrt2 /
                                            std::sqrt(std::numbers::pi * std::numbers::e))
              .epsilon(1e-12));
    CHECK(check.mc_error <= check.bound + 3.0 * check.std_error);
    CHECK(check.pass);

    // At 16 bits the quantization term of the bound is negligible: the clip
    // term alone remains.
    const EqualizationCheck fine = verify_equalization(64, 8, 16, 1.0, 50, 9);
    const double clip_term =
        std::numbers::sqrt2 / std::sqrt(std::numbers::pi * std::numbers::e);
    CHECK(std::abs(fine.bound - clip_term) < 1e-8);

    // A zero vector satisfies the degenerate zero bound outright.
    const EqualizationCheck trivial = verify_equalization(64, 8, 4, 0.0, 10, 9);
    CHECK(trivial.pass);
    CHECK(trivial.mc_error == 0.0);
    CHECK(trivial.bound == 0.0);

    CHECK_THROWS_AS((void)verify_equalization(0, 8, 4, 1.0, 10, 9), ArgumentError);
    CHECK_THROWS_AS((void)verify_equalization(64, 8, 4, -1.0, 10, 9), ArgumentError);
}

TEST_CASE("sketched least squares with a quantized response is sandwiched") {
    const SketchedLsCheck check = verify_sketched_ls(60, 40, 30, 10, 4, 4, 200, 1);
    CHECK(check.lower > 0.0);
    CHECK(check.upper > check.lower);
    CHECK(check.pass_lower);
    CHECK(check.pass_upper);
    CHECK(check.lower <= check.mid_mean + 3.0 * check.mid_se);
    CHECK(check.mid_mean <= check.upper + 3.0 * check.mid_se);

    CHECK_THROWS_AS((void)verify_sketched_ls(60, 40, 30, 10, 50, 4, 10, 1), ArgumentError);
    CHECK_THROWS_AS((void)verify_sketched_ls(60, 40, 30, 5, 4, 4, 10, 1), ArgumentError);
    CHECK_THROWS_AS((void)verify_sketched_ls(11, 40, 30, 10, 4, 4, 10, 1), ArgumentError);
}

TEST_CASE("nearest-neighbor vote on hand instances") {
    // A test point sitting on a training point with a locally unique label.
    const Matrix train(4, 1, {0.0, 5.0, 5.2, 4.8});
    const std::vector<int> labels = {3, 1, 1, 1};
    const Matrix probe(1, 1, {0.01});
    CHECK(knn_classify(train, labels, probe, 1).predicted[0] == 3);

    // Majority: two of the three nearest agree.
    const Matrix St(3, 1, {0.0, 0.2, 10.0});
    const std::vector<int> ml = {4, 4, 9};
    CHECK(knn_classify(St, ml, Matrix(1, 1, {0.1}), 3).predicted[0] == 4);

    // Vote tie across three labels: the smallest summed distance wins.
    const Matrix three(3, 1, {0.0, 10.0, 20.0});
    const std::vector<int> tl = {0, 1, 2};
    CHECK(knn_classify(three, tl, Matrix(1, 1, {10.0}), 3).predicted[0] == 1);

    // Equal votes and equal distances: the smallest label wins.
    const Matrix pair(2, 1, {-1.0, 1.0});
    CHECK(knn_classify(pair, {7, 5}, Matrix(1, 1, {0.0}), 2).predicted[0] == 5);
}

TEST_CASE("separated clusters classify perfectly") {
    // Two ten-point clusters at x = +-10 with unit jitter.
    Matrix train(20, 2);
    std::vector<int> labels(20);
    Matrix test(8, 2);
    std::vector<int> truth(8);
    for (std::size_t i = 0; i < 20; ++i) {
        const double center = i < 10 ? -10.0 : 10.0;
        labels[i] = i < 10 ? 0 : 1;
        train(i, 0) = center + 0.5 * rng::normal(70, i, 0);
        train(i, 1) = 0.5 * rng::normal(70, i, 1);
    }
    for (std::size_t i = 0; i < 8; ++i) {
        const double center = i < 4 ? -10.0 : 10.0;
        truth[i] = i < 4 ? 0 : 1;
        test(i, 0) = center + 0.5 * rng::normal(71, i, 0);
        test(i, 1) = 0.5 * rng::normal(71, i, 1);
    }
    const KnnResult result = knn_classify(train, labels, test, 3, &truth);
    CHECK(result.scored);
    CHECK(result.accuracy == 1.0);
    CHECK(result.weighted_f1 == 1.0);
    REQUIRE(result.per_class.size() == 2);
    CHECK(result.per_class[0].precision == 1.0);
    CHECK(result.per_class[0].recall == 1.0);
}

TEST_CASE("nearest-neighbor harness validates its inputs") {
    const Matrix train(2, 2, {0, 0, 1, 1});
    CHECK_THROWS_AS((void)knn_classify(train, {1}, train, 3), ArgumentError);      // label count
    CHECK_THROWS_AS((void)knn_classify(train, {1, 2}, Matrix(1, 3), 3), ArgumentError); // width
    CHECK_THROWS_AS((void)knn_classify(train, {1, 2}, train, 0), ArgumentError);   // k = 0
    std::vector<int> short_truth = {1};
    CHECK_THROWS_AS((void)knn_classify(train, {1, 2}, train, 3, &short_truth), ArgumentError);
}

TEST_CASE("nearest-neighbor agrees with the quadratic reference") {
    for (std::uint64_t trial = 0; trial < 100; ++trial) {
        const std::size_t rows = 4 + static_cast<std::size_t>(rng::uniform(80, trial, 0) * 26);
        const std::size_t cols = 1 + static_cast<std::size_t>(rng::uniform(80, trial, 1) * 4);
        const std::size_t tests = 1 + static_cast<std::size_t>(rng::uniform(80, trial, 2) * 9);
        Matrix train(rows, cols);
        std::vector<int> labels(rows);
        for (std::size_t i = 0; i < rows; ++i) {
            labels[i] = static_cast<int>(rng::uniform(81, trial, i) * 3.0);
            for (std::size_t j = 0; j < cols; ++j)
                train(i, j) = rng::normal(82 + trial, i, j);
        }
        Matrix test(tests, cols);
        std::vector<int> truth(tests);
        for (std::size_t i = 0; i < tests; ++i) {
            truth[i] = static_cast<int>(rng::uniform(83, trial, i) * 3.0);
            for (std::size_t j = 0; j < cols; ++j)
                test(i, j) = rng::normal(84 + trial, i, j);
        }
        const KnnResult result = knn_classify(train, labels, test, 3, &truth);
        CHECK(result.predicted == reference_knn(train, labels, test, 3));
        CHECK(result.weighted_f1 >= 0.0);
        CHECK(result.weighted_f1 <= 1.0);
        CHECK(result.accuracy >= 0.0);
        CHECK(result.accuracy <= 1.0);
    }
}

TEST_CASE("degenerate single-class scoring gives accuracy = weighted F1 = 1") {
    const Matrix train(3, 1, {0.0, 1.0, 2.0});
    const std::vector<int> labels = {7, 7, 7};
    const std::vector<int> truth = {7, 7};
    const KnnResult result = knn_classify(train, labels, Matrix(2, 1, {0.5, 1.5}), 3, &truth);
    CHECK(result.accuracy == 1.0);
    CHECK(result.weighted_f1 == 1.0);
}

TEST_CASE("phantom geometry") {
    const std::size_t size = 100;
    const Matrix image = shepp_logan(size);
    CHECK(image.rows == size);
    CHECK(image.cols == size);

    // Corners lie outside the head ellipse.
    CHECK(image(0, 0) == 0.0);
    CHECK(image(0, size - 1) == 0.0);
    CHECK(image(size - 1, 0) == 0.0);
    CHECK(image(size - 1, size - 1) == 0.0);

    // The center pixel accumulates the head and inner-tissue intensities.
    CHECK(image(size / 2, size / 2) == doctest::Approx(0.2).epsilon(1e-12));

    // All values stay inside [0, 1].
    for (double v : image.data) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }

    // Deterministic.
    CHECK(frobenius_distance(shepp_logan(size), image) == 0.0);

    CHECK_THROWS_AS((void)shepp_logan(15), ArgumentError);
}

TEST_CASE("phantom is mirror symmetric away from the asymmetric inclusions") {
    // Outside the bands covered by the two tilted lateral ellipses and the
    // two offset bottom inclusions, every ellipse is centered on the vertical
    // axis with no rotation, so the image mirrors exactly in x.
    const std::size_t size = 100;
    const Matrix image = shepp_logan(size);
    const double step = 2.0 / static_cast<double>(size - 1);
    double worst = 0.0;
    std::size_t checked = 0;
    for (std::size_t i = 0; i < size; ++i) {
        const double y = 1.0 - static_cast<double>(i) * step;
        if (!(y > 0.45 || y < -0.75)) continue;
        for (std::size_t j = 0; j < size; ++j) {
            worst = std::max(worst, std::abs(image(i, j) - image(i, size - 1 - j)));
            ++checked;
        }
    }
    CHECK(checked > 0);
    CHECK(worst == 0.0);
}

TEST_CASE("a single sweep cell reproduces a direct compression call") {
    const Matrix a = random_matrix(30, 24, 10);
    SweepBudget budget;
    budget.bits = 6;
    budget.bits_second = 6;
    budget.sketch_size = 4;

    const SweepResult swept = sweep(a, {Algorithm::lplr}, {budget}, {5});
    REQUIRE(swept.rows.size() == 1);
    REQUIRE(swept.summaries.size() == 1);

    CompressionConfig direct;
    direct.algorithm = Algorithm::lplr;
    direct.sketch_size = 4;
    direct.bits = 6;
    direct.bits_second = 6;
    direct.seed = 5;
    const CompressionResult reference = compress(a, direct);
    CHECK(swept.rows[0].report.relative_error == reference.report.relative_error);
    CHECK(swept.summaries[0].mean_relative_error == reference.report.relative_error);
    CHECK(swept.summaries[0].stddev_relative_error == 0.0);
    CHECK(swept.rows[0].sketch_size == 4);
}

TEST_CASE("sweep resolves parity budgets and keeps deterministic cells flat") {
    const Matrix a = random_matrix(64, 64, 11);
    SweepBudget budget; // bits 8/8 against a 2-bit baseline
    budget.bits_naive = 2;
    const std::size_t expected_m = parity_sketch_size(64, 64, 8, 8, 2);

    CompressionConfig base;
    base.rounding = Rounding::nearest;
    const SweepResult swept =
        sweep(a, {Algorithm::dsvd, Algorithm::naive}, {budget}, {0, 1, 2}, base);
    REQUIRE(swept.rows.size() == 6);
    REQUIRE(swept.summaries.size() == 2);
    for (const SweepSummary& summary : swept.summaries) {
        CHECK(summary.sketch_size == expected_m);
        CHECK(summary.seeds == 3);
        // Without dither neither algorithm depends on the seed.
        CHECK(summary.stddev_relative_error == 0.0);
    }

    CHECK_THROWS_AS((void)sweep(a, {}, {budget}, {0}), ArgumentError);
}

TEST_CASE("the equal-bits grid on the phantom ranks the algorithms") {
    // At the one-bit-baseline budget with 8-bit factors, the svd-seeded
    // factorization beats the sketched one, and both beat entrywise rounding.
    const Matrix image = shepp_logan(400);
    SweepBudget budget; // defaults: B = B' = 8, one-bit baseline, parity m
    const SweepResult swept = sweep(
        image, {Algorithm::lplr_svd, Algorithm::lplr, Algorithm::naive}, {budget}, {0});
    REQUIRE(swept.summaries.size() == 3);
    const double lsvd_err = swept.summaries[0].mean_relative_error;
    const double lplr_err = swept.summaries[1].mean_relative_error;
    const double naive_err = swept.summaries[2].mean_relative_error;
    CHECK(lsvd_err < lplr_err);
    CHECK(lplr_err < naive_err);
}
