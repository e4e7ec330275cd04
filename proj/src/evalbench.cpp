#include "lplr/evalbench.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "eigen_support.hpp"
#include "lplr/linalg.hpp"
#include "lplr/quantize.hpp"
#include "lplr/rng.hpp"
#include "lplr/sketch.hpp"

namespace lplr {

// ---------------------------------------------------------------------------
// Parity
// ---------------------------------------------------------------------------

std::size_t ParityBudget::factor_bits() const {
    return static_cast<std::size_t>(bits) * n * m + static_cast<std::size_t>(bits_second) * m * d;
}

std::size_t ParityBudget::baseline_bits() const {
    return static_cast<std::size_t>(bits_naive) * n * d;
}

bool ParityBudget::holds() const {
    const std::size_t at_next = static_cast<std::size_t>(bits) * n * (m + 1) +
                                static_cast<std::size_t>(bits_second) * (m + 1) * d;
    return factor_bits() <= baseline_bits() && baseline_bits() < at_next;
}

std::size_t parity_sketch_size(std::size_t n, std::size_t d, int bits, int bits_second,
                               int bits_naive) {
    if (n < 1 || d < 1 || bits < 1 || bits_second < 1 || bits_naive < 1) {
        throw ArgumentError("parity_sketch_size: all dimensions and bit budgets must be >= 1");
    }
    const std::size_t numerator = static_cast<std::size_t>(bits_naive) * n * d;
    const std::size_t denominator =
        static_cast<std::size_t>(bits) * n + static_cast<std::size_t>(bits_second) * d;
    const std::size_t m = numerator / denominator;
    if (m == 0) {
        throw ArgumentError("parity_sketch_size: budget too small for rank-1 factors (" +
                            std::to_string(numerator) + " bits cannot fund " +
                            std::to_string(denominator) + ")");
    }
    return m;
}

ParityBudget parity_budget(std::size_t n, std::size_t d, int bits, int bits_second,
                           int bits_naive) {
    ParityBudget budget;
    budget.n = n;
    budget.d = d;
    budget.bits = bits;
    budget.bits_second = bits_second;
    budget.bits_naive = bits_naive;
    budget.m = parity_sketch_size(n, d, bits, bits_second, bits_naive);
    return budget;
}

// ---------------------------------------------------------------------------
// Metrics and bounds
// ---------------------------------------------------------------------------

double relative_fro_error(const Matrix& ahat, const Matrix& a) {
    if (!ahat.same_shape(a)) {
        throw ArgumentError("relative_fro_error: shapes differ (" + std::to_string(ahat.rows) +
                            "x" + std::to_string(ahat.cols) + " vs " + std::to_string(a.rows) +
                            "x" + std::to_string(a.cols) + ")");
    }
    const double norm = frobenius_norm(a);
    if (norm == 0.0) {
        throw ArgumentError("relative_fro_error: reference matrix is zero");
    }
    return frobenius_distance(ahat, a) / norm;
}

double thm1_bound(const Matrix& a, std::size_t k, std::size_t m, double eps) {
    if (m < k + 2) {
        throw ArgumentError("factorization error bound needs m >= k + 2, got m = " +
                            std::to_string(m) + ", k = " + std::to_string(k));
    }
    if (eps < 0.0) throw ArgumentError("eps must be nonnegative");
    const double tail = best_rank_k(a, k).tail_energy;
    const double inflation =
        1.0 + static_cast<double>(k) / static_cast<double>(m - k - 1);
    return inflation * tail + eps;
}

// ---------------------------------------------------------------------------
// Monte-Carlo verifiers
// ---------------------------------------------------------------------------

WishartCheck verify_wishart_trace(std::size_t m, std::size_t d, std::size_t trials,
                                  std::uint64_t seed) {
    if (d < m + 2) {
        throw ArgumentError("inverse-Wishart trace needs d >= m + 2, got m = " +
                            std::to_string(m) + ", d = " + std::to_string(d));
    }
    if (m < 1 || trials < 1) {
        throw ArgumentError("inverse-Wishart trace needs m >= 1 and trials >= 1");
    }

    WishartCheck check;
    check.theory = static_cast<double>(m) * static_cast<double>(m) /
                   static_cast<double>(d - m - 1);

    double sum = 0.0;
    std::uint64_t draw = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        for (;;) {
            const Matrix s = gaussian_sketch({d, m, rng::derive_seed(seed, draw++)});
            const Eigen::MatrixXd gram =
                detail::map_of(s).transpose() * detail::map_of(s);
            Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
            if (!lu.isInvertible()) {
                ++check.resampled;
                continue;
            }
            sum += lu.inverse().trace();
            break;
        }
    }
    check.mc_estimate = sum / static_cast<double>(trials);
    check.rel_dev = std::abs(check.mc_estimate - check.theory) / check.theory;
    return check;
}

EqualizationCheck verify_equalization(std::size_t d, std::size_t m, int bits, double r,
                                      std::size_t trials, std::uint64_t seed) {
    if (d < 1 || m < 1 || trials < 2) {
        throw ArgumentError("equalization check needs d, m >= 1 and trials >= 2");
    }
    if (r < 0.0) throw ArgumentError("equalization check needs a non-negative range");
    if (r == 0.0) {
        // A zero vector projects to zero, and the bound degenerates to zero
        // with it; the check holds with no sampling needed.
        EqualizationCheck trivial;
        trivial.mc_error = 0.0;
        trivial.bound = 0.0;
        trivial.std_error = 0.0;
        trivial.pass = true;
        return trivial;
    }

    // Fixed direction with ||x|| = r: the Gaussian embedding is isotropic, so
    // the choice of direction is irrelevant; a seeded one keeps the run
    // reproducible.
    Matrix x(d, 1);
    for (std::size_t i = 0; i < d; ++i) x(i, 0) = rng::normal(rng::derive_seed(seed, 0), i, 0);
    const double x_norm = frobenius_norm(x);
    for (double& v : x.data) v *= r / x_norm;

    const double clip = r / std::sqrt(static_cast<double>(m));
    const QuantizerSpec spec(clip, bits);

    double sum = 0.0;
    double sum_sq = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
        const std::uint64_t trial_seed = rng::derive_seed(seed, 1 + t);
        const Matrix s = gaussian_sketch({d, m, trial_seed}); // d-by-m, var 1/m
        const Matrix y = matmul(transpose(s), x);             // m-by-1 projection
        rng::Stream dither(trial_seed, 1);
        double err = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double value = y(i, 0);
            const double back = spec.grid_value(quantize_clipped(value, spec, dither));
            err += (back - value) * (back - value);
        }
        sum += err;
        sum_sq += err * err;
    }

    EqualizationCheck check;
    const double count = static_cast<double>(trials);
    check.mc_error = sum / count;
    const double variance = std::max(0.0, sum_sq / count - check.mc_error * check.mc_error);
    check.std_error = std::sqrt(variance / count);
    const double levels = std::pow(2.0, bits) - 1.0;
    check.bound = r * r / (levels * levels) +
                  r * r * std::numbers::sqrt2 / std::sqrt(std::numbers::pi * std::numbers::e);
    check.pass = check.mc_error <= check.bound + 3.0 * check.std_error;
    return check;
}

SketchedLsCheck verify_sketched_ls(std::size_t ell, std::size_t p, std::size_t q,
                                   std::size_t m, std::size_t k, int bits,
                                   std::size_t trials, std::uint64_t seed) {
    if (k < 1 || k > std::min(ell, p)) {
        throw ArgumentError("sketched-LS check needs 1 <= k <= min(ell, p)");
    }
    if (m < k + 2) throw ArgumentError("sketched-LS check needs m >= k + 2");
    if (ell < m + 2) throw ArgumentError("sketched-LS check needs ell >= m + 2");
    if (trials < 2) throw ArgumentError("sketched-LS check needs trials >= 2");

    // Fixed rank-k design Phi = G1 G2 and response Y.
    Matrix g1(ell, k);
    Matrix g2(k, p);
    Matrix y(ell, q);
    const std::uint64_t s1 = rng::derive_seed(seed, 101);
    const std::uint64_t s2 = rng::derive_seed(seed, 102);
    const std::uint64_t s3 = rng::derive_seed(seed, 103);
    for (std::size_t i = 0; i < ell; ++i) {
        for (std::size_t j = 0; j < k; ++j) g1(i, j) = rng::normal(s1, i, j);
    }
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < p; ++j) g2(i, j) = rng::normal(s2, i, j);
    }
    for (std::size_t i = 0; i < ell; ++i) {
        for (std::size_t j = 0; j < q; ++j) y(i, j) = rng::normal(s3, i, j);
    }
    const Matrix phi = matmul(g1, g2);

    SketchedLsCheck check;
    const Matrix x_star = lstsq(phi, y).x;
    const double lower_dist = frobenius_distance(matmul(phi, x_star), y);
    check.lower = lower_dist * lower_dist;

    double sum = 0.0;
    double sum_sq = 0.0;
    double sum_delta_sq = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
        const std::uint64_t trial_seed = rng::derive_seed(seed, 1000 + t);
        // G is m-by-ell with variance 1/m.
        const Matrix g = transpose(gaussian_sketch({ell, m, trial_seed}));
        const Matrix gy = matmul(g, y);
        const double range = max_abs(gy);
        Matrix quantized_gy(gy.rows, gy.cols);
        double delta = 0.0;
        if (range > 0.0) {
            const QuantizerSpec spec(range, bits);
            delta = spec.resolution();
            quantized_gy = dequantize(
                quantize_matrix(gy, spec, rng::derive_seed(trial_seed, 7)));
        }
        const Matrix x_tilde = matmul(pinv(matmul(g, phi)), quantized_gy);
        const double dist = frobenius_distance(matmul(phi, x_tilde), y);
        sum += dist * dist;
        sum_sq += dist * dist * dist * dist;
        sum_delta_sq += delta * delta;
    }

    const double count = static_cast<double>(trials);
    check.mid_mean = sum / count;
    const double variance = std::max(0.0, sum_sq / count - check.mid_mean * check.mid_mean);
    check.mid_se = std::sqrt(variance / count);

    const SvdResult phi_svd = svd(phi);
    const double smax = phi_svd.singular_values.front();
    const double smin = phi_svd.singular_values.back();
    const double mean_delta_sq = sum_delta_sq / count;
    check.upper =
        static_cast<double>(m - 1) / static_cast<double>(m - k - 1) * check.lower +
        static_cast<double>(q) * (mean_delta_sq / 4.0) * (smax * smax) / (smin * smin) *
            static_cast<double>(m) * static_cast<double>(m) /
            static_cast<double>(ell - m - 1);

    check.pass_lower = check.lower <= check.mid_mean + 3.0 * check.mid_se;
    check.pass_upper = check.mid_mean <= check.upper + 3.0 * check.mid_se;
    return check;
}

// ---------------------------------------------------------------------------
// k-nearest neighbors
// ---------------------------------------------------------------------------

KnnResult knn_classify(const Matrix& train, const std::vector<int>& labels, const Matrix& test,
                       std::size_t k, const std::vector<int>* test_labels) {
    train.validate("knn training matrix");
    test.validate("knn test matrix");
    if (labels.size() != train.rows) {
        throw ArgumentError("knn_classify: " + std::to_string(train.rows) +
                            " training rows but " + std::to_string(labels.size()) + " labels");
    }
    if (test.cols != train.cols) {
        throw ArgumentError("knn_classify: feature widths differ (" + std::to_string(train.cols) +
                            " vs " + std::to_string(test.cols) + ")");
    }
    if (k < 1) throw ArgumentError("knn_classify: k must be at least 1");
    if (test_labels && test_labels->size() != test.rows) {
        throw ArgumentError("knn_classify: test label count does not match test rows");
    }
    const std::size_t votes = std::min(k, train.rows);

    KnnResult result;
    result.predicted.reserve(test.rows);
    std::vector<std::pair<double, std::size_t>> order(train.rows);
    for (std::size_t t = 0; t < test.rows; ++t) {
        for (std::size_t i = 0; i < train.rows; ++i) {
            double d2 = 0.0;
            for (std::size_t j = 0; j < train.cols; ++j) {
                const double diff = test(t, j) - train(i, j);
                d2 += diff * diff;
            }
            order[i] = {d2, i};
        }
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(votes),
                          order.end());

        // Majority vote; ties fall to the smallest summed distance, then the
        // smallest label.
        std::map<int, std::pair<std::size_t, double>> tally; // label -> (count, distance sum)
        for (std::size_t v = 0; v < votes; ++v) {
            auto& entry = tally[labels[order[v].second]];
            entry.first += 1;
            entry.second += order[v].first;
        }
        int best_label = tally.begin()->first;
        std::pair<std::size_t, double> best = tally.begin()->second;
        for (const auto& [label, entry] : tally) {
            const bool wins = entry.first > best.first ||
                              (entry.first == best.first && entry.second < best.second);
            if (wins) {
                best_label = label;
                best = entry;
            }
        }
        result.predicted.push_back(best_label);
    }

    if (!test_labels) return result;

    result.scored = true;
    const auto& truth = *test_labels;
    std::size_t correct = 0;
    std::map<int, std::size_t> support, true_positive, predicted_count;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        support[truth[i]] += 1;
        predicted_count[result.predicted[i]] += 1;
        if (truth[i] == result.predicted[i]) {
            ++correct;
            true_positive[truth[i]] += 1;
        }
    }
    result.accuracy = static_cast<double>(correct) / static_cast<double>(truth.size());

    std::map<int, bool> seen;
    for (const auto& [label, _] : support) seen[label] = true;
    for (const auto& [label, _] : predicted_count) seen[label] = true;
    for (const auto& [label, _] : seen) {
        ClassMetrics metrics;
        metrics.label = label;
        metrics.support = support.count(label) ? support[label] : 0;
        const double tp = true_positive.count(label)
                              ? static_cast<double>(true_positive[label])
                              : 0.0;
        const double predicted = predicted_count.count(label)
                                     ? static_cast<double>(predicted_count[label])
                                     : 0.0;
        metrics.precision = predicted > 0.0 ? tp / predicted : 0.0;
        metrics.recall = metrics.support > 0 ? tp / static_cast<double>(metrics.support) : 0.0;
        const double pr = metrics.precision + metrics.recall;
        metrics.f1 = pr > 0.0 ? 2.0 * metrics.precision * metrics.recall / pr : 0.0;
        result.weighted_f1 += static_cast<double>(metrics.support) /
                              static_cast<double>(truth.size()) * metrics.f1;
        result.per_class.push_back(metrics);
    }
    return result;
}

// ---------------------------------------------------------------------------
// Phantom
// ---------------------------------------------------------------------------

namespace {

struct Ellipse {
    double intensity, a, b, x0, y0, phi_deg;
};

// The ten-ellipse modified (high-contrast) phantom definition.
constexpr Ellipse kPhantom[] = {
    {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},
    {-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0},
    {-0.2, 0.11, 0.31, 0.22, 0.0, -18.0},
    {-0.2, 0.16, 0.41, -0.22, 0.0, 18.0},
    {0.1, 0.21, 0.25, 0.0, 0.35, 0.0},
    {0.1, 0.046, 0.046, 0.0, 0.1, 0.0},
    {0.1, 0.046, 0.046, 0.0, -0.1, 0.0},
    {0.1, 0.046, 0.023, -0.08, -0.605, 0.0},
    {0.1, 0.023, 0.023, 0.0, -0.606, 0.0},
    {0.1, 0.023, 0.046, 0.06, -0.605, 0.0},
};

} // namespace

Matrix shepp_logan(std::size_t size) {
    if (size < 16) {
        throw ArgumentError("phantom size must be at least 16, got " + std::to_string(size));
    }
    Matrix image(size, size);
    const double step = 2.0 / static_cast<double>(size - 1);
    for (std::size_t i = 0; i < size; ++i) {
        const double y = 1.0 - static_cast<double>(i) * step;
        for (std::size_t j = 0; j < size; ++j) {
            const double x = -1.0 + static_cast<double>(j) * step;
            double value = 0.0;
            for (const Ellipse& e : kPhantom) {
                const double angle = e.phi_deg * std::numbers::pi / 180.0;
                const double dx = x - e.x0;
                const double dy = y - e.y0;
                const double u = dx * std::cos(angle) + dy * std::sin(angle);
                const double v = dy * std::cos(angle) - dx * std::sin(angle);
                if (u * u / (e.a * e.a) + v * v / (e.b * e.b) <= 1.0) value += e.intensity;
            }
            // Exact cancellation of overlapping intensities can leave values a
            // rounding ulp below zero; clamp so the image stays inside [0, 1].
            image(i, j) = std::clamp(value, 0.0, 1.0);
        }
    }
    return image;
}

// ---------------------------------------------------------------------------
// Sweep
// ---------------------------------------------------------------------------

SweepResult sweep(const Matrix& a, const std::vector<Algorithm>& algorithms,
                  const std::vector<SweepBudget>& budgets,
                  const std::vector<std::uint64_t>& seeds, const CompressionConfig& base) {
    a.validate("sweep input");
    if (algorithms.empty() || budgets.empty() || seeds.empty()) {
        throw ArgumentError("sweep needs at least one algorithm, budget, and seed");
    }

    SweepResult result;
    for (const SweepBudget& budget : budgets) {
        const std::size_t resolved =
            budget.sketch_size != 0
                ? budget.sketch_size
                : parity_sketch_size(a.rows, a.cols, budget.bits, budget.bits_second,
                                     budget.bits_naive);
        for (Algorithm algo : algorithms) {
            double err_sum = 0.0, err_sq = 0.0, sec_sum = 0.0, sec_sq = 0.0;
            for (std::uint64_t seed : seeds) {
                CompressionConfig cfg = base;
                cfg.algorithm = algo;
                cfg.seed = seed;
                cfg.sketch_size = 0;
                cfg.target_rank = 0;
                if (algo == Algorithm::naive) {
                    cfg.bits = budget.bits_naive;
                    // The entrywise baseline is defined with nearest rounding.
                    cfg.rounding = Rounding::nearest;
                } else {
                    cfg.bits = budget.bits;
                    cfg.bits_second = budget.bits_second;
                    if (algo == Algorithm::lplr) {
                        cfg.sketch_size = resolved;
                    } else {
                        cfg.target_rank = resolved;
                    }
                }
                CompressionResult run = compress(a, cfg);

                SweepRow row;
                row.algorithm = algorithm_name(algo);
                row.budget = budget;
                row.sketch_size = resolved;
                row.seed = seed;
                row.report = std::move(run.report);
                err_sum += row.report.relative_error;
                err_sq += row.report.relative_error * row.report.relative_error;
                sec_sum += row.report.seconds_total;
                sec_sq += row.report.seconds_total * row.report.seconds_total;
                result.rows.push_back(std::move(row));
            }

            SweepSummary summary;
            summary.algorithm = algorithm_name(algo);
            summary.budget = budget;
            summary.sketch_size = resolved;
            summary.seeds = seeds.size();
            const double count = static_cast<double>(seeds.size());
            summary.mean_relative_error = err_sum / count;
            summary.mean_seconds = sec_sum / count;
            if (seeds.size() > 1) {
                const double err_var = std::max(
                    0.0, (err_sq - err_sum * err_sum / count) / (count - 1.0));
                const double sec_var = std::max(
                    0.0, (sec_sq - sec_sum * sec_sum / count) / (count - 1.0));
                summary.stddev_relative_error = std::sqrt(err_var);
                summary.stddev_seconds = std::sqrt(sec_var);
            }
            result.summaries.push_back(summary);
        }
    }
    return result;
}

} // namespace lplr
