#include <CLI11.hpp>
#include <json.hpp>

#include <Eigen/Core>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "lplr/compress.hpp"
#include "lplr/evalbench.hpp"
#include "lplr/io.hpp"

namespace lplr {

namespace {

using nlohmann::json;

// Honors LPLR_THREADS (0 or unset = automatic).
void configure_threads() {
    if (const char* env = std::getenv("LPLR_THREADS")) {
        const int threads = std::atoi(env);
        if (threads > 0) Eigen::setNbThreads(threads);
    }
}

void emit(const json& payload, const std::string& out_path, std::ostream& out) {
    const std::string text = payload.dump(2);
    if (!out_path.empty()) {
        std::ofstream file(out_path, std::ios::trunc);
        if (!file) throw IoError("cannot open '" + out_path + "' for writing");
        file << text << "\n";
        if (!file) throw IoError("write failed on '" + out_path + "'");
    }
    out << text << "\n";
}

json report_to_json(const CompressionReport& rep) {
    return json{{"algorithm", rep.algorithm},
                {"rows", rep.rows},
                {"cols", rep.cols},
                {"m", rep.sketch_size},
                {"bits", rep.bits},
                {"bits2", rep.bits_second},
                {"payload_bits", rep.payload_bits},
                {"source_bits", rep.source_bits},
                {"compression_ratio", rep.compression_ratio()},
                {"relative_error", rep.relative_error},
                {"seconds",
                 {{"sketch", rep.seconds_sketch},
                  {"quantize", rep.seconds_quantize},
                  {"solve", rep.seconds_solve},
                  {"total", rep.seconds_total}}},
                {"retry_count", rep.retry_count},
                {"exact", rep.exact},
                {"saturation_log", rep.saturation_log},
                {"warnings", rep.warnings}};
}

json knn_to_json(const KnnResult& result, std::size_t k) {
    json payload{{"k", k}, {"predicted", result.predicted}, {"scored", result.scored}};
    if (result.scored) {
        payload["accuracy"] = result.accuracy;
        payload["weighted_f1"] = result.weighted_f1;
        json per_class = json::array();
        for (const ClassMetrics& c : result.per_class) {
            per_class.push_back({{"label", c.label},
                                 {"support", c.support},
                                 {"precision", c.precision},
                                 {"recall", c.recall},
                                 {"f1", c.f1}});
        }
        payload["per_class"] = per_class;
    }
    return payload;
}

std::vector<int> load_labels(const std::string& path) {
    const Matrix raw = load_matrix(path, infer_format(path, FileFormat::csv));
    if (raw.cols != 1) {
        throw ArgumentError("label file '" + path + "' must be a single column, got " +
                            std::to_string(raw.cols) + " columns");
    }
    std::vector<int> labels;
    labels.reserve(raw.rows);
    for (double v : raw.data) {
        const long long rounded = std::llround(v);
        if (std::abs(v - static_cast<double>(rounded)) > 1e-9) {
            throw ArgumentError("label file '" + path + "' holds non-integer value " +
                                std::to_string(v));
        }
        labels.push_back(static_cast<int>(rounded));
    }
    return labels;
}

// ---------------------------------------------------------------------------
// compress
// ---------------------------------------------------------------------------

struct CompressOptions {
    std::string in_path, out_path, report_path;
    std::string algo = "lplr";
    std::size_t sketch_size = 0;
    std::size_t rank = 0;
    int parity_bnq = 0;
    int bits = 8;
    int bits2 = -1;
    std::string range_mode = "data";
    double eps = 0.1;
    std::string solver = "closed";
    double cg_tol = 1e-10;
    std::size_t cg_max_iter = 0;
    bool normalize_shift = false;
    bool no_rotation = false;
    std::string rounding = "dithered";
    bool rounding_given = false;
    std::uint64_t seed = 0;
    int retries = 10;
};

int run_compress(const CompressOptions& opt, std::ostream& out) {
    const Algorithm algo = algorithm_from_name(opt.algo);
    const Matrix a = load_matrix(opt.in_path);

    CompressionConfig cfg;
    cfg.algorithm = algo;
    cfg.bits = opt.bits;
    cfg.bits_second = opt.bits2 < 0 ? opt.bits : opt.bits2;
    cfg.range_mode = opt.range_mode == "theory" ? RangeMode::theory : RangeMode::data_driven;
    cfg.eps = opt.eps;
    cfg.solver =
        opt.solver == "cg" ? LstsqMethod::conjugate_gradient : LstsqMethod::closed_form;
    cfg.cg_tol = opt.cg_tol;
    cfg.cg_max_iter = opt.cg_max_iter;
    cfg.normalize_shift = opt.normalize_shift;
    cfg.lsvd_rotation = !opt.no_rotation;
    cfg.rounding = opt.rounding == "nearest" ? Rounding::nearest : Rounding::dithered;
    // The entrywise baseline is defined with nearest rounding; an explicit
    // --rounding still overrides it.
    if (algo == Algorithm::naive && !opt.rounding_given) cfg.rounding = Rounding::nearest;
    cfg.seed = opt.seed;
    cfg.max_retries = opt.retries;

    const int sizing_options = (opt.sketch_size > 0 ? 1 : 0) + (opt.rank > 0 ? 1 : 0) +
                               (opt.parity_bnq > 0 ? 1 : 0);
    if (algo == Algorithm::naive) {
        if (sizing_options != 0) {
            throw ArgumentError(
                "nq quantizes every entry at --bits; --sketch-size/--rank/--parity-bnq do not "
                "apply");
        }
    } else {
        if (sizing_options != 1) {
            throw ArgumentError(
                "pick exactly one of --sketch-size, --rank, or --parity-bnq for " + opt.algo);
        }
        std::size_t resolved = 0;
        if (opt.parity_bnq > 0) {
            resolved =
                parity_sketch_size(a.rows, a.cols, cfg.bits, cfg.bits_second, opt.parity_bnq);
        } else if (algo == Algorithm::lplr) {
            if (opt.rank > 0) throw ArgumentError("lplr sizes with --sketch-size, not --rank");
            resolved = opt.sketch_size;
        } else {
            if (opt.sketch_size > 0) {
                throw ArgumentError(opt.algo + " sizes with --rank, not --sketch-size");
            }
            resolved = opt.rank;
        }
        if (algo == Algorithm::lplr) {
            cfg.sketch_size = resolved;
        } else {
            cfg.target_rank = resolved;
        }
    }

    CompressionResult result = compress(a, cfg);
    save_factorization(opt.out_path, result.factorization);
    emit(report_to_json(result.report), opt.report_path, out);
    return 0;
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

json budget_to_json(const SweepBudget& b) {
    return json{{"bits", b.bits},
                {"bits2", b.bits_second},
                {"bnq", b.bits_naive},
                {"m", b.sketch_size}};
}

int run_sweep(const std::string& in_path, const std::string& grid_path,
              const std::string& out_path, std::ostream& out) {
    const Matrix a = load_matrix(in_path);

    json grid;
    {
        std::ifstream file(grid_path);
        if (!file) throw IoError("cannot open grid file '" + grid_path + "'");
        try {
            grid = json::parse(file);
        } catch (const json::exception& e) {
            throw ArgumentError("grid file '" + grid_path + "' is not valid JSON: " + e.what());
        }
    }

    std::vector<Algorithm> algorithms;
    for (const auto& name : grid.at("algorithms")) {
        algorithms.push_back(algorithm_from_name(name.get<std::string>()));
    }
    std::vector<SweepBudget> budgets;
    for (const auto& cell : grid.at("budgets")) {
        SweepBudget budget;
        budget.bits = cell.value("bits", 8);
        budget.bits_second = cell.value("bits2", budget.bits);
        budget.bits_naive = cell.value("bnq", 1);
        budget.sketch_size = cell.value("m", static_cast<std::size_t>(0));
        budgets.push_back(budget);
    }
    std::vector<std::uint64_t> seeds =
        grid.value("seeds", std::vector<std::uint64_t>{0});

    CompressionConfig base;
    base.range_mode =
        grid.value("range_mode", std::string("data")) == "theory" ? RangeMode::theory
                                                                  : RangeMode::data_driven;
    base.eps = grid.value("eps", 0.1);
    base.solver = grid.value("solver", std::string("closed")) == "cg"
                      ? LstsqMethod::conjugate_gradient
                      : LstsqMethod::closed_form;
    base.rounding = grid.value("rounding", std::string("dithered")) == "nearest"
                        ? Rounding::nearest
                        : Rounding::dithered;
    base.lsvd_rotation = grid.value("lsvd_rotation", true);
    base.normalize_shift = grid.value("normalize_shift", false);
    base.max_retries = grid.value("retries", 10);

    const SweepResult result = sweep(a, algorithms, budgets, seeds, base);

    json rows = json::array();
    for (const SweepRow& row : result.rows) {
        json cell = budget_to_json(row.budget);
        cell["m"] = row.sketch_size;
        cell["algorithm"] = row.algorithm;
        cell["seed"] = row.seed;
        cell["relative_error"] = row.report.relative_error;
        cell["payload_bits"] = row.report.payload_bits;
        cell["compression_ratio"] = row.report.compression_ratio();
        cell["seconds_total"] = row.report.seconds_total;
        cell["seconds_sketch"] = row.report.seconds_sketch;
        cell["seconds_quantize"] = row.report.seconds_quantize;
        cell["seconds_solve"] = row.report.seconds_solve;
        cell["retry_count"] = row.report.retry_count;
        cell["exact"] = row.report.exact;
        rows.push_back(cell);
    }
    json summaries = json::array();
    for (const SweepSummary& s : result.summaries) {
        json cell = budget_to_json(s.budget);
        cell["m"] = s.sketch_size;
        cell["algorithm"] = s.algorithm;
        cell["seeds"] = s.seeds;
        cell["mean_relative_error"] = s.mean_relative_error;
        cell["stddev_relative_error"] = s.stddev_relative_error;
        cell["mean_seconds"] = s.mean_seconds;
        cell["stddev_seconds"] = s.stddev_seconds;
        summaries.push_back(cell);
    }
    emit(json{{"matrix", {{"rows", a.rows}, {"cols", a.cols}}},
              {"rows", rows},
              {"summaries", summaries}},
         out_path, out);
    return 0;
}

// ---------------------------------------------------------------------------
// selftest
// ---------------------------------------------------------------------------

json selftest_wishart(std::uint64_t seed) {
    json checks = json::array();
    for (const auto& [m, d] : {std::pair<std::size_t, std::size_t>{4, 20}, {8, 40}}) {
        const WishartCheck check = verify_wishart_trace(m, d, 5000, seed);
        checks.push_back({{"name", "wishart_trace_m" + std::to_string(m) + "_d" +
                                       std::to_string(d)},
                          {"mc_estimate", check.mc_estimate},
                          {"theory", check.theory},
                          {"rel_dev", check.rel_dev},
                          {"resampled", check.resampled},
                          {"pass", check.rel_dev <= 0.05}});
    }
    return checks;
}

json selftest_equalization(std::uint64_t seed) {
    json checks = json::array();
    for (int bits : {1, 4, 8}) {
        const EqualizationCheck check = verify_equalization(256, 32, bits, 1.0, 2000, seed);
        checks.push_back({{"name", "equalization_b" + std::to_string(bits)},
                          {"mc_error", check.mc_error},
                          {"bound", check.bound},
                          {"std_error", check.std_error},
                          {"pass", check.pass}});
    }
    return checks;
}

json selftest_sketched_ls(std::uint64_t seed) {
    const SketchedLsCheck check = verify_sketched_ls(60, 40, 30, 10, 4, 4, 200, seed);
    return json::array({{{"name", "sketched_ls_sandwich"},
                         {"lower", check.lower},
                         {"mid_mean", check.mid_mean},
                         {"mid_se", check.mid_se},
                         {"upper", check.upper},
                         {"pass", check.pass_lower && check.pass_upper}}});
}

int run_selftest(const std::string& suite, std::uint64_t seed, std::ostream& out) {
    json checks = json::array();
    if (suite == "wishart" || suite == "all") {
        for (auto& c : selftest_wishart(seed)) checks.push_back(c);
    }
    if (suite == "equalization" || suite == "all") {
        for (auto& c : selftest_equalization(seed)) checks.push_back(c);
    }
    if (suite == "sketchedls" || suite == "all") {
        for (auto& c : selftest_sketched_ls(seed)) checks.push_back(c);
    }
    bool all_pass = true;
    for (const auto& c : checks) all_pass = all_pass && c.at("pass").get<bool>();
    emit(json{{"suite", suite}, {"checks", checks}, {"pass", all_pass}}, "", out);
    return all_pass ? 0 : 2;
}

} // namespace

// ---------------------------------------------------------------------------
// Entry points
// ---------------------------------------------------------------------------

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    configure_threads();

    CLI::App app{"Low-precision low-rank matrix compression toolkit"};
    app.require_subcommand(1);

    CompressOptions copt;
    CLI::App* compress_cmd =
        app.add_subcommand("compress", "Factor a matrix into quantized low-rank factors");
    compress_cmd->add_option("--in", copt.in_path, "input matrix (matf/csv/pgm by extension)")
        ->required();
    compress_cmd->add_option("--algo", copt.algo, "algorithm: lplr | lsvd | dsvd | nq")
        ->required()
        ->check(CLI::IsMember({"lplr", "lsvd", "dsvd", "nq"}));
    compress_cmd->add_option("--sketch-size", copt.sketch_size, "sketch width m (lplr)");
    compress_cmd->add_option("--rank", copt.rank, "target rank k (lsvd, dsvd)");
    compress_cmd->add_option("--parity-bnq", copt.parity_bnq,
                             "resolve m/k to match an entrywise baseline at this bit width");
    compress_cmd->add_option("--bits", copt.bits, "left-factor bits (or the nq budget)")
        ->required();
    compress_cmd->add_option("--bits2", copt.bits2, "right-factor bits (default: --bits)");
    compress_cmd->add_option("--range-mode", copt.range_mode, "data | theory")
        ->check(CLI::IsMember({"data", "theory"}));
    compress_cmd->add_option("--eps", copt.eps, "error budget for theory-mode ranges");
    compress_cmd->add_option("--solver", copt.solver, "closed | cg")
        ->check(CLI::IsMember({"closed", "cg"}));
    compress_cmd->add_option("--cg-tol", copt.cg_tol, "conjugate-gradient tolerance");
    compress_cmd->add_option("--cg-max-iter", copt.cg_max_iter,
                             "conjugate-gradient iteration cap (0 = 10x columns)");
    compress_cmd->add_flag("--normalize-shift", copt.normalize_shift,
                           "fit a scale-and-shift correction after quantization");
    compress_cmd->add_flag("--no-rotation", copt.no_rotation,
                           "lsvd: quantize the spectral basis without the Gaussian rotation");
    CLI::Option* rounding_opt =
        compress_cmd->add_option("--rounding", copt.rounding, "dithered | nearest (nq: nearest)")
            ->check(CLI::IsMember({"dithered", "nearest"}));
    compress_cmd->add_option("--seed", copt.seed, "random seed");
    compress_cmd->add_option("--retries", copt.retries, "saturation retry cap");
    compress_cmd->add_option("--out", copt.out_path, "output factorization file")->required();
    compress_cmd->add_option("--report", copt.report_path, "also write the JSON report here");

    std::string d_in, d_out, d_format;
    CLI::App* decompress_cmd =
        app.add_subcommand("decompress", "Reconstruct a matrix from a factorization file");
    decompress_cmd->add_option("--in", d_in, "factorization file")->required();
    decompress_cmd->add_option("--out", d_out, "output matrix path")->required();
    decompress_cmd->add_option("--format", d_format, "matf | csv | pgm (default: by extension)")
        ->check(CLI::IsMember({"matf", "csv", "pgm"}));

    std::string e_a, e_b;
    CLI::App* eval_cmd =
        app.add_subcommand("eval", "Relative Frobenius error of --b against the reference --a");
    eval_cmd->add_option("--a", e_a, "reference matrix")->required();
    eval_cmd->add_option("--b", e_b, "comparison matrix")->required();

    std::string s_in, s_grid, s_out;
    CLI::App* sweep_cmd =
        app.add_subcommand("sweep", "Run an (algorithm x budget x seed) grid from a JSON spec");
    sweep_cmd->add_option("--in", s_in, "input matrix")->required();
    sweep_cmd->add_option("--grid", s_grid, "grid JSON file")->required();
    sweep_cmd->add_option("--out", s_out, "also write the JSON table here");

    std::string k_train, k_labels, k_test, k_test_labels;
    std::size_t k_neighbors = 3;
    CLI::App* knn_cmd = app.add_subcommand("knn", "Brute-force k-nearest-neighbor classification");
    knn_cmd->add_option("--train", k_train, "training matrix")->required();
    knn_cmd->add_option("--labels", k_labels, "training labels (single column)")->required();
    knn_cmd->add_option("--test", k_test, "test matrix")->required();
    knn_cmd->add_option("--test-labels", k_test_labels,
                        "ground-truth test labels (enables accuracy/F1)");
    knn_cmd->add_option("--k", k_neighbors, "neighbor count (default 3)");

    std::size_t p_size = 0;
    std::string p_out;
    CLI::App* phantom_cmd = app.add_subcommand("phantom", "Generate the built-in test image");
    phantom_cmd->add_option("--size", p_size, "image side length (>= 16)")->required();
    phantom_cmd->add_option("--out", p_out, "output matrix path")->required();

    std::string t_suite = "all";
    std::uint64_t t_seed = 0;
    CLI::App* selftest_cmd =
        app.add_subcommand("selftest", "Monte-Carlo verification of the library's guarantees");
    selftest_cmd->add_option("--suite", t_suite, "wishart | equalization | sketchedls | all")
        ->check(CLI::IsMember({"wishart", "equalization", "sketchedls", "all"}));
    selftest_cmd->add_option("--seed", t_seed, "random seed");

    std::vector<const char*> argv;
    argv.reserve(args.size() + 1);
    argv.push_back("lplr");
    for (const std::string& arg : args) argv.push_back(arg.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());

        if (*compress_cmd) {
            copt.rounding_given = rounding_opt->count() > 0;
            return run_compress(copt, out);
        }
        if (*decompress_cmd) {
            const Factorization f = load_factorization(d_in);
            const Matrix recon = reconstruct(f);
            const FileFormat format = d_format.empty() ? infer_format(d_out)
                                                       : format_from_name(d_format);
            save_matrix(d_out, recon, format);
            return 0;
        }
        if (*eval_cmd) {
            const Matrix a = load_matrix(e_a);
            const Matrix b = load_matrix(e_b);
            emit(json{{"relative_fro_error", relative_fro_error(b, a)}}, "", out);
            return 0;
        }
        if (*sweep_cmd) return run_sweep(s_in, s_grid, s_out, out);
        if (*knn_cmd) {
            const Matrix train = load_matrix(k_train);
            const Matrix test = load_matrix(k_test);
            const std::vector<int> labels = load_labels(k_labels);
            std::vector<int> truth;
            const std::vector<int>* truth_ptr = nullptr;
            if (!k_test_labels.empty()) {
                truth = load_labels(k_test_labels);
                truth_ptr = &truth;
            }
            const KnnResult result = knn_classify(train, labels, test, k_neighbors, truth_ptr);
            emit(knn_to_json(result, k_neighbors), "", out);
            return 0;
        }
        if (*phantom_cmd) {
            save_matrix(p_out, shepp_logan(p_size));
            return 0;
        }
        if (*selftest_cmd) return run_selftest(t_suite, t_seed, out);
        err << "error: no subcommand selected\n";
        return 1;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    } catch (const ArgumentError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
}

int run_cli(int argc, char** argv) {
    std::vector<std::string> args;
    args.reserve(static_cast<std::size_t>(argc > 0 ? argc - 1 : 0));
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run_cli(args, std::cout, std::cerr);
}

} // namespace lplr
