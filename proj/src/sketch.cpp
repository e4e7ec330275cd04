#include "lplr/sketch.hpp"

#include <cmath>
#include <string>

#include "eigen_support.hpp"
#include "lplr/rng.hpp"

namespace lplr {

std::string SketchConfig::warning() const {
    if (sketch_size * 4 <= input_cols) return {};
    return "sketch size m=" + std::to_string(sketch_size) + " is large relative to d=" +
           std::to_string(input_cols) + "; the error analysis assumes m << d";
}

void SketchConfig::validate() const {
    if (sketch_size == 0) throw ArgumentError("sketch size must be at least 1");
    if (input_cols == 0) throw ArgumentError("sketch input width must be at least 1");
}

Matrix gaussian_sketch(const SketchConfig& cfg) {
    cfg.validate();
    Matrix s(cfg.input_cols, cfg.sketch_size);
    const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.sketch_size));
    for (std::size_t i = 0; i < s.rows; ++i) {
        for (std::size_t j = 0; j < s.cols; ++j) {
            s(i, j) = scale * rng::normal(cfg.seed, i, j);
        }
    }
    return s;
}

Matrix rangefinder(const Matrix& a, std::size_t m, std::uint64_t seed) {
    a.validate("rangefinder input");
    return matmul(a, gaussian_sketch(SketchConfig{a.cols, m, seed}));
}

SingularBand singular_band(const Matrix& s, double t) {
    if (s.rows < s.cols) {
        throw ArgumentError("singular_band expects a tall sketch (rows >= cols), got " +
                            std::to_string(s.rows) + "x" + std::to_string(s.cols));
    }
    detail::FullSvd full = detail::full_svd(s);
    SingularBand band;
    band.sigma_max = full.sigma(0);
    band.sigma_min = full.sigma(full.sigma.size() - 1);
    const double root = std::sqrt(static_cast<double>(s.rows) / static_cast<double>(s.cols));
    band.lower = root - 1.0 - t;
    band.upper = root + 1.0 + t;
    return band;
}

} // namespace lplr
