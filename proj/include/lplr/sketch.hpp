#pragma once
//
// sketch.hpp — Gaussian sketching. S is d-by-m with i.i.d. N(0, 1/m) entries
// generated from the counter-based stream, so a (seed, shape) pair names one
// matrix forever. A*S is the randomized rangefinder every compression run
// starts from.
//

#include <cstdint>
#include <string>

#include "lplr/matrix.hpp"

namespace lplr {

struct SketchConfig {
    std::size_t input_cols = 0;  // d
    std::size_t sketch_size = 0; // m >= 1; m > d is allowed but flagged
    std::uint64_t seed = 0;

    // Empty when the configuration is comfortably inside the regime the
    // error analysis assumes (m well below d); otherwise a human-readable
    // caution that ends up in compression reports.
    std::string warning() const;

    void validate() const; // throws ArgumentError on m == 0 or d == 0
};

// d-by-m matrix with entries N(0, 1/m), keyed by (seed, i, j).
Matrix gaussian_sketch(const SketchConfig& cfg);

// A * gaussian_sketch(A.cols, m, seed): an approximate basis for A's column
// space, n-by-m.
Matrix rangefinder(const Matrix& a, std::size_t m, std::uint64_t seed);

// Extreme singular values of a (tall) sketch S alongside the concentration
// band sqrt(d/m) -+ (1 + t) they fall in with probability >= 1 - 2 exp(-m t^2 / 2).
struct SingularBand {
    double sigma_min = 0.0;
    double sigma_max = 0.0;
    double lower = 0.0; // sqrt(d/m) - 1 - t
    double upper = 0.0; // sqrt(d/m) + 1 + t
    bool within() const { return lower <= sigma_min && sigma_max <= upper; }
};

// Requires S.rows >= S.cols.
SingularBand singular_band(const Matrix& s, double t);

} // namespace lplr
