#include "lplr/rng.hpp"

#include <cmath>
#include <numbers>

namespace lplr {
namespace rng {

namespace {

// Box-Muller cosine branch. 1-u1 moves the log argument into (0, 1], so the
// generator never evaluates log(0).
double box_muller(double u1, double u2) {
    const double radius = std::sqrt(-2.0 * std::log(1.0 - u1));
    return radius * std::cos(2.0 * std::numbers::pi * u2);
}

} // namespace

double normal(std::uint64_t seed, std::uint64_t i, std::uint64_t j) {
    const double u1 = to_unit(key(seed, i, j, 0));
    const double u2 = to_unit(key(seed, i, j, 1));
    return box_muller(u1, u2);
}

double Stream::normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return box_muller(u1, u2);
}

} // namespace rng
} // namespace lplr
